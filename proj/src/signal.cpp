#include "stimgen/signal.hpp"

#include <cmath>

#include "stimgen/errors.hpp"

namespace stimgen {

SignalSequence SignalSequence::from_values(Tensor values, std::vector<std::string> channel_names) {
  SignalSequence s;
  if (channel_names.empty() && values.rank() == 2) {
    channel_names = default_channel_names(values.shape[0]);
  }
  s.channel_names = std::move(channel_names);
  s.values = std::move(values);
  s.validate();
  return s;
}

void SignalSequence::validate() const {
  if (values.rank() != 2) {
    throw ShapeError("signal values must be [CxT], got " + shape_str(values.shape));
  }
  if (channel_names.size() != values.shape[0]) {
    throw DataError("signal has " + std::to_string(values.shape[0]) + " channels but " +
                    std::to_string(channel_names.size()) + " channel names");
  }
  for (double v : values.data) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw DataError("signal values must be finite and within [0, 1]");
    }
  }
}

std::vector<std::string> default_channel_names(std::size_t channels) {
  static const char* const known[] = {"vehicle_speed", "engine_speed"};
  std::vector<std::string> names;
  names.reserve(channels);
  for (std::size_t i = 0; i < channels; ++i) {
    if (i < 2) {
      names.emplace_back(known[i]);
    } else {
      names.emplace_back("channel_" + std::to_string(i + 1));
    }
  }
  return names;
}

}  // namespace stimgen
