#pragma once

#include <string>
#include <vector>

#include "stimgen/tensor.hpp"

namespace stimgen {

// One multi-channel time series, already rescaled to the unit interval.
// values is [C, T]; channel_names has one entry per row.
struct SignalSequence {
  std::vector<std::string> channel_names;
  Tensor values;

  std::size_t channels() const { return values.rank() == 2 ? values.shape[0] : 0; }
  std::size_t length() const { return values.rank() == 2 ? values.shape[1] : 0; }

  static SignalSequence from_values(Tensor values,
                                    std::vector<std::string> channel_names = {});

  // rank-2 values, one name per channel, all entries finite and in [0, 1]
  void validate() const;
};

// vehicle_speed and engine_speed first, channel_<i> beyond that
std::vector<std::string> default_channel_names(std::size_t channels);

}  // namespace stimgen
