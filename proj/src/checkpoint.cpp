#include "stimgen/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "stimgen/crc32.hpp"
#include "stimgen/errors.hpp"

namespace stimgen::vaegan {

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f64(std::vector<unsigned char>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u64(out, bits);
}

void put_string(std::vector<unsigned char>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

// Bounds-checked cursor. Structure is parsed fully before the checksum is
// verified so an overrun reports truncation, not a checksum mismatch.
struct Reader {
  const unsigned char* data;
  std::size_t size;
  std::size_t off = 0;

  void need(std::size_t n, const char* what) {
    if (off + n > size) {
      throw CheckpointTruncatedError(std::string("checkpoint ends inside ") + what);
    }
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[off + i]) << (8 * i);
    off += 4;
    return v;
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[off + i]) << (8 * i);
    off += 8;
    return v;
  }

  double f64(const char* what) {
    std::uint64_t bits = u64(what);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }

  std::string string(const char* what) {
    std::uint32_t n = u32(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(data + off), n);
    off += n;
    return s;
  }
};

void put_arch(std::vector<unsigned char>& out, const ArchitectureSpec& a) {
  put_u64(out, a.sequence_length);
  put_u64(out, a.channels);
  put_u64(out, a.latent_dims);
  put_u64(out, a.feature_layer);
  put_f64(out, a.leaky_slope);
  for (const ConvStage& s : a.stages) {
    put_u64(out, s.out_channels);
    put_u64(out, s.kernel);
    put_u64(out, s.stride);
    put_u64(out, s.padding);
    put_string(out, activation_name(s.activation));
  }
}

ArchitectureSpec read_arch(Reader& r) {
  ArchitectureSpec a;
  a.sequence_length = r.u64("architecture");
  a.channels = r.u64("architecture");
  a.latent_dims = r.u64("architecture");
  a.feature_layer = r.u64("architecture");
  a.leaky_slope = r.f64("architecture");
  for (ConvStage& s : a.stages) {
    s.out_channels = r.u64("conv stage");
    s.kernel = r.u64("conv stage");
    s.stride = r.u64("conv stage");
    s.padding = r.u64("conv stage");
    try {
      s.activation = activation_from_name(r.string("conv stage activation"));
    } catch (const ConfigError& e) {
      throw CheckpointFormatError(e.what());
    }
  }
  return a;
}

}  // namespace

std::vector<unsigned char> serialize_checkpoint(const VaeGanModel& model) {
  std::vector<unsigned char> out;
  out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 8);
  put_u32(out, kCheckpointVersion);
  put_arch(out, model.arch);

  const std::vector<NamedTensor>* groups[] = {&model.encoder, &model.decoder,
                                              &model.discriminator};
  std::size_t count = 0;
  for (const auto* g : groups) count += g->size();
  put_u64(out, count);
  for (const auto* g : groups) {
    for (const NamedTensor& nt : *g) {
      put_string(out, nt.name);
      put_u32(out, static_cast<std::uint32_t>(nt.value.rank()));
      for (std::size_t d : nt.value.shape) put_u64(out, d);
      for (double v : nt.value.data) put_f64(out, v);
    }
  }
  put_u32(out, crc32(out.data(), out.size()));
  return out;
}

VaeGanModel deserialize_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 8) {
    throw CheckpointTruncatedError("checkpoint shorter than its magic header");
  }
  if (std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw CheckpointFormatError("not a model checkpoint (bad magic)");
  }
  Reader r{bytes.data(), bytes.size(), 8};
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError("unsupported checkpoint version " + std::to_string(version) +
                                 " (expected " + std::to_string(kCheckpointVersion) + ")");
  }

  ArchitectureSpec arch = read_arch(r);
  try {
    arch.validate();
  } catch (const ConfigError& e) {
    throw CheckpointFormatError(std::string("checkpoint architecture invalid: ") + e.what());
  }

  const auto layout = parameter_layout(arch);
  const std::uint64_t count = r.u64("parameter count");
  if (count != layout.size()) {
    throw CheckpointFormatError("checkpoint lists " + std::to_string(count) +
                                " parameters, architecture requires " +
                                std::to_string(layout.size()));
  }

  VaeGanModel model;
  model.arch = arch;
  for (const auto& [want_name, want_shape] : layout) {
    const std::string name = r.string("parameter name");
    if (name != want_name) {
      throw CheckpointFormatError("unexpected parameter '" + name + "' (expected '" + want_name +
                                  "')");
    }
    const std::uint32_t rank = r.u32("parameter rank");
    if (rank != want_shape.size()) {
      throw CheckpointFormatError("parameter '" + name + "' has rank " + std::to_string(rank) +
                                  ", expected " + std::to_string(want_shape.size()));
    }
    Shape shape(rank);
    for (std::uint32_t i = 0; i < rank; ++i) shape[i] = r.u64("parameter dims");
    if (shape != want_shape) {
      throw CheckpointFormatError("parameter '" + name + "' has shape " + shape_str(shape) +
                                  ", expected " + shape_str(want_shape));
    }
    Tensor value = Tensor::zeros(shape);
    for (double& v : value.data) v = r.f64("parameter data");
    auto& g = name.rfind("enc.", 0) == 0   ? model.encoder
              : name.rfind("dec.", 0) == 0 ? model.decoder
                                           : model.discriminator;
    g.push_back(NamedTensor{name, std::move(value)});
  }

  const std::size_t body_end = r.off;
  const std::uint32_t stored = r.u32("checksum");
  if (r.off != bytes.size()) {
    throw CheckpointChecksumError("checkpoint has " + std::to_string(bytes.size() - r.off) +
                                  " trailing bytes after the checksum");
  }
  const std::uint32_t actual = crc32(bytes.data(), body_end);
  if (stored != actual) {
    throw CheckpointChecksumError("checkpoint checksum mismatch (file corrupt)");
  }
  return model;
}

void save_checkpoint(const VaeGanModel& model, const std::string& path) {
  const std::vector<unsigned char> bytes = serialize_checkpoint(model);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open checkpoint file for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("failed writing checkpoint file: " + path);
}

VaeGanModel load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  if (f.bad()) throw DataError("failed reading checkpoint file: " + path);
  return deserialize_checkpoint(bytes);
}

}  // namespace stimgen::vaegan
