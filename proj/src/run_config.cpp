#include "stimgen/run_config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "stimgen/crc32.hpp"
#include "stimgen/errors.hpp"

namespace stimgen::cli {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as a number");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value +
                      "' as a non-negative integer");
  }
}

std::size_t to_size(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(to_u64(key, value));
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
  if (key == "beta") train.beta = to_double(key, value);
  else if (key == "gamma") train.gamma = to_double(key, value);
  else if (key == "latent_dims") train.latent_dims = to_size(key, value);
  else if (key == "batch_size") train.batch_size = to_size(key, value);
  else if (key == "kernel_size") train.kernel_size = to_size(key, value);
  else if (key == "learning_rate") train.learning_rate = to_double(key, value);
  else if (key == "beta1") train.beta1 = to_double(key, value);
  else if (key == "max_iterations") train.max_iterations = to_size(key, value);
  else if (key == "calibration_interval") train.calibration_interval = to_size(key, value);
  else if (key == "averaging_window") train.averaging_window = to_size(key, value);
  else if (key == "rng_seed") train.rng_seed = to_u64(key, value);
  else if (key == "optimizer") train.optimizer = value;
  else if (key == "average_gradients") train.average_gradients = to_bool(key, value);
  else if (key == "stage_channels") {
    const std::vector<std::string> parts = split_list(value);
    if (parts.size() != 4) {
      throw ConfigError("config key 'stage_channels': expected 4 comma-separated sizes, got " +
                        std::to_string(parts.size()));
    }
    for (std::size_t i = 0; i < 4; ++i) stage_channels[i] = to_size(key, parts[i]);
  } else if (key == "data") data = value;
  else if (key == "out") out = value;
  else if (key == "ckpt") ckpt = value;
  else if (key == "ckpts") ckpts = split_list(value);
  else if (key == "report") report = value;
  else if (key == "from") from = value;
  else if (key == "to") to = value;
  else if (key == "ref") ref = value;
  else if (key == "metric") metric = value;
  else if (key == "schedule") schedule = value;
  else if (key == "direction") direction = value;
  else if (key == "wps") wps = to_size(key, value);
  else if (key == "s") s = to_double(key, value);
  else if (key == "kappa") kappa = to_double(key, value);
  else if (key == "delta") delta = to_double(key, value);
  else if (key == "n") n = to_size(key, value);
  else if (key == "len") len = to_size(key, value);
  else if (key == "seed") seed = to_u64(key, value);
  else if (key == "command") command = value;
  else throw ConfigError("unknown config key '" + key + "'");
}

KeyValues parse_config_text(const std::string& text, const std::string& origin) {
  KeyValues pairs;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value', got '" + stripped + "'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    if (!seen.insert(key).second) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    pairs.emplace_back(key, value);
  }
  return pairs;
}

KeyValues load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string RunManifest::render() const {
  std::ostringstream out;
  out << "# run manifest; pass back through --config to reproduce this run\n";
  out << "command = " << command << "\n";
  for (const auto& [key, value] : keys) out << key << " = " << value << "\n";
  for (const Artifact& a : artifacts) {
    char crc[16];
    std::snprintf(crc, sizeof crc, "%08x", a.crc);
    out << "# artifact " << a.path << " crc32 " << crc << "\n";
  }
  return out.str();
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint32_t crc32_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for checksumming");
  std::uint32_t crc = 0;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    crc = crc32(buf, static_cast<std::size_t>(in.gcount()), crc);
  }
  return crc;
}

}  // namespace stimgen::cli
