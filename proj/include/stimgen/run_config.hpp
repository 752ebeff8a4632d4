#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stimgen/trainer.hpp"

namespace stimgen::cli {

// Everything a command run can be told, resolved from three layers:
// built-in defaults, then a flat `key = value` config file, then explicit
// command-line flags. Unknown keys are rejected so a typo cannot silently
// fall back to a default.
struct RunConfig {
  train::TrainConfig train;
  std::array<std::size_t, 4> stage_channels = {32, 64, 128, 256};

  std::string data;    // corpus directory
  std::string out;     // output directory
  std::string ckpt;    // checkpoint to load
  std::vector<std::string> ckpts;  // eval compares several
  std::string report;  // eval report path
  std::string from;    // interpolation start reference (sequence csv)
  std::string to;      // interpolation stop reference
  std::string ref;     // neighborhood centre reference

  std::string metric = "ssim";
  std::string schedule = "linear";
  std::string direction;  // roughness runs must state increasing | decreasing
  std::size_t wps = 10;
  double s = 15.0;
  double kappa = 0.5;
  double delta = 2.0;

  std::size_t n = 64;     // synth: sequence count
  std::size_t len = 64;   // synth: samples per sequence
  std::uint64_t seed = 1;  // synth: corpus seed

  std::string command;  // stamped into manifests; guards cross-command reuse

  // Applies one key. Throws ConfigError for unknown keys or unparsable
  // values, always naming the key.
  void apply(const std::string& key, const std::string& value);
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Flat config text: one `key = value` per line, leading-# comment lines and
// blank lines skipped. Duplicate keys are an error.
KeyValues parse_config_text(const std::string& text, const std::string& origin);

// Reads and parses a config file; missing or unreadable files are a
// ConfigError naming the path.
KeyValues load_config_file(const std::string& path);

// Resolved run description written next to a command's outputs. The file is
// itself a loadable config: feeding it back through --config reproduces the
// run, and the artifact lines ride along as comments.
struct RunManifest {
  struct Artifact {
    std::string path;  // relative to the manifest's directory
    std::uint32_t crc = 0;
  };

  std::string command;
  KeyValues keys;
  std::vector<Artifact> artifacts;

  std::string render() const;
};

// %.17g, enough digits to survive a write/parse round trip bit-exactly
std::string format_double(double v);

std::uint32_t crc32_file(const std::string& path);

}  // namespace stimgen::cli
