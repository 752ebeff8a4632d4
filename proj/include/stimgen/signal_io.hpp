#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stimgen/signal.hpp"

namespace stimgen::io {

// Per-channel raw extrema behind the unit-interval values; identity when the
// corpus arrived already rescaled.
struct ScaleManifest {
  std::vector<std::string> channel_names;
  std::vector<double> mins;
  std::vector<double> maxs;

  static ScaleManifest identity(const std::vector<std::string>& names);
  bool is_identity() const;

  double to_unit(std::size_t channel, double raw) const;
  double from_unit(std::size_t channel, double unit) const;
};

struct Corpus {
  std::vector<SignalSequence> train;
  std::vector<SignalSequence> test;
  // basenames aligned with the sequence vectors, lexicographic per split
  std::vector<std::string> train_files;
  std::vector<std::string> test_files;
  std::map<std::string, std::string> labels;  // basename -> tag, sparse
  ScaleManifest scale;

  std::size_t channels() const;
  std::size_t length() const;
  std::size_t size() const { return train.size() + test.size(); }
};

// Directory layout: <dir>/train/*.csv, <dir>/test/*.csv, optional
// <dir>/labels.csv (filename,tag) and <dir>/scale_manifest.csv
// (channel,min,max). Raw values outside [0,1] trigger a corpus-global
// per-channel min-max rescale recorded in the returned manifest; the input
// files are never modified.
Corpus load_corpus(const std::string& dir, std::size_t expected_channels = 2);

void save_corpus(const Corpus& corpus, const std::string& dir);

// ---- templates ----

struct TemplateSegment {
  double level = 0.0;    // target level in [0,1]
  std::size_t ramp = 0;  // samples interpolating linearly from the previous level
  std::size_t hold = 0;  // samples holding at level
};

struct TemplateSpec {
  std::string kind = "composite";  // start | stop | plateau | composite
  std::size_t length = 512;
  // one segment list per channel; each channel opens at its first segment's level
  std::vector<std::vector<TemplateSegment>> channels;

  void validate() const;  // segments must sum exactly to length
};

SignalSequence craft_template(const TemplateSpec& spec);

// canonical shapes used by the navigation examples; start is the exact
// time reversal of stop
TemplateSpec stop_template(std::size_t length, double level = 0.6, std::size_t ramp = 0);
TemplateSpec start_template(std::size_t length, double level = 0.6, std::size_t ramp = 0);

// ---- synthetic corpus ----

// Desk-scale stand-in corpus: cruise / stop / start families in equal
// proportion, engine speed correlated with vehicle speed over an idle
// offset, low-frequency noise, deliberate baseline-zero spans in the stop
// and start families. Deterministic per seed. Every ninth sequence lands in
// the test split.
Corpus synth_corpus(std::size_t n, std::size_t length, std::uint64_t seed);

// ---- export ----

enum class ExportFormat { Csv, Svg };

void write_sequence_csv(const SignalSequence& seq, const std::string& path);
SignalSequence read_sequence_csv(const std::string& path, std::size_t expected_channels);

// writes series_000.csv / .svg, ... into dir; returns the paths written
std::vector<std::string> export_series(const std::vector<SignalSequence>& sequences,
                                       const std::string& dir, ExportFormat format);

}  // namespace stimgen::io
