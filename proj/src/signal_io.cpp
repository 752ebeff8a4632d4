#include "stimgen/signal_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "stimgen/errors.hpp"
#include "stimgen/rng.hpp"
#include "stimgen/svg.hpp"

namespace fs = std::filesystem;

namespace stimgen::io {

namespace {

std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

double parse_cell(const std::string& cell, const std::string& file, std::size_t row,
                  const std::string& column) {
  double v = 0.0;
  const char* b = cell.data();
  const char* e = b + cell.size();
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e || !std::isfinite(v)) {
    throw DataError(file + " row " + std::to_string(row) + ": non-numeric value '" + cell +
                    "' in column " + column);
  }
  return v;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct RawSeries {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;  // per channel
  std::size_t rows = 0;
};

RawSeries parse_sequence_csv(const fs::path& path, std::size_t expected_channels) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open sequence file: " + path.string());
  const std::string file = path.string();

  std::string line;
  if (!std::getline(f, line)) throw DataError(file + ": empty file (missing header)");
  RawSeries out;
  out.names = split_csv_line(line);
  if (out.names.size() != expected_channels) {
    if (out.names.size() < expected_channels) {
      throw DataError(file + ": missing channel column, header has " +
                      std::to_string(out.names.size()) + " of " +
                      std::to_string(expected_channels));
    }
    throw DataError(file + ": header has " + std::to_string(out.names.size()) +
                    " columns, expected " + std::to_string(expected_channels));
  }
  for (const std::string& n : out.names) {
    if (n.empty()) throw DataError(file + ": empty channel name in header");
  }
  out.columns.resize(expected_channels);

  std::size_t row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty() || line == "\r") {
      if (f.peek() == EOF) break;  // trailing newline
      throw DataError(file + " row " + std::to_string(row) + ": blank row");
    }
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != expected_channels) {
      throw DataError(file + " row " + std::to_string(row) + ": expected " +
                      std::to_string(expected_channels) + " cells, got " +
                      std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < expected_channels; ++c) {
      out.columns[c].push_back(parse_cell(cells[c], file, row, out.names[c]));
    }
    ++out.rows;
  }
  if (out.rows == 0) throw DataError(file + ": no samples");
  return out;
}

std::vector<std::string> list_csv_files(const fs::path& dir) {
  std::vector<std::string> names;
  if (fs::is_directory(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") {
        names.push_back(entry.path().filename().string());
      }
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

ScaleManifest parse_scale_manifest(const fs::path& path,
                                   const std::vector<std::string>& channel_names) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open scale manifest: " + path.string());
  const std::string file = path.string();
  std::string line;
  if (!std::getline(f, line) || split_csv_line(line) != std::vector<std::string>{"channel", "min", "max"}) {
    throw DataError(file + ": expected header 'channel,min,max'");
  }
  ScaleManifest m;
  std::size_t row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 3) {
      throw DataError(file + " row " + std::to_string(row) + ": expected channel,min,max");
    }
    m.channel_names.push_back(cells[0]);
    m.mins.push_back(parse_cell(cells[1], file, row, "min"));
    m.maxs.push_back(parse_cell(cells[2], file, row, "max"));
    if (m.maxs.back() < m.mins.back()) {
      throw DataError(file + " row " + std::to_string(row) + ": max below min");
    }
  }
  if (m.channel_names != channel_names) {
    throw DataError(file + ": manifest channels do not match the corpus header");
  }
  return m;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot open file for writing: " + path.string());
  f << content;
  if (!f) throw DataError("failed writing file: " + path.string());
}

// low-frequency jitter: a few whole-period sinusoids, |value| <= amp
std::vector<double> band_noise(Rng& rng, std::size_t T, double amp) {
  std::vector<double> out(T, 0.0);
  constexpr int kComponents = 3;
  for (int k = 0; k < kComponents; ++k) {
    const double a = (amp / kComponents) * rng.uniform(0.5, 1.0);
    const double cycles = 1.0 + static_cast<double>(rng.index(4));
    const double phase = rng.uniform(0.0, 6.283185307179586);
    for (std::size_t t = 0; t < T; ++t) {
      out[t] += a * std::sin(6.283185307179586 * cycles * static_cast<double>(t) /
                                 static_cast<double>(T) +
                             phase);
    }
  }
  return out;
}

}  // namespace

ScaleManifest ScaleManifest::identity(const std::vector<std::string>& names) {
  ScaleManifest m;
  m.channel_names = names;
  m.mins.assign(names.size(), 0.0);
  m.maxs.assign(names.size(), 1.0);
  return m;
}

bool ScaleManifest::is_identity() const {
  for (double v : mins) {
    if (v != 0.0) return false;
  }
  for (double v : maxs) {
    if (v != 1.0) return false;
  }
  return !channel_names.empty();
}

double ScaleManifest::to_unit(std::size_t channel, double raw) const {
  const double lo = mins.at(channel), hi = maxs.at(channel);
  return hi > lo ? (raw - lo) / (hi - lo) : 0.0;
}

double ScaleManifest::from_unit(std::size_t channel, double unit) const {
  const double lo = mins.at(channel), hi = maxs.at(channel);
  return hi > lo ? lo + unit * (hi - lo) : lo;
}

std::size_t Corpus::channels() const {
  if (!train.empty()) return train.front().channels();
  if (!test.empty()) return test.front().channels();
  return 0;
}

std::size_t Corpus::length() const {
  if (!train.empty()) return train.front().length();
  if (!test.empty()) return test.front().length();
  return 0;
}

Corpus load_corpus(const std::string& dir, std::size_t expected_channels) {
  if (expected_channels == 0) throw ConfigError("expected_channels must be positive");
  const fs::path base(dir);
  if (!fs::is_directory(base)) throw DataError("corpus directory not found: " + dir);

  Corpus corpus;
  corpus.train_files = list_csv_files(base / "train");
  corpus.test_files = list_csv_files(base / "test");
  if (corpus.train_files.empty() && corpus.test_files.empty()) {
    throw DataError("empty corpus: no csv files under " + dir + "/train or " + dir + "/test");
  }

  std::vector<RawSeries> raw;
  std::vector<std::string> names;
  std::size_t T = 0;
  std::string first_file;
  auto read_split = [&](const std::vector<std::string>& files, const char* split) {
    for (const std::string& name : files) {
      const fs::path p = base / split / name;
      RawSeries r = parse_sequence_csv(p, expected_channels);
      if (names.empty()) {
        names = r.names;
        T = r.rows;
        first_file = p.string();
      } else {
        if (r.names != names) {
          throw DataError(p.string() + ": channel header differs from " + first_file);
        }
        if (r.rows != T) {
          throw DataError(p.string() + ": has " + std::to_string(r.rows) +
                          " samples, corpus uses " + std::to_string(T));
        }
      }
      raw.push_back(std::move(r));
    }
  };
  read_split(corpus.train_files, "train");
  read_split(corpus.test_files, "test");

  bool in_unit_range = true;
  std::vector<double> mins(expected_channels, std::numeric_limits<double>::infinity());
  std::vector<double> maxs(expected_channels, -std::numeric_limits<double>::infinity());
  for (const RawSeries& r : raw) {
    for (std::size_t c = 0; c < expected_channels; ++c) {
      for (double v : r.columns[c]) {
        mins[c] = std::min(mins[c], v);
        maxs[c] = std::max(maxs[c], v);
        if (v < 0.0 || v > 1.0) in_unit_range = false;
      }
    }
  }

  const fs::path manifest_path = base / "scale_manifest.csv";
  if (fs::exists(manifest_path)) {
    if (!in_unit_range) {
      throw DataError(manifest_path.string() +
                      " present but corpus values fall outside [0,1]; refusing to rescale twice");
    }
    corpus.scale = parse_scale_manifest(manifest_path, names);
  } else if (in_unit_range) {
    corpus.scale = ScaleManifest::identity(names);
  } else {
    corpus.scale.channel_names = names;
    corpus.scale.mins = mins;
    corpus.scale.maxs = maxs;
  }

  const bool rescale = !in_unit_range;
  auto to_sequence = [&](const RawSeries& r) {
    Tensor values = Tensor::zeros({expected_channels, T});
    for (std::size_t c = 0; c < expected_channels; ++c) {
      for (std::size_t t = 0; t < T; ++t) {
        const double v = r.columns[c][t];
        values.data[c * T + t] = rescale ? corpus.scale.to_unit(c, v) : v;
      }
    }
    return SignalSequence::from_values(std::move(values), names);
  };
  for (std::size_t i = 0; i < corpus.train_files.size(); ++i) corpus.train.push_back(to_sequence(raw[i]));
  for (std::size_t i = 0; i < corpus.test_files.size(); ++i) {
    corpus.test.push_back(to_sequence(raw[corpus.train_files.size() + i]));
  }

  const fs::path labels_path = base / "labels.csv";
  if (fs::exists(labels_path)) {
    std::ifstream f(labels_path);
    if (!f) throw DataError("cannot open labels file: " + labels_path.string());
    std::string line;
    std::size_t row = 0;
    while (std::getline(f, line)) {
      ++row;
      if (line.empty() || line == "\r") continue;
      const auto cells = split_csv_line(line);
      if (row == 1 && cells == std::vector<std::string>{"filename", "tag"}) continue;
      if (cells.size() != 2 || cells[0].empty()) {
        throw DataError(labels_path.string() + " row " + std::to_string(row) +
                        ": expected filename,tag");
      }
      const bool known =
          std::find(corpus.train_files.begin(), corpus.train_files.end(), cells[0]) !=
              corpus.train_files.end() ||
          std::find(corpus.test_files.begin(), corpus.test_files.end(), cells[0]) !=
              corpus.test_files.end();
      if (!known) {
        throw DataError(labels_path.string() + ": label names unknown sequence '" + cells[0] +
                        "'");
      }
      corpus.labels[cells[0]] = cells[1];
    }
  }
  return corpus;
}

void write_sequence_csv(const SignalSequence& seq, const std::string& path) {
  seq.validate();
  std::string out;
  for (std::size_t c = 0; c < seq.channels(); ++c) {
    if (c) out += ',';
    out += seq.channel_names[c];
  }
  out += '\n';
  const std::size_t C = seq.channels(), T = seq.length();
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < C; ++c) {
      if (c) out += ',';
      out += fmt_double(seq.values.data[c * T + t]);
    }
    out += '\n';
  }
  write_file(path, out);
}

SignalSequence read_sequence_csv(const std::string& path, std::size_t expected_channels) {
  RawSeries r = parse_sequence_csv(path, expected_channels);
  Tensor values = Tensor::zeros({expected_channels, r.rows});
  for (std::size_t c = 0; c < expected_channels; ++c) {
    std::copy(r.columns[c].begin(), r.columns[c].end(), values.data.begin() + c * r.rows);
  }
  try {
    return SignalSequence::from_values(std::move(values), r.names);
  } catch (const Error& e) {
    throw DataError(path + ": " + e.what());
  }
}

void save_corpus(const Corpus& corpus, const std::string& dir) {
  if (corpus.train.size() != corpus.train_files.size() ||
      corpus.test.size() != corpus.test_files.size()) {
    throw DataError("corpus filename lists do not match its sequences");
  }
  const fs::path base(dir);
  fs::create_directories(base / "train");
  fs::create_directories(base / "test");
  for (std::size_t i = 0; i < corpus.train.size(); ++i) {
    write_sequence_csv(corpus.train[i], (base / "train" / corpus.train_files[i]).string());
  }
  for (std::size_t i = 0; i < corpus.test.size(); ++i) {
    write_sequence_csv(corpus.test[i], (base / "test" / corpus.test_files[i]).string());
  }

  std::string manifest = "channel,min,max\n";
  for (std::size_t c = 0; c < corpus.scale.channel_names.size(); ++c) {
    manifest += corpus.scale.channel_names[c];
    manifest += ',';
    manifest += fmt_double(corpus.scale.mins[c]);
    manifest += ',';
    manifest += fmt_double(corpus.scale.maxs[c]);
    manifest += '\n';
  }
  write_file(base / "scale_manifest.csv", manifest);

  if (!corpus.labels.empty()) {
    std::string labels = "filename,tag\n";
    for (const auto& [name, tag] : corpus.labels) {
      labels += name;
      labels += ',';
      labels += tag;
      labels += '\n';
    }
    write_file(base / "labels.csv", labels);
  }
}

void TemplateSpec::validate() const {
  if (length == 0) throw ConfigError("template length must be positive");
  if (channels.empty()) throw ConfigError("template needs at least one channel");
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const auto& segs = channels[c];
    const std::string where = "template channel " + std::to_string(c);
    if (segs.empty()) throw ConfigError(where + " has no segments");
    std::size_t covered = 0;
    for (const TemplateSegment& s : segs) {
      if (s.level < 0.0 || s.level > 1.0) {
        throw ConfigError(where + ": level " + std::to_string(s.level) + " outside [0,1]");
      }
      covered += s.ramp + s.hold;
    }
    if (covered != length) {
      throw ConfigError(where + ": segments cover " + std::to_string(covered) +
                        " samples, template length is " + std::to_string(length));
    }
  }
}

SignalSequence craft_template(const TemplateSpec& spec) {
  spec.validate();
  const std::size_t C = spec.channels.size();
  const std::size_t T = spec.length;
  Tensor values = Tensor::zeros({C, T});
  for (std::size_t c = 0; c < C; ++c) {
    double current = spec.channels[c].front().level;
    std::size_t pos = 0;
    for (const TemplateSegment& seg : spec.channels[c]) {
      for (std::size_t i = 0; i < seg.ramp; ++i) {
        values.data[c * T + pos++] =
            current + (seg.level - current) * static_cast<double>(i + 1) /
                          static_cast<double>(seg.ramp);
      }
      for (std::size_t i = 0; i < seg.hold; ++i) values.data[c * T + pos++] = seg.level;
      current = seg.level;
    }
  }
  return SignalSequence::from_values(std::move(values), default_channel_names(C));
}

TemplateSpec stop_template(std::size_t length, double level, std::size_t ramp) {
  if (length < 8 || length % 2 != 0) {
    throw ConfigError("stop template needs an even length of at least 8");
  }
  if (ramp == 0) ramp = length / 4;
  const std::size_t half = length / 2;
  if (ramp < 1 || ramp > half) throw ConfigError("stop template ramp must lie in [1, length/2]");

  TemplateSpec spec;
  spec.kind = "stop";
  spec.length = length;
  // vehicle cruises, ramps to standstill, rests; engine mirrors it over a
  // small idle offset until shutoff
  const double engine_level = std::min(1.0, 0.15 + 0.5 * level);
  for (double lv : {level, engine_level}) {
    spec.channels.push_back({TemplateSegment{lv, 0, half}, TemplateSegment{0.0, ramp, half - ramp}});
  }
  return spec;
}

TemplateSpec start_template(std::size_t length, double level, std::size_t ramp) {
  TemplateSpec stop = stop_template(length, level, ramp);  // validates arguments
  if (ramp == 0) ramp = length / 4;
  const std::size_t half = length / 2;
  TemplateSpec spec;
  spec.kind = "start";
  spec.length = length;
  // exact time reversal of the stop shape
  for (const auto& stop_channel : stop.channels) {
    const double lv = stop_channel.front().level;
    spec.channels.push_back(
        {TemplateSegment{0.0, 0, half - ramp + 1}, TemplateSegment{lv, ramp, half - 1}});
  }
  return spec;
}

Corpus synth_corpus(std::size_t n, std::size_t length, std::uint64_t seed) {
  if (n < 1) throw ConfigError("synthetic corpus needs n >= 1");
  if (length < 16) throw ConfigError("synthetic corpus needs length >= 16");
  const std::size_t T = length;
  Rng rng(seed);
  Corpus corpus;
  const std::vector<std::string> names = default_channel_names(2);
  corpus.scale = ScaleManifest::identity(names);

  for (std::size_t i = 0; i < n; ++i) {
    const int family = static_cast<int>(i % 3);  // cruise, stop, start
    const double level = rng.uniform(0.35, 0.8);
    const double idle = rng.uniform(0.1, 0.15);
    const double gain = rng.uniform(0.4, 0.55);
    const std::vector<double> v_noise = band_noise(rng, T, 0.01);
    const std::vector<double> e_noise = band_noise(rng, T, 0.01);

    std::vector<double> v(T, 0.0);
    bool engine_off_in_zero_span = family != 0;
    std::size_t zero_len = 0, ramp_len = 0;
    if (family != 0) {
      zero_len = T / 8 + rng.index(T / 8 + 1);             // [T/8, T/4]
      ramp_len = std::max<std::size_t>(2, T / 8 + rng.index(T / 8));
    }

    if (family == 0) {
      for (std::size_t t = 0; t < T; ++t) v[t] = level + v_noise[t];
    } else if (family == 1) {
      // drive, ramp down, rest
      const std::size_t drive = T - ramp_len - zero_len;
      for (std::size_t t = 0; t < drive; ++t) v[t] = level + v_noise[t];
      for (std::size_t t = 0; t < ramp_len; ++t) {
        v[drive + t] = level * (1.0 - static_cast<double>(t + 1) / static_cast<double>(ramp_len));
      }
    } else {
      // rest, ramp up, drive
      for (std::size_t t = 0; t < ramp_len; ++t) {
        v[zero_len + t] = level * static_cast<double>(t + 1) / static_cast<double>(ramp_len);
      }
      for (std::size_t t = zero_len + ramp_len; t < T; ++t) v[t] = level + v_noise[t];
    }

    Tensor values = Tensor::zeros({2, T});
    for (std::size_t t = 0; t < T; ++t) {
      const double vv = std::clamp(v[t], 0.0, 1.0);
      values.data[t] = vv;
      double e;
      if (vv == 0.0 && engine_off_in_zero_span) {
        e = 0.0;  // ignition off across the standstill span
      } else {
        e = std::clamp(idle + gain * vv + e_noise[t], 0.0, 1.0);
      }
      values.data[T + t] = e;
    }

    char name_buf[32];
    std::snprintf(name_buf, sizeof name_buf, "seq_%05zu.csv", i);
    const std::string filename = name_buf;
    static const char* const kTags[] = {"cruise", "stop", "start"};
    corpus.labels[filename] = kTags[family];

    SignalSequence seq = SignalSequence::from_values(std::move(values), names);
    if (i % 9 == 8) {
      corpus.test.push_back(std::move(seq));
      corpus.test_files.push_back(filename);
    } else {
      corpus.train.push_back(std::move(seq));
      corpus.train_files.push_back(filename);
    }
  }
  return corpus;
}

std::vector<std::string> export_series(const std::vector<SignalSequence>& sequences,
                                       const std::string& dir, ExportFormat format) {
  if (sequences.empty()) throw ConfigError("export needs at least one sequence");
  fs::create_directories(dir);
  std::vector<std::string> written;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const SignalSequence& seq = sequences[i];
    char stem[32];
    std::snprintf(stem, sizeof stem, "series_%03zu", i);
    if (format == ExportFormat::Csv) {
      const std::string path = (fs::path(dir) / (std::string(stem) + ".csv")).string();
      write_sequence_csv(seq, path);
      written.push_back(path);
    } else {
      std::vector<svg::Series> series;
      const std::size_t C = seq.channels(), T = seq.length();
      for (std::size_t c = 0; c < C; ++c) {
        svg::Series s;
        s.label = seq.channel_names[c];
        s.ys.assign(seq.values.data.begin() + c * T, seq.values.data.begin() + (c + 1) * T);
        series.push_back(std::move(s));
      }
      svg::ChartSpec spec;
      spec.title = stem;
      const std::string path = (fs::path(dir) / (std::string(stem) + ".svg")).string();
      write_file(path, svg::line_chart(series, spec));
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace stimgen::io
