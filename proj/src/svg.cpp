#include "stimgen/svg.hpp"

#include <algorithm>
#include <cstdio>

#include "stimgen/errors.hpp"

namespace stimgen::svg {

namespace {

const char* const kPalette[] = {"#1f6feb", "#d1242f", "#2da44e", "#bf8700",
                                "#8250df", "#0d7d8c", "#6e4a1f", "#57606a"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string line_chart(const std::vector<Series>& series, const ChartSpec& spec) {
  if (series.empty()) throw ConfigError("line_chart needs at least one series");
  std::size_t max_len = 0;
  for (const Series& s : series) max_len = std::max(max_len, s.ys.size());
  if (max_len == 0) throw ConfigError("line_chart series are all empty");
  if (!(spec.y_max > spec.y_min)) throw ConfigError("line_chart y range is empty");

  const double W = static_cast<double>(spec.width);
  const double H = static_cast<double>(spec.height);
  const double left = 60.0, right = 20.0, top = 34.0 + 14.0 * spec.annotations.size(),
               bottom = 44.0;
  const double pw = W - left - right;
  const double ph = H - top - bottom;
  const double x_max = max_len > 1 ? static_cast<double>(max_len - 1) : 1.0;

  auto sx = [&](double x) { return left + pw * (x / x_max); };
  auto sy = [&](double y) {
    return top + ph * (1.0 - (y - spec.y_min) / (spec.y_max - spec.y_min));
  };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" + num(H) +
         "\" viewBox=\"0 0 " + num(W) + " " + num(H) + "\">\n";
  out += "<rect width=\"" + num(W) + "\" height=\"" + num(H) + "\" fill=\"#ffffff\"/>\n";
  out += "<text x=\"" + num(W / 2) + "\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\""
         " font-size=\"14\" fill=\"#1f2328\">" + escape(spec.title) + "</text>\n";
  for (std::size_t i = 0; i < spec.annotations.size(); ++i) {
    out += "<text x=\"" + num(W / 2) + "\" y=\"" + num(32.0 + 14.0 * i) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\""
           " fill=\"#57606a\">" + escape(spec.annotations[i]) + "</text>\n";
  }

  // frame and ticks
  out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) +
         "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"#d0d7de\"/>\n";
  const int ticks = 5;
  for (int i = 0; i <= ticks; ++i) {
    const double fx = static_cast<double>(i) / ticks;
    const double xv = fx * x_max;
    const double yv = spec.y_min + fx * (spec.y_max - spec.y_min);
    out += "<line x1=\"" + num(sx(xv)) + "\" y1=\"" + num(top + ph) + "\" x2=\"" + num(sx(xv)) +
           "\" y2=\"" + num(top + ph + 4) + "\" stroke=\"#57606a\"/>\n";
    out += "<text x=\"" + num(sx(xv)) + "\" y=\"" + num(top + ph + 16) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\""
           " fill=\"#57606a\">" + num(xv) + "</text>\n";
    out += "<line x1=\"" + num(left - 4) + "\" y1=\"" + num(sy(yv)) + "\" x2=\"" + num(left) +
           "\" y2=\"" + num(sy(yv)) + "\" stroke=\"#57606a\"/>\n";
    out += "<text x=\"" + num(left - 7) + "\" y=\"" + num(sy(yv) + 3) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\""
           " fill=\"#57606a\">" + num(yv) + "</text>\n";
  }
  out += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(H - 8) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\""
         " fill=\"#1f2328\">" + escape(spec.x_label) + "</text>\n";
  out += "<text x=\"14\" y=\"" + num(top + ph / 2) + "\" text-anchor=\"middle\""
         " font-family=\"sans-serif\" font-size=\"11\" fill=\"#1f2328\" transform=\"rotate(-90 14 " +
         num(top + ph / 2) + ")\">" + escape(spec.y_label) + "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    if (s.ys.empty()) continue;
    const char* color = kPalette[si % kPaletteSize];
    out += "<polyline fill=\"none\" stroke=\"";
    out += color;
    out += "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.ys.size(); ++i) {
      if (i) out += ' ';
      const double y = std::clamp(s.ys[i], spec.y_min, spec.y_max);
      out += num(sx(static_cast<double>(i))) + "," + num(sy(y));
    }
    out += "\"/>\n";
    // legend swatch + label
    const double lx = left + 8 + 150.0 * static_cast<double>(si % 4);
    const double ly = top + 12 + 14.0 * static_cast<double>(si / 4);
    out += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly - 3) + "\" x2=\"" + num(lx + 16) +
           "\" y2=\"" + num(ly - 3) + "\" stroke=\"";
    out += color;
    out += "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(lx + 20) + "\" y=\"" + num(ly) +
           "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#1f2328\">" + escape(s.label) +
           "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace stimgen::svg
