#include "gjam/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "gjam/error.hpp"

namespace gjam::plot {

namespace {

std::string num(double v, const char* f = "%.2f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string text(double x, double y, const std::string& s, const char* anchor = "middle", int size = 12,
                 const std::string& extra = "") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + std::to_string(size) +
         "\" text-anchor=\"" + anchor + "\" font-family=\"sans-serif\"" + extra + ">" + escape(s) + "</text>\n";
}

std::string header(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
         std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) +
         "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

// White to dark blue.
std::string shade(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(247 - t * (247 - 8)));
  const int g = static_cast<int>(std::lround(251 - t * (251 - 48)));
  const int b = static_cast<int>(std::lround(255 - t * (255 - 107)));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<double>& x, const std::vector<Series>& series) {
  if (x.empty()) throw Error(ErrorCode::InvalidSpec, "line chart needs x values");
  double lo = INFINITY, hi = -INFINITY;
  for (const Series& s : series) {
    if (s.y.size() != x.size()) throw Error(ErrorCode::LengthMismatch, "series '" + s.name + "' length mismatch");
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      const double e = i < s.err.size() ? s.err[i] : 0.0;
      lo = std::min(lo, s.y[i] - e);
      hi = std::max(hi, s.y[i] + e);
    }
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-9) lo -= 0.5, hi += 0.5;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const double x0 = *std::min_element(x.begin(), x.end()), x1 = *std::max_element(x.begin(), x.end());
  const double xs = x1 > x0 ? x1 - x0 : 1.0;

  const int w = 640, h = 420, ml = 70, mr = 150, mt = 40, mb = 55;
  const double pw = w - ml - mr, ph = h - mt - mb;
  auto px = [&](double v) { return ml + (v - x0) / xs * pw; };
  auto py = [&](double v) { return mt + (hi - v) / (hi - lo) * ph; };

  std::string svg = header(w, h);
  svg += text(w / 2.0, 24, title, "middle", 15);
  svg += "<rect x=\"" + num(ml) + "\" y=\"" + num(mt) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double v = lo + (hi - lo) * k / 5.0;
    svg += "<line x1=\"" + num(ml) + "\" x2=\"" + num(ml + pw) + "\" y1=\"" + num(py(v)) + "\" y2=\"" + num(py(v)) +
           "\" stroke=\"#ddd\"/>\n";
    svg += text(ml - 6, py(v) + 4, num(v, "%.3g"), "end", 11);
  }
  for (double v : x) svg += text(px(v), mt + ph + 18, num(v, "%g"), "middle", 11);
  svg += text(ml + pw / 2, h - 12, x_label);
  svg += text(18, mt + ph / 2, y_label, "middle", 12,
              " transform=\"rotate(-90 18 " + num(mt + ph / 2) + ")\"");
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % 8];
    std::string pts;
    for (std::size_t i = 0; i < x.size(); ++i) pts += num(px(x[i])) + "," + num(py(series[s].y[i])) + " ";
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    for (std::size_t i = 0; i < x.size(); ++i) {
      svg += "<circle cx=\"" + num(px(x[i])) + "\" cy=\"" + num(py(series[s].y[i])) + "\" r=\"3\" fill=\"" + color +
             "\"/>\n";
      if (i < series[s].err.size() && series[s].err[i] > 0.0)
        svg += "<line x1=\"" + num(px(x[i])) + "\" x2=\"" + num(px(x[i])) + "\" y1=\"" +
               num(py(series[s].y[i] - series[s].err[i])) + "\" y2=\"" + num(py(series[s].y[i] + series[s].err[i])) +
               "\" stroke=\"" + color + "\"/>\n";
    }
    const double ly = mt + 10 + 18.0 * static_cast<double>(s);
    svg += "<line x1=\"" + num(ml + pw + 12) + "\" x2=\"" + num(ml + pw + 32) + "\" y1=\"" + num(ly) + "\" y2=\"" +
           num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += text(ml + pw + 38, ly + 4, series[s].name, "start", 11);
  }
  return svg + "</svg>\n";
}

std::string heatmap(const std::string& title, const std::vector<std::string>& rows,
                    const std::vector<std::string>& cols, const std::vector<double>& values, double lo, double hi,
                    const char* cell_format) {
  if (values.size() != rows.size() * cols.size())
    throw Error(ErrorCode::LengthMismatch, "heatmap values do not match labels");
  const int cell = cols.size() > 20 ? 22 : 44;
  const int ml = 90, mt = 70;
  const int w = ml + cell * static_cast<int>(cols.size()) + 20;
  const int h = mt + cell * static_cast<int>(rows.size()) + 20;
  const int font = cell > 30 ? 11 : 7;
  std::string svg = header(w, h);
  svg += text(w / 2.0, 22, title, "middle", 15);
  for (std::size_t j = 0; j < cols.size(); ++j)
    svg += text(ml + cell * (j + 0.5), mt - 8, cols[j], "middle", font + 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    svg += text(ml - 6, mt + cell * (i + 0.5) + 4, rows[i], "end", font + 1);
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const double v = values[i * cols.size() + j];
      const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
      svg += "<rect x=\"" + std::to_string(ml + cell * static_cast<int>(j)) + "\" y=\"" +
             std::to_string(mt + cell * static_cast<int>(i)) + "\" width=\"" + std::to_string(cell) +
             "\" height=\"" + std::to_string(cell) + "\" fill=\"" + shade(t) + "\" stroke=\"white\"/>\n";
      svg += text(ml + cell * (j + 0.5), mt + cell * (i + 0.5) + 4, num(v, cell_format), "middle", font,
                  t > 0.55 ? " fill=\"white\"" : "");
    }
  }
  return svg + "</svg>\n";
}

std::string confusion_chart(const std::string& title, const ConfusionMatrix& cm,
                            const std::vector<std::string>& class_names) {
  std::vector<std::string> names = class_names;
  for (int k = static_cast<int>(names.size()); k < cm.c; ++k) names.push_back(std::to_string(k));
  names.resize(static_cast<std::size_t>(cm.c));
  std::vector<double> pct(cm.cells.size(), 0.0);
  for (int t = 0; t < cm.c; ++t) {
    const double support = static_cast<double>(cm.row_sum(t));
    for (int p = 0; p < cm.c; ++p) pct[t * cm.c + p] = support > 0 ? 100.0 * cm.at(t, p) / support : 0.0;
  }
  return heatmap(title, names, names, pct, 0.0, 100.0, "%.0f");
}

void write_svg(const std::filesystem::path& path, const std::string& svg) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot create " + path.string());
  out << svg;
  if (!out) throw Error(ErrorCode::DiskFull, "write failed: " + path.string());
}

}  // namespace gjam::plot
