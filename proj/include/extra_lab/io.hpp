#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "extra_lab/error.hpp"
#include "extra_lab/record.hpp"
#include "json.hpp"

namespace extra_lab {

namespace fs = std::filesystem;

/// 17 significant digits: enough to round-trip any double.
inline std::string format_g17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Creates `dir`, refusing to reuse a non-empty one unless `overwrite`.
inline void prepare_output_dir(const fs::path& dir, bool overwrite) {
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    require(fs::is_directory(dir, ec), ErrorKind::io, "output path '" + dir.string() + "' is not a directory");
    const bool empty = fs::directory_iterator(dir, ec) == fs::directory_iterator();
    require(empty || overwrite, ErrorKind::io,
            "output directory '" + dir.string() + "' is not empty; pass --overwrite to replace its contents");
    if (!empty)
      for (const auto& entry : fs::directory_iterator(dir)) fs::remove_all(entry.path(), ec);
  }
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::io, "cannot create output directory '" + dir.string() + "': " + ec.message());
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  out << text;
  out.close();
  require(!out.fail(), ErrorKind::io, "write to '" + path.string() + "' failed");
}

inline std::string metrics_csv(const std::vector<MetricSample>& series) {
  auto cell = [](double v) { return std::isnan(v) ? std::string() : format_g17(v); };
  std::string out = "k,consensus_error,avg_grad_norm,objective,dist_to_targets\n";
  for (const MetricSample& s : series) {
    out += std::to_string(s.k) + ',' + cell(s.consensus_error) + ',' + cell(s.avg_grad_norm) + ',' +
           cell(s.objective) + ',' + (s.dist_to_targets ? cell(*s.dist_to_targets) : std::string()) + '\n';
  }
  return out;
}

struct ChartSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (k, value)
};

/// Static line chart with a log10 y axis. Non-positive or non-finite values
/// are skipped.
inline std::string svg_line_chart(const std::string& title, const std::string& y_label,
                                  const std::vector<ChartSeries>& series) {
  constexpr double width = 800, height = 500, left = 80, right = 200, top = 40, bottom = 60;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (!(y > 0.0) || !std::isfinite(y)) continue;
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, std::log10(y));
      y_max = std::max(y_max, std::log10(y));
    }
  if (!std::isfinite(x_min)) {
    x_min = 0;
    x_max = 1;
    y_min = 0;
    y_max = 1;
  }
  y_min = std::floor(y_min);
  y_max = std::ceil(y_max);
  if (y_max <= y_min) y_max = y_min + 1;
  if (x_max <= x_min) x_max = x_min + 1;

  const double plot_w = width - left - right, plot_h = height - top - bottom;
  auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
  auto py = [&](double ly) { return top + (y_max - ly) / (y_max - y_min) * plot_h; };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" "
                    "font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"800\" height=\"500\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(left) + "\" y=\"24\" font-size=\"15\">" + title + "</text>\n";
  svg += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(plot_w) + "\" height=\"" +
         num(plot_h) + "\" fill=\"none\" stroke=\"black\"/>\n";

  const int decades = static_cast<int>(y_max - y_min);
  const int stride = std::max(1, decades / 10);
  for (int d = static_cast<int>(y_min); d <= static_cast<int>(y_max); d += stride) {
    const double y = py(d);
    svg += "<line x1=\"" + num(left) + "\" y1=\"" + num(y) + "\" x2=\"" + num(left + plot_w) + "\" y2=\"" + num(y) +
           "\" stroke=\"#dddddd\"/>\n";
    svg += "<text x=\"" + num(left - 8) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">1e" + std::to_string(d) +
           "</text>\n";
  }
  for (int t = 0; t <= 5; ++t) {
    const double xv = x_min + (x_max - x_min) * t / 5.0;
    svg += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(top + plot_h + 18) + "\" text-anchor=\"middle\">" +
           std::to_string(static_cast<long long>(std::llround(xv))) + "</text>\n";
  }
  svg += "<text x=\"" + num(left + plot_w / 2) + "\" y=\"" + num(height - 15) +
         "\" text-anchor=\"middle\">iteration k</text>\n";
  svg += "<text transform=\"translate(20," + num(top + plot_h / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         y_label + "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = colors[i % 6];
    std::string pts;
    for (const auto& [x, y] : series[i].points) {
      if (!(y > 0.0) || !std::isfinite(y)) continue;
      if (!pts.empty()) pts += ' ';
      pts += num(px(x)) + ',' + num(py(std::log10(y)));
    }
    if (!pts.empty())
      svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts +
             "\"/>\n";
    const double ly = top + 20 + 20 * static_cast<double>(i);
    svg += "<line x1=\"" + num(left + plot_w + 15) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(left + plot_w + 40) +
           "\" y2=\"" + num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + num(left + plot_w + 45) + "\" y=\"" + num(ly + 4) + "\">" + series[i].name + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

inline std::string metrics_chart(const std::vector<MetricSample>& series) {
  ChartSeries consensus{"consensus error", {}}, grad{"avg gradient norm", {}}, dist{"dist to minimizers", {}};
  for (const MetricSample& s : series) {
    const auto k = static_cast<double>(s.k);
    consensus.points.emplace_back(k, s.consensus_error);
    grad.points.emplace_back(k, s.avg_grad_norm);
    if (s.dist_to_targets) dist.points.emplace_back(k, *s.dist_to_targets);
  }
  std::vector<ChartSeries> lines{consensus, grad};
  if (!dist.points.empty()) lines.push_back(dist);
  return svg_line_chart("EXTRA lab run metrics", "metric (log scale)", lines);
}

/// metrics.csv, meta.json and (for a non-empty series) chart.svg.
inline void emit_outputs(const RunRecord& record, const fs::path& dir, bool overwrite) {
  prepare_output_dir(dir, overwrite);
  nlohmann::ordered_json meta = record.meta;
  if (!meta.is_object()) meta = nlohmann::ordered_json::object();
  if (record.error) meta["error"] = *record.error;
  write_text(dir / "metrics.csv", metrics_csv(record.series));
  write_text(dir / "meta.json", meta.dump(2) + "\n");
  if (!record.series.empty()) write_text(dir / "chart.svg", metrics_chart(record.series));
}

}  // namespace extra_lab
