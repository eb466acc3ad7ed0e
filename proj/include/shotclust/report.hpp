#pragma once

// Metrics CSV parsing and per-index SVG line charts.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "shotclust/error.hpp"

namespace shotclust {

struct MetricsTable {
  std::vector<std::string> columns;
  std::map<std::string, std::vector<double>> values;

  const std::vector<double>& column(const std::string& name) const {
    auto it = values.find(name);
    require(it != values.end(), ErrorCode::parse_error, "metrics CSV lacks column '" + name + "'");
    return it->second;
  }
  std::size_t rows() const { return values.empty() ? 0 : values.begin()->second.size(); }
};

inline const std::vector<std::string>& required_metric_columns() {
  static const std::vector<std::string> cols = {
      "labels_seen",      "silhouette_orig", "dunn_orig",          "davies_bouldin_orig",
      "silhouette_aug",   "dunn_aug",        "davies_bouldin_aug"};
  return cols;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Cells "nan" or empty read as NaN.
inline MetricsTable parse_metrics_csv(std::istream& in) {
  MetricsTable t;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::parse_error, "metrics CSV is empty");
  t.columns = split_csv_line(line);
  for (const auto& c : t.columns) t.values[c];
  for (const auto& c : required_metric_columns()) {
    require(t.values.count(c) > 0, ErrorCode::parse_error, "metrics CSV lacks column '" + c + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    require(cells.size() == t.columns.size(), ErrorCode::parse_error,
            "metrics CSV line " + std::to_string(line_no) + ": expected " +
                std::to_string(t.columns.size()) + " cells, got " + std::to_string(cells.size()));
    for (std::size_t i = 0; i < cells.size(); ++i) {
      double v = std::numeric_limits<double>::quiet_NaN();
      if (!cells[i].empty() && cells[i] != "nan" && cells[i] != "-nan") {
        try {
          std::size_t used = 0;
          v = std::stod(cells[i], &used);
          require(used == cells[i].size(), ErrorCode::parse_error, "");
        } catch (const std::exception&) {
          fail(ErrorCode::parse_error, "metrics CSV line " + std::to_string(line_no) +
                                           ": bad number '" + cells[i] + "' in column '" +
                                           t.columns[i] + "'");
        }
      }
      t.values[t.columns[i]].push_back(v);
    }
  }
  return t;
}

inline MetricsTable load_metrics_csv(const std::filesystem::path& p) {
  std::ifstream in(p);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open " + p.string());
  return parse_metrics_csv(in);
}

struct Series {
  std::string name;
  std::vector<double> y;
  std::string colour;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace detail

// NaN points are left out of the polyline.
inline std::string render_line_chart(const std::string& title, const std::string& x_label,
                                     const std::vector<double>& x, const std::vector<Series>& series) {
  constexpr double W = 640, H = 400, L = 70, R = 150, T = 40, B = 50;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (double v : x) {
    if (std::isfinite(v)) xmin = std::min(xmin, v), xmax = std::max(xmax, v);
  }
  for (const auto& s : series) {
    for (double v : s.y) {
      if (std::isfinite(v)) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1;
  if (!std::isfinite(ymin)) ymin = 0, ymax = 1;
  if (xmax - xmin <= 0) xmin -= 1, xmax += 1;
  if (ymax - ymin <= 0) {
    const double pad = std::max(std::abs(ymin) * 0.05, 0.05);
    ymin -= pad, ymax += pad;
  }
  const double pw = W - L - R, ph = H - T - B;
  auto px = [&](double v) { return L + (v - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double v) { return T + ph - (v - ymin) / (ymax - ymin) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << detail::fmt(L + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << title << "</text>\n";
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    o << "<line x1=\"" << L << "\" x2=\"" << L + pw << "\" y1=\"" << detail::fmt(py(yv)) << "\" y2=\""
      << detail::fmt(py(yv)) << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << detail::fmt(py(yv) + 4) << "\" text-anchor=\"end\">"
      << detail::fmt_tick(yv) << "</text>\n";
    o << "<text x=\"" << detail::fmt(px(xv)) << "\" y=\"" << T + ph + 18
      << "\" text-anchor=\"middle\">" << detail::fmt_tick(xv) << "</text>\n";
  }
  o << "<text x=\"" << detail::fmt(L + pw / 2) << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">"
    << x_label << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& sr = series[s];
    std::string points;
    for (std::size_t i = 0; i < std::min(x.size(), sr.y.size()); ++i) {
      if (!std::isfinite(sr.y[i]) || !std::isfinite(x[i])) continue;
      if (!points.empty()) points += ' ';
      points += detail::fmt(px(x[i])) + "," + detail::fmt(py(sr.y[i]));
      o << "<circle cx=\"" << detail::fmt(px(x[i])) << "\" cy=\"" << detail::fmt(py(sr.y[i]))
        << "\" r=\"3\" fill=\"" << sr.colour << "\"/>\n";
    }
    o << "<polyline fill=\"none\" stroke=\"" << sr.colour << "\" stroke-width=\"2\" points=\""
      << points << "\"/>\n";
    const double ly = T + 16 + 18.0 * static_cast<double>(s);
    o << "<line x1=\"" << L + pw + 12 << "\" x2=\"" << L + pw + 32 << "\" y1=\"" << ly << "\" y2=\""
      << ly << "\" stroke=\"" << sr.colour << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << L + pw + 38 << "\" y=\"" << ly + 4 << "\">" << sr.name << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

struct IndexChart {
  std::string file;    // e.g. silhouette.svg
  std::string title;
  std::string column;  // prefix of the _orig/_aug columns
};

inline const std::vector<IndexChart>& index_charts() {
  static const std::vector<IndexChart> charts = {
      {"silhouette.svg", "Silhouette (maximize)", "silhouette"},
      {"dunn.svg", "Dunn (maximize)", "dunn"},
      {"davies_bouldin.svg", "Davies-Bouldin (minimize)", "davies_bouldin"}};
  return charts;
}

// One chart per index, original and augmented space as two curves.
inline std::vector<std::filesystem::path> write_reports(const MetricsTable& t,
                                                        const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  const auto& x = t.column("labels_seen");
  for (const auto& c : index_charts()) {
    const std::vector<Series> series = {{"original", t.column(c.column + "_orig"), "#1f77b4"},
                                        {"augmented", t.column(c.column + "_aug"), "#d62728"}};
    const auto path = out_dir / c.file;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::io_error, "cannot write " + path.string());
    out << render_line_chart(c.title, "labels seen", x, series);
    require(static_cast<bool>(out), ErrorCode::io_error, "cannot write " + path.string());
    written.push_back(path);
  }
  return written;
}

}  // namespace shotclust
