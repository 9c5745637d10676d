#pragma once

/*
 * Static SVG line charts from trace CSVs.
 *
 * Output is a pure function of the CSV text and the options: coordinates
 * and tick labels are snprintf-formatted, colors come from a fixed palette,
 * and nothing depends on locale or environment, so golden-file comparison
 * of the bytes is sound.  Non-finite samples (and nonpositive ones in
 * log-scale mode) break the polyline into segments instead of being drawn.
 */

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmdplab {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> cols;  /* column-major, ragged rows rejected */

  std::size_t rows() const { return cols.empty() ? 0 : cols[0].size(); }

  const std::vector<double>& column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return cols[i];
    throw std::invalid_argument("CsvTable: no column named " + name);
  }
  bool has_column(const std::string& name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }
};

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      fields.push_back(line.substr(pos, comma == std::string::npos ? comma : comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (first) {
      t.header = fields;
      t.cols.assign(fields.size(), {});
      first = false;
      continue;
    }
    if (fields.size() != t.header.size())
      throw std::invalid_argument("parse_csv: row with " + std::to_string(fields.size()) +
                                  " fields under a " + std::to_string(t.header.size()) +
                                  "-column header");
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const char* s = fields[i].c_str();
      char* end = nullptr;
      const double v = std::strtod(s, &end);
      t.cols[i].push_back(end == s ? std::nan("") : v);
    }
  }
  if (first) throw std::invalid_argument("parse_csv: empty input (no header row)");
  return t;
}

struct ChartOptions {
  std::vector<std::string> columns;  /* series names; each must exist in the header */
  bool log_scale = false;
  std::string title;
  int width = 800;
  int height = 500;
};

namespace detail {

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

inline const char* chart_color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};
  return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

}  // namespace detail

inline std::string render_chart(const CsvTable& table, const ChartOptions& opt) {
  if (opt.columns.empty()) throw std::invalid_argument("render_chart: no columns selected");
  const double left = 70.0, right = 30.0, top = 40.0, bottom = 50.0;
  const double px0 = left, px1 = opt.width - right;
  const double py0 = opt.height - bottom, py1 = top;  /* y grows upward in data space */

  /* x axis: the first CSV column (the iteration counter by schema). */
  const std::vector<double>* xs = table.cols.empty() ? nullptr : &table.cols[0];

  struct Series {
    std::string name;
    std::vector<std::pair<double, double>> pts;  /* (x, transformed y) */
  };
  std::vector<Series> series;
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  bool any = false;
  for (const auto& name : opt.columns) {
    Series s;
    s.name = name;
    const std::vector<double>& col = table.column(name);
    for (std::size_t i = 0; i < col.size(); ++i) {
      const double x = xs ? (*xs)[i] : static_cast<double>(i);
      double y = col[i];
      if (!std::isfinite(x) || !std::isfinite(y)) {
        s.pts.emplace_back(std::nan(""), std::nan(""));  /* segment break */
        continue;
      }
      if (opt.log_scale) {
        if (!(y > 0.0)) {
          s.pts.emplace_back(std::nan(""), std::nan(""));
          continue;
        }
        y = std::log10(y);
      }
      if (!any) {
        xmin = xmax = x;
        ymin = ymax = y;
        any = true;
      } else {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
      s.pts.emplace_back(x, y);
    }
    series.push_back(std::move(s));
  }
  if (xmax - xmin == 0.0) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin == 0.0) {
    ymin -= 0.5;
    ymax += 0.5;
  }

  const auto sx = [&](double x) { return px0 + (x - xmin) / (xmax - xmin) * (px1 - px0); };
  const auto sy = [&](double y) { return py0 + (y - ymin) / (ymax - ymin) * (py1 - py0); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\""
      << opt.height << "\" viewBox=\"0 0 " << opt.width << " " << opt.height << "\">\n";
  svg << "<rect width=\"" << opt.width << "\" height=\"" << opt.height << "\" fill=\"#ffffff\"/>\n";
  if (!opt.title.empty())
    svg << "<text x=\"" << detail::fmt("%.2f", 0.5 * (px0 + px1))
        << "\" y=\"24\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"15\">"
        << opt.title << "</text>\n";

  /* axes */
  svg << "<line x1=\"" << detail::fmt("%.2f", px0) << "\" y1=\"" << detail::fmt("%.2f", py0)
      << "\" x2=\"" << detail::fmt("%.2f", px1) << "\" y2=\"" << detail::fmt("%.2f", py0)
      << "\" stroke=\"#000000\" stroke-width=\"1\"/>\n";
  svg << "<line x1=\"" << detail::fmt("%.2f", px0) << "\" y1=\"" << detail::fmt("%.2f", py0)
      << "\" x2=\"" << detail::fmt("%.2f", px0) << "\" y2=\"" << detail::fmt("%.2f", py1)
      << "\" stroke=\"#000000\" stroke-width=\"1\"/>\n";

  const int n_ticks = 5;
  for (int k = 0; k < n_ticks; ++k) {
    const double fx = xmin + (xmax - xmin) * k / (n_ticks - 1);
    const double gx = sx(fx);
    svg << "<line x1=\"" << detail::fmt("%.2f", gx) << "\" y1=\"" << detail::fmt("%.2f", py0)
        << "\" x2=\"" << detail::fmt("%.2f", gx) << "\" y2=\"" << detail::fmt("%.2f", py0 + 5)
        << "\" stroke=\"#000000\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << detail::fmt("%.2f", gx) << "\" y=\"" << detail::fmt("%.2f", py0 + 20)
        << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"11\">"
        << detail::fmt("%.6g", fx) << "</text>\n";

    const double fy = ymin + (ymax - ymin) * k / (n_ticks - 1);
    const double gy = sy(fy);
    const double label = opt.log_scale ? std::pow(10.0, fy) : fy;
    svg << "<line x1=\"" << detail::fmt("%.2f", px0 - 5) << "\" y1=\"" << detail::fmt("%.2f", gy)
        << "\" x2=\"" << detail::fmt("%.2f", px0) << "\" y2=\"" << detail::fmt("%.2f", gy)
        << "\" stroke=\"#000000\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << detail::fmt("%.2f", px0 - 8) << "\" y=\"" << detail::fmt("%.2f", gy + 4)
        << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">"
        << detail::fmt("%.6g", label) << "</text>\n";
  }

  /* series */
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = detail::chart_color(i);
    std::vector<std::pair<double, double>> run;
    const auto flush = [&]() {
      if (run.size() >= 2) {
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t k = 0; k < run.size(); ++k)
          svg << (k ? " " : "") << detail::fmt("%.2f", sx(run[k].first)) << ","
              << detail::fmt("%.2f", sy(run[k].second));
        svg << "\"/>\n";
      } else if (run.size() == 1) {
        svg << "<circle cx=\"" << detail::fmt("%.2f", sx(run[0].first)) << "\" cy=\""
            << detail::fmt("%.2f", sy(run[0].second)) << "\" r=\"2\" fill=\"" << color << "\"/>\n";
      }
      run.clear();
    };
    for (const auto& p : series[i].pts) {
      if (std::isfinite(p.first) && std::isfinite(p.second))
        run.push_back(p);
      else
        flush();
    }
    flush();

    const double ly = py1 + 14.0 * static_cast<double>(i) + 4.0;
    svg << "<rect x=\"" << detail::fmt("%.2f", px1 - 120) << "\" y=\""
        << detail::fmt("%.2f", ly - 8) << "\" width=\"10\" height=\"10\" fill=\"" << color
        << "\"/>\n";
    svg << "<text x=\"" << detail::fmt("%.2f", px1 - 106) << "\" y=\"" << detail::fmt("%.2f", ly)
        << "\" font-family=\"monospace\" font-size=\"11\">" << series[i].name << "</text>\n";
  }

  svg << "</svg>\n";
  return svg.str();
}

inline void chart_csv_to_svg(const std::string& csv_path, const ChartOptions& opt,
                             const std::string& out_path) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw std::runtime_error("chart: cannot open " + csv_path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string svg = render_chart(parse_csv(buf.str()), opt);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("chart: cannot open " + out_path);
  out << svg;
}

}  // namespace cmdplab
