#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "lkp/io.hpp"

namespace lkp {

// Rows of a metrics CSV, kept as strings plus the parsed column of
// interest; grouping key is the config identity.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline CsvTable read_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) fail(Err::MissingFile, "missing CSV: " + path.string());
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    const std::string s = trim(line);
    if (s.empty()) continue;
    auto fields = split(s, ',');
    if (first) {
      t.header = fields;
      first = false;
    } else {
      if (fields.size() != t.header.size())
        fail(Err::SchemaMismatch, path.string() + ": row width differs from header");
      t.rows.push_back(fields);
    }
  }
  if (t.header.empty()) fail(Err::SchemaMismatch, path.string() + ": empty CSV");
  return t;
}

// Tukey box statistics: quartiles by linear interpolation, whiskers at the
// most extreme data within 1.5 IQR of the box.
struct BoxStats {
  double q1 = 0.0, median = 0.0, q3 = 0.0;
  double whisker_lo = 0.0, whisker_hi = 0.0;
  std::vector<double> outliers;
};

inline double quantile_sorted(const std::vector<double>& v, double p) {
  const double h = p * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(h));
  const double w = h - static_cast<double>(lo);
  return (1.0 - w) * v[lo] + w * v[hi];
}

inline BoxStats box_stats(std::vector<double> values) {
  if (values.empty()) fail(Err::SchemaMismatch, "box plot group with no values");
  std::sort(values.begin(), values.end());
  BoxStats b;
  b.q1 = quantile_sorted(values, 0.25);
  b.median = quantile_sorted(values, 0.5);
  b.q3 = quantile_sorted(values, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr;
  const double hi_fence = b.q3 + 1.5 * iqr;
  b.whisker_lo = b.q3;
  b.whisker_hi = b.q1;
  bool any = false;
  for (double v : values) {
    if (v >= lo_fence && v <= hi_fence) {
      if (!any) {
        b.whisker_lo = v;
        b.whisker_hi = v;
        any = true;
      } else {
        b.whisker_lo = std::min(b.whisker_lo, v);
        b.whisker_hi = std::max(b.whisker_hi, v);
      }
    } else {
      b.outliers.push_back(v);
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// Box plot SVG, one box per config group. The geometry is emitted with fixed
// precision and no timestamps, so identical inputs give identical bytes;
// each group carries its statistics as data- attributes for machine checks.
inline void emit_boxplot_svg(const fs::path& path, const CsvTable& table,
                             const std::string& metric) {
  const int metric_col = table.column(metric);
  if (metric_col < 0) fail(Err::SchemaMismatch, "metric column '" + metric + "' not found");
  if (table.rows.empty()) fail(Err::SchemaMismatch, "no data rows");

  // Group by the config columns (everything before the per-frame columns).
  std::vector<std::string> group_cols;
  for (const std::string& c :
       {std::string("interpolation"), std::string("width"), std::string("height"),
        std::string("detector"), std::string("descriptor")})
    if (table.column(c) >= 0) group_cols.push_back(c);
  if (group_cols.empty()) fail(Err::SchemaMismatch, "no config columns to group by");

  std::map<std::string, std::vector<double>> groups;
  for (const auto& row : table.rows) {
    std::string key;
    for (const std::string& c : group_cols) {
      if (!key.empty()) key += '/';
      key += row[static_cast<std::size_t>(table.column(c))];
    }
    const std::string& cell = row[static_cast<std::size_t>(metric_col)];
    if (cell == "nan" || cell == "-nan") continue;
    groups[key].push_back(parse_double(cell));
  }
  if (groups.empty()) fail(Err::SchemaMismatch, "no finite values for metric '" + metric + "'");

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::string, BoxStats>> boxes;
  for (const auto& [key, vals] : groups) {
    BoxStats b = box_stats(vals);
    lo = std::min({lo, b.whisker_lo, b.outliers.empty() ? b.whisker_lo
                                                        : *std::min_element(b.outliers.begin(),
                                                                            b.outliers.end())});
    hi = std::max({hi, b.whisker_hi, b.outliers.empty() ? b.whisker_hi
                                                        : *std::max_element(b.outliers.begin(),
                                                                            b.outliers.end())});
    boxes.emplace_back(key, std::move(b));
  }
  if (hi <= lo) hi = lo + 1.0;

  const int box_w = 60, gap = 30, margin = 60, plot_h = 300;
  const int width = margin * 2 + static_cast<int>(boxes.size()) * (box_w + gap);
  const int height = plot_h + margin * 2;
  auto ycoord = [&](double v) {
    return margin + plot_h - (v - lo) / (hi - lo) * plot_h;
  };
  auto f = [](double v) { return format_fixed(v, 3); };

  std::ofstream os(path);
  if (!os) fail(Err::MissingFile, "cannot open for writing: " + path.string());
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\">\n";
  os << "<text x=\"" << margin << "\" y=\"" << margin / 2 << "\" font-size=\"14\">" << metric
     << "</text>\n";
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& [key, b] = boxes[i];
    const double cx = margin + static_cast<double>(i) * (box_w + gap) + box_w / 2.0;
    const double x0 = cx - box_w / 2.0, x1 = cx + box_w / 2.0;
    os << "<g data-group=\"" << key << "\" data-q1=\"" << f(b.q1) << "\" data-median=\""
       << f(b.median) << "\" data-q3=\"" << f(b.q3) << "\" data-wlo=\"" << f(b.whisker_lo)
       << "\" data-whi=\"" << f(b.whisker_hi) << "\">\n";
    os << "  <line x1=\"" << f(cx) << "\" y1=\"" << f(ycoord(b.whisker_lo)) << "\" x2=\"" << f(cx)
       << "\" y2=\"" << f(ycoord(b.q1)) << "\" stroke=\"black\"/>\n";
    os << "  <line x1=\"" << f(cx) << "\" y1=\"" << f(ycoord(b.q3)) << "\" x2=\"" << f(cx)
       << "\" y2=\"" << f(ycoord(b.whisker_hi)) << "\" stroke=\"black\"/>\n";
    os << "  <rect x=\"" << f(x0) << "\" y=\"" << f(ycoord(b.q3)) << "\" width=\"" << box_w
       << "\" height=\"" << f(ycoord(b.q1) - ycoord(b.q3)) << "\" fill=\"#7fbfff\" stroke=\"black\"/>\n";
    os << "  <line x1=\"" << f(x0) << "\" y1=\"" << f(ycoord(b.median)) << "\" x2=\"" << f(x1)
       << "\" y2=\"" << f(ycoord(b.median)) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    for (double v : b.outliers)
      os << "  <circle cx=\"" << f(cx) << "\" cy=\"" << f(ycoord(v)) << "\" r=\"2\" fill=\"black\"/>\n";
    os << "  <text x=\"" << f(x0) << "\" y=\"" << height - margin / 2 << "\" font-size=\"9\">"
       << key << "</text>\n";
    os << "</g>\n";
  }
  os << "</svg>\n";
}

// Table kind: schema-checked passthrough with canonical row order.
inline void emit_table_csv(const fs::path& path, const CsvTable& table) {
  if (table.rows.empty()) fail(Err::SchemaMismatch, "no data rows");
  std::vector<std::vector<std::string>> rows = table.rows;
  std::sort(rows.begin(), rows.end());
  std::ofstream os(path);
  if (!os) fail(Err::MissingFile, "cannot open for writing: " + path.string());
  for (std::size_t i = 0; i < table.header.size(); ++i)
    os << (i ? "," : "") << table.header[i];
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << '\n';
  }
}

}  // namespace lkp
