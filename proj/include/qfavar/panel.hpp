#pragma once

// Panel loading, validation and transformation. Canonical column order is
// indicator-major: all n countries of indicator 1, then indicator 2, ...
// Global series follow in a separate block.

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qfavar/shrinkage.hpp"  // Vector/Matrix aliases

namespace qfavar {

struct PanelData {
  Matrix values;   // T x (m*n), indicator-major
  Matrix globals;  // T x k
  std::vector<std::string> indicator_labels;  // m
  std::vector<std::string> country_labels;    // n
  std::vector<std::string> global_labels;     // k
  std::vector<std::string> time_index;        // T, ISO-ish date stamps, strictly increasing

  int m() const { return static_cast<int>(indicator_labels.size()); }
  int n() const { return static_cast<int>(country_labels.size()); }
  int k() const { return static_cast<int>(global_labels.size()); }
  int T() const { return static_cast<int>(values.rows()); }

  int col(int indicator, int country) const { return indicator * n() + country; }
  std::string series_label(int c) const {
    return indicator_labels[static_cast<std::size_t>(c / n())] + "." +
           country_labels[static_cast<std::size_t>(c % n())];
  }

  void validate() const {
    if (values.rows() != static_cast<long>(time_index.size()))
      throw std::invalid_argument("PanelData: time index length mismatch");
    if (globals.rows() != values.rows() && k() > 0)
      throw std::invalid_argument("PanelData: globals row mismatch");
    if (values.cols() != static_cast<long>(indicator_labels.size() * country_labels.size()))
      throw std::invalid_argument("PanelData: column count mismatch");
    if (!values.allFinite() || (k() > 0 && !globals.allFinite()))
      throw std::invalid_argument("PanelData: missing or non-finite values");
    for (std::size_t t = 1; t < time_index.size(); ++t)
      if (!(time_index[t - 1] < time_index[t]))
        throw std::invalid_argument("PanelData: time index not strictly increasing at row " +
                                    std::to_string(t));
  }
};

enum class Transform { level, yoy_log_growth, mom_log_growth };

struct TransformSpec {
  // per-series code, keyed by column label (INDICATOR.COUNTRY or global name);
  // series not listed default to `level`.
  std::map<std::string, Transform> codes;
  Transform fallback = Transform::level;

  Transform code_for(const std::string& label) const {
    const auto it = codes.find(label);
    return it == codes.end() ? fallback : it->second;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace detail

// CSV schema: one date column (first), one column per (indicator, country)
// series named INDICATOR.COUNTRY, and one column per global series (bare
// name, or GLOBAL.NAME). Columns are reordered to indicator-major stacking.
inline PanelData load_panel(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("load_panel: cannot open " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_panel: empty file " + csv_path);
  const auto header = detail::split_csv_line(line);
  if (header.size() < 2) throw std::runtime_error("load_panel: need a date column plus data columns");

  struct ColInfo {
    bool is_global;
    std::string indicator, country, global_name;
  };
  std::vector<ColInfo> cols;
  std::vector<std::string> indicators, countries, globals;
  auto index_of = [](std::vector<std::string>& v, const std::string& s) {
    auto it = std::find(v.begin(), v.end(), s);
    if (it != v.end()) return static_cast<int>(it - v.begin());
    v.push_back(s);
    return static_cast<int>(v.size()) - 1;
  };
  for (std::size_t c = 1; c < header.size(); ++c) {
    const std::string& name = header[c];
    if (name.empty()) throw std::runtime_error("load_panel: empty column name at position " + std::to_string(c));
    const auto dot = name.find('.');
    if (dot == std::string::npos) {
      index_of(globals, name);
      cols.push_back({true, "", "", name});
    } else {
      const std::string ind = name.substr(0, dot), ctry = name.substr(dot + 1);
      if (ind == "GLOBAL") {
        index_of(globals, ctry);
        cols.push_back({true, "", "", ctry});
      } else {
        index_of(indicators, ind);
        index_of(countries, ctry);
        cols.push_back({false, ind, ctry, ""});
      }
    }
  }

  std::vector<std::string> dates;
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw std::runtime_error("load_panel: ragged row at line " + std::to_string(lineno));
    dates.push_back(cells[0]);
    std::vector<double> row(cells.size() - 1);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      if (cells[c].empty() || cells[c] == "NA" || cells[c] == "NaN" || cells[c] == "nan")
        throw std::runtime_error("load_panel: missing value at line " + std::to_string(lineno) +
                                 ", column " + header[c]);
      std::size_t pos = 0;
      double v;
      try {
        v = std::stod(cells[c], &pos);
      } catch (const std::exception&) {
        throw std::runtime_error("load_panel: unparseable value at line " + std::to_string(lineno) +
                                 ", column " + header[c]);
      }
      if (!std::isfinite(v))
        throw std::runtime_error("load_panel: missing value at line " + std::to_string(lineno) +
                                 ", column " + header[c]);
      row[c - 1] = v;
    }
    rows.push_back(std::move(row));
  }
  const int T = static_cast<int>(rows.size());
  const int m = static_cast<int>(indicators.size());
  const int n = static_cast<int>(countries.size());
  const int k = static_cast<int>(globals.size());
  if (T == 0) throw std::runtime_error("load_panel: no data rows");

  PanelData p;
  p.indicator_labels = indicators;
  p.country_labels = countries;
  p.global_labels = globals;
  p.time_index = dates;
  p.values = Matrix::Constant(T, m * n, std::numeric_limits<double>::quiet_NaN());
  p.globals.resize(T, k);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const auto& ci = cols[c];
    int target;
    if (ci.is_global) {
      target = static_cast<int>(std::find(globals.begin(), globals.end(), ci.global_name) - globals.begin());
      for (int t = 0; t < T; ++t) p.globals(t, target) = rows[static_cast<std::size_t>(t)][c];
    } else {
      const int i = static_cast<int>(std::find(indicators.begin(), indicators.end(), ci.indicator) - indicators.begin());
      const int j = static_cast<int>(std::find(countries.begin(), countries.end(), ci.country) - countries.begin());
      target = i * n + j;
      for (int t = 0; t < T; ++t) p.values(t, target) = rows[static_cast<std::size_t>(t)][c];
    }
  }
  // every (indicator, country) pair must be present: balanced panel
  for (int c = 0; c < m * n; ++c)
    if (std::isnan(p.values(0, c)))
      throw std::runtime_error("load_panel: panel is not a complete indicator x country grid, missing " +
                               p.series_label(c));
  p.validate();
  return p;
}

// yoy: x_t = 100 (log P_t - log P_{t-12}); mom: x_t = 100 (log P_t - log P_{t-1});
// level: identity. All series trimmed to the common sample.
inline PanelData transform_series(const PanelData& panel, const TransformSpec& spec) {
  panel.validate();
  const int T = panel.T();
  auto lead_needed = [](Transform tr) {
    switch (tr) {
      case Transform::yoy_log_growth: return 12;
      case Transform::mom_log_growth: return 1;
      default: return 0;
    }
  };
  int max_lead = 0;
  const int total = panel.m() * panel.n() + panel.k();
  auto label_at = [&](int c) {
    return c < panel.m() * panel.n() ? panel.series_label(c)
                                     : panel.global_labels[static_cast<std::size_t>(c - panel.m() * panel.n())];
  };
  auto value_at = [&](int t, int c) {
    return c < panel.m() * panel.n() ? panel.values(t, c)
                                     : panel.globals(t, c - panel.m() * panel.n());
  };
  for (int c = 0; c < total; ++c) max_lead = std::max(max_lead, lead_needed(spec.code_for(label_at(c))));
  if (T <= max_lead)
    throw std::invalid_argument("transform_series: not enough leading observations (need > " +
                                std::to_string(max_lead) + ")");

  PanelData out = panel;
  out.values.resize(T - max_lead, panel.values.cols());
  out.globals.resize(T - max_lead, panel.globals.cols());
  out.time_index.assign(panel.time_index.begin() + max_lead, panel.time_index.end());
  for (int c = 0; c < total; ++c) {
    const Transform tr = spec.code_for(label_at(c));
    const int lag = lead_needed(tr);
    for (int t = max_lead; t < T; ++t) {
      double x;
      if (tr == Transform::level) {
        x = value_at(t, c);
      } else {
        const double cur = value_at(t, c), prev = value_at(t - lag, c);
        if (cur <= 0.0 || prev <= 0.0)
          throw std::invalid_argument("transform_series: nonpositive value under log transform in " +
                                      label_at(c));
        x = 100.0 * (std::log(cur) - std::log(prev));
      }
      if (c < panel.m() * panel.n())
        out.values(t - max_lead, c) = x;
      else
        out.globals(t - max_lead, c - panel.m() * panel.n()) = x;
    }
  }
  out.validate();
  return out;
}

inline void save_panel(const PanelData& p, const std::string& csv_path) {
  std::ofstream out(csv_path);
  if (!out) throw std::runtime_error("save_panel: cannot write " + csv_path);
  out << "date";
  for (int c = 0; c < p.m() * p.n(); ++c) out << "," << p.series_label(c);
  for (const auto& g : p.global_labels) out << "," << g;
  out << "\n";
  out.precision(17);
  for (int t = 0; t < p.T(); ++t) {
    out << p.time_index[static_cast<std::size_t>(t)];
    for (int c = 0; c < p.values.cols(); ++c) out << "," << p.values(t, c);
    for (int c = 0; c < p.globals.cols(); ++c) out << "," << p.globals(t, c);
    out << "\n";
  }
}

}  // namespace qfavar
