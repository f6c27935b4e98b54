#pragma once

// Per-step diagnostic records and their CSV form. Floats are written with 17
// significant digits so that verify re-reads exactly what was computed;
// quantities that do not apply to a run are written as nan.

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "cagg/error.hpp"
#include "cagg/field_io.hpp"

namespace cagg {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline constexpr std::array<const char*, 12> kTimeSeriesColumns = {
    "t", "mass", "m2", "com_x", "com_y", "e_inf", "e_m", "asymmetry", "f_value", "support_radius", "excess_mass",
    "w2_to_prev"};

struct TimeSeriesRow {
  double t = kNaN;
  double mass = kNaN;
  double m2 = kNaN;
  double com_x = kNaN;
  double com_y = kNaN;
  double e_inf = kNaN;
  double e_m = kNaN;
  double asymmetry = kNaN;
  double f_value = kNaN;
  double support_radius = kNaN;
  double excess_mass = kNaN;
  double w2_to_prev = kNaN;

  std::array<double, 12> values() const {
    return {t, mass, m2, com_x, com_y, e_inf, e_m, asymmetry, f_value, support_radius, excess_mass, w2_to_prev};
  }
  static TimeSeriesRow from_values(const std::array<double, 12>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10], v[11]};
  }
};

inline std::string join_header(const std::vector<std::string>& cols) {
  std::string s;
  for (std::size_t k = 0; k < cols.size(); ++k) s += (k ? "," : "") + cols[k];
  return s;
}

inline std::string timeseries_header() {
  return join_header(std::vector<std::string>(kTimeSeriesColumns.begin(), kTimeSeriesColumns.end()));
}

inline std::string format_csv_value(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return detail::format_double(v);
}

/// Numeric CSV with a named header row.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t k = 0; k < columns.size(); ++k)
      if (columns[k] == name) return k;
    throw config_error("table has no column '" + name + "'");
  }
  std::vector<double> values(const std::string& name) const {
    const auto k = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[k]);
    return out;
  }
};

class CsvWriter {
 public:
  CsvWriter() = default;
  CsvWriter(const std::string& path, std::vector<std::string> columns)
      : os_(path), path_(path), width_(columns.size()) {
    if (!os_) throw std::runtime_error("cannot open " + path + " for writing");
    os_ << join_header(columns) << '\n';
    os_.flush();
  }

  void write(const std::vector<double>& row) {
    if (row.size() != width_) throw std::logic_error("CsvWriter: row width does not match header");
    std::string line;
    for (std::size_t k = 0; k < row.size(); ++k) line += (k ? "," : "") + format_csv_value(row[k]);
    os_ << line << '\n';
    os_.flush();
    if (!os_) throw std::runtime_error("write to " + path_ + " failed");
  }

 private:
  std::ofstream os_;
  std::string path_;
  std::size_t width_ = 0;
};

/// Time-series CSV; rejects rows whose t does not increase.
class TimeSeriesWriter {
 public:
  explicit TimeSeriesWriter(const std::string& path)
      : csv_(path, std::vector<std::string>(kTimeSeriesColumns.begin(), kTimeSeriesColumns.end())) {}

  void write(const TimeSeriesRow& r) {
    if (!(r.t > last_t_)) throw std::logic_error("TimeSeriesWriter: t must be strictly increasing");
    last_t_ = r.t;
    const auto v = r.values();
    csv_.write(std::vector<double>(v.begin(), v.end()));
  }

 private:
  CsvWriter csv_;
  double last_t_ = -std::numeric_limits<double>::infinity();
};

inline Table read_table(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw config_error("cannot open " + path);
  Table t;
  std::string line;
  if (!std::getline(is, line)) throw config_error(path + ": empty file");
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) t.columns.push_back(c);
  }
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (end == c.c_str() || *end != '\0') throw config_error(path + ": bad number '" + c + "'", lineno);
      row.push_back(v);
    }
    if (row.size() != t.columns.size()) throw config_error(path + ": wrong number of fields", lineno);
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::vector<TimeSeriesRow> read_timeseries(const std::string& path) {
  const Table t = read_table(path);
  if (join_header(t.columns) != timeseries_header())
    throw config_error(path + ": header is not '" + timeseries_header() + "'", 1);
  std::vector<TimeSeriesRow> out;
  for (const auto& r : t.rows) {
    std::array<double, 12> v{};
    std::copy(r.begin(), r.end(), v.begin());
    out.push_back(TimeSeriesRow::from_values(v));
  }
  return out;
}

/// The artifact contract: CSV header and field-dump layout.
inline std::string dump_schema() {
  std::string s;
  s += "timeseries.csv\n";
  s += timeseries_header() + "\n";
  s += "  one row per recorded step, t strictly increasing, values %.17g, nan where not applicable\n";
  s += "field dumps (*.field)\n";
  s += std::string(kFieldMagic) + " <nx> <ny> <h> <ox> <oy>\n";
  s += "  one ASCII header line, then nx*ny little-endian IEEE-754 float64 values, row-major,\n";
  s += "  value (i, j) at offset 8 (j nx + i), cell centre (ox + i h, oy + j h)\n";
  return s;
}

}  // namespace cagg
