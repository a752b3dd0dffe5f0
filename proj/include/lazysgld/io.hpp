#pragma once

// File formats: trajectory CSV, dataset CSV and JSON, all written atomically
// through a temporary file in the destination directory.

#include "lazysgld/core.hpp"
#include "lazysgld/diagnostics.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace lazysgld {

namespace fs = std::filesystem;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 17 significant digits, so every double round-trips; NaN is always "nan".
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << contents;
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline constexpr const char* kTrajectoryHeader = "t,gap,dist,lambda_min,martingale_E,exited";

inline std::string trajectory_csv(const TrajectoryRecord& rec) {
  std::string s = kTrajectoryHeader;
  s += '\n';
  for (std::size_t i = 0; i < rec.size(); ++i) {
    s += format_double(rec.times[i]) + ',' + format_double(rec.gap[i]) + ',' +
         format_double(rec.dist[i]) + ',' + format_double(rec.lambda_min[i]) + ',' +
         format_double(rec.martingale_E[i]) + ',' + (rec.exited_flag[i] ? "1" : "0") + '\n';
  }
  return s;
}

inline void write_trajectory_csv(const fs::path& path, const TrajectoryRecord& rec) {
  write_atomic(path, trajectory_csv(rec));
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(where + ": not a number: '" + s + "'");
  }
}

}  // namespace detail

/// Reads back a trajectory CSV written by `trajectory_csv`.
inline TrajectoryRecord read_trajectory_csv(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != kTrajectoryHeader) {
    throw IoError(path.string() + ": missing trajectory header");
  }
  TrajectoryRecord rec;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != 6) throw IoError(path.string() + ": expected 6 columns");
    rec.times.push_back(detail::parse_double(cells[0], path.string()));
    rec.gap.push_back(detail::parse_double(cells[1], path.string()));
    rec.dist.push_back(detail::parse_double(cells[2], path.string()));
    rec.lambda_min.push_back(detail::parse_double(cells[3], path.string()));
    rec.martingale_E.push_back(detail::parse_double(cells[4], path.string()));
    rec.exited_flag.push_back(cells[5] == "1" ? 1 : 0);
    if (cells[5] == "1" && !rec.exited) {
      rec.exited = true;
      rec.tau = rec.times.back();
    }
  }
  return rec;
}

/// Columns x0..x{d-1}, y.
inline std::string dataset_csv(const Dataset& data) {
  std::string s;
  for (Index k = 0; k < data.input_dim(); ++k) s += "x" + std::to_string(k) + ',';
  s += "y\n";
  for (Index i = 0; i < data.size(); ++i) {
    for (Index k = 0; k < data.input_dim(); ++k) s += format_double(data.inputs(i, k)) + ',';
    s += format_double(data.targets(i)) + '\n';
  }
  return s;
}

inline void write_dataset_csv(const fs::path& path, const Dataset& data) {
  write_atomic(path, dataset_csv(data));
}

/// Any header is accepted; the last column is the target.
inline Dataset read_dataset_csv(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
  const std::size_t cols = detail::split(line, ',').size();
  if (cols < 2) throw IoError(path.string() + ": need at least one input column and a target");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.back() == '\r') line.pop_back();
    const auto cells = detail::split(line, ',');
    if (cells.size() != cols) throw IoError(path.string() + ": ragged row");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(detail::parse_double(c, path.string()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path.string() + ": no data rows");
  Dataset data;
  data.inputs.resize(static_cast<Index>(rows.size()), static_cast<Index>(cols - 1));
  data.targets.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k + 1 < cols; ++k) {
      data.inputs(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
    }
    data.targets(static_cast<Index>(i)) = rows[i].back();
  }
  return data;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  write_atomic(path, j.dump(2) + '\n');
}

}  // namespace lazysgld
