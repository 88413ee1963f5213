#pragma once

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <locale>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "geometry.hpp"

#ifndef LLC_GIT_DESCRIBE
#define LLC_GIT_DESCRIBE "unknown"
#endif

namespace llc::io {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";
inline std::string git_describe() { return LLC_GIT_DESCRIBE; }

/// Locale-independent float text with 17 significant digits.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s << std::setprecision(17) << v;
  return s.str();
}

/// Minimal CSV table writer: header row then numeric rows.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

  void row(const std::vector<double>& values) {
    if (values.size() != header_.size()) throw InvalidInput("csv: row width does not match header");
    rows_.push_back(values);
  }

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < header_.size(); ++i) out += (i ? "," : "") + header_[i];
    out += '\n';
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + fmt(r[i]);
      out += '\n';
    }
    return out;
  }

  std::size_t size() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<double>> rows_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path.string());
  os << text;
  if (!os) throw Error("write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInput("cannot open: " + path.string());
  std::ostringstream s;
  s << is.rdbuf();
  return s.str();
}

/// Cloud CSV: header `x0,x1,...`, one point per row.
inline std::string cloud_to_csv(const PointCloud& c) {
  std::vector<std::string> header;
  for (int i = 0; i < c.dim(); ++i) header.push_back("x" + std::to_string(i));
  CsvWriter w(header);
  for (const auto& p : c.points) w.row(p);
  return w.str();
}

/// Parses a cloud CSV. A non-numeric first row is treated as a header.
inline PointCloud cloud_from_csv(const std::string& text, Metric metric_kind = Metric::euclidean(2)) {
  std::istringstream is(text);
  is.imbue(std::locale::classic());
  std::string line;
  std::vector<Point> pts;
  int dim = -1;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Point p;
    std::istringstream ls(line);
    ls.imbue(std::locale::classic());
    std::string cell;
    bool numeric = true;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size() && cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
        p.push_back(v);
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw InvalidInput("cloud csv: non-numeric row: " + line);
    }
    first = false;
    if (dim < 0) dim = static_cast<int>(p.size());
    if (static_cast<int>(p.size()) != dim) throw InvalidInput("cloud csv: ragged rows");
    pts.push_back(std::move(p));
  }
  Metric m = metric_kind;
  m.dim = dim < 0 ? metric_kind.dim : dim;
  return PointCloud(m, std::move(pts));
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

/// Manifest skeleton shared by every artifact.
inline json manifest(const std::string& command, const json& config, std::uint64_t seed) {
  return json{{"command", command},         {"config", config},
              {"seed", seed},               {"version", kVersion},
              {"git_describe", git_describe()}, {"timestamp", utc_timestamp()}};
}

}  // namespace llc::io
