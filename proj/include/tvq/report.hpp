#pragma once

// JSON and plain-text renderings of analysis results. JSON is the
// machine-readable form; the tables carry the same numbers for people.

#include <cstddef>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvq/analysis.hpp"
#include "tvq/taskvec.hpp"

namespace tvq {

using Json = nlohmann::ordered_json;

inline Json to_json(const RangeStats& s) {
  Json tensors = Json::array();
  for (const auto& t : s.tensors) {
    tensors.push_back({{"name", t.name},
                       {"count", t.count},
                       {"min", t.min},
                       {"max", t.max},
                       {"range", t.range},
                       {"mean", t.mean},
                       {"stddev", t.stddev}});
  }
  return Json{{"count", s.count},
              {"global_min", s.global_min},
              {"global_max", s.global_max},
              {"global_range", s.global_range()},
              {"histogram", s.histogram},
              {"tensors", std::move(tensors)}};
}

inline Json to_json(const ErrorReport& e) {
  return Json{{"l2", e.l2}, {"max_abs", e.max_abs}, {"normalized_l2", e.normalized_l2}};
}

inline Json to_json(std::span<const PathError> rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    Json j{{"path", r.path}};
    if (r.path == "RTVQ") {
      j["b_base"] = r.b_base;
      j["b_offset"] = r.b_offset;
    } else {
      j["bits"] = r.bits;
    }
    j["effective_bits"] = r.effective_bits;
    j["normalized_l2"] = r.normalized_l2;
    j["l2"] = r.l2;
    j["max_abs"] = r.max_abs;
    out.push_back(std::move(j));
  }
  return out;
}

inline Json to_json(const StorageReport& r) {
  Json files = Json::array();
  for (const auto& a : r.artifacts) {
    files.push_back({{"name", a.name},
                     {"payload_bytes", a.payload_bytes},
                     {"header_bytes", a.header_bytes},
                     {"total_bytes", a.total_bytes}});
  }
  return Json{{"artifacts", std::move(files)},
              {"payload_bytes", r.payload_bytes},
              {"header_bytes", r.header_bytes},
              {"total_bytes", r.total_bytes},
              {"baseline_fp32_bytes", r.baseline_fp32_bytes},
              {"ratio", r.ratio},
              {"per_task_effective_bits", r.per_task_effective_bits}};
}

/// Left-aligned first column, right-aligned numeric columns.
class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header) { rows_.push_back(std::move(header)); }

  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

  [[nodiscard]] std::string str() const {
    std::vector<std::size_t> width;
    for (const auto& row : rows_) {
      if (width.size() < row.size()) width.resize(row.size(), 0);
      for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream os;
    for (const auto& row : rows_) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) os << "  ";
        if (c == 0) {
          os << std::left << std::setw(static_cast<int>(width[c])) << row[c];
        } else {
          os << std::right << std::setw(static_cast<int>(width[c])) << row[c];
        }
      }
      os << '\n';
    }
    return os.str();
  }

 private:
  std::vector<std::vector<std::string>> rows_;
};

inline std::string fmt_num(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

inline std::string to_table(const RangeStats& s) {
  TextTable t({"tensor", "count", "min", "max", "range", "mean", "stddev"});
  for (const auto& r : s.tensors) {
    t.add({r.name, std::to_string(r.count), fmt_num(r.min), fmt_num(r.max), fmt_num(r.range), fmt_num(r.mean),
           fmt_num(r.stddev)});
  }
  t.add({"(global)", std::to_string(s.count), fmt_num(s.global_min), fmt_num(s.global_max),
         fmt_num(s.global_range()), "", ""});
  return t.str();
}

inline std::string to_table(std::span<const PathError> rows) {
  TextTable t({"path", "config", "eff_bits", "normalized_l2", "l2", "max_abs"});
  for (const auto& r : rows) {
    const std::string cfg = r.path == "RTVQ" ? "B" + std::to_string(r.b_base) + "O" + std::to_string(r.b_offset)
                                             : "INT" + std::to_string(r.bits);
    t.add({r.path, cfg, fmt_num(r.effective_bits, 4), fmt_num(r.normalized_l2), fmt_num(r.l2), fmt_num(r.max_abs)});
  }
  return t.str();
}

inline std::string to_table(const StorageReport& r) {
  TextTable t({"file", "payload", "header", "total"});
  for (const auto& a : r.artifacts) {
    t.add({a.name, std::to_string(a.payload_bytes), std::to_string(a.header_bytes), std::to_string(a.total_bytes)});
  }
  t.add({"(total)", std::to_string(r.payload_bytes), std::to_string(r.header_bytes), std::to_string(r.total_bytes)});
  return t.str() + "baseline fp32 bytes: " + std::to_string(r.baseline_fp32_bytes) +
         "\nratio: " + fmt_num(r.ratio) + "\neffective bits per task: " + fmt_num(r.per_task_effective_bits) + "\n";
}

inline std::string to_table(const Matrix& m, std::span<const std::string> names) {
  std::vector<std::string> header{""};
  header.insert(header.end(), names.begin(), names.end());
  TextTable t(std::move(header));
  for (std::size_t i = 0; i < m.size(); ++i) {
    std::vector<std::string> row{names[i]};
    for (double v : m[i]) row.push_back(fmt_num(v, 4));
    t.add(std::move(row));
  }
  return t.str();
}

}  // namespace tvq
