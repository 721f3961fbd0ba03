#pragma once

// Metrics emission (RFC 4180 CSV and JSON) and the per-run manifest.
// Numbers serialize at full precision with no locale involvement, so
// output bytes are reproducible.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "engram_ledger/digest.hpp"
#include "engram_ledger/errors.hpp"

namespace engram_ledger {

using MetricValue =
    std::variant<std::string, double, std::uint64_t, std::int64_t, bool>;

inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string metric_to_string(const MetricValue& v) {
  struct Fmt {
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(double d) const { return format_number(d); }
    std::string operator()(std::uint64_t u) const { return std::to_string(u); }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
  };
  return std::visit(Fmt{}, v);
}

// Homogeneous record table; one instance per output file.
class MetricTable {
 public:
  explicit MetricTable(std::vector<std::string> columns)
      : columns_(std::move(columns)) {}

  void add_row(std::vector<MetricValue> row) {
    if (row.size() != columns_.size())
      throw IoError("row width does not match columns");
    rows_.push_back(std::move(row));
  }

  std::size_t size() const { return rows_.size(); }

  std::string to_csv() const {
    std::string out;
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      if (c) out.push_back(',');
      out += csv_quote(columns_[c]);
    }
    out += "\r\n";
    for (const auto& row : rows_) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out.push_back(',');
        out += csv_quote(metric_to_string(row[c]));
      }
      out += "\r\n";
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& row : rows_) {
      nlohmann::json rec;
      for (std::size_t c = 0; c < row.size(); ++c)
        std::visit([&](const auto& v) { rec[columns_[c]] = v; }, row[c]);
      records.push_back(rec);
    }
    return nlohmann::json{{"records", records}};
  }

  void write_csv(const std::string& path) const { write_file(path, to_csv()); }

  void write_json(const std::string& path) const {
    write_file(path, to_json().dump(2) + "\n");
  }

  static void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
  }

 private:
  static std::string csv_quote(const std::string& field) {
    const bool needs = field.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs) return field;
    std::string quoted = "\"";
    for (char ch : field) {
      if (ch == '"') quoted += "\"\"";
      else quoted.push_back(ch);
    }
    quoted.push_back('"');
    return quoted;
  }

  std::vector<std::string> columns_;
  std::vector<std::vector<MetricValue>> rows_;
};

struct RunManifest {
  std::string subcommand;
  std::string config_digest;  // hex of hash_bytes over the config file bytes
  std::uint64_t seed = 0;
  std::string artifact_version = "1.0.0";
  std::vector<std::string> outputs;
  double wall_clock_seconds = 0.0;

  /// Written atomically: temp file in the target directory, then rename.
  void write(const std::string& path) const {
    nlohmann::json j;
    j["subcommand"] = subcommand;
    j["config_digest"] = config_digest;
    j["seed"] = seed;
    j["artifact_version"] = artifact_version;
    j["outputs"] = outputs;
    j["wall_clock_seconds"] = wall_clock_seconds;
    const std::string tmp = path + ".tmp";
    MetricTable::write_file(tmp, j.dump(2) + "\n");
    std::filesystem::rename(tmp, path);
  }
};

}  // namespace engram_ledger
