#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace dsim {

struct CsvTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  void add_row(std::initializer_list<std::string> cells) { rows.emplace_back(cells); }
  std::string to_string() const;
};

// Schema-stable record of one experiment run. Re-running with the same
// config and seed yields byte-identical metric output; no timestamps.
struct ExperimentReport {
  static constexpr int kSchemaVersion = 1;

  std::string experiment;
  uint64_t seed = 0;
  nlohmann::json config_echo;
  nlohmann::json metrics;
  std::vector<CsvTable> tables;
  std::vector<std::pair<std::string, bool>> checks;

  void check(const std::string& name, bool pass) { checks.emplace_back(name, pass); }
  bool all_pass() const;
  nlohmann::json to_json() const;
  std::string metrics_string() const;  // deterministic serialization

  // Writes <out>/<experiment>.json plus one CSV per table.
  void write(const std::string& out_dir, const std::string& format) const;
  void print_checks() const;
};

std::string format_double(double v);

}  // namespace dsim
