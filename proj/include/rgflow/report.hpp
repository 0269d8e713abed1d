#pragma once

#include <json.hpp>

#include <cstdint>
#include <deque>
#include <string>
#include <string_view>
#include <vector>

namespace rg {

uint64_t fnv1a(std::string_view s);

// Deterministic JSON text: insertion order kept, floats as %.17g, non-finite floats as null.
// indent < 0 gives the compact form.
std::string dump_json(const nlohmann::ordered_json& j, int indent = 2);

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<nlohmann::ordered_json> rows;  // arrays matching columns

  void add(nlohmann::ordered_json row);
  std::string csv() const;
};

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  std::string relation;  // how value is compared with threshold
  bool pass = false;
};

class Report {
 public:
  Report(std::string subcommand, nlohmann::ordered_json config, std::string config_hash);

  Table& table(const std::string& name, std::vector<std::string> columns);
  const std::deque<Table>& tables() const { return tables_; }
  void check(const std::string& name, double value, double threshold, const std::string& relation, bool pass);
  const std::vector<Check>& checks() const { return checks_; }
  nlohmann::ordered_json& results() { return results_; }
  const nlohmann::ordered_json& results() const { return results_; }
  bool passed() const;
  const std::string& subcommand() const { return subcommand_; }

  nlohmann::ordered_json to_json() const;
  // writes <dir>/<subcommand>.json and <dir>/<subcommand>_<table>.csv; returns the paths
  std::vector<std::string> write(const std::string& dir, bool json, bool csv) const;

 private:
  std::string subcommand_;
  nlohmann::ordered_json config_;
  std::string hash_;
  std::deque<Table> tables_;  // stable references from table()
  std::vector<Check> checks_;
  nlohmann::ordered_json results_ = nlohmann::ordered_json::object();
};

}  // namespace rg
