#include "rgflow/report.hpp"

#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "rgflow/error.hpp"

namespace rg {

namespace {

using Json = nlohmann::ordered_json;

std::string quote(const std::string& s) {
  // reuse the library's string escaping
  return Json(s).dump();
}

std::string number(double v) {
  if (!std::isfinite(v)) return "null";
  std::string s = fmt::format("{:.17g}", v);
  // keep integral values floating point so a parse and re-dump cannot change them (-0 especially)
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

void emit(std::string& out, const Json& j, int indent, int depth) {
  auto newline = [&](int dd) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * dd), ' ');
  };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += quote(k);
        out += indent < 0 ? ":" : ": ";
        emit(out, v, indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        emit(out, v, indent, depth + 1);
      }
      newline(depth);
      out += ']';
      return;
    }
    case Json::value_t::number_float:
      out += number(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

std::string csv_cell(const Json& v) {
  if (v.is_number_float()) {
    double x = v.get<double>();
    return std::isfinite(x) ? fmt::format("{:.17g}", x) : "";
  }
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
  if (v.is_null()) return "";
  return v.dump();
}

}  // namespace

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string dump_json(const nlohmann::ordered_json& j, int indent) {
  std::string out;
  emit(out, j, indent, 0);
  return out;
}

void Table::add(nlohmann::ordered_json row) {
  require(row.is_array() && row.size() == columns.size(),
          fmt::format("table {}: row has {} cells, expected {}", name, row.size(), columns.size()));
  rows.push_back(std::move(row));
}

std::string Table::csv() const {
  std::string out;
  for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
  out += '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + csv_cell(r[i]);
    out += '\n';
  }
  return out;
}

Report::Report(std::string subcommand, nlohmann::ordered_json config, std::string config_hash)
    : subcommand_(std::move(subcommand)), config_(std::move(config)), hash_(std::move(config_hash)) {}

Table& Report::table(const std::string& name, std::vector<std::string> columns) {
  for (auto& t : tables_)
    if (t.name == name) return t;
  tables_.push_back({name, std::move(columns), {}});
  return tables_.back();
}

void Report::check(const std::string& name, double value, double threshold, const std::string& relation, bool pass) {
  checks_.push_back({name, value, threshold, relation, pass});
}

bool Report::passed() const {
  for (const auto& c : checks_)
    if (!c.pass) return false;
  return true;
}

nlohmann::ordered_json Report::to_json() const {
  Json j;
  j["subcommand"] = subcommand_;
  j["status"] = passed() ? "pass" : "fail";
  j["config_hash"] = hash_;
  j["config"] = config_;
  Json checks = Json::array();
  for (const auto& c : checks_) {
    Json cj;
    cj["name"] = c.name;
    cj["value"] = c.value;
    cj["threshold"] = c.threshold;
    cj["relation"] = c.relation;
    cj["pass"] = c.pass;
    checks.push_back(cj);
  }
  j["checks"] = checks;
  j["results"] = results_;
  Json tables = Json::object();
  for (const auto& t : tables_) {
    Json tj;
    tj["columns"] = t.columns;
    tj["rows"] = Json::array();
    for (const auto& r : t.rows) tj["rows"].push_back(r);
    tables[t.name] = tj;
  }
  j["tables"] = tables;
  return j;
}

std::vector<std::string> Report::write(const std::string& dir, bool json, bool csv) const {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, fmt::format("cannot create {}: {}", dir, ec.message()));
  std::vector<std::string> paths;
  auto put = [&](const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
    out.close();
    if (!out) throw Error(ErrorKind::io, "cannot write " + p.string());
    paths.push_back(p.string());
  };
  if (json) put(fs::path(dir) / (subcommand_ + ".json"), dump_json(to_json()) + "\n");
  if (csv)
    for (const auto& t : tables_) put(fs::path(dir) / (subcommand_ + "_" + t.name + ".csv"), t.csv());
  return paths;
}

}  // namespace rg
