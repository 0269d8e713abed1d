// Batch front-end: rgflow <subcommand> [config] [--set section.key=value ...]
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "rgflow/rgflow.h"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitError = 1;
constexpr int kExitTolerance = 2;
constexpr int kExitUsage = 64;

int report_error(const char* stage, int code) {
  std::fprintf(stderr, "rgflow: %s failed:\n%s\n", stage, rg_last_error());
  return code;
}

struct ConfigGuard {
  rg_config* c = nullptr;
  ~ConfigGuard() { rg_config_free(c); }
};

struct ReportGuard {
  rg_report* r = nullptr;
  ~ReportGuard() { rg_report_free(r); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Renormalisation group flow experiments for gradient models"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::vector<std::string> overrides;
  int workers = -1;
  bool print = false, no_json = false, no_csv = false;

  for (int i = 0; i < rg_subcommand_count(); ++i) {
    auto* sub = app.add_subcommand(rg_subcommand_name(i));
    sub->add_option("config,-c,--config", config_path, "INI or JSON configuration file");
    sub->add_option("-s,--set", overrides, "override a key, section.key=value");
    sub->add_option("-o,--out-dir", out_dir, "directory for report files");
    sub->add_option("-j,--workers", workers, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
    sub->add_flag("--no-json", no_json, "skip the JSON report");
    sub->add_flag("--no-csv", no_csv, "skip the CSV tables");
    sub->add_flag("-p,--print", print, "print the JSON report on stdout");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  const std::string subcommand = app.get_subcommands().front()->get_name();

  ConfigGuard cfg;
  if (rg_config_new(&cfg.c) != RG_OK) return report_error("setup", kExitError);
  if (!config_path.empty() && rg_config_load(cfg.c, config_path.c_str()) != RG_OK)
    return report_error("reading configuration", kExitUsage);
  if (!out_dir.empty()) overrides.push_back("output.dir=" + out_dir);
  if (workers >= 0) overrides.push_back("run.workers=" + std::to_string(workers));
  for (const auto& o : overrides)
    if (rg_config_set(cfg.c, o.c_str()) != RG_OK) return report_error("applying --set", kExitUsage);

  const char* echo = nullptr;
  if (rg_config_json(cfg.c, &echo) != RG_OK) return report_error("validating configuration", kExitUsage);
  const auto resolved = nlohmann::json::parse(echo);
  const auto& output = resolved.at("output");

  if (const char* env = std::getenv("RG_WORKERS"); env && *env) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 0) {
      std::fprintf(stderr, "rgflow: RG_WORKERS must be a non-negative integer, got '%s'\n", env);
      return kExitUsage;
    }
    if (rg_config_set(cfg.c, ("run.workers=" + std::to_string(n)).c_str()) != RG_OK)
      return report_error("applying RG_WORKERS", kExitUsage);
  }

  ReportGuard rep;
  if (rg_run(cfg.c, subcommand.c_str(), &rep.r) != RG_OK) return report_error(subcommand.c_str(), kExitError);
  const int json = output.at("json").get<bool>() && !no_json;
  const int csv = output.at("csv").get<bool>() && !no_csv;
  if ((json || csv) && rg_report_write(rep.r, output.at("dir").get<std::string>().c_str(), json, csv) != RG_OK)
    return report_error("writing report", kExitError);
  if (print) std::fputs(rg_report_json(rep.r), stdout);

  const bool pass = rg_report_passed(rep.r) != 0;
  std::fprintf(stderr, "rgflow %s: %s\n", subcommand.c_str(), pass ? "pass" : "tolerance failure");
  return pass ? kExitPass : kExitTolerance;
}
