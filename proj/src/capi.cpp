#include "rgflow/rgflow.h"

#include <exception>
#include <new>
#include <string>

#include "rgflow/config.hpp"
#include "rgflow/experiments.hpp"
#include "rgflow/montecarlo.hpp"

struct rg_config {
  rg::ConfigSource file;
  std::vector<std::string> overrides;
  std::string json;
};

struct rg_report {
  rg::Report report;
  std::string json;
};

namespace {

thread_local std::string last_error;

rg_status to_status(rg::ErrorKind k) {
  switch (k) {
    case rg::ErrorKind::invalid: return RG_ERR_INVALID;
    case rg::ErrorKind::parse: return RG_ERR_PARSE;
    case rg::ErrorKind::numeric: return RG_ERR_NUMERIC;
    case rg::ErrorKind::budget: return RG_ERR_BUDGET;
    case rg::ErrorKind::io: return RG_ERR_IO;
    case rg::ErrorKind::internal: return RG_ERR_INTERNAL;
  }
  return RG_ERR_INTERNAL;
}

template <class F>
rg_status guarded(F&& f) {
  last_error.clear();
  try {
    f();
    return RG_OK;
  } catch (const rg::ConfigError& e) {
    last_error.clear();
    for (const auto& p : e.problems()) last_error += p + "\n";
    if (last_error.empty()) last_error = e.what();
    return to_status(e.kind());
  } catch (const rg::Error& e) {
    last_error = e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return RG_ERR_BUDGET;
  } catch (const std::exception& e) {
    last_error = e.what();
    return RG_ERR_INTERNAL;
  }
}

rg::RunConfig resolve(const rg_config* c) {
  rg::ConfigSource src = c->file;
  for (const auto& o : c->overrides) rg::apply_override(src, o);
  return rg::resolve_config(src);
}

}  // namespace

extern "C" {

const char* rg_version(void) { return "1.0.0"; }

const char* rg_last_error(void) { return last_error.c_str(); }

rg_status rg_config_new(rg_config** out) {
  if (!out) return RG_ERR_INVALID;
  return guarded([&] { *out = new rg_config(); });
}

rg_status rg_config_load(rg_config* cfg, const char* path) {
  if (!cfg || !path) return RG_ERR_INVALID;
  return guarded([&] { cfg->file = rg::load_config_file(path); });
}

rg_status rg_config_parse(rg_config* cfg, const char* text, int is_json) {
  if (!cfg || !text) return RG_ERR_INVALID;
  return guarded([&] { cfg->file = is_json ? rg::parse_json(text, "<string>") : rg::parse_ini(text, "<string>"); });
}

rg_status rg_config_set(rg_config* cfg, const char* assignment) {
  if (!cfg || !assignment) return RG_ERR_INVALID;
  return guarded([&] {
    rg::ConfigSource probe;
    rg::apply_override(probe, assignment);  // rejects malformed assignments now rather than at run time
    cfg->overrides.emplace_back(assignment);
  });
}

rg_status rg_config_json(rg_config* cfg, const char** json) {
  if (!cfg || !json) return RG_ERR_INVALID;
  return guarded([&] {
    cfg->json = rg::dump_json(resolve(cfg).echo());
    *json = cfg->json.c_str();
  });
}

void rg_config_free(rg_config* cfg) { delete cfg; }

int rg_subcommand_count(void) { return static_cast<int>(rg::subcommands().size()); }

const char* rg_subcommand_name(int i) {
  const auto& s = rg::subcommands();
  if (i < 0 || i >= static_cast<int>(s.size())) return nullptr;
  return s[static_cast<std::size_t>(i)].c_str();
}

void rg_set_workers(int n) { rg::set_workers(n); }

rg_status rg_run(const rg_config* cfg, const char* subcommand, rg_report** out) {
  if (!cfg || !subcommand || !out) return RG_ERR_INVALID;
  *out = nullptr;
  return guarded([&] {
    if (!rg::is_subcommand(subcommand)) rg::fail(rg::ErrorKind::invalid, std::string("unknown subcommand ") + subcommand);
    auto r = rg::run_subcommand(subcommand, resolve(cfg));
    *out = new rg_report{std::move(r), {}};
  });
}

int rg_report_passed(const rg_report* rep) { return rep && rep->report.passed() ? 1 : 0; }

const char* rg_report_json(rg_report* rep) {
  if (!rep) return nullptr;
  rep->json = rg::dump_json(rep->report.to_json());
  return rep->json.c_str();
}

rg_status rg_report_write(const rg_report* rep, const char* dir, int json, int csv) {
  if (!rep || !dir) return RG_ERR_INVALID;
  return guarded([&] { rep->report.write(dir, json != 0, csv != 0); });
}

void rg_report_free(rg_report* rep) { delete rep; }

}  // extern "C"
