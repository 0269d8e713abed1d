// Exercises the C interface only.
#include <cstdio>
#include <cstring>
#include <string>

#include "rgflow/rgflow.h"

namespace {

int failures = 0;

void expect(bool ok, const char* what) {
  if (!ok) {
    std::fprintf(stderr, "FAILED: %s (last error: %s)\n", what, rg_last_error());
    ++failures;
  }
}

}  // namespace

int main() {
  rg_config* cfg = nullptr;
  expect(rg_config_new(&cfg) == RG_OK, "create config");
  expect(rg_config_parse(cfg, "[torus]\nN = 2\n", 0) == RG_OK, "parse INI text");
  expect(rg_config_set(cfg, "run.N_list=1,2") == RG_OK, "override");
  expect(rg_config_set(cfg, "garbage") == RG_ERR_PARSE, "malformed override is a parse error");
  expect(std::strlen(rg_last_error()) > 0, "error message is set");

  const char* json = nullptr;
  expect(rg_config_json(cfg, &json) == RG_OK && std::string(json).find("\"N\": 2") != std::string::npos,
         "resolved configuration echoes N");

  expect(rg_subcommand_count() == 7, "seven subcommands");
  expect(rg_subcommand_name(7) == nullptr, "out of range subcommand name");

  rg_report* rep = nullptr;
  expect(rg_run(cfg, "frd-check", &rep) == RG_OK, "run frd-check");
  expect(rep && rg_report_passed(rep) == 1, "frd-check passes");
  expect(rep && std::string(rg_report_json(rep)).find("\"subcommand\": \"frd-check\"") != std::string::npos,
         "report JSON names the subcommand");
  rg_report_free(rep);

  rep = nullptr;
  expect(rg_run(cfg, "nonsense", &rep) == RG_ERR_INVALID && rep == nullptr, "unknown subcommand");

  rg_config* bad = nullptr;
  rg_config_new(&bad);
  expect(rg_config_parse(bad, "{\"torus\": {\"L\": 4}}", 1) == RG_OK, "JSON parses");
  expect(rg_config_json(bad, &json) == RG_ERR_PARSE, "even L is rejected");
  expect(std::string(rg_last_error()).find("torus.L") != std::string::npos, "diagnostic names the key");
  expect(rg_config_load(bad, "/nonexistent.ini") == RG_ERR_IO, "missing file");
  rg_config_free(bad);

  expect(rg_run(nullptr, "frd-check", &rep) == RG_ERR_INVALID, "null config");
  rg_config_free(cfg);

  std::printf("%s\n", failures ? "capi: FAIL" : "capi: pass");
  return failures ? 1 : 0;
}
