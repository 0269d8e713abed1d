#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "rgflow/config.hpp"
#include "rgflow/experiments.hpp"
#include "rgflow/report.hpp"

using namespace rg;
using Json = nlohmann::ordered_json;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("rgflow_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_SUITE("report") {
  TEST_CASE("floats keep 17 significant digits and survive a round trip") {
    oracle::Rng rng(1);
    for (int i = 0; i < 500; ++i) {
      const double v = std::ldexp(rng.symmetric(), static_cast<int>(rng.below(200)) - 100);
      Json j = Json::array({v});
      auto text = dump_json(j, -1);
      CHECK(Json::parse(text)[0].get<double>() == v);
    }
    CHECK(dump_json(Json::array({0.1}), -1) == "[0.10000000000000001]");
  }

  TEST_CASE("non-finite values become null") {
    Json j{{"a", std::nan("")}, {"b", INFINITY}, {"c", 1.5}};
    CHECK(dump_json(j, -1) == R"({"a":null,"b":null,"c":1.5})");
  }

  TEST_CASE("parse and re-serialise gives identical bytes") {
    Report rep("conserve", Json{{"torus", {{"L", 3}}}}, "0123456789abcdef");
    auto& t = rep.table("residuals", {"k", "value", "label"});
    t.add(Json::array({0, 1.0 / 3.0, "x,y"}));
    t.add(Json::array({1, -2.5e-17, "plain"}));
    rep.check("c", 0.25, 1.0, "<=", true);
    rep.results()["nested"] = Json{{"v", {1e300, 2.0, -0.0}}};
    const std::string first = dump_json(rep.to_json());
    const std::string second = dump_json(Json::parse(first));
    CHECK(first == second);
  }

  TEST_CASE("csv quoting and empty tables") {
    Table t{"empty", {"a", "b"}, {}};
    CHECK(t.csv() == "a,b\n");
    t.add(Json::array({"say \"hi\", twice", 0.5}));
    CHECK(t.csv() == "a,b\n\"say \"\"hi\"\", twice\",0.5\n");
    CHECK_THROWS_AS(t.add(Json::array({1})), Error);
  }

  TEST_CASE("status and field order") {
    Report rep("frd-check", Json::object(), "h");
    CHECK(rep.passed());
    rep.check("a", 1.0, 2.0, "<=", true);
    rep.check("b", 3.0, 2.0, "<=", false);
    CHECK_FALSE(rep.passed());
    auto j = rep.to_json();
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.push_back(k);
    CHECK(keys == std::vector<std::string>{"subcommand", "status", "config_hash", "config", "checks", "results", "tables"});
    CHECK(j["status"] == "fail");
  }

  TEST_CASE("files written by a subcommand are deterministic") {
    ConfigSource src;
    apply_override(src, "torus.N=2");
    apply_override(src, "run.N_list=1,2");
    auto cfg = resolve_config(src);
    auto a = scratch("det_a"), b = scratch("det_b");
    auto pa = run_subcommand("frd-check", cfg).write(a.string(), true, true);
    auto pb = run_subcommand("frd-check", cfg).write(b.string(), true, true);
    REQUIRE(pa.size() == pb.size());
    REQUIRE(pa.size() == 4);
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(std::filesystem::path(pa[i]).filename() == std::filesystem::path(pb[i]).filename());
      CHECK(slurp(pa[i]) == slurp(pb[i]));
    }
    auto j = Json::parse(slurp(a / "frd-check.json"));
    CHECK(j["config_hash"] == cfg.hash());
    CHECK(j["config"]["torus"]["N"] == 2);
    CHECK(dump_json(j) + "\n" == slurp(a / "frd-check.json"));
  }

  TEST_CASE("write errors are reported") {
    auto p = scratch("blocker");
    { std::ofstream(p.string()) << "x"; }
    Report rep("x", Json::object(), "h");
    try {
      rep.write((p / "sub").string(), true, false);
      FAIL("expected an IO error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::io);
    }
  }
}
