// Acceptance runs: one line per criterion, "criterion N: PASS|FAIL <summary>".
// Usage: acceptance [--criterion N]...   (no arguments runs all ten)
#include <fmt/format.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "rgflow/config.hpp"
#include "rgflow/experiments.hpp"

using namespace rg;

namespace {

struct Outcome {
  bool pass = false;
  std::string summary;
};

RunConfig configure(std::initializer_list<const char*> sets) {
  ConfigSource src;
  for (const char* s : sets) apply_override(src, s);
  return resolve_config(src);
}

const Check* find_check(const Report& r, const std::string& name) {
  for (const auto& c : r.checks())
    if (c.name == name) return &c;
  return nullptr;
}

// every check of the report must pass; the summary lists them
Outcome from_report(const Report& r, std::initializer_list<const char*> required = {}) {
  Outcome o{r.passed(), ""};
  for (const auto& c : r.checks())
    o.summary += fmt::format("{}{}={:.4g}{}{:.4g}", o.summary.empty() ? "" : ", ", c.name, c.value,
                             c.pass ? " ok " : " FAILED ", c.threshold);
  for (const char* name : required)
    if (!find_check(r, name)) {
      o.pass = false;
      o.summary += fmt::format(", missing check {}", name);
    }
  return o;
}

Outcome criterion1() {
  auto cfg = configure({"torus.N=3", "run.N2=4", "run.N_list=1,2,3", "run.q_list=0,0.1,-0.1"});
  return from_report(frd_check(cfg), {"sum_residual", "min_eigenvalue", "range_residual", "n_independence"});
}

Outcome criterion2() {
  auto cfg = configure({"torus.N=1", "potential.family=double_well", "potential.beta=50", "potential.F=0,0",
                        "flow.cutoff0=9", "run.fields=20", "run.samples=20000"});
  return from_report(conserve(cfg), {"potential_valid", "max_residual_sigmas", "max_relative_err"});
}

Outcome criterion3() {
  auto cfg = configure({"torus.N=1", "potential.family=double_well", "potential.beta=50", "flow.cutoff0=9",
                        "flow.final_samples=100000", "quad.samples=1000000", "run.wick_trials=0"});
  return from_report(oracle_compare(cfg), {"representation_sigmas", "representation_relative"});
}

Outcome criterion4() {
  auto cfg = configure({"potential.family=double_well", "potential.beta=50", "flow.cutoff=6", "quad.samples=2000000",
                        "run.decay=true", "run.decay_pi2_samples=100000", "run.decay_flow_samples=20000",
                        "run.norms=false", "run.directions=0", "run.restriction_trials=0"});
  auto dr = remainder_decay(cfg);
  Outcome o{dr.pass, ""};
  for (const auto& r : dr.rows)
    o.summary += fmt::format("N={} {}: |Z-1|={:.3g}+-{:.2g}; ", r.N, r.tuned ? "tuned" : "q=0", std::abs(r.z_minus_1),
                             r.sigma);
  o.summary += fmt::format("gap={:.3g}, needs > {:.3g}", dr.gap, cfg.tol.sigmas * dr.gap_sigma);
  return o;
}

Outcome criterion5() {
  auto cfg = configure({});
  auto r = restriction_check(3, 2, 50, cfg.flow.step.seed, cfg.flow.step);
  return {r.trials == 50 && r.identical == 50 && r.control_changed == 50,
          fmt::format("{} trials, {} bit-identical, control moved in {}", r.trials, r.identical, r.control_changed)};
}

Outcome criterion6() {
  auto cfg = configure({"torus.N=2", "run.N2=3", "run.windows=5", "run.samples=20000"});
  return from_report(zd_check(cfg), {"max_diff_sigmas", "max_sigma", "misaligned_detected"});
}

Outcome criterion7() {
  auto cfg = configure({"torus.N=1", "potential.family=double_well", "potential.beta=50",
                        "run.grid=-0.2,-0.15,-0.1,-0.05,0,0.05,0.1,0.15,0.2", "quad.samples=1000000"});
  return from_report(free_energy(cfg), {"convex_min_sigmas", "control_closed_form"});
}

Outcome criterion8() {
  auto cfg = configure({"potential.family=quadratic", "potential.beta=50", "scaling.Ns=1,2,3"});
  return from_report(scaling_limit(cfg), {"discrepancy_decreasing", "final_discrepancy"});
}

Outcome criterion9() {
  auto cfg = configure({"torus.N=1", "run.wick_trials=20"});
  Torus t(cfg.torus);
  EllipticOperator A(t, cfg.potential.reference_Q(), cfg.q);
  auto trials = wick_mc_trials(t, green_kernel(A), 20, cfg.flow.step.seed, cfg.quad.samples, cfg.quad.batches,
                               cfg.tol.sigmas);
  int ok = 0, top = 0;
  for (const auto& w : trials) {
    ok += w.ok ? 1 : 0;
    top = std::max(top, w.degree);
  }
  return {ok == 20 && trials.size() == 20, fmt::format("{}/{} polynomials within 3 sigma, max degree {}", ok,
                                                        trials.size(), top)};
}

Outcome criterion10() {
  auto cfg = configure({"torus.N=2", "run.directions=10", "run.restriction_trials=0", "run.norms=false"});
  return from_report(rg_run(cfg), {"contraction_finite", "contraction_reproducible"});
}

struct Criterion {
  const char* title;
  double budget_seconds;  // 0 = no runtime requirement
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {"finite range decomposition", 30, criterion1},
      {"conservation identity", 300, criterion2},
      {"representation identity", 600, criterion3},
      {"remainder decay", 1800, criterion4},
      {"restriction property", 0, criterion5},
      {"Z^d property", 0, criterion6},
      {"free-energy convexity", 1200, criterion7},
      {"scaling limit", 600, criterion8},
      {"Wick against Monte Carlo", 0, criterion9},
      {"contraction diagnostic", 0, criterion10},
  };
  std::vector<int> pick;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) {
      pick.push_back(std::atoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]...\n", argv[0]);
      return 64;
    }
  }
  if (pick.empty())
    for (int n = 1; n <= 10; ++n) pick.push_back(n);

  int failed = 0;
  for (int n : pick) {
    if (n < 1 || n > 10) {
      std::fprintf(stderr, "no criterion %d\n", n);
      return 64;
    }
    const auto& c = all[n - 1];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_seconds > 0 && secs > c.budget_seconds) {
      o.pass = false;
      o.summary += fmt::format("; over the {:.0f} s budget", c.budget_seconds);
    }
    std::printf("criterion %d: %s  %s (%.1f s): %s\n", n, o.pass ? "PASS" : "FAIL", c.title, secs, o.summary.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed ? 1 : 0;
}
