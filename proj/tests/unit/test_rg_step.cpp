#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rgflow/experiments.hpp"
#include "rgflow/flow.hpp"

using namespace rg;

namespace {

PotentialSpec spec(PotentialFamily f) {
  PotentialSpec U;
  U.family = f;
  U.d = 2;
  return U;
}

FlowConfig small_flow(int cutoff0 = 9) {
  FlowConfig c;
  c.step.cutoff0 = cutoff0;
  c.step.pi2.samples = 4000;
  c.final_samples = 20000;
  return c;
}

// E prod_x (1 + K(grad(phi + xi)(x))) with xi from the full covariance, straight from the definition
Estimate brute_site_product(const Torus& t, const MayerFunction& K, const Kernel& C, const std::vector<double>& phi,
                            long samples) {
  GaussianLayer layer(t, C);
  oracle::Cube c{t.side(), t.d()};
  std::vector<double> xi(t.sites());
  double s = 0.0, s2 = 0.0;
  for (long i = 0; i < samples; ++i) {
    layer.sample_into(0xb7e7e, static_cast<uint64_t>(i), xi);
    double prod = 1.0;
    for (long x = 0; x < t.sites(); ++x) {
      double z[2];
      for (int a = 0; a < 2; ++a) {
        const long y = c.step(x, a);
        z[a] = (phi[y] + xi[y]) - (phi[x] + xi[x]);
      }
      prod *= 1.0 + K(z);
    }
    s += prod;
    s2 += prod * prod;
  }
  const double m = s / samples;
  return {m, std::sqrt(std::max(0.0, s2 / samples - m * m) / samples), samples};
}

}  // namespace

TEST_SUITE("rg_step") {
  TEST_CASE("vanishing Mayer function gives a trivial flow with exact conservation") {
    for (int N : {1, 2}) {
      Torus t(make_torus(3, N, 2));
      MayerFunction K(spec(PotentialFamily::quadratic), {0.0, 0.0}, 50.0);
      auto init = InitialData::zero(2);
      auto geo = FlowGeometry::build(t, K.potential().reference_Q(), init.q);
      auto cfg = small_flow(3);
      auto flow = run_flow(geo, K, init, cfg);
      GaussianLayer full(t, geo->frd.full);
      auto phi = full.sample_field(1, 0).values;
      for (int k = 0; k < N; ++k) {
        for (double v : flow.states[k + 1].H.to_vector()) CHECK(v == 0.0);
        auto row = conservation_residual(*geo, flow.states[k], flow.states[k + 1], phi, 200, 4, 1);
        CHECK(row.residual.value == 0.0);
        CHECK(row.lhs.value == doctest::Approx(1.0).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("one step on the smallest torus reproduces the site product") {
    Torus t(make_torus(3, 1, 2));
    MayerFunction K(spec(PotentialFamily::double_well), {0.0, 0.0}, 50.0);
    auto init = InitialData::zero(2);
    auto geo = FlowGeometry::build(t, K.potential().reference_Q(), init.q);
    auto flow = run_flow(geo, K, init, small_flow());
    GaussianLayer full(t, geo->frd.full);
    auto phi = full.sample_field(2, 0).values;
    for (auto& v : phi) v *= 0.5;
    auto got = final_value(flow, phi, 20000, 16);
    auto want = brute_site_product(t, K, geo->frd.full, phi, 200000);
    CHECK(std::abs(got.value - want.value) <= 3.0 * std::hypot(got.err, want.err));
    CHECK(got.err / got.value < 1e-3);
  }

  TEST_CASE("conservation with truncation at the defaults") {
    Torus t(make_torus(3, 1, 2));
    MayerFunction K(spec(PotentialFamily::double_well), {0.0, 0.0}, 50.0);
    auto init = InitialData::zero(2);
    auto geo = FlowGeometry::build(t, K.potential().reference_Q(), init.q);
    auto flow = run_flow(geo, K, init, small_flow());
    GaussianLayer full(t, geo->frd.full);
    for (uint64_t w = 0; w < 2; ++w) {
      auto phi = full.sample_field(3, w).values;
      for (auto& v : phi) v *= 0.5;
      auto row = conservation_residual(*geo, flow.states[0], flow.states[1], phi, 10000, 16, 7);
      CHECK(std::abs(row.residual.value) <= 3.0 * row.residual.err);
    }
  }

  TEST_CASE("K+ is reproducible per sample key") {
    Torus t(make_torus(3, 2, 2));
    MayerFunction K(spec(PotentialFamily::double_well), {0.0, 0.0}, 50.0);
    auto init = InitialData::zero(2);
    auto geo = FlowGeometry::build(t, K.potential().reference_Q(), init.q);
    auto cfg = small_flow(3);
    StepState s{0, init.hamiltonian(), initial_K(geo->g, K, init.hamiltonian())};
    auto r1 = rg_step(geo, s, cfg.step);
    auto r2 = rg_step(geo, s, cfg.step);
    CHECK(r1.next.H.to_vector() == r2.next.H.to_vector());
    std::vector<double> phi(t.sites(), 0.0);
    Polymer U = geo->g->single(1, 4);
    CHECK(r1.next.K->eval(U, phi, {3, 1}) == r2.next.K->eval(U, phi, {3, 1}));
    CHECK(r1.next.K->eval(U, phi, {3, 1}) != r1.next.K->eval(U, phi, {4, 1}));
  }

  TEST_CASE("restriction to the star neighbourhood") {
    StepConfig cfg;
    cfg.pi2.samples = 2000;
    auto r = restriction_check(3, 2, 5, 11, cfg);
    CHECK(r.trials == 5);
    CHECK(r.identical == 5);
    CHECK(r.control_changed == 5);
    CHECK(r.max_diff == 0.0);
  }

  TEST_CASE("contraction diagnostic is finite and reproducible") {
    Torus t(make_torus(3, 1, 2));
    auto geo = FlowGeometry::build(t, 3.0 * Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 2));
    auto a = contraction_diagnostic(*geo, 0, 3, 5, WeightParams{});
    auto b = contraction_diagnostic(*geo, 0, 3, 5, WeightParams{});
    REQUIRE(a.size() == 3);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(std::isfinite(a[i].ratio));
      CHECK(a[i].input_norm > 0.0);
      CHECK(a[i].ratio == b[i].ratio);
    }
  }

  TEST_CASE("preimage budget is enforced") {
    Torus t(make_torus(3, 2, 2));
    MayerFunction K(spec(PotentialFamily::double_well), {0.0, 0.0}, 50.0);
    auto init = InitialData::zero(2);
    auto geo = FlowGeometry::build(t, K.potential().reference_Q(), init.q);
    StepConfig cfg;
    cfg.cutoff0 = 8;
    cfg.budget = 100;
    StepState s{0, init.hamiltonian(), initial_K(geo->g, K, init.hamiltonian())};
    try {
      auto r = rg_step(geo, s, cfg);
      std::vector<double> phi(t.sites(), 0.0);
      r.next.K->eval(geo->g->single(1, 0), phi);
      FAIL("expected the budget to be exceeded");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::budget);
    }
  }
}
