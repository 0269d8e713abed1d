#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rgflow/functional.hpp"

using namespace rg;

namespace {

RelevantHamiltonian random_hamiltonian(int d, oracle::Rng& rng) {
  auto H = RelevantHamiltonian::zero(d);
  H.a_const = rng.symmetric();
  for (auto& a : H.a_lin) a = rng.symmetric();
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) H.a_quad(i, j) = rng.symmetric();
  return H;
}

std::vector<double> random_field(const Torus& t, oracle::Rng& rng, double scale = 1.0) {
  std::vector<double> phi(t.sites());
  for (auto& v : phi) v = scale * rng.symmetric();
  return phi;
}

}  // namespace

TEST_SUITE("functional") {
  TEST_CASE("relevant Hamiltonian density") {
    Torus t(make_torus(3, 1, 2));
    oracle::Cube c{3, 2};
    oracle::Rng rng(1);
    auto H = random_hamiltonian(2, rng);
    HamiltonianEvaluator ev(t, H);
    auto phi = random_field(t, rng);
    auto lin = relevant_linear_indices(2);
    REQUIRE(lin.size() == 5);
    for (long x = 0; x < t.sites(); ++x) {
      auto diff = [&](long y, int i) { return phi[c.step(y, i)] - phi[y]; };
      const double g0 = diff(x, 0), g1 = diff(x, 1);
      double want = H.a_const + H.a_quad(0, 0) * g0 * g0 + H.a_quad(0, 1) * g0 * g1 + H.a_quad(1, 1) * g1 * g1;
      // second differences in the order (2,0), (1,1), (0,2) after the unit ones
      const double d00 = diff(c.step(x, 0), 0) - diff(x, 0);
      const double d01 = diff(c.step(x, 1), 0) - diff(x, 0);
      const double d11 = diff(c.step(x, 1), 1) - diff(x, 1);
      const double jets[5] = {g0, g1, d00, d01, d11};
      for (std::size_t b = 0; b < lin.size(); ++b) {
        int which = lin[b] == MultiIndex{1, 0}   ? 0
                    : lin[b] == MultiIndex{0, 1} ? 1
                    : lin[b] == MultiIndex{2, 0} ? 2
                    : lin[b] == MultiIndex{1, 1} ? 3
                                                 : 4;
        want += H.a_lin[b] * jets[which];
      }
      CHECK(ev.density(phi, x) == doctest::Approx(want).epsilon(1e-12));
    }
  }

  TEST_CASE("q and the quadratic coefficients") {
    Eigen::MatrixXd q(2, 2);
    q << 0.2, -0.05, -0.05, 0.1;
    auto H = RelevantHamiltonian::from_q(q);
    CHECK((H.q() - q).norm() < 1e-15);
    // (1/2) sum_ij q_ij z_i z_j at z = (1, 2)
    Torus t(make_torus(3, 1, 2));
    std::vector<double> phi(t.sites(), 0.0);
    for (long x = 0; x < t.sites(); ++x) {
      auto u = t.coords(x);
      phi[x] = u[0] + 2.0 * u[1];
    }
    HamiltonianEvaluator ev(t, H);
    const long x = t.site(std::vector<int>{0, 0});
    CHECK(ev.density(phi, x) == doctest::Approx(0.5 * (0.2 + 4 * 0.1 - 4 * 0.05)).epsilon(1e-14));
    auto v = H.to_vector();
    auto back = RelevantHamiltonian::from_vector(2, v);
    CHECK(back.to_vector() == v);
  }

  TEST_CASE("second order projection recovers relevant Hamiltonians") {
    Torus t(make_torus(3, 2, 2));
    Blocks g(t);
    oracle::Rng rng(2);
    for (int k : {0, 1}) {
      Pi2Plan plan(g, k, 4, 1e-4);
      for (int trial = 0; trial < 10; ++trial) {
        auto H = random_hamiltonian(2, rng);
        HamiltonianEvaluator ev(t, H);
        auto P = ev.polynomial(g.grid(k).sites[4]);
        auto got = plan.solve_polynomial(P, t);
        const auto a = got.to_vector(), b = H.to_vector();
        for (std::size_t i = 0; i < a.size(); ++i) {
          CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-8).scale(1.0));
        }
      }
    }
  }

  TEST_CASE("projection of a deterministic polynomial functional") {
    Torus t(make_torus(3, 2, 2));
    auto g = std::make_shared<Blocks>(t);
    oracle::Rng rng(3);
    auto H = random_hamiltonian(2, rng);
    HamiltonianEvaluator ev(t, H);
    PolynomialFunctional F(g, 1, [&](const Polymer& X) { return ev.polynomial(g->sites(X).blocks()); }, 2);
    auto r = pi2_project(F, 4, Pi2Options{});
    const auto a = r.H.to_vector(), b = H.to_vector();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-6).scale(1.0));
  }

  TEST_CASE("exp(-H) is a product over sites") {
    Torus t(make_torus(3, 1, 2));
    auto g = std::make_shared<Blocks>(t);
    oracle::Rng rng(4);
    auto H = random_hamiltonian(2, rng);
    H *= 0.1;
    auto E = exp_minus_h(g, 0, H);
    HamiltonianEvaluator ev(t, H);
    auto phi = random_field(t, rng);
    Polymer X = g->from_blocks(0, {0, 1, 5});
    double s = ev.density(phi, 0) + ev.density(phi, 1) + ev.density(phi, 5);
    CHECK(E->eval(X, phi) == doctest::Approx(std::exp(-s)).epsilon(1e-12));
    CHECK(E->eval(g->empty(0), phi) == 1.0);
  }

  TEST_CASE("circ product equals the subset sum") {
    Torus t(make_torus(3, 1, 2));
    auto g = std::make_shared<Blocks>(t);
    oracle::Rng rng(5);
    auto phi = random_field(t, rng, 0.5);
    SiteProduct F(g, 0, [](std::span<const double> p, long x) { return 0.3 + 0.1 * p[x]; }, 0);
    SiteProduct G(g, 0, [](std::span<const double> p, long x) { return -0.2 + p[x] * p[x]; }, 0);
    IdentityElement one(g, 0);
    for (int trial = 0; trial < 20; ++trial) {
      Polymer X = g->empty(0);
      for (int i = 0; i < 1 + trial % 7; ++i) X.insert(rng.below(9));
      auto bl = X.blocks();
      double want = 0.0;
      for (long mask = 0; mask < (1L << bl.size()); ++mask) {
        Polymer Y = g->empty(0);
        for (std::size_t i = 0; i < bl.size(); ++i)
          if (mask >> i & 1) Y.insert(bl[i]);
        want += F.eval(Y, phi) * G.eval(X.minus(Y), phi);
      }
      CHECK(circ(F, G, X, phi) == doctest::Approx(want).epsilon(1e-12));
      CHECK(circ(F, one, X, phi) == doctest::Approx(F.eval(X, phi)).epsilon(1e-14));
    }
  }

  TEST_CASE("identity element") {
    Torus t(make_torus(3, 1, 2));
    auto g = std::make_shared<Blocks>(t);
    IdentityElement one(g, 0);
    std::vector<double> phi(t.sites(), 0.3);
    CHECK(one.eval(g->empty(0), phi) == 1.0);
    CHECK(one.eval(g->single(0, 2), phi) == 0.0);
  }
}
