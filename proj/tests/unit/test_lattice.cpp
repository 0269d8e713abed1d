#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rgflow/lattice.hpp"

using namespace rg;

namespace {

// grad^alpha phi(x) by applying forward differences one axis at a time
double iterated_difference(const oracle::Cube& c, const std::vector<double>& phi, long x, const MultiIndex& alpha) {
  std::vector<double> f = phi;
  for (int i = 0; i < c.d; ++i)
    for (int r = 0; r < alpha[i]; ++r) {
      std::vector<double> g(f.size());
      for (long y = 0; y < c.sites(); ++y) g[y] = f[c.step(y, i)] - f[y];
      f = g;
    }
  return f[x];
}

}  // namespace

TEST_SUITE("lattice") {
  TEST_CASE("site numbering matches row-major coordinates") {
    for (int d : {2, 3}) {
      Torus t(make_torus(3, 2, d));
      oracle::Cube c{9, d};
      REQUIRE(t.sites() == c.sites());
      for (long x = 0; x < t.sites(); ++x) {
        auto u = t.coords(x);
        auto v = c.coords(x);
        for (int i = 0; i < d; ++i) CHECK(u[i] == v[i]);
        CHECK(t.site(u) == x);
        auto cc = t.centered(x);
        for (int i = 0; i < d; ++i) CHECK(cc[i] == u[i] - 4);
        CHECK(t.site_centered(cc) == x);
        for (int i = 0; i < d; ++i) {
          CHECK(t.step(x, i) == c.step(x, i));
          CHECK(t.step_back(x, i) == c.step(x, i, -1));
        }
      }
    }
  }

  TEST_CASE("displacement and shift are consistent") {
    Torus t(make_torus(3, 2, 2));
    oracle::Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
      long x = rng.below(t.sites()), y = rng.below(t.sites());
      auto dv = t.displacement(x, y);
      CHECK(t.shift(x, dv) == y);
      int linf = 0;
      for (int v : dv) {
        CHECK(v >= -4);
        CHECK(v <= 4);
        linf = std::max(linf, std::abs(v));
      }
      CHECK(t.linf_distance(x, y) == linf);
    }
  }

  TEST_CASE("block index follows block coordinates") {
    Torus t(make_torus(3, 2, 2));
    for (long x = 0; x < t.sites(); ++x) {
      auto u = t.coords(x);
      CHECK(t.block_of(x, 0) == x);
      CHECK(t.block_of(x, 1) == (u[0] / 3) * 3 + u[1] / 3);
      CHECK(t.block_of(x, 2) == 0);
    }
  }

  TEST_CASE("jet stencil equals iterated forward differences") {
    for (int d : {2, 3}) {
      Torus t(make_torus(3, 1, d));
      oracle::Cube c{3, d};
      auto alphas = indices_up_to(d, 3);
      JetStencil S(t, alphas);
      oracle::Rng rng(11 + d);
      std::vector<double> phi(t.sites());
      for (auto& v : phi) v = rng.symmetric();
      for (long x = 0; x < t.sites(); ++x)
        for (int a = 0; a < S.size(); ++a)
          CHECK(S.eval(phi, x, a) == doctest::Approx(iterated_difference(c, phi, x, alphas[a])).epsilon(1e-12));
    }
  }

  TEST_CASE("index sets") {
    CHECK(unit_indices(2).size() == 2);
    // alpha in N^2 with 1 <= |alpha| <= 2: (1,0),(0,1),(2,0),(1,1),(0,2)
    CHECK(indices_up_to(2, 2).size() == 5);
    CHECK(indices_up_to(3, 2).size() == 9);
    for (const auto& a : indices_up_to(3, 3)) {
      CHECK(order(a) >= 1);
      CHECK(order(a) <= 3);
    }
  }

  TEST_CASE("hamiltonian sum equals the site-by-site sum") {
    Torus t(make_torus(3, 1, 2));
    oracle::Cube c{3, 2};
    auto I = unit_indices(2);
    SiteEnergy U = [](std::span<const double> z) { return 0.5 * (z[0] * z[0] + z[1] * z[1]) + std::cos(z[0]); };
    oracle::Rng rng(5);
    Field phi = Field::zero(t);
    for (auto& v : phi.values) v = rng.symmetric();
    std::vector<double> F{0.1, -0.05};
    double expect = 0.0;
    for (long x = 0; x < c.sites(); ++x) {
      double z[2];
      for (int i = 0; i < 2; ++i) z[i] = phi.values[c.step(x, i)] - phi.values[x] + F[i];
      expect += 0.5 * (z[0] * z[0] + z[1] * z[1]) + std::cos(z[0]);
    }
    CHECK(hamiltonian_eval(t, U, phi, F, I) == doctest::Approx(expect).epsilon(1e-12));
  }

  TEST_CASE("zero-mean projection") {
    std::vector<double> raw{1.0, 2.0, 3.0, 6.0};
    auto f = project_zero_mean(raw, 1);
    CHECK(max_component_sum(f) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(f.values[0] == doctest::Approx(-2.0));
  }
}
