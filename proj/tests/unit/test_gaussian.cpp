#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rgflow/gaussian.hpp"

using namespace rg;

namespace {

Eigen::MatrixXd covariance_matrix(const Torus& t, const Kernel& C) {
  Eigen::MatrixXd G(t.sites(), t.sites());
  for (long x = 0; x < t.sites(); ++x)
    for (long y = 0; y < t.sites(); ++y) G(x, y) = C.at(t, t.displacement(y, x));
  return G;
}

// coefficient vector of grad^alpha at x, from iterated forward differences of unit fields
Eigen::VectorXd jet_functional(const Torus& t, const JetVar& v) {
  oracle::Cube c{t.side(), t.d()};
  Eigen::VectorXd out(t.sites());
  for (long y = 0; y < t.sites(); ++y) {
    std::vector<double> f(t.sites(), 0.0);
    f[y] = 1.0;
    for (int i = 0; i < t.d(); ++i)
      for (int r = 0; r < v.alpha[i]; ++r) {
        std::vector<double> g(f.size());
        for (long z = 0; z < t.sites(); ++z) g[z] = f[c.step(z, i)] - f[z];
        f = g;
      }
    out(y) = f[v.site];
  }
  return out;
}

// E P(phi + xi) by expanding every monomial and applying Isserlis to the xi part
double expected_polynomial(const Torus& t, const TaylorPolynomial& P, const Eigen::MatrixXd& G,
                           const std::vector<double>& phi) {
  auto vars = P.variables();
  Eigen::MatrixXd L(t.sites(), vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) L.col(static_cast<long>(i)) = jet_functional(t, vars[i]);
  Eigen::MatrixXd S = L.transpose() * G * L;
  Eigen::VectorXd ph = Eigen::Map<const Eigen::VectorXd>(phi.data(), static_cast<long>(phi.size()));
  Eigen::VectorXd a = L.transpose() * ph;
  auto var_index = [&](const JetVar& v) {
    return static_cast<int>(std::find(vars.begin(), vars.end(), v) - vars.begin());
  };
  double total = 0.0;
  for (const auto& [mono, coef] : P.terms()) {
    const int n = static_cast<int>(mono.size());
    for (int mask = 0; mask < (1 << n); ++mask) {
      double det = 1.0;
      std::vector<int> rnd;
      for (int k = 0; k < n; ++k) {
        if (mask >> k & 1)
          rnd.push_back(var_index(mono[k]));
        else
          det *= a(var_index(mono[k]));
      }
      total += coef * det * oracle::isserlis(S, rnd);
    }
  }
  return total;
}

TaylorPolynomial random_polynomial(const Torus& t, oracle::Rng& rng, int degree) {
  auto idx = indices_up_to(t.d(), 2);
  std::vector<JetVar> vars;
  for (long x : {0L, 1L, 4L})
    for (const auto& a : idx) vars.push_back({x, a});
  TaylorPolynomial P;
  P.add_constant(rng.symmetric());
  for (int m = 0; m < 5; ++m) {
    TaylorPolynomial::Monomial mono;
    const int deg = m == 0 ? degree : 1 + static_cast<int>(rng.below(degree));
    for (int r = 0; r < deg; ++r) mono.push_back(vars[rng.below(static_cast<long>(vars.size()))]);
    std::sort(mono.begin(), mono.end());
    P.add(mono, rng.symmetric());
  }
  return P;
}

}  // namespace

TEST_SUITE("gaussian") {
  TEST_CASE("Gauss-Hermite reproduces normal moments") {
    auto gh = gauss_hermite(12);
    double w = 0.0;
    for (double v : gh.weights) w += v;
    CHECK(w == doctest::Approx(1.0).epsilon(1e-13));
    double dfact = 1.0;  // (2n-1)!!
    for (int n = 1; n <= 11; ++n) {
      dfact *= 2 * n - 1;
      double m = 0.0, odd = 0.0;
      for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
        m += gh.weights[i] * std::pow(gh.nodes[i], 2 * n);
        odd += gh.weights[i] * std::pow(gh.nodes[i], 2 * n - 1);
      }
      CHECK(m == doctest::Approx(dfact).epsilon(1e-10));
      CHECK(std::abs(odd) < 1e-10 * dfact);
    }
  }

  TEST_CASE("tensor Gauss-Hermite on an exponential of a quadratic") {
    Eigen::MatrixXd S(2, 2), M(2, 2);
    S << 0.5, 0.1, 0.1, 0.3;
    M << 0.2, -0.05, -0.05, 0.4;
    double got = gh_expectation(S, 20, [&](std::span<const double> z) {
      Eigen::Vector2d v(z[0], z[1]);
      return std::exp(-0.5 * v.dot(M * v));
    });
    CHECK(got == doctest::Approx(oracle::gauss_exp_quadratic(S, M).value).epsilon(1e-12));
  }

  TEST_CASE("layer samples have the kernel as covariance") {
    Torus t(make_torus(3, 1, 2));
    EllipticOperator A(t, 3.0 * Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 2));
    GaussianLayer layer(t, green_kernel(A));
    CHECK(layer.factor_residual() < 1e-12);
    const long n = 40000;
    std::vector<double> acc(t.sites(), 0.0), phi(t.sites());
    for (long i = 0; i < n; ++i) {
      layer.sample_into(99, static_cast<uint64_t>(i), phi);
      for (long x = 0; x < t.sites(); ++x) acc[x] += phi[0] * phi[x];
    }
    const double c0 = layer.kernel().values[0];
    for (long x = 0; x < t.sites(); ++x) {
      const double emp = acc[x] / n;
      // standard error of a product moment is at most about sqrt(2) c0 / sqrt(n)
      CHECK(std::abs(emp - layer.covariance(0, x)) < 5.0 * std::sqrt(2.0 / n) * c0);
    }
  }

  TEST_CASE("samples are reproducible by (key, index)") {
    Torus t(make_torus(3, 2, 2));
    EllipticOperator A(t, Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 2));
    GaussianLayer layer(t, green_kernel(A));
    auto a = layer.sample_field(5, 17).values;
    layer.sample_field(5, 3);
    auto b = layer.sample_field(5, 17).values;
    CHECK(a == b);
    CHECK(max_component_sum(layer.sample_field(5, 18)) < 1e-10);
  }

  TEST_CASE("marginal covariance is the kernel") {
    Torus t(make_torus(3, 1, 2));
    EllipticOperator A(t, 3.0 * Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 2));
    GaussianLayer layer(t, green_kernel(A));
    Eigen::MatrixXd G = covariance_matrix(t, layer.kernel());
    std::vector<long> sites{0, 4, 5, 8};
    auto M = marginal_covariance(layer, sites);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) CHECK(M(i, j) == doctest::Approx(G(sites[i], sites[j])).epsilon(1e-12));
  }

  TEST_CASE("Wick convolution agrees with Isserlis expansion") {
    Torus t(make_torus(3, 1, 2));
    EllipticOperator A(t, 3.0 * Eigen::MatrixXd::Identity(2, 2), 0.1 * Eigen::MatrixXd::Identity(2, 2));
    Kernel C = green_kernel(A);
    Eigen::MatrixXd G = covariance_matrix(t, C);
    oracle::Rng rng(21);
    for (int trial = 0; trial < 40; ++trial) {
      auto P = random_polynomial(t, rng, 1 + trial % 4);
      std::vector<double> phi(t.sites());
      for (auto& v : phi) v = 0.5 * rng.symmetric();
      const double want = expected_polynomial(t, P, G, phi);
      const double got = wick_convolve(P, t, C).eval(t, phi);
      CHECK(got == doctest::Approx(want).epsilon(1e-11).scale(1.0));
    }
  }

  TEST_CASE("polynomial algebra") {
    Torus t(make_torus(3, 1, 2));
    oracle::Rng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
      auto P = random_polynomial(t, rng, 3), Q = random_polynomial(t, rng, 2);
      std::vector<double> phi(t.sites()), psi(t.sites()), sum(t.sites());
      for (long x = 0; x < t.sites(); ++x) {
        phi[x] = rng.symmetric();
        psi[x] = rng.symmetric();
        sum[x] = phi[x] + psi[x];
      }
      CHECK((P * Q).eval(t, phi) == doctest::Approx(P.eval(t, phi) * Q.eval(t, phi)).epsilon(1e-12));
      CHECK((P + Q).eval(t, phi) == doctest::Approx(P.eval(t, phi) + Q.eval(t, phi)).epsilon(1e-12));
      CHECK(P.shifted(t, phi).eval(t, psi) == doctest::Approx(P.eval(t, sum)).epsilon(1e-12));
      auto co = P.along(t, phi);
      double s = 0.0, tt = 0.7;
      for (std::size_t n = 0; n < co.size(); ++n) s += co[n] * std::pow(tt, static_cast<double>(n));
      std::vector<double> scaled(phi);
      for (auto& v : scaled) v *= tt;
      CHECK(s == doctest::Approx(P.eval(t, scaled)).epsilon(1e-12));
    }
  }
}
