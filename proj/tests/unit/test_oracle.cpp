#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "rgflow/oracle.hpp"

using namespace rg;

namespace {

PotentialSpec spec(PotentialFamily f) {
  PotentialSpec U;
  U.family = f;
  U.d = 2;
  return U;
}

QuadratureSpec mc(long samples, uint64_t seed = 3) {
  QuadratureSpec q;
  q.samples = samples;
  q.seed = seed;
  return q;
}

}  // namespace

TEST_SUITE("oracle") {
  TEST_CASE("Gaussian ratio equals the dense determinant ratio") {
    oracle::Cube cube{9, 2};
    Torus t(make_torus(3, 2, 2));
    Eigen::MatrixXd Q = 3.0 * Eigen::MatrixXd::Identity(2, 2);
    for (double s : {0.0, 0.1, -0.1, 0.35}) {
      Eigen::MatrixXd q = s * Eigen::MatrixXd::Identity(2, 2);
      q(0, 1) = q(1, 0) = 0.3 * s;
      const double want = 0.5 * (oracle::log_det_nonzero(cube, Q) - oracle::log_det_nonzero(cube, Q - q));
      CHECK(log_gaussian_ratio(t, Q, q) == doctest::Approx(want).epsilon(1e-12).scale(1.0));
    }
    CHECK(log_gaussian_ratio(t, Q, Eigen::MatrixXd::Zero(2, 2)) == 0.0);
  }

  TEST_CASE("log ratio is monotone along the diagonal") {
    Torus t(make_torus(3, 1, 2));
    Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(2, 2);
    double prev = -INFINITY;
    for (double s = -0.4; s <= 0.4; s += 0.05) {
      const double v = log_gaussian_ratio(t, Q, s * Eigen::MatrixXd::Identity(2, 2));
      CHECK(v > prev);
      prev = v;
    }
  }

  TEST_CASE("Gaussian ratio by reweighting") {
    Torus t(make_torus(3, 1, 2));
    Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd q = 0.1 * Eigen::MatrixXd::Identity(2, 2);
    auto est = gaussian_ratio_mc(t, Q, q, mc(200000));
    CHECK(est.err > 0.0);
    CHECK(std::abs(est.value - gaussian_ratio(t, Q, q)) <= 3.0 * est.err);
  }

  TEST_CASE("Gaussian Laplace transform equals the dense quadratic form") {
    Torus t(make_torus(3, 1, 2));
    oracle::Cube cube{3, 2};
    Eigen::MatrixXd Q = 3.0 * Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd G = oracle::green_matrix(cube, Q);
    oracle::Rng rng(12);
    std::vector<double> f(t.sites());
    double mean = 0.0;
    for (auto& v : f) mean += (v = rng.symmetric());
    for (auto& v : f) v -= mean / static_cast<double>(f.size());
    Eigen::Map<Eigen::VectorXd> fv(f.data(), static_cast<long>(f.size()));
    CHECK(gaussian_laplace(t, Q, f) == doctest::Approx(std::exp(0.5 * fv.dot(G * fv))).epsilon(1e-12));
  }

  TEST_CASE("brute force with a vanishing Mayer function") {
    Torus t(make_torus(3, 1, 2));
    MayerFunction K(spec(PotentialFamily::quadratic), {0.0, 0.0}, 50.0);
    REQUIRE(K.is_zero());
    auto z = brute_partition(K, t, {}, mc(1000));
    CHECK(z.value == 1.0);
    CHECK(z.err == 0.0);
    std::vector<double> f(t.sites(), 0.0);
    f[0] = 0.3;
    f[4] = -0.3;
    auto zf = brute_partition(K, t, f, mc(1000));
    CHECK(zf.value == doctest::Approx(gaussian_laplace(t, Eigen::MatrixXd::Identity(2, 2), f)).epsilon(1e-14));
  }

  TEST_CASE("brute force with a quadratic perturbation is a determinant ratio") {
    // K = exp(-eps |z|^2 / 2) - 1 turns the reference measure Q = I into Q = (1 + eps) I
    Torus t(make_torus(3, 1, 2));
    oracle::Cube cube{3, 2};
    auto U = spec(PotentialFamily::gaussian_perturbation);
    U.epsilon = 0.1;
    MayerFunction K(U, {0.0, 0.0}, 50.0);
    auto z = brute_partition(K, t, {}, mc(400000));
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
    const double want = std::exp(0.5 * (oracle::log_det_nonzero(cube, I) - oracle::log_det_nonzero(cube, 1.1 * I)));
    CHECK(std::abs(z.value - want) <= 3.0 * z.err);
    CHECK(z.err / z.value < 5e-4);
    CHECK(gaussian_ratio(t, I, -0.1 * I) == doctest::Approx(want).epsilon(1e-12));
  }

  TEST_CASE("closed-form free energy of a quadratic potential") {
    Torus t(make_torus(3, 1, 2));
    oracle::Cube cube{3, 2};
    auto U = spec(PotentialFamily::gaussian_perturbation);
    U.epsilon = 0.1;
    const double beta = 50.0;
    // ln Z over mean-zero fields of exp(-beta (1+eps)/2 sum |grad phi|^2)
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
    const double V = 9.0;
    const double logZ = 0.5 * (V - 1.0) * std::log(2.0 * std::numbers::pi / beta) -
                        0.5 * oracle::log_det_nonzero(cube, (1.0 + U.epsilon) * I);
    std::vector<double> grid{-0.1, 0.0, 0.1};
    auto scan = free_energy_scan(U, beta, t, grid, mc(20000));
    for (const auto& r : scan.rows) {
      const double want = 0.5 * (1.0 + U.epsilon) * r.F * r.F - logZ / (beta * V);
      CHECK(r.closed == doctest::Approx(want).epsilon(1e-12));
      CHECK(std::abs(r.W - want) < 1e-5);
    }
    // second difference of (1+eps) F^2 / 2 with spacing 0.1
    CHECK(scan.second_diff[0] == doctest::Approx(1.1 * 0.01).epsilon(1e-4));
  }

  TEST_CASE("free energy is even in the tilt for the double well") {
    Torus t(make_torus(3, 1, 2));
    auto U = spec(PotentialFamily::double_well);
    auto scan = free_energy_scan(U, 50.0, t, {-0.15, -0.05, 0.05, 0.15}, mc(20000));
    CHECK(scan.rows[0].W == doctest::Approx(scan.rows[3].W).epsilon(1e-12));
    CHECK(scan.rows[1].W == doctest::Approx(scan.rows[2].W).epsilon(1e-12));
    CHECK(scan.convex);
  }

  TEST_CASE("scaled test functions") {
    Torus t(make_torus(3, 2, 2));
    ScalingLimitSpec s;
    auto f = scaled_test_function(t, s);
    double sum = 0.0, peak = 0.0;
    for (double v : f) {
      sum += v;
      peak = std::max(peak, std::abs(v));
    }
    CHECK(std::abs(sum) < 1e-12);
    CHECK(peak <= s.amplitude * std::pow(9.0, -2.0) * (1.0 + 1e-12) + 1e-15);
    s.amplitude = 0.0;
    auto rows = scaling_limit_check(spec(PotentialFamily::quadratic), 50.0, 3, s, mc(2000));
    for (const auto& r : rows) {
      CHECK(r.laplace == 1.0);
      CHECK(r.prediction == 1.0);
    }
  }

  TEST_CASE("single-mode continuum prediction") {
    // ln prediction = |g^(p)|^2 / (2 beta Q(p, p)) summed over +-p, with g^(p) = A/2 and p = 2 pi e_1
    ScalingLimitSpec s;
    s.Ns = {1};
    const double beta = 50.0;
    auto rows = scaling_limit_check(spec(PotentialFamily::quadratic), beta, 3, s, mc(2000));
    const double A = s.amplitude, p2 = 4.0 * std::numbers::pi * std::numbers::pi;
    const double want = 2.0 * (A * A / 4.0) / (2.0 * beta * p2);
    CHECK(std::log(rows[0].prediction) == doctest::Approx(want).epsilon(1e-12));
  }
}
