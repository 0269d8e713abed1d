#include <doctest.h>

#include <array>
#include <cmath>

#include "oracles.hpp"
#include "rgflow/flow.hpp"

using namespace rg;

namespace {

PotentialSpec spec(PotentialFamily f) {
  PotentialSpec U;
  U.family = f;
  U.d = 2;
  return U;
}

// Terminal relevant data on the 3x3 torus for K = exp(-eps|z|^2/2) - 1, H0 = -e + (1/2) z^T q z with
// q = [[s, t], [t, s]], in closed form: the constant and the Hessian entries (0,0), (0,1) of
// E[h0(z + w)] - E[e^{-h0} K (z + w)] with w the gradient of the full-covariance field.
// Forward differences correlate the two gradient components, so t does not vanish.
std::array<double, 3> terminal(double e, double s, double t, double eps) {
  oracle::Cube c{3, 2};
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd q(2, 2);
  q << s, t, t, s;
  Eigen::MatrixXd G = oracle::green_matrix(c, I - q);
  Eigen::MatrixXd Sigma(2, 2);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      Eigen::VectorXd ea = Eigen::VectorXd::Zero(9), eb = Eigen::VectorXd::Zero(9);
      ea(c.step(0, a)) += 1.0;
      ea(0) -= 1.0;
      eb(c.step(0, b)) += 1.0;
      eb(0) -= 1.0;
      Sigma(a, b) = ea.dot(G * eb);
    }
  auto with = oracle::gauss_exp_quadratic(Sigma, q + eps * I);
  auto without = oracle::gauss_exp_quadratic(Sigma, q);
  const double constant = -e + 0.5 * (q * Sigma).trace() - std::exp(e) * (with.value - without.value);
  const Eigen::MatrixXd hess = q - std::exp(e) * (with.hessian - without.hessian);
  return {constant, hess(0, 0), hess(0, 1)};
}

// Newton iteration with a finite-difference Jacobian
std::array<double, 3> fixed_point(double eps) {
  Eigen::Vector3d u = Eigen::Vector3d::Zero();
  auto F = [&](const Eigen::Vector3d& v) {
    auto f = terminal(v(0), v(1), v(2), eps);
    return Eigen::Vector3d(f[0], f[1], f[2]);
  };
  for (int it = 0; it < 50; ++it) {
    const Eigen::Vector3d f = F(u);
    if (f.norm() < 1e-14) break;
    const double h = 1e-7;
    Eigen::Matrix3d J;
    for (int j = 0; j < 3; ++j) {
      Eigen::Vector3d up = u;
      up(j) += h;
      J.col(j) = (F(up) - f) / h;
    }
    u -= J.lu().solve(f);
  }
  return {u(0), u(1), u(2)};
}

}  // namespace

TEST_SUITE("flow") {
  TEST_CASE("tuned data for a quadratic perturbation matches the closed-form fixed point") {
    const double eps = 0.1;
    auto want = fixed_point(eps);
    auto check = terminal(want[0], want[1], want[2], eps);
    for (double r : check) REQUIRE(std::abs(r) < 1e-12);
    // to first order in eps the tuner absorbs the perturbation: q = -eps
    CHECK(want[1] == doctest::Approx(-eps).epsilon(0.1));

    Torus t(make_torus(3, 1, 2));
    auto U = spec(PotentialFamily::gaussian_perturbation);
    U.epsilon = eps;
    MayerFunction K(U, {0.0, 0.0}, 50.0);
    FlowConfig cfg;
    auto tr = tune(t, K, cfg);
    REQUIRE(tr.converged);
    CHECK(tr.data.e == doctest::Approx(want[0]).epsilon(1e-5).scale(1.0));
    CHECK(tr.data.q(0, 0) == doctest::Approx(want[1]).epsilon(1e-5).scale(1.0));
    CHECK(tr.data.q(1, 1) == doctest::Approx(want[1]).epsilon(1e-5).scale(1.0));
    CHECK(tr.data.q(0, 1) == doctest::Approx(want[2]).epsilon(1e-5).scale(1.0));
    CHECK(tr.data.q(1, 0) == doctest::Approx(want[2]).epsilon(1e-5).scale(1.0));
    CHECK(tr.l_size < 1e-8);
  }

  TEST_CASE("tuning the double well at N = 1 converges") {
    Torus t(make_torus(3, 1, 2));
    MayerFunction K(spec(PotentialFamily::double_well), {0.0, 0.0}, 50.0);
    auto tr = tune(t, K, FlowConfig{});
    REQUIRE(tr.converged);
    CHECK(tr.residual <= 1e-6);
    CHECK(tr.history.size() < 15);
    // the tuned q is small and positive-semidefinite corrections keep Q - q elliptic
    CHECK(std::abs(tr.data.q(0, 0)) < 0.1);
    CHECK(std::abs(tr.data.q(0, 0) - tr.data.q(1, 1)) < 1e-8);
  }

  TEST_CASE("representation with a vanishing Mayer function") {
    Torus t(make_torus(3, 1, 2));
    MayerFunction K(spec(PotentialFamily::quadratic), {0.0, 0.0}, 50.0);
    auto init = InitialData::zero(2);
    auto geo = FlowGeometry::build(t, K.potential().reference_Q(), init.q);
    FlowConfig cfg;
    cfg.step.cutoff0 = 3;
    auto flow = run_flow(geo, K, init, cfg);
    std::vector<double> zero(t.sites(), 0.0);
    auto r0 = assemble_representation(flow, init, zero, 1000, 4);
    CHECK(r0.product == 1.0);
    std::vector<double> f(t.sites(), 0.0);
    f[0] = 0.4;
    f[8] = -0.4;
    auto r1 = assemble_representation(flow, init, f, 1000, 4);
    CHECK(r1.remainder.value == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r1.product == doctest::Approx(gaussian_laplace(t, K.potential().reference_Q(), f)).epsilon(1e-12));
  }

  TEST_CASE("representation identity for the double well at N = 1") {
    Torus t(make_torus(3, 1, 2));
    MayerFunction K(spec(PotentialFamily::double_well), {0.0, 0.0}, 50.0);
    auto init = InitialData::zero(2);
    auto geo = FlowGeometry::build(t, K.potential().reference_Q(), init.q);
    FlowConfig cfg;
    cfg.step.cutoff0 = 9;
    auto flow = run_flow(geo, K, init, cfg);
    std::vector<double> zero(t.sites(), 0.0);
    auto r = assemble_representation(flow, init, zero, 20000, 16);
    QuadratureSpec quad;
    quad.samples = 100000;
    auto o = brute_partition(K, t, zero, quad);
    CHECK(std::abs(r.product - o.value) <= 3.0 * std::hypot(r.product_err, o.err));
  }
}
