#include "rgflow/potential.hpp"

#include <fmt/format.h>

#include <cmath>

namespace rg {

PotentialFamily parse_family(const std::string& name) {
  if (name == "quadratic") return PotentialFamily::quadratic;
  if (name == "double_well") return PotentialFamily::double_well;
  if (name == "gaussian_perturbation") return PotentialFamily::gaussian_perturbation;
  fail(ErrorKind::invalid, fmt::format("unknown potential family '{}'", name));
}

std::string family_name(PotentialFamily f) {
  switch (f) {
    case PotentialFamily::quadratic: return "quadratic";
    case PotentialFamily::double_well: return "double_well";
    case PotentialFamily::gaussian_perturbation: return "gaussian_perturbation";
  }
  return "?";
}

double PotentialSpec::U(std::span<const double> z) const {
  double s = 0.0;
  switch (family) {
    case PotentialFamily::quadratic:
      for (double v : z) s += 0.5 * stiffness * v * v;
      break;
    case PotentialFamily::double_well:
      for (double v : z) s += 0.5 * v * v + kappa * (1.0 - std::cos(omega_w * v));
      break;
    case PotentialFamily::gaussian_perturbation:
      for (double v : z) s += 0.5 * (1.0 + epsilon) * v * v;
      break;
  }
  return s;
}

void PotentialSpec::grad(std::span<const double> z, std::span<double> out) const {
  for (std::size_t i = 0; i < z.size(); ++i) {
    switch (family) {
      case PotentialFamily::quadratic: out[i] = stiffness * z[i]; break;
      case PotentialFamily::double_well: out[i] = z[i] + kappa * omega_w * std::sin(omega_w * z[i]); break;
      case PotentialFamily::gaussian_perturbation: out[i] = (1.0 + epsilon) * z[i]; break;
    }
  }
}

Eigen::MatrixXd PotentialSpec::hessian0() const {
  double c = 1.0;
  switch (family) {
    case PotentialFamily::quadratic: c = stiffness; break;
    case PotentialFamily::double_well: c = 1.0 + kappa * omega_w * omega_w; break;
    case PotentialFamily::gaussian_perturbation: c = 1.0 + epsilon; break;
  }
  return c * Eigen::MatrixXd::Identity(d, d);
}

Eigen::MatrixXd PotentialSpec::reference_Q() const {
  if (family == PotentialFamily::gaussian_perturbation) return Eigen::MatrixXd::Identity(d, d);
  return hessian0();
}

PotentialReport validate_potential(const PotentialSpec& U, double radius, int points_per_axis) {
  PotentialReport r;
  const int d = U.d;
  Eigen::MatrixXd Q = U.reference_Q();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
  double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  auto note = [&](const std::string& m) { r.message += (r.message.empty() ? "" : "; ") + m; };
  if (lo < U.omega0) {
    r.lower_ok = false;
    note(fmt::format("Q has eigenvalue {} below omega0 = {}", lo, U.omega0));
  }
  if (hi > 1.0 / U.omega0) {
    r.upper_ok = false;
    note(fmt::format("Q has eigenvalue {} above 1/omega0 = {}", hi, 1.0 / U.omega0));
  }
  if (!(U.omega > 0.0 && U.omega < U.omega0 / 8.0)) {
    r.omega_range_ok = false;
    note(fmt::format("omega = {} outside (0, omega0/8 = {})", U.omega, U.omega0 / 8.0));
  }
  std::vector<double> zero(d, 0.0), g0(d);
  U.grad(zero, g0);
  const double U0 = U.U(zero);
  std::vector<int> idx(d, 0);
  std::vector<double> z(d);
  r.worst_margin = std::numeric_limits<double>::infinity();
  while (true) {
    double n2 = 0.0, lin = 0.0;
    for (int i = 0; i < d; ++i) {
      z[i] = -radius + 2.0 * radius * idx[i] / (points_per_axis - 1);
      n2 += z[i] * z[i];
      lin += g0[i] * z[i];
    }
    double margin = U.U(z) - lin - U0 - U.omega * n2;
    if (margin < r.worst_margin) {
      r.worst_margin = margin;
      if (margin < -1e-12) r.witness = z;
    }
    int j = d - 1;
    while (j >= 0 && idx[j] == points_per_axis - 1) idx[j--] = 0;
    if (j < 0) break;
    ++idx[j];
  }
  if (r.worst_margin < -1e-12) {
    r.growth_ok = false;
    note(fmt::format("U(z) - DU(0)z - U(0) < omega|z|^2 by {}", -r.worst_margin));
  }
  // growth of Psi(t) = 1 + sup_{|z|<=t} |DU(z)|^2 along the axes
  for (double t = 1.0; t <= 8.0 * radius; t *= 2.0) {
    double sup = 0.0;
    for (int s = 0; s <= 64; ++s) {
      std::vector<double> zz(d, 0.0), gg(d);
      zz[0] = t * s / 64.0;
      U.grad(zz, gg);
      double n = 0.0;
      for (double v : gg) n += v * v;
      sup = std::max(sup, n);
    }
    r.growth_trend.emplace_back(t, std::log1p(sup) / (t * t));
  }
  r.passed = r.lower_ok && r.upper_ok && r.omega_range_ok && r.growth_ok;
  if (r.passed) r.message = "ok";
  return r;
}

MayerFunction::MayerFunction(const PotentialSpec& U, std::vector<double> F, double beta)
    : U_(U), F_(std::move(F)), beta_(beta), inv_sqrt_beta_(1.0 / std::sqrt(beta)), Q_(U.reference_Q()) {
  require(beta > 0.0, "beta must be positive");
  if (F_.empty()) F_.assign(U.d, 0.0);
  require(static_cast<int>(F_.size()) == U.d, "deformation must have d entries");
  dUF_.resize(U.d);
  U_.grad(F_, dUF_);
  UF_ = U_.U(F_);
}

double MayerFunction::ubar(std::span<const double> z) const {
  const int d = U_.d;
  double shifted[8];
  double lin = 0.0, quad = 0.0;
  for (int i = 0; i < d; ++i) {
    shifted[i] = z[i] + F_[i];
    lin += dUF_[i] * z[i];
    for (int j = 0; j < d; ++j) quad += Q_(i, j) * z[i] * z[j];
  }
  return U_.U(std::span<const double>(shifted, d)) - UF_ - lin - 0.5 * quad;
}

double MayerFunction::operator()(std::span<const double> z) const {
  const int d = U_.d;
  double s[8];
  for (int i = 0; i < d; ++i) s[i] = z[i] * inv_sqrt_beta_;
  double e = -beta_ * ubar(std::span<const double>(s, d));
  return std::expm1(std::min(e, 700.0));
}

bool MayerFunction::is_zero() const {
  return U_.family == PotentialFamily::quadratic;
}

double mayer_norm(const MayerFunction& K, double h, int r0) {
  const int d = K.potential().d;
  std::vector<std::vector<double>> dirs;
  for (int i = 0; i < d; ++i) {
    std::vector<double> e(d, 0.0);
    e[i] = 1.0;
    dirs.push_back(e);
  }
  dirs.push_back(std::vector<double>(d, 1.0 / std::sqrt(static_cast<double>(d))));
  const double delta = 0.1;
  double total = 0.0;
  // central differences for the n-th derivative along e, n <= r0
  for (int n = 0; n <= r0; ++n) {
    double sup = 0.0;
    for (const auto& e : dirs) {
      auto at = [&](double t) {
        std::vector<double> z(d);
        for (int i = 0; i < d; ++i) z[i] = t * e[i];
        return K(z);
      };
      double dn = 0.0;
      // binomial stencil sum_j (-1)^j C(n,j) f((n/2 - j) delta) / delta^n
      double c = 1.0;
      for (int j = 0; j <= n; ++j) {
        dn += ((j % 2) ? -c : c) * at((0.5 * n - j) * delta);
        c = c * (n - j) / (j + 1);
      }
      dn /= std::pow(delta, n);
      sup = std::max(sup, std::abs(dn));
    }
    double fact = std::tgamma(n + 1.0);
    total += sup * std::pow(h, n) / fact;
  }
  return total;
}

}  // namespace rg
