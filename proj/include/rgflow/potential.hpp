#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "rgflow/lattice.hpp"

namespace rg {

enum class PotentialFamily { quadratic, double_well, gaussian_perturbation };

PotentialFamily parse_family(const std::string& name);
std::string family_name(PotentialFamily f);

// Single-site potential U on nearest-neighbour gradients z in R^d (scalar fields).
//   quadratic:              U = stiffness |z|^2 / 2
//   double_well:            U = sum_i z_i^2/2 + kappa (1 - cos(omega_w z_i))
//   gaussian_perturbation:  U = (1 + epsilon) |z|^2 / 2, integrated against the reference Q = I
struct PotentialSpec {
  PotentialFamily family = PotentialFamily::double_well;
  int d = 2;
  double stiffness = 1.0;
  double kappa = 0.5;
  double omega_w = 2.0;
  double epsilon = 0.1;
  double omega = 0.01;   // lower growth constant
  double omega0 = 1.0 / 3.0;

  double U(std::span<const double> z) const;
  void grad(std::span<const double> z, std::span<double> out) const;
  Eigen::MatrixXd hessian0() const;
  // quadratic form of the reference Gaussian measure
  Eigen::MatrixXd reference_Q() const;
};

struct PotentialReport {
  bool passed = true;
  bool lower_ok = true, upper_ok = true, omega_range_ok = true, growth_ok = true;
  std::string message;
  std::vector<double> witness;
  double worst_margin = 0.0;
  std::vector<std::pair<double, double>> growth_trend;  // (t, t^-2 ln Psi(t))
};

// Checks the bounds on Q, 0 < omega < omega0/8 and U(z) - DU(0)z - U(0) >= omega |z|^2 on a cubic grid.
PotentialReport validate_potential(const PotentialSpec& U, double radius = 3.0, int points_per_axis = 25);

// K(z) = exp(-beta Ubar(z / sqrt(beta), F)) - 1 with
// Ubar(z, F) = U(z + F) - U(F) - DU(F) z - Q(z)/2 and Q the reference form.
class MayerFunction {
 public:
  MayerFunction(const PotentialSpec& U, std::vector<double> F, double beta);
  double operator()(std::span<const double> z) const;
  double ubar(std::span<const double> z) const;  // Ubar(z, F), unscaled
  const PotentialSpec& potential() const { return U_; }
  const std::vector<double>& F() const { return F_; }
  double beta() const { return beta_; }
  bool is_zero() const;

 private:
  PotentialSpec U_;
  std::vector<double> F_, dUF_;
  double UF_ = 0.0;
  double beta_, inv_sqrt_beta_;
  Eigen::MatrixXd Q_;
};

// Taylor surrogate at 0 up to order r0 along coordinate and diagonal directions, scale h:
// sum_n sup_e |D^n K(0)[e,..,e]| h^n / n!.
double mayer_norm(const MayerFunction& K, double h = 1.0, int r0 = 4);

}  // namespace rg
