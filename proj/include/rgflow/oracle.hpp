#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "rgflow/frd.hpp"
#include "rgflow/gaussian.hpp"
#include "rgflow/lattice.hpp"
#include "rgflow/potential.hpp"

namespace rg {

struct OracleEstimate {
  double value = 0.0;
  double err = 0.0;  // zero only for closed forms
  std::string method;
  long samples = 0;
};

// ln(Z^{(q)} / Z^{(0)}) = (1/2) sum_{p != 0} (ln A0(p) - ln Aq(p)).
double log_gaussian_ratio(const Torus& t, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& q);
inline double gaussian_ratio(const Torus& t, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& q) {
  return std::exp(log_gaussian_ratio(t, Q, q));
}
// E_{mu_0}[exp((1/2) sum_x q(grad phi(x)))] by Monte Carlo.
OracleEstimate gaussian_ratio_mc(const Torus& t, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& q,
                                 const QuadratureSpec& quad);

// ln of the Gaussian normaliser on mean-zero fields at inverse temperature beta:
// sum_{p != 0} (1/2) ln(2 pi / (beta A(p))).
double log_gaussian_normaliser(const Torus& t, const Eigen::MatrixXd& Q, double beta);

// exp((1/2)(f, C f)) for the Green kernel of Q.
double gaussian_laplace(const Torus& t, const Eigen::MatrixXd& Q, std::span<const double> f);

// E_{mu_Q}[e^{(f,phi)} prod_x (1 + K(grad phi(x)))], exact Fourier sampling, antithetic pairs.
OracleEstimate brute_partition(const MayerFunction& K, const Torus& t, std::span<const double> f,
                               const QuadratureSpec& quad);
// Same for several Mayer functions sharing Q, with common random fields.
VectorEstimate brute_partition_many(const std::vector<MayerFunction>& Ks, const Torus& t, std::span<const double> f,
                                    const QuadratureSpec& quad);

// Closed form of the perturbative partition function for quadratic potentials, NaN otherwise.
double closed_form_log_partition(const PotentialSpec& U, const Torus& t);

// Deformation vector: F along the first axis.
std::vector<double> tilt(int d, double F);

struct FreeEnergyRow {
  double F = 0.0;
  double W = 0.0;
  double err = 0.0;
  double log_z = 0.0;      // ln of the perturbative partition function
  double log_z_err = 0.0;
  double closed = 0.0;     // closed-form W, NaN if unavailable
};

struct FreeEnergyScan {
  std::vector<FreeEnergyRow> rows;
  std::vector<double> second_diff, second_err;
  bool convex = true;           // every second difference > 3 sigma
  double max_closed_dev = 0.0;  // max |W - closed| where a closed form exists
};

FreeEnergyScan free_energy_scan(const PotentialSpec& U, double beta, const Torus& t, const std::vector<double>& grid,
                                const QuadratureSpec& quad);

struct ScalingLimitRow {
  int N = 0;
  double laplace = 0.0, err = 0.0;
  double lattice_exact = 0.0;
  double prediction = 0.0;
  double discrepancy = 0.0;  // |ln laplace - ln prediction| / |ln prediction|
};

struct ScalingLimitSpec {
  double amplitude = 11.2;
  std::vector<int> mode{1, 0};
  std::vector<int> Ns{1, 2, 3};
};

// f_N(x) = L^{-N(d+2)/2} g(L^{-N} x) - c_N with g(u) = A cos(2 pi p.u).
std::vector<double> scaled_test_function(const Torus& t, const ScalingLimitSpec& s);

std::vector<ScalingLimitRow> scaling_limit_check(const PotentialSpec& U, double beta, int L, const ScalingLimitSpec& s,
                                                 const QuadratureSpec& quad);

}  // namespace rg
