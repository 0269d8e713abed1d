#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <memory>
#include <vector>

#include "rgflow/fft.hpp"
#include "rgflow/lattice.hpp"

namespace rg {

// Translation-invariant kernel stored by offset; offset u lives at site index torus.site(u).
struct Kernel {
  std::vector<double> values;

  double at(const Torus& t, std::span<const int> offset) const { return values[t.site(offset)]; }
};

// A = sum_ij (Q - q)_ij grad_j^* grad_i for scalar fields.
class EllipticOperator {
 public:
  EllipticOperator(const Torus& t, Eigen::MatrixXd Q, Eigen::MatrixXd q);

  const Torus& torus() const { return *t_; }
  const Eigen::MatrixXd& Q() const { return Q_; }
  const Eigen::MatrixXd& q() const { return q_; }
  Eigen::MatrixXd M() const { return Q_ - q_; }
  // Fourier symbol at every momentum (site order)
  const std::vector<double>& symbols() const { return symbol_; }
  std::vector<double> apply(std::span<const double> phi) const;
  double quadratic_form(std::span<const double> phi) const;
  const Fft& fft() const { return *fft_; }
  std::shared_ptr<const Torus> torus_ptr() const { return t_; }

 private:
  std::shared_ptr<const Torus> t_;
  Eigen::MatrixXd Q_, q_;
  std::vector<double> symbol_;
  std::shared_ptr<Fft> fft_;
};

double operator_norm(const Eigen::MatrixXd& m);

Kernel green_kernel(const EllipticOperator& A);
// Kernel convolved with a field: (C phi)(x) = sum_y C(x-y) phi(y)
std::vector<double> convolve_kernel(const Torus& t, const Fft& fft, const Kernel& C, std::span<const double> phi);
// Eigenvalues of the translation-invariant operator (real part of the DFT)
std::vector<double> kernel_spectrum(const Fft& fft, const Kernel& C);

struct FRDecomposition {
  int L = 3, N = 1;
  double lambda = 0.0;          // Neumann normaliser, depends on Q only
  std::vector<long> n;          // power cut points n_0..n_{N-1}
  std::vector<Kernel> slices;   // C_1..C_{N-1}, then C_{N,N}
  std::vector<double> shifts;   // M_1..M_{N-1}
  Kernel full;                  // the Green kernel being decomposed
};

FRDecomposition decompose(const EllipticOperator& A);

struct ScalingRow {
  int k;
  int alpha_order;
  double sup;
  double reference;
  bool log_branch;
};

struct FrdReport {
  double sum_residual = 0.0;
  std::vector<double> min_eigen;
  std::vector<double> range_residual;  // k = 1..N-1
  std::vector<ScalingRow> scaling;
  double lambda = 0.0;
};

FrdReport verify_decomposition(const EllipticOperator& A, const FRDecomposition& frd);

// grad_j^* grad_i applied to a kernel
Kernel second_difference(const Torus& t, const Kernel& C, int i, int j);

nlohmann::ordered_json export_frd(const Torus& t, const FRDecomposition& frd);

}  // namespace rg
