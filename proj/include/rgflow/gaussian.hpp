#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rgflow/fft.hpp"
#include "rgflow/frd.hpp"
#include "rgflow/functional.hpp"
#include "rgflow/montecarlo.hpp"
#include "rgflow/rng.hpp"
#include "rgflow/taylor.hpp"

namespace rg {

// Centered Gaussian field on the torus with a translation-invariant covariance.
class GaussianLayer {
 public:
  GaussianLayer(const Torus& t, Kernel C);

  const Torus& torus() const { return *t_; }
  const Kernel& kernel() const { return C_; }
  double covariance(long x, long y) const;
  // max_x |(factor factor^T)(x) - C(x)|
  double factor_residual() const;
  // sample number i of the stream `key`; consecutive even/odd samples share one FFT
  void sample_into(uint64_t key, uint64_t i, std::span<double> out) const;
  Field sample_field(uint64_t key, uint64_t i) const;

 private:
  std::shared_ptr<const Torus> t_;
  std::shared_ptr<const Fft> fft_;
  Kernel C_;
  std::vector<double> amp_;  // sqrt(C^(p) / V)
  uint64_t id_ = 0;          // sample-cache identity
};

struct QuadratureSpec {
  enum class Mode { monte_carlo, gauss_hermite };
  Mode mode = Mode::monte_carlo;
  long samples = 200000;
  int gh_nodes = 16;
  uint64_t seed = 1;
  bool antithetic = true;
  int batches = 32;
};

// Covariance of the layer restricted to the given sites (in the given order).
Eigen::MatrixXd marginal_covariance(const GaussianLayer& layer, std::span<const long> sites);

// Covariance of gradient coordinates under the kernel.
Eigen::MatrixXd jet_covariance(const Torus& t, const Kernel& C, const std::vector<JetVar>& vars);

// Sampler for the marginal on a fixed site set via a clipped symmetric eigendecomposition.
class RegionSampler {
 public:
  RegionSampler(const GaussianLayer& layer, std::vector<long> sites);
  const std::vector<long>& sites() const { return sites_; }
  void sample(NormalStream& rng, std::span<double> out) const;
  const Eigen::MatrixXd& factor() const { return factor_; }

 private:
  std::vector<long> sites_;
  Eigen::MatrixXd factor_;
};

// Probabilists' Gauss-Hermite rule (weights sum to 1) via Golub-Welsch.
struct GaussHermite {
  std::vector<double> nodes, weights;
};
GaussHermite gauss_hermite(int n);

// E[g(zeta)] for zeta ~ N(0, cov) by a tensor rule on the nonzero eigen-directions.
double gh_expectation(const Eigen::MatrixXd& cov, int nodes, const std::function<double(std::span<const double>)>& g,
                      int max_dim = 8);

// R F(X, phi) = E F(X, phi + xi). Only xi on the dependency region of X is drawn.
Estimate convolve(const PolymerFunctional& F, const Polymer& X, std::span<const double> phi,
                  const GaussianLayer& layer, const QuadratureSpec& quad);

// Exact Gaussian integration of a polynomial: E P(phi + xi) as a polynomial in phi.
TaylorPolynomial wick_convolve(const TaylorPolynomial& P, const Torus& t, const Kernel& C, int max_degree = 8);

// Stream key for the layer draws of one scale.
inline uint64_t layer_key(uint64_t seed, int scale, uint64_t tag = 0) { return hash_words({seed, 0x4c41594552ull, static_cast<uint64_t>(scale), tag}); }

}  // namespace rg
