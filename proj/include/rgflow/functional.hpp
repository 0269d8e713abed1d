#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "rgflow/lattice.hpp"
#include "rgflow/montecarlo.hpp"
#include "rgflow/polymer.hpp"
#include "rgflow/taylor.hpp"

namespace rg {

// Selects the shared randomness of a stochastic evaluation; sign flips every Gaussian draw.
struct SampleKey {
  uint64_t index = 0;
  int sign = 1;
};

// (X, phi) -> R at one scale. Every functional is 1 on the empty polymer.
class PolymerFunctional {
 public:
  virtual ~PolymerFunctional() = default;

  virtual int scale() const = 0;
  virtual const Blocks& blocks() const = 0;
  // true if values are single-sample unbiased estimates driven by SampleKey
  virtual bool stochastic() const { return false; }
  // value on X is the product of its values on the blocks of X
  virtual bool multiplicative() const { return false; }
  // sites read by F(X, .)
  virtual Polymer dependency(const Polymer& X) const = 0;
  virtual void sample_many(std::span<const Polymer> Xs, std::span<const double> phi, SampleKey key,
                           std::span<double> out) const = 0;
  virtual std::optional<TaylorPolynomial> polynomial(const Polymer&) const { return std::nullopt; }

  double eval(const Polymer& X, std::span<const double> phi, SampleKey key = {}) const;
};

using FunctionalPtr = std::shared_ptr<const PolymerFunctional>;

// Sites read by forward differences of order <= reach starting in X.
Polymer forward_closure(const Blocks& g, const Polymer& X, int reach);

// ---- relevant Hamiltonians (scalar fields) ----

// beta with 1 <= |beta| <= floor(d/2) + 1
std::vector<MultiIndex> relevant_linear_indices(int d);

struct RelevantHamiltonian {
  int d = 2;
  double a_const = 0.0;
  std::vector<double> a_lin;  // over relevant_linear_indices(d)
  Eigen::MatrixXd a_quad;     // entries (i, j) with i <= j are used

  static RelevantHamiltonian zero(int d);
  // the Hamiltonian (1/2) sum_ij q_ij grad_i phi grad_j phi
  static RelevantHamiltonian from_q(const Eigen::MatrixXd& q);
  Eigen::MatrixXd q() const;

  int dim() const;
  std::vector<double> to_vector() const;  // [const, lin..., quad (i<=j, row-major)...]
  static RelevantHamiltonian from_vector(int d, std::span<const double> v);

  RelevantHamiltonian& operator+=(const RelevantHamiltonian& o);
  RelevantHamiltonian& operator*=(double s);
  friend RelevantHamiltonian operator+(RelevantHamiltonian a, const RelevantHamiltonian& b) { return a += b; }
  friend RelevantHamiltonian operator-(RelevantHamiltonian a, RelevantHamiltonian b) { return a += (b *= -1.0); }
  friend RelevantHamiltonian operator*(RelevantHamiltonian a, double s) { return a *= s; }
};

// Per-site density of a relevant Hamiltonian; H(B) is the sum over the sites of B.
class HamiltonianEvaluator {
 public:
  HamiltonianEvaluator(const Torus& t, const RelevantHamiltonian& H);
  const RelevantHamiltonian& hamiltonian() const { return H_; }
  double density(std::span<const double> phi, long x) const;
  double sum(std::span<const double> phi, std::span<const long> sites) const;
  TaylorPolynomial polynomial(std::span<const long> sites) const;
  int reach() const { return reach_; }

 private:
  RelevantHamiltonian H_;
  JetStencil lin_, unit_;
  int reach_;
};

double relevant_eval(const Blocks& g, const RelevantHamiltonian& H, int k, long block, std::span<const double> phi);

// ---- weights and norms ----

struct WeightParams {
  double h = 1.0;
  double zeta = 0.5;
  double lambda_W = 0.125;    // coefficient of the small-set weight w
  double lambda_big = 0.125;  // coefficient of the large-set weight W
  double A = 2.0;             // polymer-size penalty base

  double h_at(int j) const { return std::ldexp(h, j); }
  // h_j L^{-j|alpha|} L^{-j(d-2)/2}
  double w_scale(int j, int alpha_order, int L, int d) const;
};

inline int p_phi(int d) { return d / 2 + 2; }

double h_norm(const RelevantHamiltonian& H, int k, const WeightParams& p, int L);

// Affine, cosine and sine modes along each axis.
std::vector<std::vector<double>> norm_test_family(const Torus& t);

// Weighted l1 bound: sum |c| prod w_k(alpha_l) over monomials.
double taylor_norm(const TaylorPolynomial& P, int k, const WeightParams& p, int L, int d);
// Surrogate for functionals without a polynomial form: sup over a fixed test family of
// |D^n F(phi)[g,..,g]| / n! for n <= 2, g normalised so max |grad^alpha g| / w_k(alpha) = 1 on X*.
double taylor_norm(const PolymerFunctional& F, const Polymer& X, std::span<const double> phi, int k,
                   const WeightParams& p, double fd_step = 1e-4);

enum class WeightFlavor { small_set, large_set, mixed };
double weight_eval(WeightFlavor flavor, const Blocks& g, const Polymer& X, std::span<const double> phi, int k,
                   const WeightParams& p);

// ---- concrete functionals ----

// 1 on the empty polymer, 0 elsewhere.
class IdentityElement : public PolymerFunctional {
 public:
  IdentityElement(std::shared_ptr<const Blocks> g, int k) : g_(std::move(g)), k_(k) {}
  int scale() const override { return k_; }
  const Blocks& blocks() const override { return *g_; }
  bool multiplicative() const override { return true; }
  Polymer dependency(const Polymer& X) const override { return g_->sites(X); }
  void sample_many(std::span<const Polymer> Xs, std::span<const double>, SampleKey, std::span<double> out) const override;
  std::optional<TaylorPolynomial> polynomial(const Polymer& X) const override;

 private:
  std::shared_ptr<const Blocks> g_;
  int k_;
};

// X -> prod_{x in X} f(x, phi); f reads forward differences up to `reach`.
class SiteProduct : public PolymerFunctional {
 public:
  using SiteFactor = std::function<double(std::span<const double> phi, long x)>;
  SiteProduct(std::shared_ptr<const Blocks> g, int k, SiteFactor f, int reach)
      : g_(std::move(g)), k_(k), f_(std::move(f)), reach_(reach) {}
  int scale() const override { return k_; }
  const Blocks& blocks() const override { return *g_; }
  bool multiplicative() const override { return true; }
  Polymer dependency(const Polymer& X) const override { return forward_closure(*g_, g_->sites(X), reach_); }
  void sample_many(std::span<const Polymer> Xs, std::span<const double> phi, SampleKey, std::span<double> out) const override;

 private:
  std::shared_ptr<const Blocks> g_;
  int k_;
  SiteFactor f_;
  int reach_;
};

// e^{-H(X)} for a relevant Hamiltonian at scale k.
std::shared_ptr<SiteProduct> exp_minus_h(std::shared_ptr<const Blocks> g, int k, const RelevantHamiltonian& H);

// Per-polymer polynomial supplied by a generator; the value is the polynomial at phi.
class PolynomialFunctional : public PolymerFunctional {
 public:
  using Generator = std::function<TaylorPolynomial(const Polymer&)>;
  PolynomialFunctional(std::shared_ptr<const Blocks> g, int k, Generator gen, int reach)
      : g_(std::move(g)), k_(k), gen_(std::move(gen)), reach_(reach) {}
  int scale() const override { return k_; }
  const Blocks& blocks() const override { return *g_; }
  Polymer dependency(const Polymer& X) const override { return forward_closure(*g_, g_->sites(X), reach_); }
  void sample_many(std::span<const Polymer> Xs, std::span<const double> phi, SampleKey, std::span<double> out) const override;
  std::optional<TaylorPolynomial> polynomial(const Polymer& X) const override;

 private:
  std::shared_ptr<const Blocks> g_;
  int k_;
  Generator gen_;
  int reach_;
};

// (F o G)(X) = sum_{Y subset X} F(Y) G(X \ Y), deterministic functionals only.
double circ(const PolymerFunctional& F, const PolymerFunctional& G, const Polymer& X, std::span<const double> phi,
            long budget = 1L << 16);

// ---- second order projection ----

// Test fields and the linear solve that extract a relevant Hamiltonian from Taylor data at 0.
class Pi2Plan {
 public:
  Pi2Plan(const Blocks& g, int k, long block, double fd_step);

  // fields()[0] is zero; then +tP, -tP per linear test polynomial; then +s g, -s g per affine field
  const std::vector<std::vector<double>>& fields() const { return fields_; }
  RelevantHamiltonian solve(std::span<const double> values) const;
  // coefficient vector = jacobian() * values
  const Eigen::MatrixXd& jacobian() const { return J_; }
  RelevantHamiltonian solve_polynomial(const TaylorPolynomial& P, const Torus& t) const;
  int rank_linear() const { return rank_lin_; }
  int rank_quadratic() const { return rank_quad_; }

 private:
  int d_;
  long volume_;
  double t_, s_;
  std::vector<std::vector<double>> lin_fields_, quad_fields_;  // unscaled
  std::vector<std::vector<double>> fields_;
  Eigen::MatrixXd J_;
  Eigen::MatrixXd lin_inv_, quad_inv_;
  int rank_lin_ = 0, rank_quad_ = 0;
};

struct Pi2Options {
  double fd_step = 1e-4;
  long samples = 20000;
  int batches = 32;
  bool antithetic = true;
};

struct Pi2Result {
  RelevantHamiltonian H;
  std::vector<double> err;  // per coefficient, to_vector order
};

Pi2Result pi2_project(const PolymerFunctional& F, long block, const Pi2Options& opt);

}  // namespace rg
