#pragma once

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "rgflow/frd.hpp"
#include "rgflow/functional.hpp"
#include "rgflow/gaussian.hpp"
#include "rgflow/polymer.hpp"

namespace rg {

// Preimage tables keyed by (scale, cutoff); shared by geometries over the same torus.
class TableCache {
 public:
  std::shared_ptr<const PreimageTable> get(const Blocks& g, int k, int cutoff, long budget);

 private:
  std::mutex mu_;
  std::map<std::pair<int, int>, std::shared_ptr<const PreimageTable>> tables_;
};

// Everything a flow needs that depends only on (torus, Q, q).
struct FlowGeometry {
  std::shared_ptr<const Blocks> g;
  std::shared_ptr<TableCache> tables;
  std::shared_ptr<const EllipticOperator> A;
  FRDecomposition frd;
  // layers[k] is integrated out by the step k -> k+1; the last one is C_{N,N}
  std::vector<std::shared_ptr<const GaussianLayer>> layers;

  // `reuse` shares blocks and preimage tables with an earlier geometry on the same torus
  static std::shared_ptr<const FlowGeometry> build(const Torus& t, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& q,
                                                   const FlowGeometry* reuse = nullptr);
  const Torus& torus() const { return g->torus(); }
  int N() const { return g->N(); }
};

struct StepConfig {
  int cutoff = 6;     // |X| bound for the preimage sum at scales >= 1
  int cutoff0 = 3;    // same at scale 0
  long budget = 1L << 22;
  uint64_t seed = 1;
  int gh_nodes = 16;
  Pi2Options pi2;

  int cutoff_at(int k) const { return k == 0 ? cutoff0 : cutoff; }
};

// ---- scale-0 style functionals ----

// X -> prod_{x in X} f(jets at x), scale 0; jets are the forward differences in `alphas`.
class SiteJetProduct : public PolymerFunctional {
 public:
  using JetFactor = std::function<double(std::span<const double> jets)>;
  SiteJetProduct(std::shared_ptr<const Blocks> g, std::vector<MultiIndex> alphas, JetFactor f);
  int scale() const override { return 0; }
  const Blocks& blocks() const override { return *g_; }
  bool multiplicative() const override { return true; }
  Polymer dependency(const Polymer& X) const override;
  void sample_many(std::span<const Polymer> Xs, std::span<const double> phi, SampleKey, std::span<double> out) const override;

  double site_value(std::span<const double> phi, long x) const;
  const JetStencil& stencil() const { return jets_; }
  const JetFactor& factor() const { return f_; }

 private:
  std::shared_ptr<const Blocks> g_;
  JetStencil jets_;
  JetFactor f_;
  int reach_;
};

// Synthetic non-multiplicative functional: K(X) = prod over components Y of
// amp(Y) * prod_{x in Y} (1 + c |grad phi(x)|^2), zero on components larger than max_blocks.
class TableFunctional : public PolymerFunctional {
 public:
  using Amplitude = std::function<double(const Polymer&)>;
  TableFunctional(std::shared_ptr<const Blocks> g, int k, Amplitude amp, double c, int max_blocks);
  int scale() const override { return k_; }
  const Blocks& blocks() const override { return *g_; }
  Polymer dependency(const Polymer& X) const override { return forward_closure(*g_, g_->sites(X), 1); }
  void sample_many(std::span<const Polymer> Xs, std::span<const double> phi, SampleKey, std::span<double> out) const override;
  std::optional<TaylorPolynomial> polynomial(const Polymer& X) const override;

 private:
  std::shared_ptr<const Blocks> g_;
  int k_;
  Amplitude amp_;
  double c_;
  int max_blocks_;
  JetStencil unit_;
};

// F(X, phi + xi) with xi drawn from a layer; single-sample estimate of R F.
class ConvolvedFunctional : public PolymerFunctional {
 public:
  ConvolvedFunctional(FunctionalPtr F, std::shared_ptr<const GaussianLayer> layer, uint64_t key)
      : F_(std::move(F)), layer_(std::move(layer)), key_(key) {}
  int scale() const override { return F_->scale(); }
  const Blocks& blocks() const override { return F_->blocks(); }
  bool stochastic() const override { return true; }
  Polymer dependency(const Polymer& X) const override { return F_->dependency(X); }
  void sample_many(std::span<const Polymer> Xs, std::span<const double> phi, SampleKey key,
                   std::span<double> out) const override;

 private:
  FunctionalPtr F_;
  std::shared_ptr<const GaussianLayer> layer_;
  uint64_t key_;
};

// ---- the effective Hamiltonian H~ ----

// Per-site densities of H~, constant over each k-block. Either one density for all
// blocks or a per-block provider evaluated lazily.
class BlockDensities {
 public:
  BlockDensities(const Blocks& g, int k, const RelevantHamiltonian& uniform);
  BlockDensities(const Blocks& g, int k, std::function<RelevantHamiltonian(long)> provider);

  int scale() const { return k_; }
  bool uniform() const { return static_cast<bool>(uniform_); }
  const RelevantHamiltonian& at(long block) const;
  // H~(B, phi) for the k-block B
  double on_block(std::span<const double> phi, long block) const;
  // sum over the k-blocks inside a polymer of any scale >= k
  double on_polymer(std::span<const double> phi, const Polymer& X) const;

 private:
  const HamiltonianEvaluator& evaluator(long block) const;
  const Blocks* g_;
  int k_;
  std::shared_ptr<HamiltonianEvaluator> uniform_;
  std::function<RelevantHamiltonian(long)> provider_;
  mutable std::vector<std::unique_ptr<HamiltonianEvaluator>> cache_;
  mutable std::unique_ptr<std::once_flag[]> once_;
};

// Pi2 R_{k+1} F(B) for a scale-k functional: Wick for polynomials, Gauss-Hermite over
// the site jets for SiteJetProduct, otherwise Monte Carlo with common random numbers.
Pi2Result project_convolved(const FunctionalPtr& F, long block, const FlowGeometry& geo, const StepConfig& cfg);

struct NextH {
  RelevantHamiltonian H;        // H~ density
  RelevantHamiltonian from_H;   // Pi2 R H
  RelevantHamiltonian from_K;   // Pi2 R K
  std::vector<double> err;      // MC error of from_K, to_vector order
};

// H~ at the origin block for translation-invariant data.
NextH next_H(const FlowGeometry& geo, int k, const RelevantHamiltonian& H, const FunctionalPtr& K,
             const StepConfig& cfg);

// ---- K+ ----

// K+(U) = e^{-H~(U)} sum_{pi(X)=U, |X|<=cutoff} e^{H~(X)} E G(X),
// G(X) = sum_{X3 subset X} K(X3, phi+xi) prod_{B in X\X3} (e^{-H(B,phi+xi)} - e^{-H~(B,phi)}).
// Values are single-sample unbiased estimates; the sample key selects xi and every inner draw.
class NextK : public PolymerFunctional {
 public:
  NextK(std::shared_ptr<const FlowGeometry> geo, int k, RelevantHamiltonian H, FunctionalPtr K,
        std::shared_ptr<const BlockDensities> Htilde, const StepConfig& cfg);

  int scale() const override { return k_ + 1; }
  const Blocks& blocks() const override { return *geo_->g; }
  bool stochastic() const override { return true; }
  Polymer dependency(const Polymer& U) const override;
  void sample_many(std::span<const Polymer> Us, std::span<const double> phi, SampleKey key,
                   std::span<double> out) const override;

  // block lists X at scale k with pi(X) = U and |X| <= cutoff
  const std::vector<std::vector<long>>& preimage(const Polymer& U) const;
  const BlockDensities& htilde() const { return *Ht_; }
  const FunctionalPtr& previous() const { return K_; }
  int cutoff() const { return cutoff_; }

 private:
  std::shared_ptr<const FlowGeometry> geo_;
  int k_;
  RelevantHamiltonian H_;
  HamiltonianEvaluator Hev_;
  FunctionalPtr K_;
  std::shared_ptr<const BlockDensities> Ht_;
  int cutoff_;
  long budget_;
  uint64_t key_;
  std::shared_ptr<const PreimageTable> table_;
  std::unordered_map<Polymer, std::size_t, PolymerHash> table_index_;
  mutable std::mutex mu_;
  mutable std::unordered_map<Polymer, std::shared_ptr<std::vector<std::vector<long>>>, PolymerHash> lazy_;
};

struct StepState {
  int k = 0;
  RelevantHamiltonian H;
  FunctionalPtr K;
};

struct StepResult {
  StepState next;
  NextH h;
};

StepResult rg_step(std::shared_ptr<const FlowGeometry> geo, const StepState& s, const StepConfig& cfg);

// One sample of (e^{-H} o K)(X, phi).
double circ_sample(const Blocks& g, const RelevantHamiltonian& H, const PolymerFunctional& K, const Polymer& X,
                   std::span<const double> phi, SampleKey key);

struct ConservationRow {
  Estimate lhs, rhs, residual;
};

// R_{k+1}(e^{-H_k} o K_k)(Lambda, phi) - (e^{-H_{k+1}} o K_{k+1})(Lambda, phi) with independent draws.
ConservationRow conservation_residual(const FlowGeometry& geo, const StepState& s, const StepState& next,
                               std::span<const double> phi, long samples, int batches, uint64_t seed);

// Monte Carlo Taylor surrogate of a (possibly stochastic) functional:
// |F(phi)| + sup_g |DF[g]| + sup_g |D^2F[g,g]|/2 over the norm test family, scaled by A^{|X|}.
Estimate functional_norm(const PolymerFunctional& F, const Polymer& X, std::span<const double> phi,
                         const WeightParams& w, long samples, int batches, double fd_step = 1e-3);

// ---- linearisation ----

// C Kdot(U) = sum_{B in U} (1 - Pi2) R Kdot(B) + sum_{|X|>=2, pi(X)=U} R Kdot(X), exact for polynomials.
TaylorPolynomial linearized_C(const FlowGeometry& geo, int k, const PolymerFunctional& Kdot, const Polymer& U,
                              int support_blocks, double fd_step = 1e-4);

struct ContractionRow {
  int k = 0;
  int direction = 0;
  double input_norm = 0.0;
  double output_norm = 0.0;
  double ratio = 0.0;
};

// Random degree <= 4 polynomial directions supported on connected polymers with <= 2 blocks.
std::vector<ContractionRow> contraction_diagnostic(const FlowGeometry& geo, int k, int directions, uint64_t seed,
                                                   const WeightParams& w);

}  // namespace rg
