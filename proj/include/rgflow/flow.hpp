#pragma once

#include <Eigen/Dense>

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rgflow/oracle.hpp"
#include "rgflow/potential.hpp"
#include "rgflow/rg_step.hpp"

namespace rg {

struct FlowConfig {
  StepConfig step;
  long final_samples = 100000;  // Monte Carlo pairs for (e^{-H_N} + K_N)(Lambda)
  int batches = 32;
  long norm_samples = 2000;
  WeightParams weights;
  double tuner_tol = 1e-6;
  int tuner_max_iter = 30;
};

// Relevant data (e, l, q) of the initial Hamiltonian H_0 = -e + l(grad phi) + q(grad phi)/2.
struct InitialData {
  double e = 0.0;
  std::vector<double> l;  // over relevant_linear_indices(d)
  Eigen::MatrixXd q;

  static InitialData zero(int d);
  RelevantHamiltonian hamiltonian() const;
};

// K_0(X) = prod_{x in X} e^{-h_0(x)} K(grad phi(x)).
std::shared_ptr<SiteJetProduct> initial_K(std::shared_ptr<const Blocks> g, const MayerFunction& K,
                                          const RelevantHamiltonian& H0);

struct StepReport {
  int k = 0;  // the step k -> k+1
  RelevantHamiltonian H_next, from_H, from_K;
  std::vector<double> from_K_err;
  double h_norm = 0.0;   // of H_{k+1}
  Estimate k_norm;       // of K_{k+1} on the origin block
  double eta = 0.0;      // ||K_{k+1}|| / ||K_k||
};

struct FlowResult {
  std::shared_ptr<const FlowGeometry> geo;
  std::vector<StepState> states;  // scales 0..N
  std::vector<StepReport> reports;
  Estimate k0_norm;
};

FlowResult run_flow(std::shared_ptr<const FlowGeometry> geo, const MayerFunction& K, const InitialData& init,
                    const FlowConfig& cfg, bool with_norms = false);

// (e^{-H_N} + K_N)(Lambda, phi) by Monte Carlo over the nested draws.
Estimate final_value(const FlowResult& flow, std::span<const double> phi, long samples, int batches);

struct TuneIteration {
  int iter = 0;
  InitialData data;
  std::vector<double> terminal;  // H_N coefficients, to_vector order
  std::vector<double> terminal_err;  // Monte Carlo error of the last projection
  double residual = 0.0;         // max |terminal|
};

struct TuningResult {
  InitialData data;
  std::vector<TuneIteration> history;
  bool converged = false;
  double residual = 0.0;
  double l_size = 0.0;  // max |l|
};

// Fixed-point shooting on the terminal relevant coefficients with common random numbers.
TuningResult tune(const Torus& t, const MayerFunction& K, const FlowConfig& cfg, InitialData start = {});

struct RepresentationReport {
  double log_ratio = 0.0;    // ln Z^{(q)}/Z^{(0)}
  double log_gauss = 0.0;    // (1/2)(f, C f)
  double log_energy = 0.0;   // -e |Lambda|
  Estimate remainder;        // (e^{-H_N} + K_N)(Lambda, C f)
  double product = 0.0;
  double product_err = 0.0;
};

RepresentationReport assemble_representation(const FlowResult& flow, const InitialData& init,
                                             std::span<const double> f, long samples, int batches);

struct ZdRow {
  int window = 0;
  Estimate small, large;
  double diff = 0.0;
  double sigma = 0.0;
  bool ok = true;  // |diff| <= 3 sigma
};

struct ZdReport {
  std::vector<ZdRow> rows;
  double max_ratio = 0.0;  // max |diff| / sigma
  double max_sigma = 0.0;
  bool ok = true;
};

// K_1 on the origin 1-block for tori N < N2 at a periodically tiled field.
// `misalign` shifts the tiling on the larger torus along the first axis (negative control).
ZdReport zd_consistency(const MayerFunction& K, const InitialData& init, int L, int N, int N2, int windows,
                        const FlowConfig& cfg, int misalign = 0);

}  // namespace rg
