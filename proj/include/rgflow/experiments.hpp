#pragma once

#include <string>
#include <vector>

#include "rgflow/config.hpp"
#include "rgflow/report.hpp"

namespace rg {

const std::vector<std::string>& subcommands();
bool is_subcommand(const std::string& name);

// Runs one subcommand; checks in the report decide the exit status.
Report run_subcommand(const std::string& name, const RunConfig& cfg);

Report frd_check(const RunConfig& cfg);
Report conserve(const RunConfig& cfg);
Report rg_run(const RunConfig& cfg);
Report oracle_compare(const RunConfig& cfg);
Report free_energy(const RunConfig& cfg);
Report scaling_limit(const RunConfig& cfg);
Report zd_check(const RunConfig& cfg);

// ---- pieces shared with the tests ----

// max over k < N-1 and i, j of |grad_i grad_j C_k| differences between tori N < N2 at common offsets
double frd_n_independence(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& q, int L, int d, int N, int N2);

struct RestrictionReport {
  int trials = 0;
  int identical = 0;        // bit-identical K+(U) under changes outside U*
  int control_changed = 0;  // values that moved under a change inside U*
  double max_diff = 0.0;
};

// Randomised restriction trials for the scale-0 step on the L^3 torus with a synthetic K.
RestrictionReport restriction_check(int L, int d, int trials, uint64_t seed, const StepConfig& cfg);

struct WickTrial {
  int trial = 0;
  int degree = 0;
  double wick = 0.0;
  Estimate mc;
  bool ok = false;  // within `sigmas` standard errors
};

// Random polynomials of degree <= 4 in gradient coordinates: exact Gaussian convolution against Monte Carlo.
std::vector<WickTrial> wick_mc_trials(const Torus& t, const Kernel& C, int trials, uint64_t seed, long samples,
                                      int batches, double sigmas);

struct DecayRow {
  int N = 0;
  bool tuned = false;
  InitialData data;
  double log_ratio = 0.0;
  Estimate brute;
  double z_minus_1 = 0.0;  // remainder minus one via the representation identity
  double sigma = 0.0;      // brute-force and tuning noise
  Estimate flow;           // direct flow estimate of the remainder, tuned rows only
};

struct DecayReport {
  std::vector<DecayRow> rows;
  double gap = 0.0;  // |Z_1 - 1| - |Z_2 - 1| for the tuned rows
  double gap_sigma = 0.0;
  bool pass = false;
};

// Tuned and untuned remainders at N = 1, 2.
DecayReport remainder_decay(const RunConfig& cfg);

}  // namespace rg
