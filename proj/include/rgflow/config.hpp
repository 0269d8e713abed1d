#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <string>
#include <vector>

#include "rgflow/error.hpp"
#include "rgflow/flow.hpp"
#include "rgflow/gaussian.hpp"
#include "rgflow/lattice.hpp"
#include "rgflow/oracle.hpp"
#include "rgflow/potential.hpp"

namespace rg {

// Malformed or unknown configuration; every problem found is listed, one per line.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct Tolerances {
  double frd = 1e-10;           // sum, eigenvalue and range residuals
  double frd_n = 1e-9;          // N-independence of second differences
  double sigmas = 3.0;          // agreement threshold in standard errors
  double conserve_rel = 1e-3;   // required relative standard error of the residual
  double representation_rel = 5e-3;
  double closed_form = 1e-3;    // free-energy Gaussian control
  double scaling = 0.05;        // discrepancy at the largest N
  double zd_sigma = 1e-3;       // required standard error per window
};

struct RunOptions {
  int fields = 20;                 // conserve: random fields
  double field_scale = 0.5;        // conserve: fields are this times a full-covariance sample
  long samples = 20000;            // conserve / zd-check Monte Carlo pairs
  bool tune = false;               // rg-run / oracle-compare: tune (e, l, q) first
  bool norms = true;               // rg-run: functional norms per scale
  int directions = 10;             // rg-run: contraction directions per scale
  int restriction_trials = 50;     // rg-run: restriction trials, 0 disables
  bool decay = false;              // rg-run: remainder decay over N = 1, 2
  long decay_pi2_samples = 100000;
  long decay_flow_samples = 20000;
  int wick_trials = 20;            // oracle-compare: Wick/Monte Carlo polynomials, 0 disables
  double f_amplitude = 0.5;        // oracle-compare: nonzero test function amplitude
  int N2 = 3;                      // zd-check: larger torus
  int windows = 5;
  std::vector<double> grid;        // free-energy: tilt grid
  double control_epsilon = 0.1;    // free-energy: Gaussian control
  ScalingLimitSpec scaling;
  std::vector<double> q_list;      // frd-check: q = s I for each s
  std::vector<int> N_list;         // frd-check: scale counts
  int workers = 0;                 // 0 = default
};

struct RunConfig {
  TorusParams torus;
  PotentialSpec potential;
  double beta = 50.0;
  std::vector<double> F;  // deformation, length d
  Eigen::MatrixXd q;      // initial / fixed q
  double e = 0.0;         // initial constant part
  FlowConfig flow;
  QuadratureSpec quad;
  RunOptions run;
  Tolerances tol;
  std::string out_dir = ".";
  bool json = true;
  bool csv = true;

  // every resolved value, stable order
  nlohmann::ordered_json echo() const;
  std::string hash() const;  // FNV-1a of the echo, hex
  MayerFunction mayer() const;
};

// Flat key/value store with origins, from INI or JSON text.
struct ConfigSource {
  struct Entry {
    std::string key;    // section.key
    std::string value;  // scalar text, lists comma-separated
    std::string where;  // file:line or --set
  };
  std::vector<Entry> entries;
};

ConfigSource parse_ini(const std::string& text, const std::string& name);
ConfigSource parse_json(const std::string& text, const std::string& name);
// picks the format from the extension (.json) or the first non-blank character
ConfigSource load_config_file(const std::string& path);
// "section.key=value"
void apply_override(ConfigSource& src, const std::string& assignment);

// Schema check and typed conversion; throws ConfigError listing every problem.
RunConfig resolve_config(const ConfigSource& src);

// All known keys with their defaults, for documentation and tests.
std::vector<std::pair<std::string, std::string>> config_keys();

}  // namespace rg
