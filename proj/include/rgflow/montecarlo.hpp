#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

namespace rg {

struct Estimate {
  double value = 0.0;
  double err = 0.0;  // standard error
  long samples = 0;
};

struct VectorEstimate {
  Eigen::VectorXd value;
  Eigen::MatrixXd cov;  // covariance of the mean
  long samples = 0;
};

// Number of worker threads for every parallel loop; 0 restores the default.
void set_workers(int n);
int workers();

// Mean of f(i) for i in [0, samples), split into equal consecutive batches;
// stderr from batch means. Batches run in parallel, reduction order is fixed.
Estimate mc_mean(long samples, int batches, const std::function<double(long)>& f);

// Same for vector-valued samples; f writes dim values.
VectorEstimate mc_mean_vec(long samples, int batches, int dim, const std::function<void(long, std::span<double>)>& f);

// Deterministic parallel loop over [0, n) in fixed chunks.
void parallel_for(long n, const std::function<void(long)>& body);

}  // namespace rg
