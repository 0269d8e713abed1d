#include "rgflow/montecarlo.hpp"

#include <tbb/blocked_range.h>
#include <tbb/global_control.h>
#include <tbb/parallel_for.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <thread>

#include "rgflow/error.hpp"

namespace rg {

namespace {
std::mutex g_ctl_mutex;
std::unique_ptr<tbb::global_control> g_ctl;
int g_workers = 0;
}  // namespace

void set_workers(int n) {
  std::lock_guard lock(g_ctl_mutex);
  g_ctl.reset();
  g_workers = n;
  if (n > 0) g_ctl = std::make_unique<tbb::global_control>(tbb::global_control::max_allowed_parallelism, n);
}

int workers() {
  std::lock_guard lock(g_ctl_mutex);
  if (g_workers > 0) return g_workers;
  return static_cast<int>(tbb::global_control::active_value(tbb::global_control::max_allowed_parallelism));
}

void parallel_for(long n, const std::function<void(long)>& body) {
  tbb::parallel_for(tbb::blocked_range<long>(0, n, 1), [&](const tbb::blocked_range<long>& r) {
    for (long i = r.begin(); i < r.end(); ++i) body(i);
  });
}

Estimate mc_mean(long samples, int batches, const std::function<double(long)>& f) {
  require(samples > 0, "sample count must be positive");
  require(batches >= 2, "need at least two batches");
  if (samples < batches) batches = static_cast<int>(samples);
  std::vector<double> means(batches);
  parallel_for(batches, [&](long b) {
    long lo = samples * b / batches, hi = samples * (b + 1) / batches;
    double acc = 0.0;
    for (long i = lo; i < hi; ++i) acc += f(i);
    means[b] = acc / static_cast<double>(hi - lo);
  });
  Estimate e;
  e.samples = samples;
  double mean = 0.0;
  for (long b = 0; b < batches; ++b) mean += means[b] * static_cast<double>(samples * (b + 1) / batches - samples * b / batches);
  mean /= static_cast<double>(samples);
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  var /= static_cast<double>(batches - 1);
  e.value = mean;
  e.err = std::sqrt(var / batches);
  return e;
}

VectorEstimate mc_mean_vec(long samples, int batches, int dim, const std::function<void(long, std::span<double>)>& f) {
  require(samples > 0 && dim > 0, "sample count and dimension must be positive");
  require(batches >= 2, "need at least two batches");
  if (samples < batches) batches = static_cast<int>(samples);
  Eigen::MatrixXd means(dim, batches);
  parallel_for(batches, [&](long b) {
    long lo = samples * b / batches, hi = samples * (b + 1) / batches;
    std::vector<double> acc(dim, 0.0), buf(dim);
    for (long i = lo; i < hi; ++i) {
      f(i, buf);
      for (int j = 0; j < dim; ++j) acc[j] += buf[j];
    }
    for (int j = 0; j < dim; ++j) means(j, b) = acc[j] / static_cast<double>(hi - lo);
  });
  VectorEstimate e;
  e.samples = samples;
  e.value = Eigen::VectorXd::Zero(dim);
  for (long b = 0; b < batches; ++b)
    e.value += means.col(b) * static_cast<double>(samples * (b + 1) / batches - samples * b / batches);
  e.value /= static_cast<double>(samples);
  Eigen::MatrixXd centered = means.colwise() - e.value;
  e.cov = centered * centered.transpose() / static_cast<double>(batches - 1) / static_cast<double>(batches);
  return e;
}

}  // namespace rg
