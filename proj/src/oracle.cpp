#include "rgflow/oracle.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <numbers>

namespace rg {

namespace {

constexpr uint64_t kTagBrute = 0x4252555445ull;
constexpr uint64_t kTagRatio = 0x524154494full;
constexpr uint64_t kTagScaling = 0x5343414c45ull;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// sum over sites of sum_ij q_ij grad_i phi grad_j phi
double gradient_form(const Torus& t, const JetStencil& units, const Eigen::MatrixXd& q, std::span<const double> phi) {
  const int d = t.d();
  double acc = 0.0, g[8];
  for (long x = 0; x < t.sites(); ++x) {
    for (int i = 0; i < d; ++i) g[i] = units.eval(phi, x, i);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) acc += q(i, j) * g[i] * g[j];
  }
  return acc;
}

}  // namespace

double log_gaussian_ratio(const Torus& t, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& q) {
  EllipticOperator A0(t, Q, Eigen::MatrixXd::Zero(Q.rows(), Q.cols())), Aq(t, Q, q);
  const auto& s0 = A0.symbols();
  const auto& sq = Aq.symbols();
  double acc = 0.0;
  for (std::size_t p = 1; p < s0.size(); ++p) {
    if (!(s0[p] > 0.0) || !(sq[p] > 0.0)) fail(ErrorKind::numeric, fmt::format("singular Fourier mode {}", p));
    acc += 0.5 * (std::log(s0[p]) - std::log(sq[p]));
  }
  return acc;
}

OracleEstimate gaussian_ratio_mc(const Torus& t, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& q,
                                 const QuadratureSpec& quad) {
  EllipticOperator A0(t, Q, Eigen::MatrixXd::Zero(Q.rows(), Q.cols()));
  GaussianLayer layer(t, green_kernel(A0));
  JetStencil units(t, unit_indices(t.d()));
  const uint64_t key = hash_words({quad.seed, kTagRatio});
  auto est = mc_mean(quad.samples, quad.batches, [&](long i) {
    std::vector<double> phi(t.sites());
    layer.sample_into(key, static_cast<uint64_t>(i), phi);
    return std::exp(0.5 * gradient_form(t, units, q, phi));
  });
  return {est.value, est.err, "monte_carlo", est.samples};
}

double log_gaussian_normaliser(const Torus& t, const Eigen::MatrixXd& Q, double beta) {
  EllipticOperator A(t, Q, Eigen::MatrixXd::Zero(Q.rows(), Q.cols()));
  const auto& s = A.symbols();
  double acc = 0.0;
  for (std::size_t p = 1; p < s.size(); ++p) acc += 0.5 * std::log(2.0 * std::numbers::pi / (beta * s[p]));
  return acc;
}

double gaussian_laplace(const Torus& t, const Eigen::MatrixXd& Q, std::span<const double> f) {
  EllipticOperator A(t, Q, Eigen::MatrixXd::Zero(Q.rows(), Q.cols()));
  auto C = green_kernel(A);
  auto Cf = convolve_kernel(t, A.fft(), C, f);
  return std::exp(0.5 * dot(f, Cf));
}

VectorEstimate brute_partition_many(const std::vector<MayerFunction>& Ks, const Torus& t, std::span<const double> f,
                                    const QuadratureSpec& quad) {
  require(!Ks.empty(), "no Mayer functions");
  require(t.sites() <= 10000, "brute force is limited to 10^4 sites");
  require(t.m() == 1, "brute force supports scalar fields only");
  const Eigen::MatrixXd Q = Ks.front().potential().reference_Q();
  for (const auto& K : Ks)
    require((K.potential().reference_Q() - Q).norm() == 0.0, "Mayer functions must share the reference form");
  EllipticOperator A(t, Q, Eigen::MatrixXd::Zero(Q.rows(), Q.cols()));
  GaussianLayer layer(t, green_kernel(A));
  JetStencil units(t, unit_indices(t.d()));
  const uint64_t key = hash_words({quad.seed, kTagBrute});
  const int n = static_cast<int>(Ks.size());
  const int d = t.d();
  std::vector<double> fv(f.begin(), f.end());
  if (fv.empty()) fv.assign(t.sites(), 0.0);
  return mc_mean_vec(quad.samples, quad.batches, n, [&](long i, std::span<double> out) {
    std::vector<double> phi(t.sites());
    layer.sample_into(key, static_cast<uint64_t>(i), phi);
    std::fill(out.begin(), out.end(), 0.0);
    const int reps = quad.antithetic ? 2 : 1;
    std::vector<double> grads(t.sites() * d);
    for (int r = 0; r < reps; ++r) {
      const double s = r == 0 ? 1.0 : -1.0;
      for (long x = 0; x < t.sites(); ++x)
        for (int a = 0; a < d; ++a) grads[x * d + a] = s * units.eval(phi, x, a);
      const double lin = std::exp(s * dot(fv, phi));
      for (int j = 0; j < n; ++j) {
        double p = lin;
        for (long x = 0; x < t.sites(); ++x) p *= 1.0 + Ks[j](std::span<const double>(&grads[x * d], d));
        out[j] += p / reps;
      }
    }
  });
}

OracleEstimate brute_partition(const MayerFunction& K, const Torus& t, std::span<const double> f,
                               const QuadratureSpec& quad) {
  if (K.is_zero()) {
    std::vector<double> fv(f.begin(), f.end());
    if (fv.empty()) return {1.0, 0.0, "closed_form", 0};
    return {gaussian_laplace(t, K.potential().reference_Q(), fv), 0.0, "closed_form", 0};
  }
  auto v = brute_partition_many({K}, t, f, quad);
  return {v.value(0), std::sqrt(std::max(0.0, v.cov(0, 0))), "monte_carlo", v.samples};
}

double closed_form_log_partition(const PotentialSpec& U, const Torus& t) {
  if (U.family == PotentialFamily::double_well) return std::numeric_limits<double>::quiet_NaN();
  const Eigen::MatrixXd Q = U.reference_Q(), H = U.hessian0();
  EllipticOperator AQ(t, Q, Eigen::MatrixXd::Zero(Q.rows(), Q.cols())), AH(t, H, Eigen::MatrixXd::Zero(Q.rows(), Q.cols()));
  double acc = 0.0;
  for (std::size_t p = 1; p < AQ.symbols().size(); ++p) acc += 0.5 * (std::log(AQ.symbols()[p]) - std::log(AH.symbols()[p]));
  return acc;
}

std::vector<double> tilt(int d, double F) {
  std::vector<double> v(d, 0.0);
  v[0] = F;
  return v;
}

FreeEnergyScan free_energy_scan(const PotentialSpec& U, double beta, const Torus& t, const std::vector<double>& grid,
                                const QuadratureSpec& quad) {
  require(!grid.empty(), "empty free-energy grid");
  std::vector<MayerFunction> Ks;
  for (double F : grid) Ks.emplace_back(U, tilt(U.d, F), beta);
  auto est = brute_partition_many(Ks, t, {}, quad);
  const double V = static_cast<double>(t.sites());
  const double logZQ = log_gaussian_normaliser(t, U.reference_Q(), beta);
  const double closed_log = closed_form_log_partition(U, t);
  const int n = static_cast<int>(grid.size());
  FreeEnergyScan scan;
  Eigen::VectorXd dWdZ(n);
  for (int i = 0; i < n; ++i) {
    FreeEnergyRow r;
    r.F = grid[i];
    const double z = est.value(i);
    const double zerr = std::sqrt(std::max(0.0, est.cov(i, i)));
    if (!(z > 0.0)) fail(ErrorKind::numeric, fmt::format("non-positive partition estimate at F = {}", grid[i]));
    auto Fb = tilt(U.d, grid[i]);
    const double UF = U.U(Fb);
    r.log_z = std::log(z);
    r.log_z_err = zerr / z;
    r.W = UF - (logZQ + r.log_z) / (beta * V);
    r.err = r.log_z_err / (beta * V);
    r.closed = std::isnan(closed_log) ? closed_log : UF - (logZQ + closed_log) / (beta * V);
    if (!std::isnan(r.closed)) scan.max_closed_dev = std::max(scan.max_closed_dev, std::abs(r.W - r.closed));
    dWdZ(i) = -1.0 / (beta * V * z);
    scan.rows.push_back(r);
  }
  for (int i = 1; i + 1 < n; ++i) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    g(i - 1) = dWdZ(i - 1);
    g(i) = -2.0 * dWdZ(i);
    g(i + 1) = dWdZ(i + 1);
    double dd = scan.rows[i - 1].W - 2.0 * scan.rows[i].W + scan.rows[i + 1].W;
    double err = std::sqrt(std::max(0.0, static_cast<double>(g.transpose() * est.cov * g)));
    scan.second_diff.push_back(dd);
    scan.second_err.push_back(err);
    if (!(dd > 3.0 * err)) scan.convex = false;
  }
  return scan;
}

std::vector<double> scaled_test_function(const Torus& t, const ScalingLimitSpec& s) {
  const int d = t.d();
  require(static_cast<int>(s.mode.size()) == d, "mode must have d entries");
  const double side = static_cast<double>(t.side());
  const double amp = s.amplitude * std::pow(side, -0.5 * (d + 2));
  std::vector<double> f(t.sites());
  double mean = 0.0;
  for (long x = 0; x < t.sites(); ++x) {
    auto c = t.centered(x);
    double ph = 0.0;
    for (int i = 0; i < d; ++i) ph += s.mode[i] * c[i] / side;
    f[x] = amp * std::cos(2.0 * std::numbers::pi * ph);
    mean += f[x];
  }
  mean /= static_cast<double>(t.sites());
  for (auto& v : f) v -= mean;
  return f;
}

std::vector<ScalingLimitRow> scaling_limit_check(const PotentialSpec& U, double beta, int L, const ScalingLimitSpec& s,
                                                 const QuadratureSpec& quad) {
  require(U.family == PotentialFamily::quadratic, "the scaling-limit check needs a Gaussian potential");
  const Eigen::MatrixXd Q = U.reference_Q();
  const int d = U.d;
  // continuum: (g, C g) = 2 |g^(p)|^2 / (4 pi^2 Q(p,p)) with g^(p) = A/2
  double Qpp = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) Qpp += Q(i, j) * s.mode[i] * s.mode[j];
  require(Qpp > 0.0 || s.amplitude == 0.0, "mode must be nonzero");
  const double gCg = s.amplitude == 0.0 ? 0.0 : s.amplitude * s.amplitude / (8.0 * std::numbers::pi * std::numbers::pi * Qpp);
  const double log_pred = gCg / (2.0 * beta);
  std::vector<ScalingLimitRow> rows;
  for (int N : s.Ns) {
    Torus t(make_torus(L, N, d));
    auto f = scaled_test_function(t, s);
    EllipticOperator A(t, Q, Eigen::MatrixXd::Zero(d, d));
    Kernel C = green_kernel(A);
    for (auto& v : C.values) v /= beta;
    GaussianLayer layer(t, C);
    const uint64_t key = hash_words({quad.seed, kTagScaling, static_cast<uint64_t>(N)});
    auto est = mc_mean(quad.samples, quad.batches, [&](long i) {
      std::vector<double> phi(t.sites());
      layer.sample_into(key, static_cast<uint64_t>(i), phi);
      double x = dot(f, phi);
      return quad.antithetic ? std::cosh(x) : std::exp(x);
    });
    auto Cf = convolve_kernel(t, A.fft(), C, f);
    ScalingLimitRow r;
    r.N = N;
    r.laplace = est.value;
    r.err = est.err;
    r.lattice_exact = std::exp(0.5 * dot(f, Cf));
    r.prediction = std::exp(log_pred);
    const double gap = std::abs(std::log(r.laplace) - log_pred);
    r.discrepancy = log_pred == 0.0 ? gap : gap / std::abs(log_pred);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace rg
