#include "rgflow/gaussian.hpp"

#include <fmt/format.h>

#include <cmath>
#include <atomic>
#include <map>

namespace rg {

GaussianLayer::GaussianLayer(const Torus& t, Kernel C)
    : t_(std::make_shared<Torus>(t)), fft_(std::make_shared<Fft>(t)), C_(std::move(C)) {
  static std::atomic<uint64_t> next_id{1};
  id_ = next_id++;
  require(static_cast<long>(C_.values.size()) == t.sites(), "kernel size does not match torus");
  auto spec = kernel_spectrum(*fft_, C_);
  double top = 0.0;
  for (double v : spec) top = std::max(top, std::abs(v));
  amp_.resize(spec.size());
  const double V = static_cast<double>(t.sites());
  for (std::size_t p = 0; p < spec.size(); ++p) {
    if (spec[p] < -1e-10 * std::max(top, 1.0))
      fail(ErrorKind::numeric, fmt::format("covariance is not positive: eigenvalue {} at mode {}", spec[p], p));
    amp_[p] = std::sqrt(std::max(spec[p], 0.0) / V);
  }
}

double GaussianLayer::covariance(long x, long y) const {
  auto d = t_->displacement(x, y);
  return C_.values[t_->site(d)];
}

double GaussianLayer::factor_residual() const {
  std::vector<std::complex<double>> v(amp_.size());
  const double V = static_cast<double>(amp_.size());
  for (std::size_t p = 0; p < amp_.size(); ++p) v[p] = amp_[p] * amp_[p] * V;
  auto back = fft_->inverse_real(v);
  double worst = 0.0;
  for (std::size_t x = 0; x < back.size(); ++x) worst = std::max(worst, std::abs(back[x] - C_.values[x]));
  return worst;
}

namespace {
struct PairCache {
  uint64_t owner = 0;
  uint64_t key = 0, pair = ~uint64_t{0};
  std::vector<double> re, im;
};
// nested steps alternate between layers, so keep a few entries
constexpr int kCacheSlots = 8;
thread_local PairCache g_pair_cache[kCacheSlots];
thread_local int g_next_slot = 0;
}  // namespace

void GaussianLayer::sample_into(uint64_t key, uint64_t i, std::span<double> out) const {
  const long n = t_->sites();
  const uint64_t pair = i >> 1;
  PairCache* hit = nullptr;
  for (auto& c : g_pair_cache)
    if (c.owner == id_ && c.key == key && c.pair == pair && static_cast<long>(c.re.size()) == n) hit = &c;
  if (!hit) {
    hit = &g_pair_cache[g_next_slot];
    g_next_slot = (g_next_slot + 1) % kCacheSlots;
    NormalStream rng(key, pair);
    std::vector<std::complex<double>> w(n);
    for (long p = 0; p < n; ++p) {
      double a = rng.next(), b = rng.next();
      w[p] = std::complex<double>(a, b) * amp_[p];
    }
    fft_->backward(w);
    hit->re.resize(n);
    hit->im.resize(n);
    for (long x = 0; x < n; ++x) {
      hit->re[x] = w[x].real();
      hit->im[x] = w[x].imag();
    }
    hit->owner = id_;
    hit->key = key;
    hit->pair = pair;
  }
  const auto& src = (i & 1) ? hit->im : hit->re;
  std::copy(src.begin(), src.end(), out.begin());
}

Field GaussianLayer::sample_field(uint64_t key, uint64_t i) const {
  Field f = Field::zero(*t_);
  sample_into(key, i, f.values);
  return f;
}

Eigen::MatrixXd marginal_covariance(const GaussianLayer& layer, std::span<const long> sites) {
  require(!sites.empty(), "marginal region must be non-empty");
  const long n = static_cast<long>(sites.size());
  Eigen::MatrixXd S(n, n);
  for (long a = 0; a < n; ++a)
    for (long b = 0; b < n; ++b) S(a, b) = layer.covariance(sites[a], sites[b]);
  return S;
}

Eigen::MatrixXd jet_covariance(const Torus& t, const Kernel& C, const std::vector<JetVar>& vars) {
  const long n = static_cast<long>(vars.size());
  // expand each variable into (site, coefficient) terms
  std::vector<std::vector<std::pair<long, double>>> terms(n);
  for (long a = 0; a < n; ++a) {
    const auto& al = vars[a].alpha;
    std::vector<int> k(t.d(), 0);
    while (true) {
      double c = 1.0;
      for (int j = 0; j < t.d(); ++j) {
        double b = 1.0;
        for (int i = 0; i < k[j]; ++i) b = b * (al[j] - i) / (i + 1);
        c *= ((al[j] - k[j]) % 2 ? -b : b);
      }
      terms[a].emplace_back(t.shift(vars[a].site, k), c);
      int j = t.d() - 1;
      while (j >= 0 && k[j] == al[j]) k[j--] = 0;
      if (j < 0) break;
      ++k[j];
    }
  }
  Eigen::MatrixXd S(n, n);
  for (long a = 0; a < n; ++a)
    for (long b = a; b < n; ++b) {
      double s = 0.0;
      for (auto [x, cx] : terms[a])
        for (auto [y, cy] : terms[b]) s += cx * cy * C.values[t.site(t.displacement(x, y))];
      S(a, b) = S(b, a) = s;
    }
  return S;
}

RegionSampler::RegionSampler(const GaussianLayer& layer, std::vector<long> sites) : sites_(std::move(sites)) {
  Eigen::MatrixXd S = marginal_covariance(layer, sites_);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const auto& ev = es.eigenvalues();
  double top = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::VectorXd root(ev.size());
  for (long i = 0; i < ev.size(); ++i) {
    if (ev(i) < -1e-10 * top) fail(ErrorKind::numeric, fmt::format("marginal covariance eigenvalue {} < 0", ev(i)));
    root(i) = ev(i) < -1e-12 ? 0.0 : std::sqrt(std::max(ev(i), 0.0));
  }
  factor_ = es.eigenvectors() * root.asDiagonal();
}

void RegionSampler::sample(NormalStream& rng, std::span<double> out) const {
  const long n = factor_.rows();
  Eigen::VectorXd z(n);
  for (long i = 0; i < n; ++i) z(i) = rng.next();
  Eigen::VectorXd v = factor_ * z;
  for (long i = 0; i < n; ++i) out[i] = v(i);
}

GaussHermite gauss_hermite(int n) {
  require(n >= 1 && n <= 64, "Gauss-Hermite node count must be in [1,64]");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(static_cast<double>(i));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  GaussHermite r;
  for (int i = 0; i < n; ++i) {
    r.nodes.push_back(es.eigenvalues()(i));
    double v = es.eigenvectors()(0, i);
    r.weights.push_back(v * v);
  }
  return r;
}

double gh_expectation(const Eigen::MatrixXd& cov, int nodes, const std::function<double(std::span<const double>)>& g,
                      int max_dim) {
  const long D = cov.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const auto& ev = es.eigenvalues();
  double top = D ? ev.cwiseAbs().maxCoeff() : 0.0;
  std::vector<Eigen::VectorXd> dirs;
  for (long i = 0; i < D; ++i) {
    if (ev(i) < -1e-10 * std::max(top, 1e-300)) fail(ErrorKind::numeric, "quadrature covariance is not positive");
    if (ev(i) > 1e-12 * top) dirs.push_back(es.eigenvectors().col(i) * std::sqrt(ev(i)));
  }
  const int r = static_cast<int>(dirs.size());
  if (r > max_dim) fail(ErrorKind::invalid, fmt::format("Gauss-Hermite dimension {} exceeds {}", r, max_dim));
  auto rule = gauss_hermite(nodes);
  std::vector<int> idx(r, 0);
  std::vector<double> z(D);
  double acc = 0.0;
  while (true) {
    double w = 1.0;
    std::fill(z.begin(), z.end(), 0.0);
    for (int a = 0; a < r; ++a) {
      w *= rule.weights[idx[a]];
      for (long i = 0; i < D; ++i) z[i] += dirs[a](i) * rule.nodes[idx[a]];
    }
    acc += w * g(z);
    int a = r - 1;
    while (a >= 0 && idx[a] == nodes - 1) idx[a--] = 0;
    if (a < 0) break;
    ++idx[a];
  }
  return acc;
}

Estimate convolve(const PolymerFunctional& F, const Polymer& X, std::span<const double> phi,
                  const GaussianLayer& layer, const QuadratureSpec& quad) {
  const Blocks& g = F.blocks();
  require(static_cast<long>(phi.size()) == g.torus().sites(), "field size does not match torus");
  if (X.empty()) return {F.eval(X, phi), 0.0, 0};
  auto region = F.dependency(X).blocks();
  std::vector<double> base(phi.begin(), phi.end());
  if (quad.mode == QuadratureSpec::Mode::gauss_hermite) {
    require(!F.stochastic(), "Gauss-Hermite needs a deterministic functional");
    Eigen::MatrixXd S = marginal_covariance(layer, region);
    std::vector<double> buf = base;
    double v = gh_expectation(S, quad.gh_nodes, [&](std::span<const double> z) {
      for (std::size_t i = 0; i < region.size(); ++i) buf[region[i]] = base[region[i]] + z[i];
      return F.eval(X, buf);
    });
    return {v, 0.0, 0};
  }
  RegionSampler sampler(layer, region);
  const uint64_t key = hash_words({quad.seed, 0x434f4e56ull, static_cast<uint64_t>(X.scale()), X.hash()});
  auto est = mc_mean(quad.samples, quad.batches, [&](long i) {
    std::vector<double> buf = base, xi(region.size());
    NormalStream rng(key, static_cast<uint64_t>(i));
    sampler.sample(rng, xi);
    double acc = 0.0;
    const int reps = quad.antithetic ? 2 : 1;
    for (int r = 0; r < reps; ++r) {
      const double s = r == 0 ? 1.0 : -1.0;
      for (std::size_t j = 0; j < region.size(); ++j) buf[region[j]] = base[region[j]] + s * xi[j];
      acc += F.eval(X, buf, {static_cast<uint64_t>(i), static_cast<int>(s)});
    }
    return acc / reps;
  });
  return est;
}

namespace {

double isserlis(const std::vector<int>& idx, const Eigen::MatrixXd& S) {
  if (idx.empty()) return 1.0;
  if (idx.size() % 2) return 0.0;
  double acc = 0.0;
  const int first = idx[0];
  for (std::size_t j = 1; j < idx.size(); ++j) {
    double c = S(first, idx[j]);
    if (c == 0.0) continue;
    std::vector<int> rest;
    for (std::size_t l = 1; l < idx.size(); ++l)
      if (l != j) rest.push_back(idx[l]);
    acc += c * isserlis(rest, S);
  }
  return acc;
}

}  // namespace

TaylorPolynomial wick_convolve(const TaylorPolynomial& P, const Torus& t, const Kernel& C, int max_degree) {
  if (P.degree() > max_degree)
    fail(ErrorKind::invalid, fmt::format("polynomial degree {} exceeds {}", P.degree(), max_degree));
  auto vars = P.variables();
  Eigen::MatrixXd S = jet_covariance(t, C, vars);
  std::map<JetVar, int> pos;
  for (std::size_t i = 0; i < vars.size(); ++i) pos[vars[i]] = static_cast<int>(i);
  TaylorPolynomial out;
  for (const auto& [mono, c] : P.terms()) {
    const std::size_t n = mono.size();
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      TaylorPolynomial::Monomial kept;
      std::vector<int> integrated;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask >> i & 1u)
          kept.push_back(mono[i]);
        else
          integrated.push_back(pos[mono[i]]);
      }
      double e = isserlis(integrated, S);
      if (e != 0.0) out.add(std::move(kept), c * e);
    }
  }
  return out;
}

}  // namespace rg
