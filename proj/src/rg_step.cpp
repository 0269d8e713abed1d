#include "rgflow/rg_step.hpp"

#include <fmt/format.h>

#include <cmath>

namespace rg {

namespace {

long origin_block(const Blocks& g, int k) {
  std::vector<int> zero(g.d(), 0);
  return g.torus().block_of(g.torus().site_centered(zero), k);
}

constexpr uint64_t kTagPi2 = 0x50493232ull;
constexpr uint64_t kTagLhs = 0x4c4853ull;
constexpr uint64_t kLhsIndexOffset = uint64_t{1} << 48;

}  // namespace

std::shared_ptr<const PreimageTable> TableCache::get(const Blocks& g, int k, int cutoff, long budget) {
  std::lock_guard<std::mutex> lock(mu_);
  auto& slot = tables_[{k, cutoff}];
  if (!slot) slot = std::make_shared<PreimageTable>(g, k, cutoff, budget);
  return slot;
}

std::shared_ptr<const FlowGeometry> FlowGeometry::build(const Torus& t, const Eigen::MatrixXd& Q,
                                                        const Eigen::MatrixXd& q, const FlowGeometry* reuse) {
  auto geo = std::make_shared<FlowGeometry>();
  if (reuse) {
    require(reuse->torus().params().side == t.params().side && reuse->torus().d() == t.d(),
            "geometry reuse needs the same torus");
    geo->g = reuse->g;
    geo->tables = reuse->tables;
  } else {
    geo->g = std::make_shared<Blocks>(t);
    geo->tables = std::make_shared<TableCache>();
  }
  geo->A = std::make_shared<EllipticOperator>(t, Q, q);
  geo->frd = decompose(*geo->A);
  for (const auto& C : geo->frd.slices) geo->layers.push_back(std::make_shared<GaussianLayer>(t, C));
  return geo;
}

// ---- SiteJetProduct ----

SiteJetProduct::SiteJetProduct(std::shared_ptr<const Blocks> g, std::vector<MultiIndex> alphas, JetFactor f)
    : g_(std::move(g)), jets_(g_->torus(), alphas), f_(std::move(f)), reach_(0) {
  require(jets_.size() <= 16, "at most 16 jets per site");
  for (const auto& a : alphas)
    for (int v : a) reach_ = std::max(reach_, v);
}

Polymer SiteJetProduct::dependency(const Polymer& X) const { return forward_closure(*g_, g_->sites(X), reach_); }

double SiteJetProduct::site_value(std::span<const double> phi, long x) const {
  double j[16];
  const int n = jets_.size();
  for (int a = 0; a < n; ++a) j[a] = jets_.eval(phi, x, a);
  return f_(std::span<const double>(j, n));
}

void SiteJetProduct::sample_many(std::span<const Polymer> Xs, std::span<const double> phi, SampleKey,
                                 std::span<double> out) const {
  for (std::size_t i = 0; i < Xs.size(); ++i) {
    double v = 1.0;
    for (long x : Xs[i].blocks()) v *= site_value(phi, x);
    out[i] = v;
  }
}

// ---- TableFunctional ----

TableFunctional::TableFunctional(std::shared_ptr<const Blocks> g, int k, Amplitude amp, double c, int max_blocks)
    : g_(std::move(g)), k_(k), amp_(std::move(amp)), c_(c), max_blocks_(max_blocks),
      unit_(g_->torus(), unit_indices(g_->d())) {}

void TableFunctional::sample_many(std::span<const Polymer> Xs, std::span<const double> phi, SampleKey,
                                  std::span<double> out) const {
  for (std::size_t i = 0; i < Xs.size(); ++i) {
    if (Xs[i].empty()) {
      out[i] = 1.0;
      continue;
    }
    double v = 1.0;
    for (const auto& Y : components(*g_, Xs[i])) {
      if (Y.size() > max_blocks_) {
        v = 0.0;
        break;
      }
      v *= amp_(Y);
      for (long x : g_->sites(Y).blocks()) {
        double s = 0.0;
        for (int a = 0; a < unit_.size(); ++a) {
          double z = unit_.eval(phi, x, a);
          s += z * z;
        }
        v *= 1.0 + c_ * s;
      }
    }
    out[i] = v;
  }
}

std::optional<TaylorPolynomial> TableFunctional::polynomial(const Polymer& X) const {
  TaylorPolynomial P;
  P.add_constant(1.0);
  if (X.empty()) return P;
  const auto units = unit_indices(g_->d());
  for (const auto& Y : components(*g_, X)) {
    if (Y.size() > max_blocks_) return TaylorPolynomial{};
    P *= amp_(Y);
    for (long x : g_->sites(Y).blocks()) {
      TaylorPolynomial f;
      f.add_constant(1.0);
      for (const auto& e : units) f.add({JetVar{x, e}, JetVar{x, e}}, c_);
      P = P * f;
    }
  }
  return P;
}

// ---- ConvolvedFunctional ----

void ConvolvedFunctional::sample_many(std::span<const Polymer> Xs, std::span<const double> phi, SampleKey key,
                                      std::span<double> out) const {
  std::vector<double> buf(phi.size());
  layer_->sample_into(key_, key.index, buf);
  for (std::size_t x = 0; x < buf.size(); ++x) buf[x] = phi[x] + key.sign * buf[x];
  F_->sample_many(Xs, buf, key, out);
}

// ---- BlockDensities ----

BlockDensities::BlockDensities(const Blocks& g, int k, const RelevantHamiltonian& uniform)
    : g_(&g), k_(k), uniform_(std::make_shared<HamiltonianEvaluator>(g.torus(), uniform)) {}

BlockDensities::BlockDensities(const Blocks& g, int k, std::function<RelevantHamiltonian(long)> provider)
    : g_(&g), k_(k), provider_(std::move(provider)) {
  const long n = g.grid(k).count;
  cache_.resize(n);
  once_ = std::make_unique<std::once_flag[]>(n);
}

const HamiltonianEvaluator& BlockDensities::evaluator(long block) const {
  if (uniform_) return *uniform_;
  std::call_once(once_[block], [&] {
    cache_[block] = std::make_unique<HamiltonianEvaluator>(g_->torus(), provider_(block));
  });
  return *cache_[block];
}

const RelevantHamiltonian& BlockDensities::at(long block) const { return evaluator(block).hamiltonian(); }

double BlockDensities::on_block(std::span<const double> phi, long block) const {
  return evaluator(block).sum(phi, g_->grid(k_).sites[block]);
}

double BlockDensities::on_polymer(std::span<const double> phi, const Polymer& X) const {
  require(X.scale() >= k_, "polymer is finer than the density blocks");
  if (uniform_) {
    auto s = g_->sites(X).blocks();
    return uniform_->sum(phi, s);
  }
  double v = 0.0;
  for (long b : g_->refine(X, k_).blocks()) v += on_block(phi, b);
  return v;
}

// ---- projections ----

Pi2Result project_convolved(const FunctionalPtr& F, long block, const FlowGeometry& geo, const StepConfig& cfg) {
  const Blocks& g = *geo.g;
  const Torus& t = g.torus();
  const int k = F->scale();
  require(k < geo.N(), "no layer above the last scale");
  const GaussianLayer& layer = *geo.layers[k];
  Polymer B = g.single(k, block);
  Pi2Plan plan(g, k, block, cfg.pi2.fd_step);
  Pi2Result res;
  if (auto P = F->polynomial(B)) {
    res.H = plan.solve_polynomial(wick_convolve(*P, t, layer.kernel()), t);
    res.err.assign(res.H.dim(), 0.0);
    return res;
  }
  if (auto sj = dynamic_cast<const SiteJetProduct*>(F.get()); sj && k == 0) {
    const long x = g.grid(0).sites[block][0];
    const auto& st = sj->stencil();
    std::vector<JetVar> vars;
    for (int a = 0; a < st.size(); ++a) vars.push_back({x, st.alpha(a)});
    Eigen::MatrixXd S = jet_covariance(t, layer.kernel(), vars);
    const auto& fields = plan.fields();
    std::vector<double> vals(fields.size());
    for (std::size_t f = 0; f < fields.size(); ++f) {
      std::vector<double> j0(st.size()), j(st.size());
      for (int a = 0; a < st.size(); ++a) j0[a] = st.eval(fields[f], x, a);
      vals[f] = gh_expectation(S, cfg.gh_nodes, [&](std::span<const double> z) {
        for (int a = 0; a < st.size(); ++a) j[a] = j0[a] + z[a];
        return sj->factor()(j);
      });
    }
    res.H = plan.solve(vals);
    res.err.assign(res.H.dim(), 0.0);
    return res;
  }
  auto conv = std::make_shared<ConvolvedFunctional>(F, geo.layers[k], layer_key(cfg.seed, k + 1, kTagPi2));
  return pi2_project(*conv, block, cfg.pi2);
}

NextH next_H(const FlowGeometry& geo, int k, const RelevantHamiltonian& H, const FunctionalPtr& K,
             const StepConfig& cfg) {
  const Blocks& g = *geo.g;
  const long b = origin_block(g, k);
  NextH r;
  {
    HamiltonianEvaluator ev(g.torus(), H);
    auto P = ev.polynomial(g.grid(k).sites[b]);
    Pi2Plan plan(g, k, b, cfg.pi2.fd_step);
    r.from_H = plan.solve_polynomial(wick_convolve(P, g.torus(), geo.layers[k]->kernel()), g.torus());
  }
  auto pk = project_convolved(K, b, geo, cfg);
  r.from_K = pk.H;
  r.err = pk.err;
  r.H = r.from_H - r.from_K;
  return r;
}

// ---- K+ ----

NextK::NextK(std::shared_ptr<const FlowGeometry> geo, int k, RelevantHamiltonian H, FunctionalPtr K,
             std::shared_ptr<const BlockDensities> Htilde, const StepConfig& cfg)
    : geo_(std::move(geo)), k_(k), H_(std::move(H)), Hev_(geo_->torus(), H_), K_(std::move(K)),
      Ht_(std::move(Htilde)), cutoff_(cfg.cutoff_at(k)), budget_(cfg.budget),
      key_(layer_key(cfg.seed, k + 1)) {
  require(k >= 0 && k < geo_->N(), "step scale out of range");
  require(K_->scale() == k, "K is not at the step scale");
  require(Ht_->scale() == k, "H~ densities must live on k-blocks");
  const long count = geo_->g->grid(k).count;
  if (count <= 128) {
    table_ = geo_->tables->get(*geo_->g, k, static_cast<int>(std::min<long>(cutoff_, count)), budget_);
    for (std::size_t i = 0; i < table_->images().size(); ++i) table_index_.emplace(table_->images()[i], i);
  }
}

Polymer NextK::dependency(const Polymer&) const { return geo_->g->full(0); }

const std::vector<std::vector<long>>& NextK::preimage(const Polymer& U) const {
  static const std::vector<std::vector<long>> none;
  require(U.scale() == k_ + 1, "preimage needs a polymer at scale k+1");
  if (table_) {
    auto it = table_index_.find(U);
    return it == table_index_.end() ? none : table_->members(it->second);
  }
  std::lock_guard<std::mutex> lock(mu_);
  auto it = lazy_.find(U);
  if (it != lazy_.end()) return *it->second;
  auto lists = std::make_shared<std::vector<std::vector<long>>>();
  for (const auto& X : enumerate_preimage(*geo_->g, U, cutoff_, budget_)) lists->push_back(X.blocks());
  return *lazy_.emplace(U, std::move(lists)).first->second;
}

void NextK::sample_many(std::span<const Polymer> Us, std::span<const double> phi, SampleKey key,
                        std::span<double> out) const {
  const Blocks& g = *geo_->g;
  const long V = g.torus().sites();
  require(static_cast<long>(phi.size()) == V, "field size does not match torus");
  std::vector<double> psi(V);
  geo_->layers[k_]->sample_into(key_, key.index, psi);
  for (long x = 0; x < V; ++x) psi[x] = phi[x] + key.sign * psi[x];

  const auto& G = g.grid(k_);
  const bool mult = K_->multiplicative();
  std::vector<double> hphi(G.count), c(G.count), r(G.count);
  std::vector<char> ready(G.count, 0);
  auto prep = [&](long b) {
    if (ready[b]) return;
    hphi[b] = Ht_->on_block(phi, b);
    double hpsi = Hev_.sum(psi, G.sites[b]);
    c[b] = std::exp(-hpsi) - std::exp(-hphi[b]);
    if (mult) r[b] = std::exp(hphi[b]) * (c[b] + K_->eval(g.single(k_, b), psi, key));
    ready[b] = 1;
  };

  if (mult) {
    for (std::size_t u = 0; u < Us.size(); ++u) {
      if (Us[u].empty()) {
        out[u] = 1.0;
        continue;
      }
      double acc = 0.0;
      for (const auto& X : preimage(Us[u])) {
        double p = 1.0;
        for (long b : X) {
          prep(b);
          p *= r[b];
        }
        acc += p;
      }
      out[u] = acc == 0.0 ? 0.0 : std::exp(-Ht_->on_polymer(phi, Us[u])) * acc;
    }
    return;
  }

  // general K: every subset of every preimage polymer
  const bool dense = G.count <= 16;
  std::vector<double> kdense;
  std::vector<char> kneed;
  std::unordered_map<Polymer, double, PolymerHash> kmap;
  std::vector<Polymer> request;
  if (dense) {
    kdense.assign(std::size_t{1} << G.count, 0.0);
    kneed.assign(std::size_t{1} << G.count, 0);
  }
  auto sub_polymer = [&](const std::vector<long>& X, unsigned mask) {
    Polymer P = g.empty(k_);
    for (std::size_t i = 0; i < X.size(); ++i)
      if (mask >> i & 1u) P.insert(X[i]);
    return P;
  };
  auto global_mask = [&](const std::vector<long>& X, unsigned mask) {
    uint32_t m = 0;
    for (std::size_t i = 0; i < X.size(); ++i)
      if (mask >> i & 1u) m |= uint32_t{1} << X[i];
    return m;
  };
  for (std::size_t u = 0; u < Us.size(); ++u) {
    if (Us[u].empty()) continue;
    for (const auto& X : preimage(Us[u])) {
      if (X.size() > 20) fail(ErrorKind::budget, "preimage polymer too large for subset expansion");
      for (long b : X) prep(b);
      const unsigned full = (1u << X.size()) - 1u;
      for (unsigned m = 1; m <= full; ++m) {
        if (dense) {
          uint32_t gm = global_mask(X, m);
          if (!kneed[gm]) {
            kneed[gm] = 1;
            request.push_back(sub_polymer(X, m));
          }
        } else {
          Polymer P = sub_polymer(X, m);
          if (kmap.emplace(P, 0.0).second) request.push_back(std::move(P));
        }
      }
    }
  }
  std::vector<double> kv(request.size());
  if (!request.empty()) K_->sample_many(request, psi, key, kv);
  for (std::size_t i = 0; i < request.size(); ++i) {
    if (dense) {
      uint32_t gm = 0;
      for (long b : request[i].blocks()) gm |= uint32_t{1} << b;
      kdense[gm] = kv[i];
    } else {
      kmap[request[i]] = kv[i];
    }
  }
  for (std::size_t u = 0; u < Us.size(); ++u) {
    if (Us[u].empty()) {
      out[u] = 1.0;
      continue;
    }
    double acc = 0.0;
    for (const auto& X : preimage(Us[u])) {
      const unsigned full = (1u << X.size()) - 1u;
      double gx = 0.0;
      for (unsigned m = 0; m <= full; ++m) {
        double kx = 1.0;
        if (m) kx = dense ? kdense[global_mask(X, m)] : kmap.at(sub_polymer(X, m));
        if (kx == 0.0) continue;
        double p = kx;
        for (std::size_t i = 0; i < X.size(); ++i)
          if (!(m >> i & 1u)) p *= c[X[i]];
        gx += p;
      }
      double hx = 0.0;
      for (long b : X) hx += hphi[b];
      acc += std::exp(hx) * gx;
    }
    out[u] = acc == 0.0 ? 0.0 : std::exp(-Ht_->on_polymer(phi, Us[u])) * acc;
  }
}

StepResult rg_step(std::shared_ptr<const FlowGeometry> geo, const StepState& s, const StepConfig& cfg) {
  StepResult r;
  r.h = next_H(*geo, s.k, s.H, s.K, cfg);
  auto Ht = std::make_shared<BlockDensities>(*geo->g, s.k, r.h.H);
  r.next.k = s.k + 1;
  r.next.H = r.h.H;
  r.next.K = std::make_shared<NextK>(geo, s.k, s.H, s.K, Ht, cfg);
  return r;
}

double circ_sample(const Blocks& g, const RelevantHamiltonian& H, const PolymerFunctional& K, const Polymer& X,
                   std::span<const double> phi, SampleKey key) {
  const int k = X.scale();
  require(K.scale() == k, "circ operands must share the scale");
  HamiltonianEvaluator ev(g.torus(), H);
  const auto bl = X.blocks();
  std::vector<double> eh(bl.size());
  for (std::size_t i = 0; i < bl.size(); ++i) eh[i] = std::exp(-ev.sum(phi, g.grid(k).sites[bl[i]]));
  if (K.multiplicative()) {
    double v = 1.0;
    for (std::size_t i = 0; i < bl.size(); ++i) v *= eh[i] + K.eval(g.single(k, bl[i]), phi, key);
    return v;
  }
  if (bl.size() > 20) fail(ErrorKind::budget, fmt::format("circ over {} blocks exceeds the subset budget", bl.size()));
  const unsigned n = 1u << bl.size();
  std::vector<Polymer> Ys;
  Ys.reserve(n);
  for (unsigned m = 0; m < n; ++m) {
    Polymer Y = g.empty(k);
    for (std::size_t i = 0; i < bl.size(); ++i)
      if (m >> i & 1u) Y.insert(bl[i]);
    Ys.push_back(std::move(Y));
  }
  std::vector<double> kv(n);
  K.sample_many(Ys, phi, key, kv);
  double acc = 0.0;
  for (unsigned m = 0; m < n; ++m) {
    if (kv[m] == 0.0) continue;
    double p = kv[m];
    for (std::size_t i = 0; i < bl.size(); ++i)
      if (!(m >> i & 1u)) p *= eh[i];
    acc += p;
  }
  return acc;
}

ConservationRow conservation_residual(const FlowGeometry& geo, const StepState& s, const StepState& next,
                                      std::span<const double> phi, long samples, int batches, uint64_t seed) {
  require(next.k == s.k + 1, "states are not consecutive");
  const Blocks& g = *geo.g;
  const GaussianLayer& layer = *geo.layers[s.k];
  const uint64_t lkey = layer_key(seed, s.k + 1, kTagLhs);
  const Polymer lam_k = g.full(s.k), lam_next = g.full(next.k);
  auto est = mc_mean_vec(samples, batches, 3, [&](long i, std::span<double> out) {
    std::vector<double> psi(phi.size());
    double lhs = 0.0, rhs = 0.0;
    for (int sign : {1, -1}) {
      layer.sample_into(lkey, static_cast<uint64_t>(i), psi);
      for (std::size_t x = 0; x < psi.size(); ++x) psi[x] = phi[x] + sign * psi[x];
      lhs += 0.5 * circ_sample(g, s.H, *s.K, lam_k, psi, {static_cast<uint64_t>(i) + kLhsIndexOffset, sign});
      rhs += 0.5 * circ_sample(g, next.H, *next.K, lam_next, phi, {static_cast<uint64_t>(i), sign});
    }
    out[0] = lhs;
    out[1] = rhs;
    out[2] = lhs - rhs;
  });
  auto pick = [&](int j) { return Estimate{est.value(j), std::sqrt(std::max(0.0, est.cov(j, j))), est.samples}; };
  return {pick(0), pick(1), pick(2)};
}

Estimate functional_norm(const PolymerFunctional& F, const Polymer& X, std::span<const double> phi,
                         const WeightParams& w, long samples, int batches, double fd_step) {
  const Blocks& g = F.blocks();
  const Torus& t = g.torus();
  const int d = t.d();
  const int k = F.scale();
  Polymer region = g.sites(star(g, X));
  JetStencil js(t, indices_up_to(d, p_phi(d)));
  std::vector<std::vector<double>> dirs;
  for (auto gdir : norm_test_family(t)) {
    double scale = 0.0;
    for (long x : region.blocks())
      for (int a = 0; a < js.size(); ++a)
        scale = std::max(scale, std::abs(js.eval(gdir, x, a)) / w.w_scale(k, order(js.alpha(a)), t.L(), d));
    if (scale == 0.0) continue;
    for (auto& v : gdir) v /= scale;
    dirs.push_back(std::move(gdir));
  }
  const double s = fd_step;
  std::vector<std::vector<double>> fields{std::vector<double>(phi.begin(), phi.end())};
  for (const auto& gd : dirs)
    for (double a : {s, -s}) {
      std::vector<double> f(phi.begin(), phi.end());
      for (std::size_t i = 0; i < f.size(); ++i) f[i] += a * gd[i];
      fields.push_back(std::move(f));
    }
  const int nf = static_cast<int>(fields.size());
  auto one = [&](long i, std::span<double> out) {
    for (int f = 0; f < nf; ++f) {
      double v = F.eval(X, fields[f], {static_cast<uint64_t>(i), 1});
      if (F.stochastic()) v = 0.5 * (v + F.eval(X, fields[f], {static_cast<uint64_t>(i), -1}));
      out[f] = v;
    }
  };
  Eigen::VectorXd m;
  double err0 = 0.0;
  long n = 1;
  if (F.stochastic()) {
    auto est = mc_mean_vec(samples, batches, nf, one);
    m = est.value;
    err0 = std::sqrt(std::max(0.0, est.cov(0, 0)));
    n = est.samples;
  } else {
    m.resize(nf);
    one(0, std::span<double>(m.data(), nf));
  }
  double sup1 = 0.0, sup2 = 0.0;
  for (std::size_t j = 0; j < dirs.size(); ++j) {
    double p = m(1 + 2 * j), q = m(2 + 2 * j);
    sup1 = std::max(sup1, std::abs(p - q) / (2.0 * s));
    sup2 = std::max(sup2, std::abs(p - 2.0 * m(0) + q) / (2.0 * s * s));
  }
  const double pen = std::pow(w.A, static_cast<double>(X.size()));
  return {pen * (std::abs(m(0)) + sup1 + sup2), pen * err0, n};
}

// ---- linearisation ----

TaylorPolynomial linearized_C(const FlowGeometry& geo, int k, const PolymerFunctional& Kdot, const Polymer& U,
                              int support_blocks, double fd_step) {
  const Blocks& g = *geo.g;
  const Torus& t = g.torus();
  require(U.scale() == k + 1 && Kdot.scale() == k, "linearisation scales do not match");
  const Kernel& C = geo.layers[k]->kernel();
  TaylorPolynomial out;
  if (U.size() == 1) {
    for (long b : g.refine(U, k).blocks()) {
      auto P = Kdot.polynomial(g.single(k, b));
      require(P.has_value(), "linearisation needs polynomial directions");
      auto R = wick_convolve(*P, t, C);
      Pi2Plan plan(g, k, b, fd_step);
      auto h = plan.solve_polynomial(R, t);
      HamiltonianEvaluator ev(t, h);
      out += R - ev.polynomial(g.grid(k).sites[b]);
    }
  }
  for (const auto& X : enumerate_preimage(g, U, support_blocks, 1L << 22)) {
    if (X.size() < 2) continue;
    auto P = Kdot.polynomial(X);
    require(P.has_value(), "linearisation needs polynomial directions");
    if (P->empty()) continue;
    out += wick_convolve(*P, t, C);
  }
  out.prune(1e-14);
  return out;
}

std::vector<ContractionRow> contraction_diagnostic(const FlowGeometry& geo, int k, int directions, uint64_t seed,
                                                   const WeightParams& w) {
  const Blocks& g = *geo.g;
  const Torus& t = g.torus();
  const int d = t.d();
  const int L = t.L();
  auto units = unit_indices(d);
  // monomials of degree <= 4 in the unit gradients at one site, as exponent vectors
  std::vector<std::vector<int>> expo;
  {
    std::vector<int> e(d, 0);
    while (true) {
      int s = 0;
      for (int v : e) s += v;
      if (s <= 4) expo.push_back(e);
      int j = d - 1;
      while (j >= 0 && e[j] == 4) e[j--] = 0;
      if (j < 0) break;
      ++e[j];
    }
  }
  const long ub = origin_block(g, k + 1);
  const Polymer U = g.single(k + 1, ub);
  std::vector<ContractionRow> rows;
  for (int dir = 0; dir < directions; ++dir) {
    NormalStream rng(hash_words({seed, 0x434f4e54ull, static_cast<uint64_t>(k), static_cast<uint64_t>(dir)}), 0);
    std::vector<double> coef(expo.size());
    for (std::size_t m = 0; m < expo.size(); ++m) {
      int deg = 0;
      for (int v : expo[m]) deg += v;
      coef[m] = rng.next() / std::pow(w.w_scale(k, 1, L, d), deg);
    }
    auto site_poly = [&, coef](long x) {
      TaylorPolynomial P;
      for (std::size_t m = 0; m < expo.size(); ++m) {
        TaylorPolynomial::Monomial mono;
        for (int i = 0; i < d; ++i)
          for (int r = 0; r < expo[m][i]; ++r) mono.push_back({x, units[i]});
        std::sort(mono.begin(), mono.end());
        P.add(std::move(mono), coef[m]);
      }
      return P;
    };
    auto gen = [&g, site_poly](const Polymer& X) {
      TaylorPolynomial P;
      if (X.size() > 2 || !is_connected(g, X)) return P;
      const double a = X.size() == 1 ? 1.0 : 0.5;
      for (long x : g.sites(X).blocks()) P += site_poly(x) * a;
      return P;
    };
    PolynomialFunctional Kdot(geo.g, k, gen, 1);
    // input norm over the two polymer shapes in the support
    double in = 0.0;
    const long b0 = origin_block(g, k);
    std::vector<Polymer> shapes{g.single(k, b0)};
    if (g.grid(k).count > 1) shapes.push_back(g.from_blocks(k, {b0, g.grid(k).neighbours[b0].front()}));
    for (const auto& X : shapes)
      in = std::max(in, std::pow(w.A, static_cast<double>(X.size())) * taylor_norm(*Kdot.polynomial(X), k, w, L, d));
    auto CK = linearized_C(geo, k, Kdot, U, 2);
    double outn = w.A * taylor_norm(CK, k + 1, w, L, d);
    rows.push_back({k, dir, in, outn, in > 0.0 ? outn / in : 0.0});
  }
  return rows;
}

}  // namespace rg
