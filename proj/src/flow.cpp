#include "rgflow/flow.hpp"

#include <fmt/format.h>

#include <cmath>

namespace rg {

namespace {

constexpr uint64_t kTagWindow = 0x57494e444f57ull;

long origin_block(const Blocks& g, int k) {
  std::vector<int> zero(g.d(), 0);
  return g.torus().block_of(g.torus().site_centered(zero), k);
}

}  // namespace

InitialData InitialData::zero(int d) {
  InitialData D;
  D.l.assign(relevant_linear_indices(d).size(), 0.0);
  D.q = Eigen::MatrixXd::Zero(d, d);
  return D;
}

RelevantHamiltonian InitialData::hamiltonian() const {
  auto H = RelevantHamiltonian::from_q(q);
  H.a_const = -e;
  if (!l.empty()) {
    require(l.size() == H.a_lin.size(), "linear part has the wrong length");
    H.a_lin = l;
  }
  return H;
}

std::shared_ptr<SiteJetProduct> initial_K(std::shared_ptr<const Blocks> g, const MayerFunction& K,
                                          const RelevantHamiltonian& H0) {
  const int d = g->d();
  require(K.potential().d == d, "potential dimension does not match torus");
  std::vector<MultiIndex> alphas = unit_indices(d);
  const auto lin = relevant_linear_indices(d);
  std::vector<int> pos(lin.size(), -1);
  for (std::size_t b = 0; b < lin.size(); ++b) {
    if (order(lin[b]) == 1) {
      for (int i = 0; i < d; ++i)
        if (lin[b][i] == 1) pos[b] = i;
    } else if (H0.a_lin[b] != 0.0) {
      pos[b] = static_cast<int>(alphas.size());
      alphas.push_back(lin[b]);
    }
  }
  auto f = [K, H0, pos, d](std::span<const double> j) {
    double h = H0.a_const;
    for (std::size_t b = 0; b < pos.size(); ++b)
      if (pos[b] >= 0 && H0.a_lin[b] != 0.0) h += H0.a_lin[b] * j[pos[b]];
    for (int a = 0; a < d; ++a)
      for (int c = a; c < d; ++c) h += H0.a_quad(a, c) * j[a] * j[c];
    return std::exp(-h) * K(j.subspan(0, d));
  };
  return std::make_shared<SiteJetProduct>(std::move(g), alphas, f);
}

FlowResult run_flow(std::shared_ptr<const FlowGeometry> geo, const MayerFunction& K, const InitialData& init,
                    const FlowConfig& cfg, bool with_norms) {
  FlowResult fr;
  fr.geo = geo;
  const Blocks& g = *geo->g;
  const int L = g.torus().L();
  const RelevantHamiltonian H0 = init.hamiltonian();
  fr.states.push_back({0, H0, initial_K(geo->g, K, H0)});
  std::vector<double> zero(g.torus().sites(), 0.0);
  if (with_norms)
    fr.k0_norm = functional_norm(*fr.states[0].K, g.single(0, origin_block(g, 0)), zero, cfg.weights, 1, 1);
  double prev = fr.k0_norm.value;
  for (int k = 0; k < geo->N(); ++k) {
    StepResult r;
    try {
      r = rg_step(geo, fr.states.back(), cfg.step);
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("step {} -> {}: {}", k, k + 1, e.what()));
    }
    StepReport rep;
    rep.k = k;
    rep.H_next = r.next.H;
    rep.from_H = r.h.from_H;
    rep.from_K = r.h.from_K;
    rep.from_K_err = r.h.err;
    rep.h_norm = h_norm(r.next.H, k + 1, cfg.weights, L);
    if (with_norms) {
      rep.k_norm = functional_norm(*r.next.K, g.single(k + 1, origin_block(g, k + 1)), zero, cfg.weights,
                                   cfg.norm_samples, cfg.batches);
      rep.eta = prev > 0.0 ? rep.k_norm.value / prev : 0.0;
      prev = rep.k_norm.value;
    }
    fr.states.push_back(r.next);
    fr.reports.push_back(rep);
  }
  return fr;
}

Estimate final_value(const FlowResult& flow, std::span<const double> phi, long samples, int batches) {
  const Blocks& g = *flow.geo->g;
  const auto& s = flow.states.back();
  const Polymer lam = g.full(s.k);
  if (!s.K->stochastic()) return {circ_sample(g, s.H, *s.K, lam, phi, {}), 0.0, 1};
  return mc_mean(samples, batches, [&](long i) {
    const auto idx = static_cast<uint64_t>(i);
    return 0.5 * (circ_sample(g, s.H, *s.K, lam, phi, {idx, 1}) + circ_sample(g, s.H, *s.K, lam, phi, {idx, -1}));
  });
}

TuningResult tune(const Torus& t, const MayerFunction& K, const FlowConfig& cfg, InitialData start) {
  const int d = t.d();
  if (start.q.size() == 0) start = InitialData::zero(d);
  if (start.l.empty()) start.l.assign(relevant_linear_indices(d).size(), 0.0);
  const Eigen::MatrixXd Q = K.potential().reference_Q();
  TuningResult res;
  InitialData cur = start;
  std::shared_ptr<const FlowGeometry> geo;
  for (int it = 0; it < cfg.tuner_max_iter; ++it) {
    geo = FlowGeometry::build(t, Q, cur.q, geo.get());
    const RelevantHamiltonian H0 = cur.hamiltonian();
    StepState s{0, H0, initial_K(geo->g, K, H0)};
    std::vector<double> err;
    for (int k = 0; k < geo->N(); ++k) {
      auto r = rg_step(geo, s, cfg.step);
      s = r.next;
      err = r.h.err;
    }
    TuneIteration rec;
    rec.terminal_err = err;
    rec.iter = it;
    rec.data = cur;
    rec.terminal = s.H.to_vector();
    for (double v : rec.terminal) rec.residual = std::max(rec.residual, std::abs(v));
    res.history.push_back(rec);
    res.data = cur;
    res.residual = rec.residual;
    if (rec.residual <= cfg.tuner_tol) {
      res.converged = true;
      break;
    }
    cur.e += s.H.a_const;
    for (std::size_t b = 0; b < cur.l.size(); ++b) cur.l[b] -= s.H.a_lin[b];
    cur.q -= s.H.q();
  }
  for (double v : res.data.l) res.l_size = std::max(res.l_size, std::abs(v));
  return res;
}

RepresentationReport assemble_representation(const FlowResult& flow, const InitialData& init,
                                             std::span<const double> f, long samples, int batches) {
  const auto& geo = *flow.geo;
  const Torus& t = geo.torus();
  require(static_cast<long>(f.size()) == t.sites(), "test function size does not match torus");
  double mean = 0.0;
  for (double v : f) mean += v;
  require(std::abs(mean) <= 1e-9 * (1.0 + static_cast<double>(f.size())), "test function must have zero mean");
  RepresentationReport r;
  auto Cf = convolve_kernel(t, geo.A->fft(), geo.frd.full, f);
  for (std::size_t x = 0; x < f.size(); ++x) r.log_gauss += 0.5 * f[x] * Cf[x];
  r.log_ratio = log_gaussian_ratio(t, geo.A->Q(), geo.A->q());
  r.log_energy = -init.e * static_cast<double>(t.sites());
  r.remainder = final_value(flow, Cf, samples, batches);
  const double pre = std::exp(r.log_ratio + r.log_gauss + r.log_energy);
  r.product = pre * r.remainder.value;
  r.product_err = pre * r.remainder.err;
  return r;
}

ZdReport zd_consistency(const MayerFunction& K, const InitialData& init, int L, int N, int N2, int windows,
                        const FlowConfig& cfg, int misalign) {
  require(1 <= N && N < N2, "need 1 <= N < N2");
  const int d = K.potential().d;
  const Eigen::MatrixXd Q = K.potential().reference_Q();
  Torus ts(make_torus(L, N, d)), tl(make_torus(L, N2, d));
  auto geo_s = FlowGeometry::build(ts, Q, init.q);
  auto geo_l = FlowGeometry::build(tl, Q, init.q);
  const RelevantHamiltonian H0 = init.hamiltonian();
  auto Ks = rg_step(geo_s, {0, H0, initial_K(geo_s->g, K, H0)}, cfg.step).next.K;
  auto Kl = rg_step(geo_l, {0, H0, initial_K(geo_l->g, K, H0)}, cfg.step).next.K;
  const Polymer Us = geo_s->g->single(1, origin_block(*geo_s->g, 1));
  const Polymer Ul = geo_l->g->single(1, origin_block(*geo_l->g, 1));
  GaussianLayer window_layer(ts, geo_s->frd.full);
  std::vector<long> tile(tl.sites());
  for (long x = 0; x < tl.sites(); ++x) {
    auto c = tl.centered(x);
    c[0] += misalign;
    tile[x] = ts.site_centered(c);
  }
  ZdReport rep;
  for (int w = 0; w < windows; ++w) {
    auto phi = window_layer.sample_field(hash_words({cfg.step.seed, kTagWindow}), static_cast<uint64_t>(w)).values;
    for (auto& v : phi) v *= 0.5;
    std::vector<double> big(tl.sites());
    for (long x = 0; x < tl.sites(); ++x) big[x] = phi[tile[x]];
    auto est = [&](const PolymerFunctional& F, const Polymer& U, const std::vector<double>& f) {
      return mc_mean(cfg.final_samples, cfg.batches, [&](long i) {
        const auto idx = static_cast<uint64_t>(i);
        return 0.5 * (F.eval(U, f, {idx, 1}) + F.eval(U, f, {idx, -1}));
      });
    };
    ZdRow row;
    row.window = w;
    row.small = est(*Ks, Us, phi);
    row.large = est(*Kl, Ul, big);
    row.diff = row.large.value - row.small.value;
    row.sigma = std::hypot(row.small.err, row.large.err);
    row.ok = std::abs(row.diff) <= 3.0 * row.sigma;
    rep.max_ratio = std::max(rep.max_ratio, row.sigma > 0.0 ? std::abs(row.diff) / row.sigma
                                                            : (row.diff == 0.0 ? 0.0 : INFINITY));
    rep.max_sigma = std::max(rep.max_sigma, row.sigma);
    rep.ok = rep.ok && row.ok;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace rg
