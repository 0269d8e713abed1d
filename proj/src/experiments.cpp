#include "rgflow/experiments.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

namespace rg {

namespace {

using Json = nlohmann::ordered_json;

constexpr uint64_t kTagConserve = 0x434f4e53ull;
constexpr uint64_t kTagRestrict = 0x52455354ull;
constexpr uint64_t kTagWick = 0x5749434bull;

long origin_block(const Blocks& g, int k) {
  std::vector<int> zero(g.d(), 0);
  return g.torus().block_of(g.torus().site_centered(zero), k);
}

Json vec_json(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    a.push_back(r);
  }
  return a;
}

Json estimate_json(const Estimate& e) { return Json{{"value", e.value}, {"err", e.err}, {"samples", e.samples}}; }

Json initial_json(const InitialData& D) {
  return Json{{"e", D.e}, {"l", vec_json(D.l)}, {"q", matrix_json(D.q)}};
}

Json potential_json(const PotentialReport& r) {
  Json j{{"passed", r.passed},          {"lower_ok", r.lower_ok},
         {"upper_ok", r.upper_ok},      {"omega_range_ok", r.omega_range_ok},
         {"growth_ok", r.growth_ok},    {"worst_margin", r.worst_margin},
         {"message", r.message},        {"witness", vec_json(r.witness)}};
  return j;
}

Report make_report(const std::string& name, const RunConfig& c) { return Report(name, c.echo(), c.hash()); }

InitialData config_initial(const RunConfig& c) {
  InitialData D = InitialData::zero(c.torus.d);
  D.e = c.e;
  D.q = c.q;
  return D;
}

// H~ density on block b: Pi2 R H(b) - Pi2 R K(b), for translation-dependent K
RelevantHamiltonian block_htilde(const FlowGeometry& geo, int k, long b, const RelevantHamiltonian& H,
                                 const FunctionalPtr& K, const StepConfig& cfg) {
  const Blocks& g = *geo.g;
  HamiltonianEvaluator ev(g.torus(), H);
  auto P = ev.polynomial(g.grid(k).sites[b]);
  Pi2Plan plan(g, k, b, cfg.pi2.fd_step);
  auto fromH = plan.solve_polynomial(wick_convolve(P, g.torus(), geo.layers[k]->kernel()), g.torus());
  return fromH - project_convolved(K, b, geo, cfg).H;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"frd-check",     "conserve",    "rg-run",  "oracle-compare",
                                              "free-energy",   "scaling-limit", "zd-check"};
  return names;
}

bool is_subcommand(const std::string& name) {
  const auto& s = subcommands();
  return std::find(s.begin(), s.end(), name) != s.end();
}

Report run_subcommand(const std::string& name, const RunConfig& cfg) {
  if (cfg.run.workers > 0) set_workers(cfg.run.workers);
  if (name == "frd-check") return frd_check(cfg);
  if (name == "conserve") return conserve(cfg);
  if (name == "rg-run") return rg_run(cfg);
  if (name == "oracle-compare") return oracle_compare(cfg);
  if (name == "free-energy") return free_energy(cfg);
  if (name == "scaling-limit") return scaling_limit(cfg);
  if (name == "zd-check") return zd_check(cfg);
  fail(ErrorKind::invalid, "unknown subcommand " + name);
}

// ---- frd-check ----

double frd_n_independence(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& q, int L, int d, int N, int N2) {
  require(2 <= N && N < N2, "need 2 <= N < N2");
  Torus ts(make_torus(L, N, d)), tl(make_torus(L, N2, d));
  EllipticOperator As(ts, Q, q), Al(tl, Q, q);
  auto fs = decompose(As), fl = decompose(Al);
  double worst = 0.0;
  for (int k = 1; k <= N - 1; ++k)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        auto Ds = second_difference(ts, fs.slices[k - 1], i, j);
        auto Dl = second_difference(tl, fl.slices[k - 1], i, j);
        for (long x = 0; x < ts.sites(); ++x) {
          auto c = ts.centered(x);
          worst = std::max(worst, std::abs(Ds.at(ts, c) - Dl.at(tl, c)));
        }
      }
  return worst;
}

Report frd_check(const RunConfig& c) {
  Report rep = make_report("frd-check", c);
  const int d = c.torus.d, L = c.torus.L;
  const Eigen::MatrixXd Q = c.potential.reference_Q();
  auto& res = rep.table("residuals", {"N", "q", "lambda", "sum_residual", "min_eigenvalue", "range_residual"});
  auto& sc = rep.table("scaling", {"N", "q", "k", "order", "sup", "reference", "log_branch"});
  double worst_sum = 0.0, worst_eig = INFINITY, worst_range = 0.0;
  for (int N : c.run.N_list)
    for (double s : c.run.q_list) {
      Torus t(make_torus(L, N, d, c.torus.m, c.torus.R0, c.torus.r0));
      EllipticOperator A(t, Q, s * Eigen::MatrixXd::Identity(d, d));
      auto frd = decompose(A);
      auto v = verify_decomposition(A, frd);
      double me = *std::min_element(v.min_eigen.begin(), v.min_eigen.end());
      double rr = v.range_residual.empty() ? 0.0 : *std::max_element(v.range_residual.begin(), v.range_residual.end());
      res.add(Json::array({N, s, v.lambda, v.sum_residual, me, rr}));
      for (const auto& r : v.scaling) sc.add(Json::array({N, s, r.k, r.alpha_order, r.sup, r.reference, r.log_branch}));
      worst_sum = std::max(worst_sum, v.sum_residual);
      worst_eig = std::min(worst_eig, me);
      worst_range = std::max(worst_range, rr);
    }
  rep.check("sum_residual", worst_sum, c.tol.frd, "<=", worst_sum <= c.tol.frd);
  rep.check("min_eigenvalue", worst_eig, -c.tol.frd, ">=", worst_eig >= -c.tol.frd);
  rep.check("range_residual", worst_range, c.tol.frd, "<=", worst_range <= c.tol.frd);
  auto& ni = rep.table("n_independence", {"N", "N2", "q", "max_diff"});
  std::vector<int> Ns = c.run.N_list;
  std::sort(Ns.begin(), Ns.end());
  double worst_n = 0.0;
  bool any = false;
  for (std::size_t i = 0; i + 1 < Ns.size(); ++i) {
    if (Ns[i] < 2 || Ns[i] == Ns[i + 1]) continue;
    for (double s : c.run.q_list) {
      double v = frd_n_independence(Q, s * Eigen::MatrixXd::Identity(d, d), L, d, Ns[i], Ns[i + 1]);
      ni.add(Json::array({Ns[i], Ns[i + 1], s, v}));
      worst_n = std::max(worst_n, v);
      any = true;
    }
  }
  if (any) rep.check("n_independence", worst_n, c.tol.frd_n, "<=", worst_n <= c.tol.frd_n);
  return rep;
}

// ---- conserve ----

Report conserve(const RunConfig& c) {
  Report rep = make_report("conserve", c);
  Torus t(c.torus);
  auto K = c.mayer();
  auto pot = validate_potential(K.potential());
  rep.results()["potential"] = potential_json(pot);
  rep.check("potential_valid", pot.passed ? 1.0 : 0.0, 1.0, "==", pot.passed);
  const InitialData D = config_initial(c);
  auto geo = FlowGeometry::build(t, K.potential().reference_Q(), D.q);
  auto flow = run_flow(geo, K, D, c.flow);
  GaussianLayer full(t, geo->frd.full);
  auto& tab = rep.table("residuals", {"step", "field", "lhs", "lhs_err", "rhs", "rhs_err", "residual", "residual_err", "z"});
  double worst_z = 0.0, worst_rel = 0.0;
  const uint64_t fkey = hash_words({c.flow.step.seed, kTagConserve});
  for (int k = 0; k < geo->N(); ++k)
    for (int w = 0; w < c.run.fields; ++w) {
      auto phi = full.sample_field(fkey, static_cast<uint64_t>(w)).values;
      for (auto& v : phi) v *= c.run.field_scale;
      auto row = conservation_residual(*geo, flow.states[k], flow.states[k + 1], phi, c.run.samples, c.flow.batches,
                                       c.flow.step.seed);
      const double z = row.residual.err > 0.0 ? std::abs(row.residual.value) / row.residual.err
                                              : (row.residual.value == 0.0 ? 0.0 : INFINITY);
      const double rel = row.residual.err / std::max(std::abs(row.rhs.value), 1e-300);
      worst_z = std::max(worst_z, z);
      worst_rel = std::max(worst_rel, rel);
      tab.add(Json::array({k, w, row.lhs.value, row.lhs.err, row.rhs.value, row.rhs.err, row.residual.value,
                           row.residual.err, z}));
    }
  rep.check("max_residual_sigmas", worst_z, c.tol.sigmas, "<=", worst_z <= c.tol.sigmas);
  rep.check("max_relative_err", worst_rel, c.tol.conserve_rel, "<=", worst_rel <= c.tol.conserve_rel);
  return rep;
}

// ---- rg-run ----

RestrictionReport restriction_check(int L, int d, int trials, uint64_t seed, const StepConfig& cfg) {
  Torus t(make_torus(L, 3, d));
  Eigen::MatrixXd Q = 3.0 * Eigen::MatrixXd::Identity(d, d);
  auto geo = FlowGeometry::build(t, Q, Eigen::MatrixXd::Zero(d, d));
  const Blocks& g = *geo->g;
  RestrictionReport rep;
  GaussianLayer full(t, geo->frd.full);
  auto unit = [](uint64_t h) { return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53 - 0.5; };
  for (int trial = 0; trial < trials; ++trial) {
    const uint64_t ts = hash_words({seed, kTagRestrict, static_cast<uint64_t>(trial)});
    const long ub = static_cast<long>(splitmix64(ts) % static_cast<uint64_t>(g.grid(1).count));
    const Polymer U = g.single(1, ub);
    const Polymer Ustar = star(g, U);
    auto amplitude = [&g, Ustar, ts, unit](uint64_t inside, uint64_t outside) {
      return [&g, Ustar, ts, unit, inside, outside](const Polymer& Y) {
        uint64_t h = ts;
        for (long b : Y.blocks()) h = hash_words({h, static_cast<uint64_t>(b)});
        const bool in = Y.subset_of(Ustar);
        (void)g;
        return 0.05 * unit(hash_words({h, in ? inside : outside}));
      };
    };
    auto Ka = std::make_shared<TableFunctional>(geo->g, 0, amplitude(1, 2), 0.1, 3);
    auto Kb = std::make_shared<TableFunctional>(geo->g, 0, amplitude(1, 3), 0.1, 3);
    auto Kc = std::make_shared<TableFunctional>(geo->g, 0, amplitude(4, 2), 0.1, 3);
    NormalStream rng(ts, 1);
    RelevantHamiltonian H = RelevantHamiltonian::zero(d);
    H.a_const = 0.01 * rng.next();
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) H.a_quad(i, j) = 0.01 * rng.next();
    auto nextK = [&](const FunctionalPtr& K) {
      auto provider = [geo, H, K, cfg](long b) { return block_htilde(*geo, 0, b, H, K, cfg); };
      auto Ht = std::make_shared<BlockDensities>(g, 0, provider);
      return std::make_shared<NextK>(geo, 0, H, K, Ht, cfg);
    };
    auto Na = nextK(Ka), Nb = nextK(Kb), Nc = nextK(Kc);
    auto phi = full.sample_field(ts, 0).values;
    for (auto& v : phi) v *= 0.5;
    const SampleKey key{splitmix64(ts ^ 0x5a5a), 1};
    const double va = Na->eval(U, phi, key), vb = Nb->eval(U, phi, key), vc = Nc->eval(U, phi, key);
    ++rep.trials;
    if (same_bits(va, vb)) ++rep.identical;
    rep.max_diff = std::max(rep.max_diff, std::abs(va - vb));
    if (!same_bits(va, vc)) ++rep.control_changed;
  }
  return rep;
}

DecayReport remainder_decay(const RunConfig& c) {
  DecayReport rep;
  auto K = c.mayer();
  const Eigen::MatrixXd Q = K.potential().reference_Q();
  FlowConfig fc = c.flow;
  fc.step.pi2.samples = c.run.decay_pi2_samples;
  for (int N : {1, 2}) {
    Torus t(make_torus(c.torus.L, N, c.torus.d));
    const double V = static_cast<double>(t.sites());
    std::vector<double> zero(t.sites(), 0.0);
    auto brute = brute_partition(K, t, zero, c.quad);
    for (bool tuned : {true, false}) {
      DecayRow row;
      row.N = N;
      row.tuned = tuned;
      row.data = InitialData::zero(c.torus.d);
      std::vector<double> terr;
      if (tuned) {
        auto tr = tune(t, K, fc);
        if (!tr.converged) fail(ErrorKind::numeric, fmt::format("tuner did not converge at N = {}", N));
        row.data = tr.data;
        terr = tr.history.back().terminal_err;
      }
      row.brute = {brute.value, brute.err, brute.samples};
      row.log_ratio = log_gaussian_ratio(t, Q, row.data.q);
      const double lnz = std::log(brute.value) + row.data.e * V - row.log_ratio;
      row.z_minus_1 = std::expm1(lnz);
      // brute-force error plus tuning noise pushed through the tuner update
      double var = std::pow(brute.err / brute.value, 2);
      for (std::size_t i = 0; i < terr.size(); ++i) {
        if (terr[i] == 0.0) continue;
        std::vector<double> unit(terr.size(), 0.0);
        unit[i] = terr[i];
        auto dH = RelevantHamiltonian::from_vector(c.torus.d, unit);
        Eigen::MatrixXd q2 = row.data.q - dH.q();
        const double dl = V * dH.a_const - (log_gaussian_ratio(t, Q, q2) - row.log_ratio);
        var += dl * dl;
      }
      row.sigma = std::exp(lnz) * std::sqrt(var);
      if (tuned) {
        auto geo = FlowGeometry::build(t, Q, row.data.q);
        auto flow = run_flow(geo, K, row.data, fc);
        auto z = final_value(flow, zero, c.run.decay_flow_samples, c.flow.batches);
        row.flow = z;
      }
      rep.rows.push_back(row);
    }
  }
  const DecayRow& a = rep.rows[0];  // N = 1 tuned
  const DecayRow& b = rep.rows[2];  // N = 2 tuned
  rep.gap = std::abs(a.z_minus_1) - std::abs(b.z_minus_1);
  rep.gap_sigma = std::hypot(a.sigma, b.sigma);
  rep.pass = rep.gap > c.tol.sigmas * rep.gap_sigma;
  return rep;
}

Report rg_run(const RunConfig& c) {
  Report rep = make_report("rg-run", c);
  Torus t(c.torus);
  auto K = c.mayer();
  auto pot = validate_potential(K.potential());
  rep.results()["potential"] = potential_json(pot);
  rep.results()["mayer_norm"] = mayer_norm(K, c.flow.weights.h, std::min(c.torus.r0, 4));
  rep.check("potential_valid", pot.passed ? 1.0 : 0.0, 1.0, "==", pot.passed);
  InitialData D = config_initial(c);
  if (c.run.tune) {
    auto tr = tune(t, K, c.flow, D);
    auto& tt = rep.table("tuning", {"iter", "e", "q", "residual"});
    for (const auto& h : tr.history) tt.add(Json::array({h.iter, h.data.e, matrix_json(h.data.q), h.residual}));
    rep.results()["tuning"] = Json{{"converged", tr.converged}, {"residual", tr.residual}, {"l_size", tr.l_size}};
    rep.check("tuner_converged", tr.residual, c.flow.tuner_tol, "<=", tr.converged);
    D = tr.data;
  }
  rep.results()["initial"] = initial_json(D);
  auto geo = FlowGeometry::build(t, K.potential().reference_Q(), D.q);
  auto flow = run_flow(geo, K, D, c.flow, c.run.norms);
  auto& st = rep.table("steps", {"k", "h_norm", "k_norm", "k_norm_err", "eta", "H", "from_K_err_max", "preimages",
                                 "largest_retained", "cutoff"});
  bool finite = true;
  for (const auto& r : flow.reports) {
    double emax = 0.0;
    for (double e : r.from_K_err) emax = std::max(emax, e);
    long count = 0, largest = 0;
    if (auto nk = std::dynamic_pointer_cast<const NextK>(flow.states[r.k + 1].K)) {
      const auto& pre = nk->preimage(geo->g->single(r.k + 1, origin_block(*geo->g, r.k + 1)));
      count = static_cast<long>(pre.size());
      for (const auto& X : pre) largest = std::max<long>(largest, static_cast<long>(X.size()));
    }
    st.add(Json::array({r.k, r.h_norm, r.k_norm.value, r.k_norm.err, r.eta, vec_json(r.H_next.to_vector()), emax, count,
                        largest, c.flow.step.cutoff_at(r.k)}));
    finite = finite && std::isfinite(r.h_norm) && std::isfinite(r.k_norm.value);
  }
  rep.results()["k0_norm"] = estimate_json(flow.k0_norm);
  std::vector<double> zero(t.sites(), 0.0);
  auto z = final_value(flow, zero, c.flow.final_samples, c.flow.batches);
  rep.results()["remainder"] = estimate_json(z);
  rep.check("norms_finite", finite ? 1.0 : 0.0, 1.0, "==", finite);

  if (c.run.directions > 0) {
    auto& ct = rep.table("contraction", {"k", "direction", "input_norm", "output_norm", "ratio"});
    bool ok = true, same = true;
    for (int k = 0; k < geo->N(); ++k) {
      auto rows = contraction_diagnostic(*geo, k, c.run.directions, c.flow.step.seed, c.flow.weights);
      auto again = contraction_diagnostic(*geo, k, c.run.directions, c.flow.step.seed, c.flow.weights);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        ct.add(Json::array({rows[i].k, rows[i].direction, rows[i].input_norm, rows[i].output_norm, rows[i].ratio}));
        ok = ok && std::isfinite(rows[i].ratio) && rows[i].input_norm > 0.0;
        same = same && same_bits(rows[i].ratio, again[i].ratio);
      }
    }
    rep.check("contraction_finite", ok ? 1.0 : 0.0, 1.0, "==", ok);
    rep.check("contraction_reproducible", same ? 1.0 : 0.0, 1.0, "==", same);
  }

  if (c.run.restriction_trials > 0) {
    auto r = restriction_check(c.torus.L, c.torus.d, c.run.restriction_trials, c.flow.step.seed, c.flow.step);
    rep.results()["restriction"] = Json{{"trials", r.trials},
                                        {"identical", r.identical},
                                        {"control_changed", r.control_changed},
                                        {"max_diff", r.max_diff}};
    rep.check("restriction_identical", r.identical, r.trials, "==", r.identical == r.trials);
    rep.check("restriction_control", r.control_changed, r.trials, "==", r.control_changed == r.trials);
  }

  if (c.run.decay) {
    auto dr = remainder_decay(c);
    auto& dt = rep.table("decay", {"N", "tuned", "e", "q00", "log_ratio", "brute", "brute_err", "z_minus_1", "sigma",
                                   "flow_remainder", "flow_err"});
    for (const auto& r : dr.rows)
      dt.add(Json::array({r.N, r.tuned, r.data.e, r.data.q(0, 0), r.log_ratio, r.brute.value, r.brute.err,
                          r.z_minus_1, r.sigma, r.flow.value, r.flow.err}));
    rep.results()["decay"] = Json{{"gap", dr.gap}, {"gap_sigma", dr.gap_sigma}};
    rep.check("remainder_decay_sigmas", dr.gap_sigma > 0.0 ? dr.gap / dr.gap_sigma : INFINITY, c.tol.sigmas, ">",
              dr.pass);
  }
  return rep;
}

// ---- oracle-compare ----

std::vector<WickTrial> wick_mc_trials(const Torus& t, const Kernel& C, int trials, uint64_t seed, long samples,
                                      int batches, double sigmas) {
  const int d = t.d();
  auto g = std::make_shared<Blocks>(t);
  GaussianLayer layer(t, C);
  auto idx = indices_up_to(d, 2);
  std::vector<int> zero(d, 0);
  const long x0 = t.site_centered(zero);
  std::vector<WickTrial> out;
  for (int trial = 0; trial < trials; ++trial) {
    NormalStream rng(hash_words({seed, kTagWick, static_cast<uint64_t>(trial)}), 0);
    // variables: jets at the origin and one neighbour
    std::vector<JetVar> vars;
    for (long x : {x0, t.step(x0, 0)})
      for (const auto& a : idx) vars.push_back({x, a});
    const int degree = 1 + trial % 4;
    TaylorPolynomial P;
    P.add_constant(rng.next());
    const int terms = 6;
    for (int m = 0; m < terms; ++m) {
      const int deg = m == 0 ? degree : 1 + static_cast<int>(rng.uniform() * degree);
      TaylorPolynomial::Monomial mono;
      for (int r = 0; r < deg; ++r)
        mono.push_back(vars[std::min<std::size_t>(vars.size() - 1, static_cast<std::size_t>(rng.uniform() * vars.size()))]);
      std::sort(mono.begin(), mono.end());
      P.add(std::move(mono), rng.next());
    }
    std::vector<double> phi(t.sites());
    layer.sample_into(hash_words({seed, kTagWick, 0xf1e1d}), static_cast<uint64_t>(trial), phi);
    for (auto& v : phi) v *= 0.3;
    const double exact = wick_convolve(P, t, C).eval(t, phi);
    auto gen = [P](const Polymer&) { return P; };
    PolynomialFunctional F(g, 0, gen, 2);
    Polymer X = g->single(0, x0);
    X.insert(t.step(x0, 0));
    QuadratureSpec q;
    q.samples = samples;
    q.batches = batches;
    q.seed = hash_words({seed, kTagWick, 0x5eed, static_cast<uint64_t>(trial)});
    auto est = convolve(F, X, phi, layer, q);
    // antithetic pairs integrate odd parts exactly, so allow for rounding
    const double slack = sigmas * est.err + 1e-12 * (1.0 + std::abs(exact));
    WickTrial w{trial, P.degree(), exact, est, std::abs(est.value - exact) <= slack};
    out.push_back(w);
  }
  return out;
}

Report oracle_compare(const RunConfig& c) {
  Report rep = make_report("oracle-compare", c);
  Torus t(c.torus);
  auto K = c.mayer();
  auto pot = validate_potential(K.potential());
  rep.results()["potential"] = potential_json(pot);
  InitialData D = config_initial(c);
  if (c.run.tune) {
    auto tr = tune(t, K, c.flow, D);
    rep.check("tuner_converged", tr.residual, c.flow.tuner_tol, "<=", tr.converged);
    D = tr.data;
  }
  rep.results()["initial"] = initial_json(D);
  auto geo = FlowGeometry::build(t, K.potential().reference_Q(), D.q);
  auto flow = run_flow(geo, K, D, c.flow);
  ScalingLimitSpec fs;
  fs.amplitude = c.run.f_amplitude;
  fs.mode.assign(c.torus.d, 0);
  fs.mode[0] = 1;
  std::vector<std::vector<double>> fields{std::vector<double>(t.sites(), 0.0), scaled_test_function(t, fs)};
  // undo the scaling so the amplitude is the field amplitude
  for (auto& v : fields[1]) v *= std::pow(static_cast<double>(t.side()), 0.5 * (c.torus.d + 2));
  auto& tab = rep.table("representation", {"f", "log_ratio", "log_gauss", "log_energy", "remainder", "remainder_err",
                                           "product", "product_err", "oracle", "oracle_err", "rel_diff", "z"});
  double worst_z = 0.0, worst_rel = 0.0;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    auto r = assemble_representation(flow, D, fields[i], c.flow.final_samples, c.flow.batches);
    auto o = brute_partition(K, t, fields[i], c.quad);
    const double diff = r.product - o.value;
    const double sig = std::hypot(r.product_err, o.err);
    const double z = sig > 0.0 ? std::abs(diff) / sig : (diff == 0.0 ? 0.0 : INFINITY);
    const double rel = std::abs(diff) / std::abs(o.value);
    worst_z = std::max(worst_z, z);
    worst_rel = std::max(worst_rel, rel);
    tab.add(Json::array({i == 0 ? "zero" : "cosine", r.log_ratio, r.log_gauss, r.log_energy, r.remainder.value,
                         r.remainder.err, r.product, r.product_err, o.value, o.err, rel, z}));
  }
  rep.check("representation_sigmas", worst_z, c.tol.sigmas, "<=", worst_z <= c.tol.sigmas);
  rep.check("representation_relative", worst_rel, c.tol.representation_rel, "<=", worst_rel <= c.tol.representation_rel);

  if (c.run.wick_trials > 0) {
    auto& wt = rep.table("wick_mc", {"trial", "degree", "wick", "mc", "mc_err", "ok"});
    auto trials = wick_mc_trials(t, geo->frd.full, c.run.wick_trials, c.flow.step.seed, c.quad.samples, c.quad.batches,
                                 c.tol.sigmas);
    int ok = 0;
    for (const auto& w : trials) {
      wt.add(Json::array({w.trial, w.degree, w.wick, w.mc.value, w.mc.err, w.ok}));
      ok += w.ok ? 1 : 0;
    }
    rep.check("wick_mc_agree", ok, static_cast<double>(trials.size()), "==", ok == static_cast<int>(trials.size()));
  }
  return rep;
}

// ---- free-energy ----

Report free_energy(const RunConfig& c) {
  Report rep = make_report("free-energy", c);
  Torus t(c.torus);
  PotentialSpec U = c.potential;
  U.d = c.torus.d;
  auto pot = validate_potential(U);
  rep.results()["potential"] = potential_json(pot);
  auto scan = free_energy_scan(U, c.beta, t, c.run.grid, c.quad);
  auto& w = rep.table("free_energy", {"F", "W", "err", "log_z", "log_z_err", "closed"});
  for (const auto& r : scan.rows) w.add(Json::array({r.F, r.W, r.err, r.log_z, r.log_z_err, r.closed}));
  auto& sd = rep.table("second_differences", {"F", "second_diff", "err", "z"});
  double worst = INFINITY;
  for (std::size_t i = 0; i < scan.second_diff.size(); ++i) {
    const double z = scan.second_err[i] > 0.0 ? scan.second_diff[i] / scan.second_err[i] : INFINITY;
    worst = std::min(worst, z);
    sd.add(Json::array({scan.rows[i + 1].F, scan.second_diff[i], scan.second_err[i], z}));
  }
  rep.check("convex_min_sigmas", worst, c.tol.sigmas, ">", scan.convex && worst > c.tol.sigmas);

  PotentialSpec G = U;
  G.family = PotentialFamily::gaussian_perturbation;
  G.epsilon = c.run.control_epsilon;
  auto control = free_energy_scan(G, c.beta, t, c.run.grid, c.quad);
  auto& ct = rep.table("gaussian_control", {"F", "W", "err", "closed"});
  for (const auto& r : control.rows) ct.add(Json::array({r.F, r.W, r.err, r.closed}));
  rep.check("control_closed_form", control.max_closed_dev, c.tol.closed_form, "<=",
            control.max_closed_dev <= c.tol.closed_form);
  return rep;
}

// ---- scaling-limit ----

Report scaling_limit(const RunConfig& c) {
  Report rep = make_report("scaling-limit", c);
  PotentialSpec U = c.potential;
  U.d = c.torus.d;
  auto rows = scaling_limit_check(U, c.beta, c.torus.L, c.run.scaling, c.quad);
  auto& tab = rep.table("scaling", {"N", "laplace", "err", "lattice_exact", "prediction", "discrepancy"});
  bool decreasing = true, mc_ok = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    tab.add(Json::array({r.N, r.laplace, r.err, r.lattice_exact, r.prediction, r.discrepancy}));
    if (i > 0 && !(r.discrepancy < rows[i - 1].discrepancy)) decreasing = false;
    if (std::abs(r.laplace - r.lattice_exact) > c.tol.sigmas * r.err + 1e-15 * r.lattice_exact) mc_ok = false;
  }
  rep.check("discrepancy_decreasing", decreasing ? 1.0 : 0.0, 1.0, "==", decreasing);
  const double last = rows.empty() ? INFINITY : rows.back().discrepancy;
  rep.check("final_discrepancy", last, c.tol.scaling, "<=", last <= c.tol.scaling);
  rep.check("monte_carlo_matches_lattice", mc_ok ? 1.0 : 0.0, 1.0, "==", mc_ok);
  return rep;
}

// ---- zd-check ----

Report zd_check(const RunConfig& c) {
  Report rep = make_report("zd-check", c);
  auto K = c.mayer();
  const InitialData D = config_initial(c);
  FlowConfig fc = c.flow;
  fc.final_samples = c.run.samples;
  auto z = zd_consistency(K, D, c.torus.L, c.torus.N, c.run.N2, c.run.windows, fc);
  auto ctl = zd_consistency(K, D, c.torus.L, c.torus.N, c.run.N2, c.run.windows, fc, 1);
  auto& tab = rep.table("windows", {"window", "small", "small_err", "large", "large_err", "diff", "sigma", "ok",
                                    "misaligned_diff", "misaligned_sigma"});
  for (std::size_t i = 0; i < z.rows.size(); ++i) {
    const auto& r = z.rows[i];
    tab.add(Json::array({r.window, r.small.value, r.small.err, r.large.value, r.large.err, r.diff, r.sigma, r.ok,
                         ctl.rows[i].diff, ctl.rows[i].sigma}));
  }
  rep.check("max_diff_sigmas", z.max_ratio, c.tol.sigmas, "<=", z.max_ratio <= c.tol.sigmas);
  rep.check("max_sigma", z.max_sigma, c.tol.zd_sigma, "<=", z.max_sigma <= c.tol.zd_sigma);
  rep.check("misaligned_detected", ctl.max_ratio, c.tol.sigmas, ">", ctl.max_ratio > c.tol.sigmas);
  return rep;
}

}  // namespace rg
