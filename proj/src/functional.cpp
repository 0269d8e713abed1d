#include "rgflow/functional.hpp"

#include <fmt/format.h>

#include <cmath>

namespace rg {

double PolymerFunctional::eval(const Polymer& X, std::span<const double> phi, SampleKey key) const {
  double v = 0.0;
  sample_many({&X, 1}, phi, key, {&v, 1});
  return v;
}

Polymer forward_closure(const Blocks& g, const Polymer& X, int reach) {
  const Torus& t = g.torus();
  Polymer sites = g.sites(X);
  Polymer r = sites;
  for (long x : sites.blocks()) {
    std::vector<int> k(t.d(), 0);
    while (true) {
      r.insert(t.shift(x, k));
      int j = t.d() - 1;
      while (j >= 0 && k[j] == reach) k[j--] = 0;
      if (j < 0) break;
      ++k[j];
    }
  }
  return r;
}

std::vector<MultiIndex> relevant_linear_indices(int d) { return indices_up_to(d, d / 2 + 1); }

RelevantHamiltonian RelevantHamiltonian::zero(int d) {
  RelevantHamiltonian H;
  H.d = d;
  H.a_lin.assign(relevant_linear_indices(d).size(), 0.0);
  H.a_quad = Eigen::MatrixXd::Zero(d, d);
  return H;
}

RelevantHamiltonian RelevantHamiltonian::from_q(const Eigen::MatrixXd& q) {
  const int d = static_cast<int>(q.rows());
  auto H = zero(d);
  for (int i = 0; i < d; ++i) {
    H.a_quad(i, i) = 0.5 * q(i, i);
    for (int j = i + 1; j < d; ++j) H.a_quad(i, j) = q(i, j);
  }
  return H;
}

Eigen::MatrixXd RelevantHamiltonian::q() const {
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    q(i, i) = 2.0 * a_quad(i, i);
    for (int j = i + 1; j < d; ++j) q(i, j) = q(j, i) = a_quad(i, j);
  }
  return q;
}

int RelevantHamiltonian::dim() const { return 1 + static_cast<int>(a_lin.size()) + d * (d + 1) / 2; }

std::vector<double> RelevantHamiltonian::to_vector() const {
  std::vector<double> v{a_const};
  v.insert(v.end(), a_lin.begin(), a_lin.end());
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) v.push_back(a_quad(i, j));
  return v;
}

RelevantHamiltonian RelevantHamiltonian::from_vector(int d, std::span<const double> v) {
  auto H = zero(d);
  require(static_cast<int>(v.size()) == H.dim(), "coefficient vector has wrong size");
  std::size_t p = 0;
  H.a_const = v[p++];
  for (auto& a : H.a_lin) a = v[p++];
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) H.a_quad(i, j) = v[p++];
  return H;
}

RelevantHamiltonian& RelevantHamiltonian::operator+=(const RelevantHamiltonian& o) {
  require(d == o.d, "dimension mismatch");
  a_const += o.a_const;
  for (std::size_t i = 0; i < a_lin.size(); ++i) a_lin[i] += o.a_lin[i];
  a_quad += o.a_quad;
  return *this;
}

RelevantHamiltonian& RelevantHamiltonian::operator*=(double s) {
  a_const *= s;
  for (auto& a : a_lin) a *= s;
  a_quad *= s;
  return *this;
}

HamiltonianEvaluator::HamiltonianEvaluator(const Torus& t, const RelevantHamiltonian& H)
    : H_(H), lin_(t, relevant_linear_indices(t.d())), unit_(t, unit_indices(t.d())), reach_(t.d() / 2 + 1) {
  require(t.m() == 1, "relevant Hamiltonians support scalar fields only (m = 1)");
  require(H.d == t.d(), "Hamiltonian dimension does not match torus");
}

double HamiltonianEvaluator::density(std::span<const double> phi, long x) const {
  double v = H_.a_const;
  for (int b = 0; b < lin_.size(); ++b)
    if (H_.a_lin[b] != 0.0) v += H_.a_lin[b] * lin_.eval(phi, x, b);
  const int d = H_.d;
  double g[8];
  for (int i = 0; i < d; ++i) g[i] = unit_.eval(phi, x, i);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) v += H_.a_quad(i, j) * g[i] * g[j];
  return v;
}

double HamiltonianEvaluator::sum(std::span<const double> phi, std::span<const long> sites) const {
  double v = 0.0;
  for (long x : sites) v += density(phi, x);
  return v;
}

TaylorPolynomial HamiltonianEvaluator::polynomial(std::span<const long> sites) const {
  TaylorPolynomial P;
  const int d = H_.d;
  const auto units = unit_indices(d);
  for (long x : sites) {
    P.add_constant(H_.a_const);
    for (int b = 0; b < lin_.size(); ++b) P.add({JetVar{x, lin_.alpha(b)}}, H_.a_lin[b]);
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) P.add({JetVar{x, units[i]}, JetVar{x, units[j]}}, H_.a_quad(i, j));
  }
  return P;
}

double relevant_eval(const Blocks& g, const RelevantHamiltonian& H, int k, long block, std::span<const double> phi) {
  HamiltonianEvaluator ev(g.torus(), H);
  return ev.sum(phi, g.grid(k).sites[block]);
}

double WeightParams::w_scale(int j, int alpha_order, int L, int d) const {
  double Lj = std::pow(static_cast<double>(L), j);
  return h_at(j) * std::pow(Lj, -alpha_order) * std::pow(Lj, -0.5 * (d - 2));
}

double h_norm(const RelevantHamiltonian& H, int k, const WeightParams& p, int L) {
  const int d = H.d;
  const double Lk = std::pow(static_cast<double>(L), k);
  const double hk = p.h_at(k);
  double n = std::pow(Lk, d) * std::abs(H.a_const);
  auto lin = relevant_linear_indices(d);
  for (std::size_t b = 0; b < lin.size(); ++b)
    n += hk * std::pow(Lk, d) * std::pow(Lk, -0.5 * (d - 2)) * std::pow(Lk, -order(lin[b])) * std::abs(H.a_lin[b]);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) n += hk * hk * std::abs(H.a_quad(i, j));
  return n;
}

double taylor_norm(const TaylorPolynomial& P, int k, const WeightParams& p, int L, int d) {
  double n = 0.0;
  for (const auto& [mono, c] : P.terms()) {
    double w = std::abs(c);
    for (const auto& v : mono) w *= p.w_scale(k, order(v.alpha), L, d);
    n += w;
  }
  return n;
}

std::vector<std::vector<double>> norm_test_family(const Torus& t) {
  std::vector<std::vector<double>> fam;
  const double two_pi = 2.0 * std::acos(-1.0);
  for (int i = 0; i < t.d(); ++i) {
    std::vector<double> lin(t.sites()), c(t.sites()), s(t.sites());
    for (long x = 0; x < t.sites(); ++x) {
      auto u = t.centered(x);
      lin[x] = u[i];
      double a = two_pi * static_cast<double>(u[i]) / static_cast<double>(t.side());
      c[x] = std::cos(a);
      s[x] = std::sin(a);
    }
    fam.push_back(lin);
    fam.push_back(c);
    fam.push_back(s);
  }
  return fam;
}

double taylor_norm(const PolymerFunctional& F, const Polymer& X, std::span<const double> phi, int k,
                   const WeightParams& p, double fd_step) {
  const Blocks& g = F.blocks();
  const Torus& t = g.torus();
  const int d = t.d();
  Polymer region = g.sites(star(g, X));
  JetStencil js(t, indices_up_to(d, p_phi(d)));
  double f0 = F.eval(X, phi);
  double sup1 = 0.0, sup2 = 0.0;
  const double s = 10.0 * fd_step;
  std::vector<double> buf(phi.size());
  auto at = [&](const std::vector<double>& gdir, double step) {
    for (std::size_t i = 0; i < phi.size(); ++i) buf[i] = phi[i] + step * gdir[i];
    return F.eval(X, buf);
  };
  for (auto gdir : norm_test_family(t)) {
    double scale = 0.0;
    for (long x : region.blocks())
      for (int a = 0; a < js.size(); ++a)
        scale = std::max(scale, std::abs(js.eval(gdir, x, a)) / p.w_scale(k, order(js.alpha(a)), t.L(), d));
    if (scale == 0.0) continue;
    for (auto& v : gdir) v /= scale;
    sup1 = std::max(sup1, std::abs(at(gdir, fd_step) - at(gdir, -fd_step)) / (2.0 * fd_step));
    sup2 = std::max(sup2, std::abs(at(gdir, s) - 2.0 * f0 + at(gdir, -s)) / (2.0 * s * s));
  }
  return std::abs(f0) + sup1 + sup2;
}

double weight_eval(WeightFlavor flavor, const Blocks& g, const Polymer& X, std::span<const double> phi, int k,
                   const WeightParams& p) {
  const Torus& t = g.torus();
  const int d = t.d();
  Polymer region = flavor == WeightFlavor::large_set ? g.sites(X) : g.sites(star(g, X));
  double lam = flavor == WeightFlavor::large_set ? p.lambda_big : p.lambda_W;
  JetStencil js(t, indices_up_to(d, p_phi(d)));
  std::vector<double> inv2(js.size());
  for (int a = 0; a < js.size(); ++a) {
    int o = order(js.alpha(a));
    double w = p.w_scale(k, o, t.L(), d);
    if (flavor == WeightFlavor::mixed) w = std::sqrt(w * p.w_scale(k + 1, o, t.L(), d));
    inv2[a] = 1.0 / (w * w);
  }
  double acc = 0.0;
  for (long x : region.blocks())
    for (int a = 0; a < js.size(); ++a) {
      double v = js.eval(phi, x, a);
      acc += inv2[a] * v * v;
    }
  return std::exp(lam * acc);
}

void IdentityElement::sample_many(std::span<const Polymer> Xs, std::span<const double>, SampleKey,
                                  std::span<double> out) const {
  for (std::size_t i = 0; i < Xs.size(); ++i) out[i] = Xs[i].empty() ? 1.0 : 0.0;
}

std::optional<TaylorPolynomial> IdentityElement::polynomial(const Polymer& X) const {
  TaylorPolynomial P;
  if (X.empty()) P.add_constant(1.0);
  return P;
}

void SiteProduct::sample_many(std::span<const Polymer> Xs, std::span<const double> phi, SampleKey,
                              std::span<double> out) const {
  for (std::size_t i = 0; i < Xs.size(); ++i) {
    double v = 1.0;
    for (long x : g_->sites(Xs[i]).blocks()) v *= f_(phi, x);
    out[i] = v;
  }
}

std::shared_ptr<SiteProduct> exp_minus_h(std::shared_ptr<const Blocks> g, int k, const RelevantHamiltonian& H) {
  auto ev = std::make_shared<HamiltonianEvaluator>(g->torus(), H);
  int reach = ev->reach();
  return std::make_shared<SiteProduct>(
      std::move(g), k, [ev](std::span<const double> phi, long x) { return std::exp(-ev->density(phi, x)); }, reach);
}

void PolynomialFunctional::sample_many(std::span<const Polymer> Xs, std::span<const double> phi, SampleKey,
                                       std::span<double> out) const {
  for (std::size_t i = 0; i < Xs.size(); ++i) out[i] = Xs[i].empty() ? 1.0 : gen_(Xs[i]).eval(g_->torus(), phi);
}

std::optional<TaylorPolynomial> PolynomialFunctional::polynomial(const Polymer& X) const {
  if (X.empty()) {
    TaylorPolynomial P;
    P.add_constant(1.0);
    return P;
  }
  return gen_(X);
}

double circ(const PolymerFunctional& F, const PolymerFunctional& G, const Polymer& X, std::span<const double> phi,
            long budget) {
  require(!F.stochastic() && !G.stochastic(), "circ needs deterministic functionals");
  require(F.scale() == G.scale() && X.scale() == F.scale(), "circ operands must share the scale");
  const Blocks& g = F.blocks();
  auto bl = X.blocks();
  if (F.multiplicative() && G.multiplicative()) {
    double v = 1.0;
    for (long b : bl) {
      Polymer B = g.single(X.scale(), b);
      v *= F.eval(B, phi) + G.eval(B, phi);
    }
    return v;
  }
  if (bl.size() >= 63 || (1L << bl.size()) > budget)
    fail(ErrorKind::budget, fmt::format("circ over {} blocks exceeds budget {}", bl.size(), budget));
  double acc = 0.0;
  const long n = 1L << bl.size();
  for (long mask = 0; mask < n; ++mask) {
    Polymer Y = g.empty(X.scale()), Z = g.empty(X.scale());
    for (std::size_t i = 0; i < bl.size(); ++i) (mask >> i & 1 ? Y : Z).insert(bl[i]);
    acc += F.eval(Y, phi) * G.eval(Z, phi);
  }
  return acc;
}

Pi2Plan::Pi2Plan(const Blocks& g, int k, long block, double fd_step) : d_(g.d()), t_(fd_step), s_(10.0 * fd_step) {
  require(fd_step > 0.0, "fd_step must be positive");
  const Torus& t = g.torus();
  require(t.m() == 1, "projection supports scalar fields only (m = 1)");
  const auto& G = g.grid(k);
  const auto& sites = G.sites[block];
  volume_ = static_cast<long>(sites.size());
  // center of the block in index coordinates
  auto bc = g.block_coords(k, block);
  std::vector<int> cu(d_);
  for (int i = 0; i < d_; ++i) cu[i] = static_cast<int>(bc[i] * G.block_side + (G.block_side - 1) / 2);
  long center = t.site(cu);
  std::vector<std::vector<int>> disp(t.sites());
  for (long x = 0; x < t.sites(); ++x) disp[x] = t.displacement(center, x);

  const auto lin = relevant_linear_indices(d_);
  for (const auto& gamma : lin) {
    std::vector<double> f(t.sites());
    for (long x = 0; x < t.sites(); ++x) {
      double v = 1.0;
      for (int i = 0; i < d_; ++i) v *= std::pow(static_cast<double>(disp[x][i]), gamma[i]);
      f[x] = v;
    }
    lin_fields_.push_back(std::move(f));
  }
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < d_; ++i)
    for (int j = i; j < d_; ++j) pairs.emplace_back(i, j);
  for (auto [i, j] : pairs) {
    std::vector<double> f(t.sites());
    for (long x = 0; x < t.sites(); ++x) f[x] = disp[x][i] + (i == j ? 0.0 : disp[x][j]);
    quad_fields_.push_back(std::move(f));
  }

  JetStencil ls(t, lin), us(t, unit_indices(d_));
  const int nl = static_cast<int>(lin.size()), nq = static_cast<int>(pairs.size());
  Eigen::MatrixXd Ml(nl, nl), Mq(nq, nq);
  for (int p = 0; p < nl; ++p)
    for (int b = 0; b < nl; ++b) {
      double s = 0.0;
      for (long x : sites) s += ls.eval(lin_fields_[p], x, b);
      Ml(p, b) = s;
    }
  for (int p = 0; p < nq; ++p)
    for (int c = 0; c < nq; ++c) {
      auto [a, b] = pairs[c];
      double s = 0.0;
      for (long x : sites) s += us.eval(quad_fields_[p], x, a) * us.eval(quad_fields_[p], x, b);
      Mq(p, c) = s;
    }
  Eigen::FullPivLU<Eigen::MatrixXd> lu_l(Ml), lu_q(Mq);
  rank_lin_ = static_cast<int>(lu_l.rank());
  rank_quad_ = static_cast<int>(lu_q.rank());
  if (rank_lin_ < nl || rank_quad_ < nq)
    fail(ErrorKind::numeric, fmt::format("singular projection system: linear rank {}/{}, quadratic rank {}/{}",
                                         rank_lin_, nl, rank_quad_, nq));
  lin_inv_ = lu_l.inverse();
  quad_inv_ = lu_q.inverse();

  fields_.push_back(std::vector<double>(t.sites(), 0.0));
  auto scaled = [&](const std::vector<double>& f, double a) {
    std::vector<double> r(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) r[i] = a * f[i];
    return r;
  };
  for (const auto& f : lin_fields_) {
    fields_.push_back(scaled(f, t_));
    fields_.push_back(scaled(f, -t_));
  }
  for (const auto& f : quad_fields_) {
    fields_.push_back(scaled(f, s_));
    fields_.push_back(scaled(f, -s_));
  }

  const int nf = static_cast<int>(fields_.size());
  const int dim = 1 + nl + nq;
  J_ = Eigen::MatrixXd::Zero(dim, nf);
  J_(0, 0) = 1.0 / static_cast<double>(volume_);
  // derivative data -> coefficients
  Eigen::MatrixXd Dl = Eigen::MatrixXd::Zero(nl, nf), Dq = Eigen::MatrixXd::Zero(nq, nf);
  for (int p = 0; p < nl; ++p) {
    Dl(p, 1 + 2 * p) = 1.0 / (2.0 * t_);
    Dl(p, 2 + 2 * p) = -1.0 / (2.0 * t_);
  }
  for (int p = 0; p < nq; ++p) {
    int base = 1 + 2 * nl + 2 * p;
    Dq(p, base) = 1.0 / (2.0 * s_ * s_);
    Dq(p, base + 1) = 1.0 / (2.0 * s_ * s_);
    Dq(p, 0) = -1.0 / (s_ * s_);
  }
  J_.block(1, 0, nl, nf) = lin_inv_ * Dl;
  J_.block(1 + nl, 0, nq, nf) = quad_inv_ * Dq;
}

RelevantHamiltonian Pi2Plan::solve(std::span<const double> values) const {
  require(static_cast<long>(values.size()) == J_.cols(), "projection needs one value per test field");
  Eigen::Map<const Eigen::VectorXd> v(values.data(), static_cast<long>(values.size()));
  Eigen::VectorXd c = J_ * v;
  return RelevantHamiltonian::from_vector(d_, std::span<const double>(c.data(), c.size()));
}

RelevantHamiltonian Pi2Plan::solve_polynomial(const TaylorPolynomial& P, const Torus& t) const {
  const int nl = static_cast<int>(lin_fields_.size()), nq = static_cast<int>(quad_fields_.size());
  Eigen::VectorXd dl(nl), dq(nq);
  for (int p = 0; p < nl; ++p) {
    auto c = P.along(t, lin_fields_[p]);
    dl(p) = c.size() > 1 ? c[1] : 0.0;
  }
  for (int p = 0; p < nq; ++p) {
    auto c = P.along(t, quad_fields_[p]);
    dq(p) = c.size() > 2 ? c[2] : 0.0;
  }
  std::vector<double> v{P.constant() / static_cast<double>(volume_)};
  Eigen::VectorXd al = lin_inv_ * dl, aq = quad_inv_ * dq;
  v.insert(v.end(), al.data(), al.data() + nl);
  v.insert(v.end(), aq.data(), aq.data() + nq);
  return RelevantHamiltonian::from_vector(d_, v);
}

Pi2Result pi2_project(const PolymerFunctional& F, long block, const Pi2Options& opt) {
  const Blocks& g = F.blocks();
  const int k = F.scale();
  Pi2Plan plan(g, k, block, opt.fd_step);
  Polymer B = g.single(k, block);
  Pi2Result res;
  if (auto P = F.polynomial(B)) {
    res.H = plan.solve_polynomial(*P, g.torus());
    res.err.assign(res.H.dim(), 0.0);
    return res;
  }
  const auto& fields = plan.fields();
  const int nf = static_cast<int>(fields.size());
  if (!F.stochastic()) {
    std::vector<double> vals(nf);
    for (int f = 0; f < nf; ++f) vals[f] = F.eval(B, fields[f]);
    res.H = plan.solve(vals);
    res.err.assign(res.H.dim(), 0.0);
    return res;
  }
  auto est = mc_mean_vec(opt.samples, opt.batches, nf, [&](long i, std::span<double> out) {
    for (int f = 0; f < nf; ++f) {
      double v = F.eval(B, fields[f], {static_cast<uint64_t>(i), 1});
      if (opt.antithetic) v = 0.5 * (v + F.eval(B, fields[f], {static_cast<uint64_t>(i), -1}));
      out[f] = v;
    }
  });
  res.H = plan.solve(std::span<const double>(est.value.data(), nf));
  Eigen::MatrixXd cov = plan.jacobian() * est.cov * plan.jacobian().transpose();
  for (int i = 0; i < res.H.dim(); ++i) res.err.push_back(std::sqrt(std::max(0.0, cov(i, i))));
  return res;
}

}  // namespace rg
