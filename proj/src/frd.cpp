#include "rgflow/frd.hpp"

#include <fmt/format.h>

#include <cmath>

namespace rg {

double operator_norm(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

EllipticOperator::EllipticOperator(const Torus& t, Eigen::MatrixXd Q, Eigen::MatrixXd q)
    : t_(std::make_shared<Torus>(t)), Q_(std::move(Q)), q_(std::move(q)) {
  const int d = t.d();
  require(t.m() == 1, "elliptic operator supports scalar fields only (m = 1)");
  require(Q_.rows() == d && Q_.cols() == d, "Q must be d x d");
  require(q_.rows() == d && q_.cols() == d, "q must be d x d");
  require((Q_ - Q_.transpose()).cwiseAbs().maxCoeff() < 1e-12, "Q must be symmetric");
  require((q_ - q_.transpose()).cwiseAbs().maxCoeff() < 1e-12, "q must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q_);
  require(es.eigenvalues().minCoeff() > 0.0, "Q must be positive definite");
  require(operator_norm(q_) <= 0.5 + 1e-15, fmt::format("|q| = {} exceeds 1/2", operator_norm(q_)));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(M());
  if (em.eigenvalues().minCoeff() <= 0.0) fail(ErrorKind::numeric, "Q - q is not positive definite");
  fft_ = std::make_shared<Fft>(t);
  auto p = momenta(t);
  symbol_.resize(t.sites());
  Eigen::MatrixXd Mq = M();
  for (long x = 0; x < t.sites(); ++x) {
    std::complex<double> s = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        s += Mq(i, j) * (std::exp(std::complex<double>(0, -p[x][j])) - 1.0) *
             (std::exp(std::complex<double>(0, p[x][i])) - 1.0);
    symbol_[x] = s.real();
  }
}

std::vector<double> EllipticOperator::apply(std::span<const double> phi) const {
  const Torus& t = *t_;
  const int d = t.d();
  std::vector<double> out(t.sites(), 0.0);
  for (long x = 0; x < t.sites(); ++x)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double mij = Q_(i, j) - q_(i, j);
        if (mij == 0.0) continue;
        long xb = t.step_back(x, j);
        double gi_xb = phi[t.step(xb, i)] - phi[xb];
        double gi_x = phi[t.step(x, i)] - phi[x];
        out[x] += mij * (gi_xb - gi_x);
      }
  return out;
}

double EllipticOperator::quadratic_form(std::span<const double> phi) const {
  const Torus& t = *t_;
  double total = 0.0;
  std::vector<double> g(t.d());
  for (long x = 0; x < t.sites(); ++x) {
    for (int i = 0; i < t.d(); ++i) g[i] = phi[t.step(x, i)] - phi[x];
    for (int i = 0; i < t.d(); ++i)
      for (int j = 0; j < t.d(); ++j) total += (Q_(i, j) - q_(i, j)) * g[i] * g[j];
  }
  return total;
}

Kernel green_kernel(const EllipticOperator& A) {
  const auto& s = A.symbols();
  const long n = static_cast<long>(s.size());
  std::vector<std::complex<double>> v(n);
  for (long p = 1; p < n; ++p) {
    if (!(s[p] > 0.0)) fail(ErrorKind::numeric, fmt::format("non-positive symbol {} at mode {}", s[p], p));
    v[p] = 1.0 / s[p];
  }
  v[0] = 0.0;
  return Kernel{A.fft().inverse_real(v)};
}

std::vector<double> convolve_kernel(const Torus& t, const Fft& fft, const Kernel& C, std::span<const double> phi) {
  auto a = fft.forward_real(C.values);
  auto b = fft.forward_real(phi);
  for (long p = 0; p < t.sites(); ++p) a[p] *= b[p];
  return fft.inverse_real(a);
}

std::vector<double> kernel_spectrum(const Fft& fft, const Kernel& C) {
  auto a = fft.forward_real(C.values);
  std::vector<double> r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i].real();
  return r;
}

FRDecomposition decompose(const EllipticOperator& A) {
  const Torus& t = A.torus();
  const int L = t.L(), N = t.N(), d = t.d();
  FRDecomposition frd;
  frd.L = L;
  frd.N = N;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A.Q());
  frd.lambda = 4.0 * d * (es.eigenvalues().maxCoeff() + 0.5);
  frd.full = green_kernel(A);
  frd.n.push_back(0);
  for (int k = 1; k <= N - 1; ++k) frd.n.push_back((ipow(L, k) + 1) / 2);

  const double V = static_cast<double>(t.sites());
  std::vector<double> power(t.sites(), 0.0);  // T^n delta
  power[0] = 1.0;
  long cur = 0;
  Kernel rest = frd.full;
  for (int k = 1; k <= N - 1; ++k) {
    std::vector<double> band(t.sites(), 0.0);
    for (; cur < frd.n[k]; ++cur) {
      for (long x = 0; x < t.sites(); ++x) band[x] += power[x];
      auto Ap = A.apply(power);
      for (long x = 0; x < t.sites(); ++x) power[x] -= Ap[x] / frd.lambda;
    }
    double shift = static_cast<double>(frd.n[k] - frd.n[k - 1]) / (frd.lambda * V);
    Kernel Ck;
    Ck.values.resize(t.sites());
    for (long x = 0; x < t.sites(); ++x) Ck.values[x] = band[x] / frd.lambda - shift;
    for (long x = 0; x < t.sites(); ++x) rest.values[x] -= Ck.values[x];
    frd.slices.push_back(std::move(Ck));
    frd.shifts.push_back(shift);
  }
  frd.slices.push_back(std::move(rest));
  return frd;
}

Kernel second_difference(const Torus& t, const Kernel& C, int i, int j) {
  Kernel r;
  r.values.resize(t.sites());
  for (long x = 0; x < t.sites(); ++x) {
    long xb = t.step_back(x, j);
    double a = C.values[t.step(xb, i)] - C.values[xb];
    double b = C.values[t.step(x, i)] - C.values[x];
    r.values[x] = a - b;
  }
  return r;
}

FrdReport verify_decomposition(const EllipticOperator& A, const FRDecomposition& frd) {
  const Torus& t = A.torus();
  const int N = frd.N, d = t.d();
  FrdReport rep;
  rep.lambda = frd.lambda;
  for (long x = 0; x < t.sites(); ++x) {
    double s = 0.0;
    for (const auto& c : frd.slices) s += c.values[x];
    rep.sum_residual = std::max(rep.sum_residual, std::abs(s - frd.full.values[x]));
  }
  for (const auto& c : frd.slices) {
    auto spec = kernel_spectrum(A.fft(), c);
    rep.min_eigen.push_back(*std::min_element(spec.begin(), spec.end()));
  }
  const std::vector<int> origin(d, 0);
  const long o = t.site(origin);
  for (int k = 1; k <= N - 1; ++k) {
    double half = 0.5 * static_cast<double>(ipow(t.L(), k));
    double worst = 0.0;
    for (long x = 0; x < t.sites(); ++x)
      if (t.linf_distance(o, x) >= half)
        worst = std::max(worst, std::abs(frd.slices[k - 1].values[x] + frd.shifts[k - 1]));
    rep.range_residual.push_back(worst);
  }
  const double lnL = std::log(static_cast<double>(t.L()));
  for (int k = 1; k <= N; ++k) {
    const Kernel& C = frd.slices[k - 1];
    for (int ord = 0; ord <= 2; ++ord) {
      double sup = 0.0;
      if (ord == 0) {
        for (double v : C.values) sup = std::max(sup, std::abs(v));
      } else {
        JetStencil js(t, indices_up_to(d, ord));
        for (int a = 0; a < js.size(); ++a) {
          if (order(js.alpha(a)) != ord) continue;
          for (long x = 0; x < t.sites(); ++x) sup = std::max(sup, std::abs(js.eval(C.values, x, a)));
        }
      }
      bool log_branch = d + ord == 2;
      double ref = std::pow(static_cast<double>(t.L()), -static_cast<double>((k - 1) * (d - 2 + ord)));
      if (log_branch) ref *= lnL;
      rep.scaling.push_back({k, ord, sup, ref, log_branch});
    }
  }
  return rep;
}

nlohmann::ordered_json export_frd(const Torus& t, const FRDecomposition& frd) {
  nlohmann::ordered_json j;
  j["L"] = frd.L;
  j["N"] = frd.N;
  j["lambda"] = frd.lambda;
  j["cut_points"] = frd.n;
  j["shifts"] = frd.shifts;
  auto slices = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < frd.slices.size(); ++k) {
    nlohmann::ordered_json s;
    s["name"] = k + 1 < frd.slices.size() ? fmt::format("C_{}", k + 1) : fmt::format("C_{0},{0}", frd.N);
    auto table = nlohmann::ordered_json::array();
    for (long x = 0; x < t.sites(); ++x) {
      nlohmann::ordered_json e;
      e["offset"] = t.displacement(0, x);
      e["value"] = frd.slices[k].values[x];
      table.push_back(e);
    }
    s["kernel"] = table;
    slices.push_back(s);
  }
  j["slices"] = slices;
  return j;
}

}  // namespace rg
