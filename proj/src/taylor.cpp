#include "rgflow/taylor.hpp"

#include <algorithm>
#include <cmath>

namespace rg {

void TaylorPolynomial::add(Monomial mono, double c) {
  if (c == 0.0) return;
  std::sort(mono.begin(), mono.end());
  terms_[std::move(mono)] += c;
}

int TaylorPolynomial::degree() const {
  int d = 0;
  for (const auto& [m, c] : terms_) d = std::max(d, static_cast<int>(m.size()));
  return d;
}

double TaylorPolynomial::constant() const {
  auto it = terms_.find({});
  return it == terms_.end() ? 0.0 : it->second;
}

TaylorPolynomial& TaylorPolynomial::operator+=(const TaylorPolynomial& o) {
  for (const auto& [m, c] : o.terms_) terms_[m] += c;
  return *this;
}

TaylorPolynomial& TaylorPolynomial::operator*=(double s) {
  for (auto& [m, c] : terms_) c *= s;
  return *this;
}

TaylorPolynomial TaylorPolynomial::operator*(const TaylorPolynomial& o) const {
  TaylorPolynomial r;
  for (const auto& [a, ca] : terms_)
    for (const auto& [b, cb] : o.terms_) {
      Monomial m = a;
      m.insert(m.end(), b.begin(), b.end());
      r.add(std::move(m), ca * cb);
    }
  return r;
}

std::vector<JetVar> TaylorPolynomial::variables() const {
  std::vector<JetVar> vs;
  for (const auto& [m, c] : terms_)
    for (const auto& v : m)
      if (std::find(vs.begin(), vs.end(), v) == vs.end()) vs.push_back(v);
  return vs;
}

double jet_value(const Torus& t, std::span<const double> phi, const JetVar& v) {
  const int d = t.d();
  std::vector<int> k(d, 0);
  double acc = 0.0;
  while (true) {
    double c = 1.0;
    for (int j = 0; j < d; ++j) {
      double b = 1.0;
      for (int i = 0; i < k[j]; ++i) b = b * (v.alpha[j] - i) / (i + 1);
      c *= ((v.alpha[j] - k[j]) % 2 ? -b : b);
    }
    acc += c * phi[t.shift(v.site, k)];
    int j = d - 1;
    while (j >= 0 && k[j] == v.alpha[j]) k[j--] = 0;
    if (j < 0) break;
    ++k[j];
  }
  return acc;
}

namespace {
std::map<JetVar, double> values_of(const Torus& t, std::span<const double> phi, const std::vector<JetVar>& vs) {
  std::map<JetVar, double> r;
  for (const auto& v : vs) r[v] = jet_value(t, phi, v);
  return r;
}
}  // namespace

double TaylorPolynomial::eval(const Torus& t, std::span<const double> phi) const {
  auto vals = values_of(t, phi, variables());
  double acc = 0.0;
  for (const auto& [m, c] : terms_) {
    double p = c;
    for (const auto& v : m) p *= vals[v];
    acc += p;
  }
  return acc;
}

std::vector<double> TaylorPolynomial::along(const Torus& t, std::span<const double> g) const {
  auto vals = values_of(t, g, variables());
  std::vector<double> r(degree() + 1, 0.0);
  for (const auto& [m, c] : terms_) {
    double p = c;
    for (const auto& v : m) p *= vals[v];
    r[m.size()] += p;
  }
  return r;
}

TaylorPolynomial TaylorPolynomial::shifted(const Torus& t, std::span<const double> phi) const {
  auto vals = values_of(t, phi, variables());
  TaylorPolynomial r;
  for (const auto& [m, c] : terms_) {
    // expand prod (a_v + psi_v) over subsets of factor positions
    const std::size_t n = m.size();
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      double coef = c;
      Monomial kept;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask >> i & 1u)
          kept.push_back(m[i]);
        else
          coef *= vals[m[i]];
      }
      r.add(std::move(kept), coef);
    }
  }
  return r;
}

void TaylorPolynomial::prune(double tol) {
  for (auto it = terms_.begin(); it != terms_.end();) {
    if (std::abs(it->second) <= tol)
      it = terms_.erase(it);
    else
      ++it;
  }
}

}  // namespace rg
