#pragma once

#include <map>
#include <span>
#include <vector>

#include "rgflow/lattice.hpp"

namespace rg {

// A gradient coordinate: grad^alpha phi evaluated at a site.
struct JetVar {
  long site = 0;
  MultiIndex alpha;
  auto operator<=>(const JetVar&) const = default;
};

// Polynomial in finitely many gradient coordinates. Monomials are sorted variable lists.
class TaylorPolynomial {
 public:
  using Monomial = std::vector<JetVar>;

  void add(Monomial mono, double c);
  void add_constant(double c) { add({}, c); }
  const std::map<Monomial, double>& terms() const { return terms_; }
  int degree() const;
  bool empty() const { return terms_.empty(); }
  double constant() const;

  TaylorPolynomial& operator+=(const TaylorPolynomial& o);
  TaylorPolynomial& operator*=(double s);
  friend TaylorPolynomial operator+(TaylorPolynomial a, const TaylorPolynomial& b) { return a += b; }
  friend TaylorPolynomial operator-(TaylorPolynomial a, TaylorPolynomial b) { return a += (b *= -1.0); }
  friend TaylorPolynomial operator*(TaylorPolynomial a, double s) { return a *= s; }
  TaylorPolynomial operator*(const TaylorPolynomial& o) const;

  // distinct variables in first-appearance order of the sorted term map
  std::vector<JetVar> variables() const;
  double eval(const Torus& t, std::span<const double> phi) const;
  // coefficients of t^n in P(t g), n = 0..degree
  std::vector<double> along(const Torus& t, std::span<const double> g) const;
  // P(phi + psi) as a polynomial in psi
  TaylorPolynomial shifted(const Torus& t, std::span<const double> phi) const;
  // drop terms with |c| <= tol
  void prune(double tol = 0.0);

 private:
  std::map<Monomial, double> terms_;
};

double jet_value(const Torus& t, std::span<const double> phi, const JetVar& v);

}  // namespace rg
