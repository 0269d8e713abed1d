#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "rgflow/error.hpp"

namespace rg {

using MultiIndex = std::vector<int>;

struct TorusParams {
  int L = 3;
  int N = 1;
  int d = 2;
  int m = 1;
  int R0 = 1;
  int r0 = 3;
  int R = 5;
  long side = 3;   // L^N
  long sites = 9;  // L^{Nd}
};

TorusParams make_torus(int L, int N, int d, int m = 1, int R0 = 1, int r0 = 3);

long ipow(long base, int exp);

// Periodic cube of side L^N. Sites are numbered row-major over index
// coordinates u_i in [0, side), first coordinate slowest. The centered
// representative is u - (side-1)/2.
class Torus {
 public:
  explicit Torus(const TorusParams& p);

  const TorusParams& params() const { return p_; }
  int d() const { return p_.d; }
  int m() const { return p_.m; }
  int L() const { return p_.L; }
  int N() const { return p_.N; }
  long side() const { return p_.side; }
  long sites() const { return p_.sites; }

  std::vector<int> coords(long x) const;
  std::vector<int> centered(long x) const;
  long site(std::span<const int> u) const;  // wraps any integer coordinates
  long site_centered(std::span<const int> c) const;
  long shift(long x, std::span<const int> offset) const;
  long step(long x, int dir) const { return fwd_[dir][x]; }
  long step_back(long x, int dir) const { return bwd_[dir][x]; }
  // periodic displacement of y relative to x, components in [-(side-1)/2, side/2]
  std::vector<int> displacement(long x, long y) const;
  int linf_distance(long x, long y) const;
  // index of the k-block containing x (row-major over block coordinates)
  long block_of(long x, int k) const;

 private:
  TorusParams p_;
  std::vector<long> stride_;
  std::vector<std::vector<long>> fwd_, bwd_;
};

// Dense field, component-minor: values[x*m + s].
struct Field {
  int m = 1;
  std::vector<double> values;

  static Field zero(const Torus& t) { return Field{t.m(), std::vector<double>(t.sites() * t.m(), 0.0)}; }
  double& at(long x, int s = 0) { return values[x * m + s]; }
  double at(long x, int s = 0) const { return values[x * m + s]; }
};

Field project_zero_mean(std::span<const double> raw, int m);
double max_component_sum(const Field& f);

// Unit multi-indices e_1..e_d.
std::vector<MultiIndex> unit_indices(int d);
// All alpha with 1 <= |alpha|_1 <= max_order.
std::vector<MultiIndex> indices_up_to(int d, int max_order);
int order(const MultiIndex& a);

// Forward-difference stencil for a list of multi-indices, cached per site.
class JetStencil {
 public:
  JetStencil(const Torus& t, std::vector<MultiIndex> alphas);

  int size() const { return static_cast<int>(alphas_.size()); }
  const MultiIndex& alpha(int a) const { return alphas_[a]; }
  const std::vector<MultiIndex>& alphas() const { return alphas_; }
  int m() const { return m_; }

  double eval(std::span<const double> phi, long x, int a, int s = 0) const {
    const auto& T = terms_[a];
    const long* nb = &T.sites[x * T.coef.size()];
    double acc = 0.0;
    for (std::size_t t = 0; t < T.coef.size(); ++t) acc += T.coef[t] * phi[nb[t] * m_ + s];
    return acc;
  }
  // offsets (relative to x) read by alpha, with their coefficients
  const std::vector<std::vector<int>>& offsets(int a) const { return terms_[a].offsets; }
  const std::vector<double>& coefficients(int a) const { return terms_[a].coef; }
  // sites read by alpha at x
  std::span<const long> reads(long x, int a) const {
    const auto& T = terms_[a];
    return {&T.sites[x * T.coef.size()], T.coef.size()};
  }

 private:
  struct Terms {
    std::vector<std::vector<int>> offsets;
    std::vector<double> coef;
    std::vector<long> sites;  // sites x coef.size()
  };
  int m_ = 1;
  std::vector<MultiIndex> alphas_;
  std::vector<Terms> terms_;
};

struct GradientVector {
  std::vector<MultiIndex> index;
  std::vector<double> values;  // index.size() x m
};

GradientVector extended_gradient(const Torus& t, const Field& phi, long x, const std::vector<MultiIndex>& I);

// Sum over sites of U(D phi(x) + Fbar); jets are ordered as I, component-minor.
using SiteEnergy = std::function<double(std::span<const double>)>;
double hamiltonian_eval(const Torus& t, const SiteEnergy& U, const Field& phi, std::span<const double> Fbar,
                        const std::vector<MultiIndex>& I);

void write_field_csv(std::ostream& os, const Torus& t, const Field& phi);
Field read_field_csv(std::istream& is, const Torus& t);

}  // namespace rg
