#include "rgflow/lattice.hpp"

#include <fmt/format.h>

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace rg {

long ipow(long base, int exp) {
  long r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

TorusParams make_torus(int L, int N, int d, int m, int R0, int r0) {
  require(L >= 3, fmt::format("block base L must be >= 3, got {}", L));
  require(N >= 1, fmt::format("number of scales N must be >= 1, got {}", N));
  require(d >= 2, fmt::format("dimension d must be >= 2, got {}", d));
  require(m >= 1, fmt::format("components m must be >= 1, got {}", m));
  require(R0 >= 1, fmt::format("range R0 must be >= 1, got {}", R0));
  require(r0 >= 3, fmt::format("order r0 must be >= 3, got {}", r0));
  double approx = std::pow(static_cast<double>(L), static_cast<double>(N) * d);
  require(approx <= 1 << 24, "torus too large");
  TorusParams p;
  p.L = L;
  p.N = N;
  p.d = d;
  p.m = m;
  p.R0 = R0;
  p.r0 = r0;
  p.R = std::max(R0, 2 * (d / 2) + 3);
  p.side = ipow(L, N);
  p.sites = ipow(p.side, d);
  return p;
}

Torus::Torus(const TorusParams& p) : p_(p), stride_(p.d) {
  long s = 1;
  for (int i = p_.d - 1; i >= 0; --i) {
    stride_[i] = s;
    s *= p_.side;
  }
  fwd_.assign(p_.d, std::vector<long>(p_.sites));
  bwd_.assign(p_.d, std::vector<long>(p_.sites));
  for (long x = 0; x < p_.sites; ++x) {
    auto u = coords(x);
    for (int i = 0; i < p_.d; ++i) {
      long ui = u[i];
      long up = (ui + 1) % p_.side, dn = (ui + p_.side - 1) % p_.side;
      fwd_[i][x] = x + (up - ui) * stride_[i];
      bwd_[i][x] = x + (dn - ui) * stride_[i];
    }
  }
}

std::vector<int> Torus::coords(long x) const {
  std::vector<int> u(p_.d);
  for (int i = 0; i < p_.d; ++i) u[i] = static_cast<int>((x / stride_[i]) % p_.side);
  return u;
}

std::vector<int> Torus::centered(long x) const {
  auto u = coords(x);
  int h = static_cast<int>((p_.side - 1) / 2);
  for (auto& v : u) v -= h;
  return u;
}

long Torus::site(std::span<const int> u) const {
  long x = 0;
  for (int i = 0; i < p_.d; ++i) {
    long v = u[i] % p_.side;
    if (v < 0) v += p_.side;
    x += v * stride_[i];
  }
  return x;
}

long Torus::site_centered(std::span<const int> c) const {
  std::vector<int> u(c.begin(), c.end());
  int h = static_cast<int>((p_.side - 1) / 2);
  for (auto& v : u) v += h;
  return site(u);
}

long Torus::shift(long x, std::span<const int> offset) const {
  auto u = coords(x);
  for (int i = 0; i < p_.d; ++i) u[i] += offset[i];
  return site(u);
}

std::vector<int> Torus::displacement(long x, long y) const {
  auto a = coords(x), b = coords(y);
  std::vector<int> r(p_.d);
  long half = p_.side / 2;
  for (int i = 0; i < p_.d; ++i) {
    long v = ((b[i] - a[i]) % p_.side + p_.side) % p_.side;
    if (v > half) v -= p_.side;
    r[i] = static_cast<int>(v);
  }
  return r;
}

int Torus::linf_distance(long x, long y) const {
  int r = 0;
  for (int v : displacement(x, y)) r = std::max(r, std::abs(v));
  return r;
}

long Torus::block_of(long x, int k) const {
  require(k >= 0 && k <= p_.N, "block scale out of range");
  long bs = ipow(p_.L, k), nb = p_.side / bs;
  auto u = coords(x);
  long b = 0;
  for (int i = 0; i < p_.d; ++i) b = b * nb + u[i] / bs;
  return b;
}

Field project_zero_mean(std::span<const double> raw, int m) {
  require(m >= 1 && raw.size() % m == 0, "field size is not a multiple of m");
  for (double v : raw)
    if (!std::isfinite(v)) fail(ErrorKind::numeric, "non-finite field value");
  Field f{m, std::vector<double>(raw.begin(), raw.end())};
  long n = static_cast<long>(raw.size()) / m;
  for (int s = 0; s < m; ++s) {
    double mean = 0.0;
    for (long x = 0; x < n; ++x) mean += f.values[x * m + s];
    mean /= static_cast<double>(n);
    for (long x = 0; x < n; ++x) f.values[x * m + s] -= mean;
  }
  return f;
}

double max_component_sum(const Field& f) {
  long n = static_cast<long>(f.values.size()) / f.m;
  double worst = 0.0;
  for (int s = 0; s < f.m; ++s) {
    double sum = 0.0;
    for (long x = 0; x < n; ++x) sum += f.values[x * f.m + s];
    worst = std::max(worst, std::abs(sum));
  }
  return worst;
}

std::vector<MultiIndex> unit_indices(int d) {
  std::vector<MultiIndex> r;
  for (int i = 0; i < d; ++i) {
    MultiIndex a(d, 0);
    a[i] = 1;
    r.push_back(a);
  }
  return r;
}

int order(const MultiIndex& a) {
  int s = 0;
  for (int v : a) s += v;
  return s;
}

namespace {
void gen_indices(int d, int total, int pos, MultiIndex& cur, std::vector<MultiIndex>& out) {
  if (pos == d - 1) {
    cur[pos] = total;
    out.push_back(cur);
    return;
  }
  for (int v = total; v >= 0; --v) {
    cur[pos] = v;
    gen_indices(d, total - v, pos + 1, cur, out);
  }
}
}  // namespace

std::vector<MultiIndex> indices_up_to(int d, int max_order) {
  std::vector<MultiIndex> out;
  for (int n = 1; n <= max_order; ++n) {
    MultiIndex cur(d, 0);
    gen_indices(d, n, 0, cur, out);
  }
  return out;
}

JetStencil::JetStencil(const Torus& t, std::vector<MultiIndex> alphas) : m_(t.m()), alphas_(std::move(alphas)) {
  const int d = t.d();
  for (const auto& a : alphas_) {
    require(static_cast<int>(a.size()) == d, "multi-index has wrong dimension");
    Terms T;
    // prod_j (shift_j - 1)^{a_j} expanded: sum over k <= a of prod binom * (-1)^{a_j-k_j}
    std::vector<int> k(d, 0);
    while (true) {
      double c = 1.0;
      for (int j = 0; j < d; ++j) {
        double b = 1.0;
        for (int i = 0; i < k[j]; ++i) b = b * (a[j] - i) / (i + 1);
        c *= ((a[j] - k[j]) % 2 ? -b : b);
      }
      T.offsets.push_back(k);
      T.coef.push_back(c);
      int j = d - 1;
      while (j >= 0 && k[j] == a[j]) k[j--] = 0;
      if (j < 0) break;
      ++k[j];
    }
    T.sites.resize(t.sites() * T.coef.size());
    for (long x = 0; x < t.sites(); ++x)
      for (std::size_t q = 0; q < T.coef.size(); ++q) T.sites[x * T.coef.size() + q] = t.shift(x, T.offsets[q]);
    terms_.push_back(std::move(T));
  }
}

GradientVector extended_gradient(const Torus& t, const Field& phi, long x, const std::vector<MultiIndex>& I) {
  require(x >= 0 && x < t.sites(), "site out of range");
  const int d = t.d();
  for (const auto& e : unit_indices(d)) {
    bool found = false;
    for (const auto& a : I) found = found || a == e;
    require(found, "index set must contain every unit vector");
  }
  for (const auto& a : I) {
    require(static_cast<int>(a.size()) == d, "multi-index has wrong dimension");
    bool nonzero = false;
    for (int v : a) {
      require(v >= 0 && v <= t.params().R0, "multi-index outside I_{R0}");
      nonzero = nonzero || v > 0;
    }
    require(nonzero, "zero multi-index not allowed");
  }
  GradientVector g;
  g.index = I;
  g.values.resize(I.size() * t.m());
  for (std::size_t a = 0; a < I.size(); ++a) {
    for (int s = 0; s < t.m(); ++s) {
      double acc = 0.0;
      std::vector<int> k(d, 0);
      while (true) {
        double c = 1.0;
        for (int j = 0; j < d; ++j) {
          double b = 1.0;
          for (int i = 0; i < k[j]; ++i) b = b * (I[a][j] - i) / (i + 1);
          c *= ((I[a][j] - k[j]) % 2 ? -b : b);
        }
        acc += c * phi.at(t.shift(x, k), s);
        int j = d - 1;
        while (j >= 0 && k[j] == I[a][j]) k[j--] = 0;
        if (j < 0) break;
        ++k[j];
      }
      g.values[a * t.m() + s] = acc;
    }
  }
  return g;
}

double hamiltonian_eval(const Torus& t, const SiteEnergy& U, const Field& phi, std::span<const double> Fbar,
                        const std::vector<MultiIndex>& I) {
  const std::size_t n = I.size() * t.m();
  require(Fbar.empty() || Fbar.size() == n, "deformation has wrong size");
  JetStencil js(t, I);
  std::vector<double> z(n);
  double total = 0.0;
  for (long x = 0; x < t.sites(); ++x) {
    for (int a = 0; a < js.size(); ++a)
      for (int s = 0; s < t.m(); ++s) z[a * t.m() + s] = js.eval(phi.values, x, a, s);
    if (!Fbar.empty())
      for (std::size_t i = 0; i < n; ++i) z[i] += Fbar[i];
    total += U(z);
  }
  return total;
}

void write_field_csv(std::ostream& os, const Torus& t, const Field& phi) {
  for (int i = 0; i < t.d(); ++i) os << "x" << i + 1 << ",";
  for (int s = 0; s < phi.m; ++s) os << "phi" << s << (s + 1 < phi.m ? "," : "\n");
  for (long x = 0; x < t.sites(); ++x) {
    for (int c : t.centered(x)) os << c << ",";
    for (int s = 0; s < phi.m; ++s) os << fmt::format("{:.17g}", phi.at(x, s)) << (s + 1 < phi.m ? "," : "\n");
  }
}

Field read_field_csv(std::istream& is, const Torus& t) {
  std::string line;
  if (!std::getline(is, line)) fail(ErrorKind::parse, "empty field file");
  std::vector<double> raw(t.sites() * t.m(), 0.0);
  long rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<int> c;
    std::vector<double> v;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        if (col < t.d())
          c.push_back(std::stoi(cell));
        else
          v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        fail(ErrorKind::parse, fmt::format("bad field cell '{}' on data row {}", cell, rows + 1));
      }
      ++col;
    }
    if (static_cast<int>(c.size()) != t.d() || static_cast<int>(v.size()) != t.m())
      fail(ErrorKind::parse, fmt::format("wrong column count on data row {}", rows + 1));
    long x = t.site_centered(c);
    for (int s = 0; s < t.m(); ++s) raw[x * t.m() + s] = v[s];
    ++rows;
  }
  if (rows != t.sites()) fail(ErrorKind::parse, fmt::format("expected {} rows, got {}", t.sites(), rows));
  return project_zero_mean(raw, t.m());
}

}  // namespace rg
