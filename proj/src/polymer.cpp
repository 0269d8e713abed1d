#include "rgflow/polymer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <map>
#include <queue>

namespace rg {

long Polymer::size() const {
  long n = 0;
  for (auto w : w_) n += std::popcount(w);
  return n;
}

bool Polymer::empty() const {
  for (auto w : w_)
    if (w) return false;
  return true;
}

std::vector<long> Polymer::blocks() const {
  std::vector<long> r;
  for (std::size_t i = 0; i < w_.size(); ++i) {
    uint64_t w = w_[i];
    while (w) {
      int b = std::countr_zero(w);
      r.push_back(static_cast<long>(i * 64 + b));
      w &= w - 1;
    }
  }
  return r;
}

bool Polymer::subset_of(const Polymer& o) const {
  for (std::size_t i = 0; i < w_.size(); ++i)
    if (w_[i] & ~o.w_[i]) return false;
  return true;
}

bool Polymer::intersects(const Polymer& o) const {
  for (std::size_t i = 0; i < w_.size(); ++i)
    if (w_[i] & o.w_[i]) return true;
  return false;
}

Polymer Polymer::operator|(const Polymer& o) const {
  Polymer r = *this;
  for (std::size_t i = 0; i < w_.size(); ++i) r.w_[i] |= o.w_[i];
  return r;
}

Polymer Polymer::operator&(const Polymer& o) const {
  Polymer r = *this;
  for (std::size_t i = 0; i < w_.size(); ++i) r.w_[i] &= o.w_[i];
  return r;
}

Polymer Polymer::minus(const Polymer& o) const {
  Polymer r = *this;
  for (std::size_t i = 0; i < w_.size(); ++i) r.w_[i] &= ~o.w_[i];
  return r;
}

bool Polymer::operator<(const Polymer& o) const {
  if (scale_ != o.scale_) return scale_ < o.scale_;
  return blocks() < o.blocks();
}

std::size_t Polymer::hash() const {
  uint64_t h = 1469598103934665603ull ^ static_cast<uint64_t>(scale_);
  for (auto w : w_) {
    h ^= w;
    h *= 1099511628211ull;
    h ^= h >> 29;
  }
  return static_cast<std::size_t>(h);
}

Blocks::Blocks(const Torus& t) : t_(t) {
  const int d = t.d();
  for (int k = 0; k <= t.N(); ++k) {
    BlockGrid G;
    G.scale = k;
    G.block_side = ipow(t.L(), k);
    G.per_side = t.side() / G.block_side;
    G.count = ipow(G.per_side, d);
    G.sites.resize(G.count);
    for (long x = 0; x < t.sites(); ++x) G.sites[t.block_of(x, k)].push_back(x);
    G.neighbours.resize(G.count);
    grids_.push_back(std::move(G));
  }
  for (int k = 0; k <= t.N(); ++k) {
    auto& G = grids_[k];
    for (long b = 0; b < G.count; ++b) {
      auto bc = block_coords(k, b);
      std::vector<int> off(d, -1);
      Polymer seen = Polymer(k, G.count);
      while (true) {
        std::vector<int> c(d);
        for (int i = 0; i < d; ++i) c[i] = bc[i] + off[i];
        long nb = block_index(k, c);
        if (nb != b) seen.insert(nb);
        int j = d - 1;
        while (j >= 0 && off[j] == 1) off[j--] = -1;
        if (j < 0) break;
        ++off[j];
      }
      G.neighbours[b] = seen.blocks();
    }
  }
}

const BlockGrid& Blocks::grid(int k) const {
  require(k >= 0 && k <= t_.N(), fmt::format("scale {} out of range [0,{}]", k, t_.N()));
  return grids_[k];
}

std::vector<int> Blocks::block_coords(int k, long b) const {
  const auto& G = grid(k);
  std::vector<int> c(t_.d());
  for (int i = t_.d() - 1; i >= 0; --i) {
    c[i] = static_cast<int>(b % G.per_side);
    b /= G.per_side;
  }
  return c;
}

long Blocks::block_index(int k, std::span<const int> bc) const {
  const auto& G = grid(k);
  long b = 0;
  for (int i = 0; i < t_.d(); ++i) {
    long v = bc[i] % G.per_side;
    if (v < 0) v += G.per_side;
    b = b * G.per_side + v;
  }
  return b;
}

int Blocks::distance(int k, long a, long b) const {
  const auto& G = grid(k);
  auto ca = block_coords(k, a), cb = block_coords(k, b);
  int r = 0;
  for (int i = 0; i < t_.d(); ++i) {
    long v = std::abs(ca[i] - cb[i]);
    v = std::min<long>(v, G.per_side - v);
    r = std::max<int>(r, static_cast<int>(v));
  }
  return r;
}

long Blocks::parent(int k, long b) const {
  auto c = block_coords(k, b);
  for (auto& v : c) v /= t_.L();
  return block_index(k + 1, c);
}

Polymer Blocks::full(int k) const {
  Polymer p = empty(k);
  for (long b = 0; b < grid(k).count; ++b) p.insert(b);
  return p;
}

Polymer Blocks::single(int k, long b) const {
  Polymer p = empty(k);
  require(b >= 0 && b < grid(k).count, "block index out of range");
  p.insert(b);
  return p;
}

Polymer Blocks::from_blocks(int k, const std::vector<long>& bs) const {
  Polymer p = empty(k);
  for (long b : bs) {
    require(b >= 0 && b < grid(k).count, "block index out of range");
    p.insert(b);
  }
  return p;
}

Polymer Blocks::sites(const Polymer& X) const { return refine(X, 0); }

Polymer Blocks::refine(const Polymer& X, int j) const {
  require(j <= X.scale(), "refine target must be finer");
  if (j == X.scale()) return X;
  Polymer r = empty(j);
  const auto& G = grid(X.scale());
  for (long b : X.blocks())
    for (long x : G.sites[b]) r.insert(t_.block_of(x, j));
  return r;
}

std::string Blocks::debug_json(const Polymer& X) const {
  std::string s = "[";
  bool first = true;
  long h = (grid(X.scale()).per_side - 1) / 2;
  for (long b : X.blocks()) {
    auto c = block_coords(X.scale(), b);
    s += first ? "[" : ",[";
    first = false;
    for (std::size_t i = 0; i < c.size(); ++i) s += fmt::format("{}{}", i ? "," : "", c[i] - h);
    s += "]";
  }
  return s + "]";
}

std::vector<Polymer> components(const Blocks& g, const Polymer& X) {
  const auto& G = g.grid(X.scale());
  std::vector<Polymer> out;
  Polymer left = X;
  for (long start : X.blocks()) {
    if (!left.contains(start)) continue;
    Polymer comp = g.empty(X.scale());
    std::vector<long> stack{start};
    left.erase(start);
    comp.insert(start);
    while (!stack.empty()) {
      long b = stack.back();
      stack.pop_back();
      for (long nb : G.neighbours[b])
        if (left.contains(nb)) {
          left.erase(nb);
          comp.insert(nb);
          stack.push_back(nb);
        }
    }
    out.push_back(std::move(comp));
  }
  return out;
}

bool is_connected(const Blocks& g, const Polymer& X) { return !X.empty() && components(g, X).size() == 1; }

Polymer closure(const Blocks& g, const Polymer& X) {
  int k = X.scale();
  if (k + 1 > g.N()) fail(ErrorKind::invalid, fmt::format("closure at scale {} exceeds N={}", k + 1, g.N()));
  Polymer r = g.empty(k + 1);
  for (long b : X.blocks()) r.insert(g.parent(k, b));
  return r;
}

PolymerSize classify_small(const Blocks& g, const Polymer& X) {
  require(is_connected(g, X), "classify_small needs a connected polymer");
  return X.size() <= (1L << g.d()) ? PolymerSize::small : PolymerSize::large;
}

Polymer plus_neighbourhood(const Blocks& g, const Polymer& X) {
  const auto& G = g.grid(X.scale());
  Polymer r = X;
  for (long b : X.blocks())
    for (long nb : G.neighbours[b]) r.insert(nb);
  return r;
}

Polymer bhat(const Blocks& g, int k, long b) {
  const int d = g.d();
  const int reach = 1 << d;
  Polymer r = g.empty(k);
  auto bc = g.block_coords(k, b);
  std::vector<int> off(d, -reach);
  while (true) {
    std::vector<int> c(d);
    for (int i = 0; i < d; ++i) c[i] = bc[i] + off[i];
    r.insert(g.block_index(k, c));
    int j = d - 1;
    while (j >= 0 && off[j] == reach) off[j--] = -reach;
    if (j < 0) break;
    ++off[j];
  }
  return r;
}

Polymer star(const Blocks& g, const Polymer& X) {
  int j = std::max(X.scale() - 1, 0);
  Polymer fine = g.refine(X, j);
  Polymer r = g.empty(j);
  for (long b : fine.blocks()) r = r | bhat(g, j, b);
  return r;
}

namespace {

// (k+1)-block holding the lexicographically smallest site of a small connected Y,
// taken in Y's own unwrapped frame; falls back to raw index order if Y wraps.
long smallest_site_parent(const Blocks& g, const Polymer& Y) {
  const int k = Y.scale(), d = g.d();
  const auto& G = g.grid(k);
  auto bl = Y.blocks();
  long fallback = g.parent(k, bl.front());
  if (G.per_side < 3) return fallback;
  std::map<long, std::vector<int>> frame;
  frame[bl.front()] = g.block_coords(k, bl.front());
  std::queue<long> q;
  q.push(bl.front());
  while (!q.empty()) {
    long b = q.front();
    q.pop();
    const auto cb = frame[b];
    auto raw_b = g.block_coords(k, b);
    for (long nb : G.neighbours[b]) {
      if (!Y.contains(nb)) continue;
      auto raw_n = g.block_coords(k, nb);
      std::vector<int> c(d);
      for (int i = 0; i < d; ++i) {
        long dv = ((raw_n[i] - raw_b[i]) % G.per_side + G.per_side) % G.per_side;
        if (dv > G.per_side / 2) dv -= G.per_side;
        c[i] = cb[i] + static_cast<int>(dv);
      }
      auto it = frame.find(nb);
      if (it == frame.end()) {
        frame[nb] = c;
        q.push(nb);
      } else if (it->second != c) {
        return fallback;
      }
    }
  }
  std::vector<int> best;
  for (auto& [b, c] : frame)
    if (best.empty() || c < best) best = c;
  for (auto& v : best) {
    long w = ((v % G.per_side) + G.per_side) % G.per_side;
    v = static_cast<int>(w / g.torus().L());
  }
  return g.block_index(k + 1, best);
}

}  // namespace

Polymer pi_tilde(const Blocks& g, const Polymer& Y) {
  if (Y.empty()) return g.empty(Y.scale() + 1);
  if (classify_small(g, Y) == PolymerSize::large) return closure(g, Y);
  Polymer r = g.empty(Y.scale() + 1);
  r.insert(smallest_site_parent(g, Y));
  return r;
}

Polymer pi(const Blocks& g, const Polymer& X) {
  if (X.scale() + 1 > g.N()) fail(ErrorKind::invalid, "pi needs a scale below N");
  Polymer r = g.empty(X.scale() + 1);
  for (const auto& Y : components(g, X)) r = r | pi_tilde(g, Y);
  return r;
}

std::vector<Polymer> enumerate_preimage(const Blocks& g, const Polymer& U, int cutoff, long budget) {
  require(cutoff >= 0, "cutoff must be non-negative");
  require(U.scale() >= 1, "preimage target must have scale >= 1");
  const int k = U.scale() - 1;
  std::vector<Polymer> out;
  if (U.empty()) {
    out.push_back(g.empty(k));
    return out;
  }
  if (cutoff == 0) return out;
  Polymer base = g.refine(U, k);
  int reach = std::min(cutoff, 1 << g.d()) - 1;
  Polymer cand = base;
  for (int r = 0; r < reach; ++r) cand = plus_neighbourhood(g, cand);
  auto cl = cand.blocks();
  long visited = 0;
  Polymer cur = g.empty(k);

  // iterative DFS over increasing index lists
  auto visit = [&](auto&& self, std::size_t from, int depth) -> void {
    if (++visited > budget)
      fail(ErrorKind::budget, fmt::format("preimage enumeration exceeded budget {} (cutoff {})", budget, cutoff));
    if (depth > 0 && pi(g, cur) == U) out.push_back(cur);
    if (depth == cutoff) return;
    for (std::size_t i = from; i < cl.size(); ++i) {
      cur.insert(cl[i]);
      self(self, i + 1, depth + 1);
      cur.erase(cl[i]);
    }
  };
  visit(visit, 0, 0);
  return out;
}

PreimageTable::PreimageTable(const Blocks& g, int k, int cutoff, long budget) : k_(k), cutoff_(cutoff) {
  require(k + 1 <= g.N(), "preimage table needs scale below N");
  const long n = g.grid(k).count;
  std::unordered_map<Polymer, std::size_t, PolymerHash> index;
  Polymer cur = g.empty(k);
  std::vector<long> list;
  long visited = 0;
  auto visit = [&](auto&& self, long from) -> void {
    if (!list.empty()) {
      if (++visited > budget)
        fail(ErrorKind::budget, fmt::format("preimage table exceeded budget {} (cutoff {})", budget, cutoff));
      Polymer img = pi(g, cur);
      auto [it, fresh] = index.try_emplace(img, images_.size());
      if (fresh) {
        images_.push_back(img);
        members_.emplace_back();
      }
      members_[it->second].push_back(list);
      ++total_;
    }
    if (static_cast<int>(list.size()) == cutoff) return;
    for (long b = from; b < n; ++b) {
      cur.insert(b);
      list.push_back(b);
      self(self, b + 1);
      list.pop_back();
      cur.erase(b);
    }
  };
  visit(visit, 0);
}

}  // namespace rg
