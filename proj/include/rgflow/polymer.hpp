#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "rgflow/lattice.hpp"

namespace rg {

// Set of k-blocks, stored as a bitset over the block list of the torus.
class Polymer {
 public:
  Polymer() = default;
  Polymer(int scale, long capacity) : scale_(scale), cap_(capacity), w_((capacity + 63) / 64, 0) {}

  int scale() const { return scale_; }
  long capacity() const { return cap_; }
  void insert(long b) { w_[b >> 6] |= (uint64_t{1} << (b & 63)); }
  void erase(long b) { w_[b >> 6] &= ~(uint64_t{1} << (b & 63)); }
  bool contains(long b) const { return (w_[b >> 6] >> (b & 63)) & 1u; }
  long size() const;
  bool empty() const;
  std::vector<long> blocks() const;
  bool subset_of(const Polymer& o) const;
  bool intersects(const Polymer& o) const;

  Polymer operator|(const Polymer& o) const;
  Polymer operator&(const Polymer& o) const;
  Polymer minus(const Polymer& o) const;
  bool operator==(const Polymer& o) const { return scale_ == o.scale_ && w_ == o.w_; }
  bool operator<(const Polymer& o) const;

  std::size_t hash() const;
  const std::vector<uint64_t>& words() const { return w_; }

 private:
  int scale_ = 0;
  long cap_ = 0;
  std::vector<uint64_t> w_;
};

struct PolymerHash {
  std::size_t operator()(const Polymer& p) const { return p.hash(); }
};

// Block lattice at one scale.
struct BlockGrid {
  int scale = 0;
  long block_side = 1;  // L^k
  long per_side = 1;    // L^{N-k}
  long count = 1;
  std::vector<std::vector<long>> sites;       // per block, ascending
  std::vector<std::vector<long>> neighbours;  // inf-distance exactly 1 (periodic), ascending
};

class Blocks {
 public:
  explicit Blocks(const Torus& t);

  const Torus& torus() const { return t_; }
  int N() const { return t_.N(); }
  int d() const { return t_.d(); }
  const BlockGrid& grid(int k) const;

  std::vector<int> block_coords(int k, long b) const;
  long block_index(int k, std::span<const int> bc) const;  // wraps
  int distance(int k, long a, long b) const;
  long parent(int k, long b) const;  // (k+1)-block containing k-block b

  Polymer empty(int k) const { return Polymer(k, grid(k).count); }
  Polymer full(int k) const;
  Polymer single(int k, long b) const;
  Polymer from_blocks(int k, const std::vector<long>& bs) const;
  // site set of X as a scale-0 polymer
  Polymer sites(const Polymer& X) const;
  // X expressed at a finer scale j <= k
  Polymer refine(const Polymer& X, int j) const;
  std::string debug_json(const Polymer& X) const;

 private:
  Torus t_;
  std::vector<BlockGrid> grids_;
};

std::vector<Polymer> components(const Blocks& g, const Polymer& X);
bool is_connected(const Blocks& g, const Polymer& X);
Polymer closure(const Blocks& g, const Polymer& X);

enum class PolymerSize { small, large };
PolymerSize classify_small(const Blocks& g, const Polymer& X);

// Blocks touching X (inf-distance <= 1), including X.
Polymer plus_neighbourhood(const Blocks& g, const Polymer& X);
// k-blocks within block distance 2^d of b (the cube of side (2^{d+1}+1) L^k), wrapped.
Polymer bhat(const Blocks& g, int k, long b);
// Union of B-hat over the (k-1)-blocks of X; at k = 0 the union is taken over 0-blocks.
Polymer star(const Blocks& g, const Polymer& X);

Polymer pi_tilde(const Blocks& g, const Polymer& Y);
Polymer pi(const Blocks& g, const Polymer& X);
inline bool chi(const Blocks& g, const Polymer& X, const Polymer& U) { return pi(g, X) == U; }

// All X at scale U.scale()-1 with pi(X) = U and |X| <= cutoff, lexicographic over sorted block lists.
std::vector<Polymer> enumerate_preimage(const Blocks& g, const Polymer& U, int cutoff, long budget);

// Every nonempty k-polymer with |X| <= cutoff, grouped by pi(X).
class PreimageTable {
 public:
  PreimageTable(const Blocks& g, int k, int cutoff, long budget);
  int scale() const { return k_; }
  int cutoff() const { return cutoff_; }
  const std::vector<Polymer>& images() const { return images_; }
  const std::vector<std::vector<long>>& members(std::size_t image) const { return members_[image]; }
  long total() const { return total_; }

 private:
  int k_, cutoff_;
  long total_ = 0;
  std::vector<Polymer> images_;
  std::vector<std::vector<std::vector<long>>> members_;  // image -> list of block lists
};

}  // namespace rg
