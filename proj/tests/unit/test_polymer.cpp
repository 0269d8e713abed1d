#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "oracles.hpp"
#include "rgflow/polymer.hpp"

using namespace rg;

namespace {

Polymer random_polymer(const Blocks& g, int k, oracle::Rng& rng, int max_blocks) {
  Polymer X = g.empty(k);
  const long n = 1 + rng.below(max_blocks);
  for (long i = 0; i < n; ++i) X.insert(rng.below(g.grid(k).count));
  return X;
}

// connected components under periodic inf-distance <= 1, by flood fill on block coordinates
std::vector<std::set<long>> flood_components(const Blocks& g, int k, const std::set<long>& blocks) {
  oracle::Cube c{g.grid(k).per_side, g.d()};
  auto adjacent = [&](long a, long b) {
    auto u = c.coords(a), v = c.coords(b);
    for (int i = 0; i < c.d; ++i) {
      long diff = ((u[i] - v[i]) % c.side + c.side) % c.side;
      if (std::min(diff, c.side - diff) > 1) return false;
    }
    return true;
  };
  std::vector<std::set<long>> out;
  std::set<long> left = blocks;
  while (!left.empty()) {
    std::set<long> comp{*left.begin()};
    left.erase(left.begin());
    bool grew = true;
    while (grew) {
      grew = false;
      for (auto it = left.begin(); it != left.end();) {
        bool touch = std::any_of(comp.begin(), comp.end(), [&](long b) { return adjacent(b, *it); });
        if (touch) {
          comp.insert(*it);
          it = left.erase(it);
          grew = true;
        } else {
          ++it;
        }
      }
    }
    out.push_back(comp);
  }
  return out;
}

}  // namespace

TEST_SUITE("polymer") {
  TEST_CASE("set operations agree with std::set") {
    Torus t(make_torus(3, 2, 2));
    Blocks g(t);
    oracle::Rng rng(3);
    for (int trial = 0; trial < 300; ++trial) {
      Polymer A = random_polymer(g, 0, rng, 20), B = random_polymer(g, 0, rng, 20);
      auto a = A.blocks(), b = B.blocks();
      std::set<long> sa(a.begin(), a.end()), sb(b.begin(), b.end());
      std::vector<long> u, i, m;
      std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(u));
      std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(i));
      std::set_difference(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(m));
      CHECK((A | B).blocks() == u);
      CHECK((A & B).blocks() == i);
      CHECK(A.minus(B).blocks() == m);
      CHECK(A.size() == static_cast<long>(sa.size()));
      CHECK(A.intersects(B) == !i.empty());
      CHECK(A.subset_of(A | B));
      CHECK((A & B).subset_of(A));
    }
  }

  TEST_CASE("components match a flood fill") {
    Torus t(make_torus(3, 2, 2));
    Blocks g(t);
    oracle::Rng rng(4);
    for (int k : {0, 1})
      for (int trial = 0; trial < 200; ++trial) {
        Polymer X = random_polymer(g, k, rng, k == 0 ? 12 : 5);
        auto bl = X.blocks();
        auto expect = flood_components(g, k, std::set<long>(bl.begin(), bl.end()));
        auto got = components(g, X);
        REQUIRE(got.size() == expect.size());
        std::set<std::vector<long>> a, b;
        for (const auto& c : got) a.insert(c.blocks());
        for (const auto& c : expect) b.insert(std::vector<long>(c.begin(), c.end()));
        CHECK(a == b);
        CHECK(is_connected(g, X) == (expect.size() == 1));
      }
  }

  TEST_CASE("small and large polymers") {
    Torus t(make_torus(3, 2, 2));
    Blocks g(t);
    Polymer X = g.empty(0);
    for (long b : {0L, 1L, 2L, 3L}) X.insert(b);  // a row of 4 sites, 4 = 2^d
    CHECK(classify_small(g, X) == PolymerSize::small);
    X.insert(4);
    CHECK(classify_small(g, X) == PolymerSize::large);
    CHECK(pi(g, X) == closure(g, X));
  }

  TEST_CASE("star of a scale-1 block is a cube of side 2^(d+1)+1 fine blocks") {
    Torus t(make_torus(3, 3, 2));
    Blocks g(t);
    Polymer U = g.single(2, 4);
    Polymer S = star(g, U);
    CHECK(S.scale() == 1);
    // 3x3 fine blocks, each with a 9x9 cube: the 11x11 union wraps onto all 9x9 1-blocks
    CHECK(S.size() == 81);
    Polymer V = g.single(1, 40);
    CHECK(star(g, V).scale() == 0);
    CHECK(star(g, V).size() == 11 * 11);
  }

  TEST_CASE("pi is covariant under block translations") {
    Torus t(make_torus(3, 3, 2));
    Blocks g(t);
    oracle::Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
      Polymer X = random_polymer(g, 0, rng, 8);
      std::vector<int> shift{static_cast<int>(rng.below(9)), static_cast<int>(rng.below(9))};
      Polymer Y = g.empty(0);
      for (long b : X.blocks()) {
        auto c = g.block_coords(0, b);
        for (int i = 0; i < 2; ++i) c[i] += 3 * shift[i];
        Y.insert(g.block_index(0, c));
      }
      Polymer PY = g.empty(1);
      for (long b : pi(g, X).blocks()) {
        auto c = g.block_coords(1, b);
        for (int i = 0; i < 2; ++i) c[i] += shift[i];
        PY.insert(g.block_index(1, c));
      }
      CHECK(pi(g, Y) == PY);
    }
  }

  TEST_CASE("preimage enumeration equals a scan over all small subsets") {
    Torus t(make_torus(3, 2, 2));
    Blocks g(t);
    const long n = g.grid(0).count;
    const int cutoff = 3;
    std::map<std::vector<long>, std::set<std::vector<long>>> by_image;
    for (long a = 0; a < n; ++a)
      for (long b = a; b < n; ++b)
        for (long c = b; c < n; ++c) {
          std::set<long> s{a, b, c};
          Polymer X = g.from_blocks(0, std::vector<long>(s.begin(), s.end()));
          by_image[pi(g, X).blocks()].insert(X.blocks());
        }
    long total = 0;
    for (const auto& [img, members] : by_image) {
      Polymer U = g.from_blocks(1, img);
      auto got = enumerate_preimage(g, U, cutoff, 1L << 24);
      std::set<std::vector<long>> gs;
      for (const auto& X : got) gs.insert(X.blocks());
      CHECK(gs.size() == got.size());
      CHECK(gs == members);
      total += static_cast<long>(members.size());
    }
    PreimageTable table(g, 0, cutoff, 1L << 24);
    CHECK(table.total() == total);
    CHECK(static_cast<std::size_t>(table.images().size()) == by_image.size());
  }

  TEST_CASE("budget overrun is an error") {
    Torus t(make_torus(3, 2, 2));
    Blocks g(t);
    CHECK_THROWS_AS(enumerate_preimage(g, g.single(1, 0), 6, 10), Error);
  }
}
