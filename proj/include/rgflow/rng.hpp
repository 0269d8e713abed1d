#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace rg {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Order-sensitive hash of a tuple of integers.
inline uint64_t hash_words(std::initializer_list<uint64_t> ws) {
  uint64_t h = 0x243f6a8885a308d3ull;
  for (auto w : ws) h = splitmix64(h ^ splitmix64(w));
  return h;
}

// Philox4x32-10 (Salmon et al.); counter-based, so any (key, counter) is reachable directly.
class Philox4x32 {
 public:
  using Block = std::array<uint32_t, 4>;
  explicit Philox4x32(uint64_t key) : k0_(static_cast<uint32_t>(key)), k1_(static_cast<uint32_t>(key >> 32)) {}

  Block operator()(Block ctr) const {
    uint32_t k0 = k0_, k1 = k1_;
    for (int r = 0; r < 10; ++r) {
      uint64_t p0 = uint64_t{0xD2511F53u} * ctr[0];
      uint64_t p1 = uint64_t{0xCD9E8D57u} * ctr[2];
      uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
      uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    return ctr;
  }

 private:
  uint32_t k0_, k1_;
};

// Standard normals for one (key, sample) pair; draw index is the remaining counter.
class NormalStream {
 public:
  NormalStream(uint64_t key, uint64_t sample) : gen_(key), sample_(sample) {}

  double next() {
    if (have_) {
      have_ = false;
      return spare_;
    }
    auto b = gen_({static_cast<uint32_t>(sample_), static_cast<uint32_t>(sample_ >> 32),
                   static_cast<uint32_t>(draw_), static_cast<uint32_t>(draw_ >> 32)});
    ++draw_;
    double u1 = to_unit(b[0], b[1]), u2 = to_unit(b[2], b[3]);
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = 6.283185307179586476925 * u2;
    spare_ = r * std::sin(th);
    have_ = true;
    return r * std::cos(th);
  }

  double uniform() {
    auto b = gen_({static_cast<uint32_t>(sample_), static_cast<uint32_t>(sample_ >> 32),
                   static_cast<uint32_t>(draw_), static_cast<uint32_t>(draw_ >> 32) | 0x80000000u});
    ++draw_;
    return to_unit(b[0], b[1]);
  }

 private:
  // 53-bit uniform in (0,1)
  static double to_unit(uint32_t a, uint32_t b) {
    uint64_t v = ((uint64_t{a} << 21) ^ (uint64_t{b} >> 11)) & ((uint64_t{1} << 53) - 1);
    return (static_cast<double>(v) + 0.5) * 0x1.0p-53;
  }

  Philox4x32 gen_;
  uint64_t sample_;
  uint64_t draw_ = 0;
  double spare_ = 0.0;
  bool have_ = false;
};

}  // namespace rg
