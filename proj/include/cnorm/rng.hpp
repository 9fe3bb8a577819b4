#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace cnorm {

// Counter-based Philox4x32-10. Each 128-bit block yields two 64-bit outputs.
class Philox {
 public:
  using result_type = std::uint64_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    key_ = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    counter_ = 0;
    have_ = 0;
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (have_ == 0) {
      Block ctr = {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32), 0, 0};
      ++counter_;
      Block out = generate(ctr, key_);
      buf_[0] = (std::uint64_t(out[1]) << 32) | out[0];
      buf_[1] = (std::uint64_t(out[3]) << 32) | out[2];
      have_ = 2;
    }
    return buf_[2 - have_--];
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return double((*this)() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), n > 0, by rejection (no modulo bias).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x;
    do {
      x = (*this)();
    } while (x >= limit);
    return x % n;
  }

  static Block generate(Block ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      const std::uint64_t p0 = std::uint64_t(0xD2511F53u) * ctr[0];
      const std::uint64_t p1 = std::uint64_t(0xCD9E8D57u) * ctr[2];
      const std::uint32_t hi0 = p0 >> 32, lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = p1 >> 32, lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  Key key_{};
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> buf_{};
  int have_ = 0;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Seed of the index-th trial under a master seed. Stable across platforms.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 1));
}

}  // namespace cnorm
