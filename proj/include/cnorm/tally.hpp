#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "distribution.hpp"

namespace cnorm {

using Count128 = unsigned __int128;

inline double to_double(Count128 x) { return static_cast<double>(x); }

inline Count128 choose2(std::uint64_t c) { return Count128(c) * (c - (c > 0)) / 2; }

inline Count128 choose3(std::uint64_t c) {
  if (c < 3) return 0;
  return Count128(c) * (c - 1) / 2 * (c - 2) / 3;
}

// Open-addressing map from label to count; counts never go back to zero, so
// there is no erase.
class LabelCounts {
 public:
  using value_type = std::pair<Label, std::uint64_t>;

  std::uint64_t& operator[](Label l) {
    if ((size_ + 1) * 4 > slots_.size() * 3) grow();
    std::size_t i = probe(l);
    if (!used_[i]) {
      used_[i] = 1;
      slots_[i] = {l, 0};
      ++size_;
    }
    return slots_[i].second;
  }

  std::uint64_t get(Label l) const {
    if (slots_.empty()) return 0;
    const std::size_t i = probe(l);
    return used_[i] ? slots_[i].second : 0;
  }

  std::size_t size() const { return size_; }

  // Room for n labels without rehashing.
  void reserve(std::size_t n) {
    while (slots_.size() * 3 < n * 4 || slots_.empty()) grow();
  }

  template <class F>
  void for_each(F&& f) const {
    for (std::size_t i = 0; i < slots_.size(); ++i)
      if (used_[i]) f(slots_[i].first, slots_[i].second);
  }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdull;
    x ^= x >> 33;
    return x;
  }

  std::size_t probe(Label l) const {
    const std::size_t mask = slots_.size() - 1;
    std::size_t i = mix(l) & mask;
    while (used_[i] && slots_[i].first != l) i = (i + 1) & mask;
    return i;
  }

  void grow() {
    std::vector<value_type> old = std::move(slots_);
    std::vector<unsigned char> old_used = std::move(used_);
    slots_.assign(old.empty() ? 16 : old.size() * 2, {0, 0});
    used_.assign(slots_.size(), 0);
    for (std::size_t i = 0; i < old.size(); ++i)
      if (old_used[i]) {
        const std::size_t j = probe(old[i].first);
        used_[j] = 1;
        slots_[j] = old[i];
      }
  }

  std::vector<value_type> slots_;
  std::vector<unsigned char> used_;
  std::size_t size_ = 0;
};

// Incremental pair and triple collision totals over a label stream.
class CollisionTally {
 public:
  void ingest(Label l) {
    auto& c = counts_[l];
    s3_ += choose2(c);
    s2_ += c;
    ++c;
    ++m_;
  }

  // Same as calling ingest(l) x times.
  void ingest(Label l, std::uint64_t x) {
    if (x == 0) return;
    auto& c = counts_[l];
    s2_ += pairs_added(c, x);
    s3_ += Count128(choose2(c)) * x + Count128(c) * choose2(x) + choose3(x);
    c += x;
    m_ += x;
  }

  // New pairs created by x more copies of a label already seen c times.
  static Count128 pairs_added(std::uint64_t c, std::uint64_t x) { return Count128(c) * x + choose2(x); }

  std::uint64_t count(Label l) const { return counts_.get(l); }
  void reserve(std::size_t labels) { counts_.reserve(labels); }

  std::uint64_t m() const { return m_; }
  Count128 s2() const { return s2_; }
  Count128 s3() const { return s3_; }
  const LabelCounts& counts() const { return counts_; }

 private:
  LabelCounts counts_;
  std::uint64_t m_ = 0;
  Count128 s2_ = 0;
  Count128 s3_ = 0;
};

// Pair and triple totals over counts indexed 0..n-1.
struct IndexTally {
  std::vector<std::uint64_t> counts;
  std::vector<std::size_t> touched;
  std::uint64_t m = 0;
  Count128 s2 = 0;
  Count128 s3 = 0;

  explicit IndexTally(std::size_t n) : counts(n, 0) {}

  void clear() {
    for (std::size_t i : touched) counts[i] = 0;
    touched.clear();
    m = 0;
    s2 = s3 = 0;
  }

  void add_one(std::size_t i) {
    std::uint64_t& c = counts[i];
    if (c == 0) touched.push_back(i);
    s3 += choose2(c);
    s2 += c;
    ++c;
    ++m;
  }

  void add(std::size_t i, std::uint64_t x) {
    std::uint64_t& c = counts[i];
    if (c == 0) touched.push_back(i);
    s2 += CollisionTally::pairs_added(c, x);
    s3 += Count128(choose2(c)) * x + Count128(c) * choose2(x) + choose3(x);
    c += x;
    m += x;
  }
};

inline double binom2(std::uint64_t m) { return double(m) * double(m - 1) / 2.0; }
inline double binom3(std::uint64_t m) { return double(m) * double(m - 1) * double(m - 2) / 6.0; }

}  // namespace cnorm
