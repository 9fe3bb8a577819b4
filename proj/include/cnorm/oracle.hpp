#pragma once

#include <algorithm>
#include <boost/random/binomial_distribution.hpp>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "distribution.hpp"
#include "rng.hpp"
#include "tally.hpp"

namespace cnorm {

struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised by a conditional sample source whose rejection budget ran out.
struct RejectionCrash : std::runtime_error {
  RejectionCrash() : std::runtime_error("rejection sampler crashed") {}
};

// Nonzero (label, count) pairs.
using Histogram = std::vector<std::pair<Label, std::uint64_t>>;

// Above this many draws the 128-bit collision totals could overflow.
inline constexpr std::uint64_t kHardDrawLimit = std::uint64_t(1) << 42;

class SampleOracle {
 public:
  virtual ~SampleOracle() = default;

  Label draw() {
    if (allowance() == 0) throw_budget();
    Label l = do_draw();
    ++drawn_;
    return l;
  }

  // m samples as a multiset. Requests that do not fit the cap fail before drawing.
  Histogram draw_counts(std::uint64_t m) {
    if (m > allowance()) throw_budget();
    Histogram h = do_draw_counts(m);
    drawn_ += m;
    return h;
  }

  // Feed samples into `tally` one at a time until tally.s2() >= k. Samples that
  // were never fed are never counted.
  void extend_until_pairs(CollisionTally& tally, Count128 k) {
    if (tally.s2() >= k) return;
    const std::uint64_t allow = allowance();
    const std::uint64_t used = do_extend_until_pairs(tally, k, allow);
    drawn_ += used;
    if (tally.s2() < k) throw_budget();
  }

  std::uint64_t drawn() const { return drawn_; }
  std::optional<std::uint64_t> cap() const { return cap_; }
  void set_cap(std::optional<std::uint64_t> cap) { cap_ = cap; }

  std::uint64_t allowance() const {
    const std::uint64_t limit = std::min(cap_.value_or(kHardDrawLimit), kHardDrawLimit);
    return drawn_ >= limit ? 0 : limit - drawn_;
  }

 protected:
  virtual Label do_draw() = 0;

  virtual Histogram do_draw_counts(std::uint64_t m) {
    std::unordered_map<Label, std::uint64_t> agg;
    for (std::uint64_t i = 0; i < m; ++i) ++agg[do_draw()];
    Histogram h(agg.begin(), agg.end());
    std::sort(h.begin(), h.end());
    return h;
  }

  // Returns the number of samples fed; must not exceed `allow`.
  virtual std::uint64_t do_extend_until_pairs(CollisionTally& tally, Count128 k, std::uint64_t allow) {
    std::uint64_t used = 0;
    while (tally.s2() < k && used < allow) {
      tally.ingest(do_draw());
      ++used;
    }
    return used;
  }

  void add_drawn(std::uint64_t n) { drawn_ += n; }

 private:
  [[noreturn]] void throw_budget() const {
    throw BudgetExceeded("sample budget of " + std::to_string(std::min(cap_.value_or(kHardDrawLimit), kHardDrawLimit)) +
                         " draws exceeded");
  }

  std::uint64_t drawn_ = 0;
  std::optional<std::uint64_t> cap_;
};

// Temporarily tightens an oracle's cap to `extra` more draws.
class ScopedCap {
 public:
  ScopedCap(SampleOracle& o, std::uint64_t extra) : o_(o), saved_(o.cap()) {
    const std::uint64_t want = o.drawn() + std::min(extra, kHardDrawLimit);
    limit_ = saved_ ? std::min(*saved_, want) : want;
    o.set_cap(limit_);
  }
  ~ScopedCap() { o_.set_cap(saved_); }
  ScopedCap(const ScopedCap&) = delete;
  ScopedCap& operator=(const ScopedCap&) = delete;

  // True when the scoped limit, rather than the caller's own cap, was hit.
  bool hit_scoped_limit() const { return o_.drawn() >= limit_ && (!saved_ || limit_ < *saved_); }

 private:
  SampleOracle& o_;
  std::optional<std::uint64_t> saved_;
  std::uint64_t limit_;
};

// Alias table plus the data needed for exact batch (multinomial) draws.
class SamplingTable {
 public:
  explicit SamplingTable(const ExplicitDistribution& d) {
    for (const auto& e : d.entries())
      if (e.mass > 0.0) {
        labels_.push_back(e.label);
        masses_.push_back(e.mass);
      }
    const std::size_t n = labels_.size();
    if (n == 0) throw InvalidDistribution("no positive mass");
    for (std::size_t i = 0; i < n; ++i) index_.emplace(labels_[i], i);
    build_alias();

    order_.resize(n);
    for (std::size_t i = 0; i < n; ++i) order_[i] = i;
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return masses_[a] > masses_[b]; });
    cond_.resize(n);
    CompensatedSum suffix;
    for (std::size_t r = n; r-- > 0;) {
      suffix.add(masses_[order_[r]]);
      cond_[r] = std::min(1.0, masses_[order_[r]] / suffix.value());
    }
    cond_[n - 1] = 1.0;
  }

  std::size_t support() const { return labels_.size(); }
  Label label(std::size_t i) const { return labels_[i]; }

  std::size_t index_of(Label l) const {
    auto it = index_.find(l);
    if (it == index_.end()) throw std::out_of_range("label " + std::to_string(l) + " has no mass");
    return it->second;
  }
  double mass(std::size_t i) const { return masses_[i]; }

  std::size_t sample_index(Philox& rng) const {
    // One word picks both the column (high half of r n) and the coin (low half,
    // uniform over the column up to a granularity of n / 2^64).
    const Count128 x = Count128(rng()) * labels_.size();
    const std::size_t i = std::size_t(x >> 64);
    return std::uint64_t(x) < keep_[i] ? i : alias_[i];
  }

  // Exact multinomial(m) over the support by sequential conditional binomials.
  template <class F>
  void multinomial(Philox& rng, std::uint64_t m, F&& emit) const {
    std::uint64_t left = m;
    for (std::size_t r = 0; r < order_.size() && left > 0; ++r) {
      std::uint64_t x;
      if (cond_[r] >= 1.0)
        x = left;
      else
        x = std::uint64_t(boost::random::binomial_distribution<std::int64_t, double>(std::int64_t(left), cond_[r])(rng));
      if (x > 0) emit(order_[r], x);
      left -= x;
    }
  }

 private:
  void build_alias() {
    const std::size_t n = labels_.size();
    prob_.assign(n, 0.0);
    alias_.assign(n, 0);
    CompensatedSum total;
    for (double m : masses_) total.add(m);
    std::vector<double> scaled(n);
    std::vector<std::size_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = masses_[i] * double(n) / total.value();
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      const std::size_t s = small.back(), l = large.back();
      small.pop_back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (std::size_t i : large) prob_[i] = 1.0;
    for (std::size_t i : small) prob_[i] = 1.0;
    keep_.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      keep_[i] = prob_[i] >= 1.0 ? std::numeric_limits<std::uint64_t>::max() : std::uint64_t(std::ldexp(prob_[i], 64));
  }

  std::vector<Label> labels_;
  std::vector<double> masses_;
  std::vector<double> prob_;
  std::vector<std::uint64_t> keep_;
  std::vector<std::size_t> alias_;
  std::vector<std::size_t> order_;
  std::vector<double> cond_;
  std::unordered_map<Label, std::size_t> index_;
};

class ConditionalOracle;

// Sampling oracle over an explicit distribution. Batch requests are served by
// exact multinomial draws, which matches the per-sample process in distribution.
class ExplicitOracle : public SampleOracle {
 public:
  ExplicitOracle(std::shared_ptr<const SamplingTable> table, std::uint64_t seed)
      : table_(std::move(table)), rng_(seed), scratch_(table_->support(), 0), dense_(table_->support()) {}

  ExplicitOracle(const ExplicitDistribution& d, std::uint64_t seed)
      : ExplicitOracle(std::make_shared<const SamplingTable>(d), seed) {}

  const SamplingTable& table() const { return *table_; }

 protected:
  Label do_draw() override { return table_->label(table_->sample_index(rng_)); }

  Histogram do_draw_counts(std::uint64_t m) override {
    Histogram h;
    fill_counts(m, [&](std::size_t i, std::uint64_t x) { h.emplace_back(table_->label(i), x); });
    return h;
  }

  std::uint64_t do_extend_until_pairs(CollisionTally& tally, Count128 k, std::uint64_t allow) override;

 private:
  friend class ConditionalOracle;

  // Below this batch size, draw sample by sample.
  static constexpr std::uint64_t kSmallBatch = 64;

  template <class F>
  void fill_counts(std::uint64_t m, F&& emit) {
    if (m < 4 * table_->support()) {
      touched_.clear();
      for (std::uint64_t j = 0; j < m; ++j) {
        const std::size_t i = table_->sample_index(rng_);
        if (scratch_[i]++ == 0) touched_.push_back(i);
      }
      for (std::size_t i : touched_) {
        emit(i, scratch_[i]);
        scratch_[i] = 0;
      }
    } else {
      table_->multinomial(rng_, m, emit);
    }
  }

  std::shared_ptr<const SamplingTable> table_;
  Philox rng_;
  std::vector<std::uint64_t> scratch_;
  std::vector<std::size_t> touched_;
  IndexTally dense_;
  std::vector<std::pair<std::size_t, std::uint64_t>> batch_;
};

namespace detail {

// Multiset that hands out its elements in uniformly random order.
class Urn {
 public:
  explicit Urn(const std::vector<std::uint64_t>& counts) : n_(counts.size()), tree_(counts.size() + 1, 0) {
    for (std::size_t i = 0; i < n_; ++i) {
      total_ += counts[i];
      for (std::size_t j = i + 1; j <= n_; j += j & (~j + 1)) tree_[j] += counts[i];
    }
  }

  std::uint64_t size() const { return total_; }

  std::size_t take(Philox& rng) {
    std::uint64_t target = rng.below(total_);
    std::size_t pos = 0;
    std::size_t step = 1;
    while (step * 2 <= n_) step *= 2;
    for (; step > 0; step /= 2)
      if (pos + step <= n_ && tree_[pos + step] <= target) {
        pos += step;
        target -= tree_[pos];
      }
    for (std::size_t j = pos + 1; j <= n_; j += j & (~j + 1)) --tree_[j];
    --total_;
    return pos;
  }

 private:
  std::size_t n_;
  std::vector<std::uint64_t> tree_;
  std::uint64_t total_ = 0;
};

}  // namespace detail

// Batched stop-at-k-pairs. Batch sizes are chosen so a batch almost never carries
// the count past k; when one does, its samples are fed one at a time in random
// order until the threshold is met and the rest are discarded unseen. The work
// happens on per-index counts and the tally is brought up to date at the end.
inline std::uint64_t ExplicitOracle::do_extend_until_pairs(CollisionTally& tally, Count128 k, std::uint64_t allow) {
  IndexTally& d = dense_;
  d.clear();
  if (tally.m() > 0) tally.counts().for_each([&](Label l, std::uint64_t c) { d.add(table_->index_of(l), c); });
  std::uint64_t used = 0;
  auto one = [&] {
    d.add_one(table_->sample_index(rng_));
    ++used;
  };
  std::vector<std::pair<std::size_t, std::uint64_t>>& batch = batch_;
  while (d.s2 < k && used < allow) {
    const std::uint64_t m = d.m;
    const double s = to_double(d.s2);
    const double rem = to_double(k - d.s2);
    std::uint64_t b;
    if (m < kSmallBatch || rem < 32.0) {
      b = 1;
    } else if (s == 0.0) {
      b = m;
    } else {
      // Aim below the target by six standard deviations of the pairs a batch
      // adds: pairs with labels already seen (spread) and pairs inside the batch
      // (excess = sum p^3 - (sum p^2)^2, large when a few labels are heavy).
      const double md = double(m);
      // Sum of cubed counts, since c^3 = 6 C(c,3) + 6 C(c,2) + c.
      const double cube = 6.0 * to_double(d.s3) + 6.0 * s + md;
      const double spread = cube / md;
      const double q2 = 2.0 * s / (md * md);
      const double excess = std::max(0.0, cube / (md * md * md) - q2 * q2);
      // Upper estimate of the collision probability.
      const double p_hi = (s + 4.0 * std::sqrt(md * md * md * excess + s) + 8.0) / binom2(m);
      auto mean_of = [&](double x) { return p_hi * (md * x + x * x / 2.0); };
      auto sd_of = [&](double x) { return std::sqrt(2.0 * (x * spread + x * x * x * excess) + mean_of(x)); };
      double target = rem;
      double bd = 0.0;
      for (int pass = 0; pass < 6 && target > 0.0; ++pass) {
        bd = -md + std::sqrt(md * md + 2.0 * target / p_hi);
        target = rem - 6.0 * sd_of(bd);
      }
      for (int halvings = 0; halvings < 80 && bd >= 1.0; ++halvings) {
        if (mean_of(bd) + 6.0 * sd_of(bd) <= rem) break;
        bd /= 2.0;
      }
      // The spread estimate comes from the tally so far; growing the sample by
      // a large factor is only safe once it rests on many collisions.
      bd = std::min(bd, md * std::max(3.0, std::sqrt(s) / 4.0));
      b = bd < 1.0 ? 1 : bd > 4e18 ? std::uint64_t(4e18) : std::uint64_t(bd);
    }
    b = std::min(b, allow - used);
    if (b < kSmallBatch) {
      for (std::uint64_t j = 0; j < b && d.s2 < k; ++j) one();
      continue;
    }
    batch.clear();
    fill_counts(b, [&](std::size_t i, std::uint64_t x) { batch.emplace_back(i, x); });
    Count128 added = 0;
    for (const auto& [i, x] : batch) added += CollisionTally::pairs_added(d.counts[i], x);
    if (d.s2 + added < k) {
      for (const auto& [i, x] : batch) d.add(i, x);
      used += b;
      continue;
    }
    std::vector<std::uint64_t> counts;
    counts.reserve(batch.size());
    for (const auto& [i, x] : batch) counts.push_back(x);
    detail::Urn urn(counts);
    while (d.s2 < k) {
      d.add_one(batch[urn.take(rng_)].first);
      ++used;
    }
  }
  for (std::size_t i : d.touched) {
    const Label l = table_->label(i);
    tally.ingest(l, d.counts[i] - tally.count(l));
  }
  return used;
}

// Oracle for the indicator of a predicate on samples; one call, one sample.
class IndicatorOracle {
 public:
  IndicatorOracle(SampleOracle& base, std::function<bool(Label)> pred) : base_(base), pred_(std::move(pred)) {}

  bool call() { return pred_(base_.draw()); }

  std::uint64_t successes(std::uint64_t calls) {
    std::uint64_t s = 0;
    for (const auto& [l, x] : base_.draw_counts(calls))
      if (pred_(l)) s += x;
    return s;
  }

  SampleOracle& base() { return base_; }

 private:
  SampleOracle& base_;
  std::function<bool(Label)> pred_;
};

// Samples of mu conditioned on a set A by rejection. The i-th request (1-based)
// crashes once the total number of base draws reaches 4(i + ceil(12 ln(1/eta))).
class ConditionalOracle {
 public:
  ConditionalOracle(SampleOracle& base, std::function<bool(Label)> in_a, double eta)
      : base_(base), in_a_(std::move(in_a)), slack_(std::uint64_t(std::ceil(12.0 * std::log(1.0 / eta)))) {
    if (!(eta > 0.0 && eta <= 1.0 / 3.0)) throw std::invalid_argument("conditional oracle needs eta in (0,1/3]");
    if (auto* ex = dynamic_cast<ExplicitOracle*>(&base)) {
      explicit_ = ex;
      const SamplingTable& t = ex->table();
      std::vector<Entry> kept;
      CompensatedSum pa;
      for (std::size_t i = 0; i < t.support(); ++i)
        if (in_a_(t.label(i))) {
          kept.push_back({t.label(i), t.mass(i)});
          pa.add(t.mass(i));
        }
      mass_a_ = pa.value();
      if (!kept.empty()) {
        for (auto& e : kept) e.mass /= mass_a_;
        restricted_ = std::make_unique<SamplingTable>(relabel(kept));
      }
    }
  }

  std::uint64_t budget_for(std::uint64_t i) const { return 4 * (i + slack_); }
  std::uint64_t slack() const { return slack_; }
  std::uint64_t served() const { return served_; }
  std::uint64_t base_draws() const { return base_draws_; }
  bool crashed() const { return crashed_; }

  std::optional<Label> request() {
    if (crashed_) return std::nullopt;
    const std::uint64_t bound = budget_for(served_ + 1);
    while (base_draws_ < bound) {
      const Label l = base_.draw();
      ++base_draws_;
      if (in_a_(l)) {
        ++served_;
        return l;
      }
    }
    crashed_ = true;
    return std::nullopt;
  }

  // m requests at once; nullopt if any of them crashes.
  std::optional<Histogram> request_batch(std::uint64_t m) {
    if (crashed_) return std::nullopt;
    if (!explicit_) {
      std::unordered_map<Label, std::uint64_t> agg;
      for (std::uint64_t j = 0; j < m; ++j) {
        auto l = request();
        if (!l) return std::nullopt;
        ++agg[*l];
      }
      Histogram h(agg.begin(), agg.end());
      std::sort(h.begin(), h.end());
      return h;
    }
    if (!advance_path(m)) return std::nullopt;
    Histogram h;
    if (m > 0) restricted_->multinomial(explicit_->rng_, m, [&](std::size_t i, std::uint64_t x) {
      h.emplace_back(restricted_->label(i), x);
    });
    return h;
  }

 private:
  static SamplingTable relabel(const std::vector<Entry>& kept) {
    std::vector<Entry> e = kept;
    CompensatedSum s;
    for (const auto& x : e) s.add(x.mass);
    auto big = std::max_element(e.begin(), e.end(), [](const Entry& a, const Entry& b) { return a.mass < b.mass; });
    big->mass += 1.0 - s.value();
    return SamplingTable(ExplicitDistribution(std::move(e)));
  }

  void charge(std::uint64_t n) {
    if (n > explicit_->allowance()) {
      explicit_->add_drawn(explicit_->allowance());
      throw BudgetExceeded("sample budget exceeded inside rejection sampler");
    }
    explicit_->add_drawn(n);
    base_draws_ += n;
  }

  // Simulates the rejection path of m more requests: the number of base draws
  // for a run of successes is negative binomial; a run is accepted whole when
  // even its last position fits the first request's budget, otherwise the
  // success positions are placed exactly and checked one by one.
  bool advance_path(std::uint64_t m) {
    Philox& rng = explicit_->rng_;
    const double p = mass_a_;
    std::uint64_t done = 0;
    while (done < m) {
      if (p <= 0.0) {
        charge(budget_for(served_ + 1) - base_draws_);
        crashed_ = true;
        return false;
      }
      const std::uint64_t len = std::min<std::uint64_t>(m - done, std::max<std::uint64_t>(1, served_ / 2));
      std::uint64_t fails = 0;
      if (p < 1.0) fails = std::negative_binomial_distribution<std::uint64_t>(len, p)(rng);
      const std::uint64_t total = len + fails;
      if (base_draws_ + total <= budget_for(served_ + 1)) {
        charge(total);
        served_ += len;
        done += len;
        continue;
      }
      // Success positions: the last draw, plus a uniform (len-1)-subset of the
      // first total-1 draws, visited in increasing order.
      std::uint64_t need = len - 1, pool = total - 1, pos = 0, start = base_draws_;
      for (std::uint64_t j = 1; j <= len; ++j) {
        if (j < len) {
          while (true) {
            ++pos;
            const bool pick = rng.below(pool) < need;
            --pool;
            if (pick) break;
          }
          --need;
        } else {
          pos = total;
        }
        const std::uint64_t bound = budget_for(served_ + 1);
        if (start + pos > bound) {
          charge(bound - base_draws_);
          crashed_ = true;
          return false;
        }
        charge(start + pos - base_draws_);
        ++served_;
        ++done;
      }
    }
    return true;
  }

  SampleOracle& base_;
  std::function<bool(Label)> in_a_;
  std::uint64_t slack_;
  std::uint64_t served_ = 0;
  std::uint64_t base_draws_ = 0;
  bool crashed_ = false;
  ExplicitOracle* explicit_ = nullptr;
  double mass_a_ = 0.0;
  std::unique_ptr<SamplingTable> restricted_;
};

// Presents a conditional oracle as a sample oracle over mu_A; a crash surfaces as
// RejectionCrash.
class ConditionalSource : public SampleOracle {
 public:
  explicit ConditionalSource(ConditionalOracle& c) : c_(c) {}

 protected:
  Label do_draw() override {
    auto l = c_.request();
    if (!l) throw RejectionCrash();
    return *l;
  }

  Histogram do_draw_counts(std::uint64_t m) override {
    auto h = c_.request_batch(m);
    if (!h) throw RejectionCrash();
    return std::move(*h);
  }

 private:
  ConditionalOracle& c_;
};

}  // namespace cnorm
