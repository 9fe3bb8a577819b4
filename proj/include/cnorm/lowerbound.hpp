#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "distribution.hpp"
#include "oracle.hpp"
#include "params.hpp"
#include "rng.hpp"
#include "tally.hpp"

namespace cnorm {

// K_lambda = {x : |lambda x + lambda^2| <= 5}, for the four lambdas the ensemble
// may use. The intervals are pairwise disjoint.
struct LambdaInterval {
  double lambda;
  double lo;
  double hi;
};

inline constexpr std::array<LambdaInterval, 4> kLambdaIntervals = {{
    {2.0, -9.0 / 2.0, 1.0 / 2.0},
    {6.0, -41.0 / 6.0, -31.0 / 6.0},
    {8.0, -69.0 / 8.0, -59.0 / 8.0},
    {10.0, -21.0 / 2.0, -19.0 / 2.0},
}};

// Entries taken in order as pairs (1,2), (3,4), ...; each pair must satisfy
// mu(2j) <= mu(2j-1) <= sqrt 2 mu(2j).
inline bool is_pairing_compatible(const ExplicitDistribution& d, double tol = 1e-12) {
  const auto& e = d.entries();
  if (e.size() % 2 != 0) return false;
  for (std::size_t i = 0; i < e.size(); i += 2) {
    const double first = e[i].mass, second = e[i + 1].mass;
    if (second > first * (1.0 + tol)) return false;
    if (first > std::sqrt(2.0) * second * (1.0 + tol)) return false;
  }
  return true;
}

// Moves 10 eps |mu|_2 of mass from the heaviest element onto a new label.
inline ExplicitDistribution build_skewed_perturbation(const ExplicitDistribution& d, double eps) {
  require(eps > 0.0 && eps <= 1.0 / 500.0, "build_skewed_perturbation needs eps in (0, 1/500]");
  const double norm = std::sqrt(exact_l2_sq(d));
  const auto& e = d.entries();
  const auto heavy = std::max_element(e.begin(), e.end(), [](const Entry& a, const Entry& b) { return a.mass < b.mass; });
  require(heavy->mass >= norm / 8.0, "build_skewed_perturbation needs an element of mass at least |mu|_2 / 8");
  const double moved = 10.0 * eps * norm;
  require(moved <= heavy->mass, "build_skewed_perturbation: 10 eps |mu|_2 exceeds the heaviest mass");
  std::vector<Entry> out = e;
  out[std::size_t(heavy - e.begin())].mass -= moved;
  out.push_back({d.max_label() + 1, moved});
  return ExplicitDistribution(std::move(out));
}

namespace detail {

inline std::vector<double> pair_gaps(const ExplicitDistribution& base) {
  const auto& e = base.entries();
  std::vector<double> g;
  for (std::size_t i = 0; i < e.size(); i += 2) g.push_back(e[i + 1].mass * (e[i + 1].mass - e[i].mass));
  return g;
}

inline double second_of_pair_squares(const ExplicitDistribution& base) {
  CompensatedSum s;
  const auto& e = base.entries();
  for (std::size_t i = 1; i < e.size(); i += 2) s.add(e[i].mass * e[i].mass);
  return s.value();
}

inline bool sign_of(std::uint64_t bits, std::size_t j) { return (bits >> j) & 1u; }

}  // namespace detail

enum class LambdaMode { exact, monte_carlo };

inline constexpr std::size_t kMaxExactPairs = 20;

// Pr over uniform signs that |lambda X + lambda^2| >= 5, where
// X = (1/(sqrt(eps) |mu|^2)) sum_j s_j mu(2j) (mu(2j) - mu(2j-1)).
inline std::array<double, 4> lambda_probabilities(const ExplicitDistribution& base, double eps, LambdaMode mode,
                                                  std::uint64_t draws = 100000, std::uint64_t seed = 0) {
  require(is_pairing_compatible(base), "ensemble base must be pairing-compatible");
  const std::vector<double> gaps = detail::pair_gaps(base);
  const std::size_t pairs = gaps.size();
  const double scale = 1.0 / (std::sqrt(eps) * exact_l2_sq(base));
  std::array<std::uint64_t, 4> hits{};
  auto count = [&](double x) {
    for (std::size_t i = 0; i < 4; ++i) {
      const double lam = kLambdaIntervals[i].lambda;
      if (std::abs(lam * x + lam * lam) >= 5.0) ++hits[i];
    }
  };
  std::uint64_t total = 0;
  if (mode == LambdaMode::exact) {
    require(pairs <= kMaxExactPairs, "exact lambda selection needs at most 20 pairs");
    total = std::uint64_t(1) << pairs;
    for (std::uint64_t bits = 0; bits < total; ++bits) {
      double x = 0.0;
      for (std::size_t j = 0; j < pairs; ++j) x += detail::sign_of(bits, j) ? gaps[j] : -gaps[j];
      count(x * scale);
    }
  } else {
    require(draws >= 1, "monte-carlo lambda selection needs draws >= 1");
    Philox rng(seed);
    total = draws;
    for (std::uint64_t t = 0; t < draws; ++t) {
      double x = 0.0;
      for (std::size_t j = 0; j < pairs; ++j) x += (rng() >> 63) ? gaps[j] : -gaps[j];
      count(x * scale);
    }
  }
  std::array<double, 4> p{};
  for (std::size_t i = 0; i < 4; ++i) p[i] = double(hits[i]) / double(total);
  return p;
}

// The first lambda in {2,6,8,10} with the largest probability.
inline double ensemble_select_lambda(const ExplicitDistribution& base, double eps, LambdaMode mode,
                                     std::uint64_t draws = 100000, std::uint64_t seed = 0) {
  const auto p = lambda_probabilities(base, eps, mode, draws, seed);
  std::size_t best = 0;
  for (std::size_t i = 1; i < 4; ++i)
    if (p[i] > p[best]) best = i;
  return kLambdaIntervals[best].lambda;
}

struct Perturbation {
  std::vector<int> signs;
  ExplicitDistribution nu;
};

// nu(i) = mu(i) + (-1)^i s_j eps_hat mu(2j) for uniform independent signs s_j,
// with eps_hat = lambda sqrt(eps).
class PerturbationEnsemble {
 public:
  PerturbationEnsemble(ExplicitDistribution base, double eps, double lambda)
      : base_(std::move(base)), eps_(eps), lambda_(lambda) {
    require(is_pairing_compatible(base_), "ensemble base must be pairing-compatible");
    require(eps > 0.0 && eps <= 1.0 / 8000.0, "ensemble needs eps in (0, 1/8000]");
    require(lambda > 0.0 && lambda * std::sqrt(eps) <= 1.0, "ensemble needs lambda sqrt(eps) <= 1");
  }

  // Picks lambda by the selection rule.
  static PerturbationEnsemble select(ExplicitDistribution base, double eps, LambdaMode mode = LambdaMode::exact,
                                     std::uint64_t draws = 100000, std::uint64_t seed = 0) {
    const double lambda = ensemble_select_lambda(base, eps, mode, draws, seed);
    return PerturbationEnsemble(std::move(base), eps, lambda);
  }

  const ExplicitDistribution& base() const { return base_; }
  double eps() const { return eps_; }
  double lambda() const { return lambda_; }
  double eps_hat() const { return lambda_ * std::sqrt(eps_); }
  std::size_t pairs() const { return base_.size() / 2; }

  ExplicitDistribution with_signs(const std::vector<int>& signs) const {
    require(signs.size() == pairs(), "one sign per pair");
    std::vector<Entry> e = base_.entries();
    for (std::size_t j = 0; j < pairs(); ++j) {
      const double shift = signs[j] * eps_hat() * e[2 * j + 1].mass;
      e[2 * j].mass -= shift;
      e[2 * j + 1].mass += shift;
      if (e[2 * j].mass < 0.0 || e[2 * j + 1].mass < 0.0) throw std::logic_error("perturbation produced a negative mass");
    }
    return ExplicitDistribution(std::move(e));
  }

  Perturbation draw(std::uint64_t seed) const {
    Philox rng(seed);
    std::vector<int> signs(pairs());
    for (auto& s : signs) s = (rng() >> 63) ? 1 : -1;
    ExplicitDistribution nu = with_signs(signs);
    return {std::move(signs), std::move(nu)};
  }

  // |nu|^2 - |mu|^2 = 2 eps_hat sum s_j mu(2j)(mu(2j) - mu(2j-1)) + 2 eps_hat^2 sum mu(2j)^2.
  double predicted_shift(const std::vector<int>& signs) const {
    const std::vector<double> gaps = detail::pair_gaps(base_);
    CompensatedSum lin;
    for (std::size_t j = 0; j < gaps.size(); ++j) lin.add(signs[j] * gaps[j]);
    const double h = eps_hat();
    return 2.0 * h * lin.value() + 2.0 * h * h * detail::second_of_pair_squares(base_);
  }

  bool deviates(double l2_nu) const {
    const double l2 = exact_l2_sq(base_);
    return !(l2_nu > (1.0 - 2.5 * eps_) * l2 && l2_nu < (1.0 + 2.5 * eps_) * l2);
  }

 private:
  ExplicitDistribution base_;
  double eps_;
  double lambda_;
};

inline ExplicitDistribution ensemble_draw(const PerturbationEnsemble& e, std::uint64_t seed) { return e.draw(seed).nu; }

// Fraction of drawn nu with |nu|^2 outside (1 +- 5/2 eps)|mu|^2.
inline double deviation_experiment(const PerturbationEnsemble& e, std::uint64_t trials, std::uint64_t seed) {
  require(trials >= 1, "deviation_experiment needs trials >= 1");
  std::uint64_t out = 0;
  for (std::uint64_t t = 0; t < trials; ++t)
    if (e.deviates(exact_l2_sq(ensemble_draw(e, derive_seed(seed, t))))) ++out;
  return double(out) / double(trials);
}

// The same probability over all 2^J sign vectors.
inline double exact_deviation_probability(const PerturbationEnsemble& e) {
  const std::size_t pairs = e.pairs();
  require(pairs <= kMaxExactPairs, "exact deviation probability needs at most 20 pairs");
  const std::uint64_t total = std::uint64_t(1) << pairs;
  std::vector<int> signs(pairs);
  std::uint64_t out = 0;
  for (std::uint64_t bits = 0; bits < total; ++bits) {
    for (std::size_t j = 0; j < pairs; ++j) signs[j] = detail::sign_of(bits, j) ? 1 : -1;
    if (e.deviates(exact_l2_sq(e.with_signs(signs)))) ++out;
  }
  return double(out) / double(total);
}

// Positions (0-based, in descending-mass order) of the erased pairs: B1 holds
// first-of-pair elements more than sqrt 2 times their partner, B2 the partners.
struct PairSplit {
  std::vector<Entry> sorted;
  std::vector<std::size_t> a, b1, b2;
};

inline PairSplit split_pairs(const ExplicitDistribution& d) {
  PairSplit s;
  s.sorted = d.entries();
  std::stable_sort(s.sorted.begin(), s.sorted.end(), [](const Entry& x, const Entry& y) { return x.mass > y.mass; });
  for (std::size_t i = 0; i < s.sorted.size(); i += 2) {
    const double first = s.sorted[i].mass;
    const bool has_partner = i + 1 < s.sorted.size();
    const double second = has_partner ? s.sorted[i + 1].mass : 0.0;
    if (first > std::sqrt(2.0) * second * (1.0 + 1e-12)) {
      s.b1.push_back(i);
      if (has_partner) s.b2.push_back(i + 1);
    } else {
      s.a.push_back(i);
      if (has_partner) s.a.push_back(i + 1);
    }
  }
  return s;
}

struct PairReduction {
  ExplicitDistribution restricted;  // mu_A, pairing-compatible
  std::vector<Label> a, b1, b2;
  double mass_a = 0.0;
  double squares_a = 0.0;
  double squares_b1 = 0.0;
  double squares_b2 = 0.0;
  double l2 = 0.0;
};

// Erases the pairs that break the sqrt 2 ratio. Needs every mass below |mu|_2 / 8.
inline PairReduction pair_and_reduce(const ExplicitDistribution& d) {
  const double l2 = exact_l2_sq(d);
  const double norm = std::sqrt(l2);
  for (const auto& e : d.entries())
    require(e.mass < norm / 8.0, "pair_and_reduce needs every mass below |mu|_2 / 8; use build_skewed_perturbation");
  const PairSplit s = split_pairs(d);
  CompensatedSum ma, qa, q1, q2;
  std::vector<Entry> kept;
  PairReduction r{ExplicitDistribution::from_masses({1.0}), {}, {}, {}};
  for (std::size_t i : s.a) {
    kept.push_back(s.sorted[i]);
    r.a.push_back(s.sorted[i].label);
    ma.add(s.sorted[i].mass);
    qa.add(s.sorted[i].mass * s.sorted[i].mass);
  }
  for (std::size_t i : s.b1) {
    r.b1.push_back(s.sorted[i].label);
    q1.add(s.sorted[i].mass * s.sorted[i].mass);
  }
  for (std::size_t i : s.b2) {
    r.b2.push_back(s.sorted[i].label);
    q2.add(s.sorted[i].mass * s.sorted[i].mass);
  }
  r.mass_a = ma.value();
  r.squares_a = qa.value();
  r.squares_b1 = q1.value();
  r.squares_b2 = q2.value();
  r.l2 = l2;
  if (!(r.mass_a >= 0.25)) throw std::logic_error("pair_and_reduce: mu(A) below 1/4");
  if (!(r.squares_a >= 15.0 / 16.0 * l2)) throw std::logic_error("pair_and_reduce: A keeps less than 15/16 of the norm");
  for (auto& e : kept) e.mass /= r.mass_a;
  CompensatedSum total;
  for (const auto& e : kept) total.add(e.mass);
  kept.front().mass += 1.0 - total.value();
  r.restricted = ExplicitDistribution(std::move(kept));
  return r;
}

enum class SampleCountMode { fixed, poisson };

struct DistinguishReport {
  double q = 0.0;
  std::uint64_t trials = 0;
  double h0_correct = 0.0;  // fraction of mu runs answered "mu"
  double h1_correct = 0.0;  // fraction of nu runs answered "nu"
  double success = 0.0;     // average of the two
  double advantage = 0.0;   // success - 1/2
};

// The q of the indistinguishability argument: scale / (10^4 eps |mu|_2).
inline double distinguish_budget(double eps, double l2, double scale = 1.0) {
  return scale / (1e4 * eps * std::sqrt(l2));
}

// The collision-threshold distinguisher, an illustration rather than an optimal
// test: it says "nu" when the pair rate exceeds |mu|^2 by more than half the
// expected shift eps_hat^2 sum mu(2j)^2. Each hypothesis gets `trials` runs.
inline DistinguishReport distinguish_experiment(const ExplicitDistribution& mu, const PerturbationEnsemble& e, double q,
                                                std::uint64_t trials, std::uint64_t seed,
                                                SampleCountMode mode = SampleCountMode::poisson) {
  require(mu.size() <= 1000, "distinguish_experiment is for domains of at most 1000 labels");
  require(q >= 0.0 && trials >= 1, "distinguish_experiment needs q >= 0 and trials >= 1");
  const double l2 = exact_l2_sq(mu);
  const double h = e.eps_hat();
  const double threshold = l2 + h * h * detail::second_of_pair_squares(e.base());
  auto says_nu = [&](const ExplicitDistribution& d, std::uint64_t s) {
    Philox count_rng(derive_seed(s, 1));
    std::uint64_t n;
    if (mode == SampleCountMode::poisson)
      n = q > 0.0 ? std::poisson_distribution<std::uint64_t>(q)(count_rng) : 0;
    else
      n = std::uint64_t(std::llround(q));
    if (n < 2) return false;
    ExplicitOracle o(d, derive_seed(s, 2));
    std::uint64_t pairs = 0;
    for (const auto& [label, x] : o.draw_counts(n)) pairs += x * (x - 1) / 2;
    return double(pairs) / binom2(n) > threshold;
  };
  std::uint64_t right0 = 0, right1 = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    const std::uint64_t s0 = derive_seed(seed, 2 * t);
    const std::uint64_t s1 = derive_seed(seed, 2 * t + 1);
    if (!says_nu(mu, s0)) ++right0;
    if (says_nu(ensemble_draw(e, derive_seed(s1, 0)), s1)) ++right1;
  }
  DistinguishReport r;
  r.q = q;
  r.trials = trials;
  r.h0_correct = double(right0) / double(trials);
  r.h1_correct = double(right1) / double(trials);
  r.success = (r.h0_correct + r.h1_correct) / 2.0;
  r.advantage = r.success - 0.5;
  return r;
}

}  // namespace cnorm
