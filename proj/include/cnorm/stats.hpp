#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "distribution.hpp"

namespace cnorm {

// Every statistical tolerance the acceptance runs use.
struct Tolerances {
  double se_band = 3.0;             // |mean - target| <= se_band * standard error
  double binomial_z = 2.3263;       // one-sided 99% normal quantile for frequency margins
  double median_inflation = 12.0;   // expected-value blowup allowed for amplify_median
  double lower_bound_sigmas = 3.0;  // Monte-Carlo vs exact probability
};

inline constexpr Tolerances kTolerances{};

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean of an empty sample");
  CompensatedSum s;
  for (double x : v) s.add(x);
  return s.value() / double(v.size());
}

// Sample standard deviation (n - 1 denominator); 0 for a single value.
inline double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  CompensatedSum s;
  for (double x : v) s.add((x - m) * (x - m));
  return std::sqrt(s.value() / double(v.size() - 1));
}

inline double standard_error(const std::vector<double>& v) {
  return v.empty() ? 0.0 : stddev_of(v) / std::sqrt(double(v.size()));
}

// Linear interpolation between order statistics at position p (n - 1).
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(p, 0.0, 1.0) * double(v.size() - 1);
  const std::size_t lo = std::size_t(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

inline double median_of(std::vector<double> v) { return quantile(std::move(v), 0.5); }

// z sqrt(p (1 - p) / n).
inline double binomial_margin(double p, std::uint64_t n, double z = kTolerances.binomial_z) {
  return z * std::sqrt(std::max(0.0, p * (1.0 - p)) / double(n));
}

struct MeanCheck {
  double mean = 0.0;
  double se = 0.0;
  double target = 0.0;
  double z = 0.0;  // (mean - target) / se
  bool pass = false;
};

inline MeanCheck check_mean(const std::vector<double>& v, double target, double band = kTolerances.se_band) {
  MeanCheck c;
  c.mean = mean_of(v);
  c.se = standard_error(v);
  c.target = target;
  const double gap = std::abs(c.mean - target);
  c.z = c.se > 0.0 ? (c.mean - target) / c.se : (gap == 0.0 ? 0.0 : INFINITY);
  c.pass = gap <= band * c.se || gap <= 1e-12 * std::abs(target);
  return c;
}

struct FrequencyCheck {
  std::uint64_t hits = 0;
  std::uint64_t n = 0;
  double freq = 0.0;
  double need = 0.0;  // p - margin
  bool pass = false;
};

// Observed frequency at least p minus the binomial margin at p.
inline FrequencyCheck check_frequency_at_least(std::uint64_t hits, std::uint64_t n, double p) {
  FrequencyCheck c;
  c.hits = hits;
  c.n = n;
  c.freq = double(hits) / double(n);
  c.need = p - binomial_margin(p, n);
  c.pass = c.freq >= c.need;
  return c;
}

}  // namespace cnorm
