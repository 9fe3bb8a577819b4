#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "oracle.hpp"
#include "params.hpp"
#include "primitives.hpp"
#include "tally.hpp"

namespace cnorm {

namespace detail {

inline std::uint64_t saturating_count(long double x, std::uint64_t floor) {
  if (!(x < 1.8e19L)) return std::numeric_limits<std::uint64_t>::max();
  const auto c = std::uint64_t(std::ceil(x));
  return std::max(c, floor);
}

inline Count128 sum_pairs(const Histogram& h) {
  Count128 s = 0;
  for (const auto& [l, x] : h) s += choose2(x);
  return s;
}

inline Count128 sum_triples(const Histogram& h) {
  Count128 s = 0;
  for (const auto& [l, x] : h) s += choose3(x);
  return s;
}

// Tracks the samples a call consumes from one oracle.
class Meter {
 public:
  explicit Meter(const SampleOracle& o) : o_(o), start_(o.drawn()) {}
  std::uint64_t used() const { return o_.drawn() - start_; }

 private:
  const SampleOracle& o_;
  std::uint64_t start_;
};

}  // namespace detail

// Collision target of the stop-at-k estimator: ceil(scale 10^6 / eps^4), at least 1.
inline Count128 bc_threshold(double eps, double scale) {
  const long double k = std::ceil((long double)scale * 1e6L / std::pow((long double)eps, 4));
  if (k < 1.0L) return 1;
  if (k > 1e38L) return Count128(1) << 126;
  return Count128(k);
}

// ceil((1/sqrt(eta)) max{scale 10^3/(sqrt(eta) eps sqrt(ell)), scale 10^6 r/(eta eps^2)}), at least 2.
inline std::uint64_t base_sample_count(double eps, double eta, double ell, double r, double scale) {
  const long double se = std::sqrt((long double)eta);
  const long double first = (long double)scale * 1e3L / (se * eps * std::sqrt((long double)ell));
  const long double second = (long double)scale * 1e6L * r / ((long double)eta * eps * eps);
  return detail::saturating_count(std::max(first, second) / se, 2);
}

// ceil(scale 10^12 / (eta eps^2 ell^(2/3))), at least 3.
inline std::uint64_t l3_sample_count(double eps, double eta, double ell, double scale) {
  return detail::saturating_count(
      (long double)scale * 1e12L / ((long double)eta * eps * eps * std::pow((long double)ell, 2.0L / 3.0L)), 3);
}

// ceil(scale 10^12 / (eta a)), at least 3.
inline std::uint64_t l3_magnitude_sample_count(double a, double eta, double scale) {
  return detail::saturating_count((long double)scale * 1e12L / ((long double)eta * a), 3);
}

inline std::uint64_t moments_iteration_cap(double eta_run) {
  return std::uint64_t(std::ceil(48.0 * std::log(1.0 / eta_run))) + 100;
}

// Reference estimators for the second and third norm. Self is the final
// procedure set; every sub-call goes through it so tests can substitute parts.
template <class Self>
class NormEstimators {
 public:
  // Draw until k pairs collide; k / C(M,2). Median-amplified for eta < 1/3.
  EstimateReport l2_bc(SampleOracle& o, double eps, double eta) {
    require(eps > 0.0 && eps <= 0.5, "l2_bc needs eps in (0,1/2]");
    require(eta > 0.0 && eta < 1.0, "l2_bc needs eta in (0,1)");
    const Count128 k = bc_threshold(eps, self().scale());
    return amplify_median_report(
        "l2_bc",
        [&] {
          detail::Meter meter(o);
          CollisionTally t;
          o.extend_until_pairs(t, k);
          EstimateReport r;
          r.value = to_double(k) / binom2(t.m());
          r.samples = meter.used();
          r.rounds = 1;
          r.trace.push_back({"l2_bc", "single", r.value, r.samples});
          return r;
        },
        eta);
  }

  // Unbiased: S_m / C(m,2) with m chosen from a rough norm estimate and the advice.
  EstimateReport l2_base(SampleOracle& o, double eps, double eta, L2Advice advice) {
    require(eta > 0.0 && eta < 1.0, "l2_base needs eta in (0,1)");
    require(eps > 0.0, "l2_base needs eps > 0");
    require(!advice || *advice >= 0.0, "advice must be non-negative");
    eps = std::min(eps, 0.1);
    detail::Meter meter(o);
    EstimateReport r;
    r.trace.push_back({"l2_base", advice ? "advised" : "unadvised", 0.0, 0});
    const EstimateReport rough = self().l2_bc(o, 0.5, eta / 6.0);
    r.trace.push_back(head_of(rough));
    const double ell = rough.value;
    const double rr = advice ? *advice : std::sqrt(2.0 / ell);
    const std::uint64_t m = base_sample_count(eps, eta, ell, rr, self().scale());
    const Histogram h = o.draw_counts(m);
    r.value = to_double(detail::sum_pairs(h)) / binom2(m);
    r.samples = meter.used();
    r.trace.front().value = r.value;
    r.trace.front().samples = r.samples;
    return r;
  }

  // Repeats base and stop-at-k estimates until they agree within a factor 2, then
  // returns the base estimate. Median-amplified for eta < 1/3.
  EstimateReport l2_moments(SampleOracle& o, double eps, double eta) {
    require(eta > 0.0 && eta < 1.0, "l2_moments needs eta in (0,1)");
    require(eps > 0.0, "l2_moments needs eps > 0");
    eps = std::min(eps, 0.2);
    const std::uint64_t cap = moments_iteration_cap(1.0 / 3.0);
    return amplify_median_report(
        "l2_moments",
        [&] {
          detail::Meter meter(o);
          for (std::uint64_t it = 1; it <= cap; ++it) {
            const double hi = self().l2_base(o, eps, 1.0 / 6.0, std::nullopt).value;
            const double lo = self().l2_bc(o, eps, 1.0 / 6.0).value;
            if (lo / 2.0 <= hi && hi <= 2.0 * lo) {
              EstimateReport r;
              r.value = hi;
              r.samples = meter.used();
              r.rounds = it;
              r.trace.push_back({"l2_moments", "agreed", r.value, r.samples});
              return r;
            }
          }
          throw IterationCapExceeded("l2_moments: estimates never agreed within " + std::to_string(cap) + " rounds");
        },
        eta);
  }

  // Unbiased: T_m / C(m,3).
  EstimateReport l3(SampleOracle& o, double eps, double eta) {
    require(eta > 0.0 && eta < 1.0, "l3 needs eta in (0,1)");
    require(eps > 0.0, "l3 needs eps > 0");
    eps = std::min(eps, 0.1);
    detail::Meter meter(o);
    EstimateReport r;
    r.trace.push_back({"l3", "single", 0.0, 0});
    const EstimateReport rough = self().l2_bc(o, 0.5, eta / 6.0);
    r.trace.push_back(head_of(rough));
    const std::uint64_t m = l3_sample_count(eps, eta, rough.value, self().scale());
    const Histogram h = o.draw_counts(m);
    r.value = to_double(detail::sum_triples(h)) / binom3(m);
    r.samples = meter.used();
    r.trace.front().value = r.value;
    r.trace.front().samples = r.samples;
    return r;
  }

  EstimateReport l3_amplified(SampleOracle& o, double eps, double eta) {
    return amplify_median_report("l3_amplified", [&] { return self().l3(o, eps, 1.0 / 3.0); }, eta);
  }

  // Unbiased, additive accuracy on the scale of a^3.
  EstimateReport l3_magnitude(SampleOracle& o, double a, double eta) {
    require(a > 0.0 && a <= 1.0, "l3_magnitude needs a in (0,1]");
    require(eta > 0.0 && eta < 1.0, "l3_magnitude needs eta in (0,1)");
    detail::Meter meter(o);
    const std::uint64_t m = l3_magnitude_sample_count(a, eta, self().scale());
    const Histogram h = o.draw_counts(m);
    EstimateReport r;
    r.value = to_double(detail::sum_triples(h)) / binom3(m);
    r.samples = meter.used();
    r.trace.push_back({"l3_magnitude", "single", r.value, r.samples});
    return r;
  }

 private:
  Self& self() { return static_cast<Self&>(*this); }
};

}  // namespace cnorm
