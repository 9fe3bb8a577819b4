#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "oracle.hpp"
#include "params.hpp"

namespace cnorm {

// Number of independent copies needed to push a 1/3 failure rate down to eta.
inline std::uint64_t amplification_copies(double eta) {
  if (eta >= 1.0 / 3.0 - 1e-15) return 1;
  return std::uint64_t(std::ceil(18.0 * std::log(1.0 / eta)));
}

// Lower median: rank floor(q/2) counting the minimum as rank 1 for even q, the
// middle element for odd q.
inline double lower_median(std::vector<double> v) {
  const std::size_t i = (v.size() - 1) / 2;
  std::nth_element(v.begin(), v.begin() + i, v.end());
  return v[i];
}

template <class Body>
double amplify_median(Body&& body, double eta) {
  const std::uint64_t q = amplification_copies(eta);
  if (q == 1) return body();
  std::vector<double> out;
  out.reserve(q);
  for (std::uint64_t i = 0; i < q; ++i) out.push_back(body());
  return lower_median(std::move(out));
}

// Report-returning form: samples add up across copies.
template <class Body>
EstimateReport amplify_median_report(std::string_view procedure, Body&& body, double eta) {
  const std::uint64_t q = amplification_copies(eta);
  if (q == 1) return body();
  std::vector<double> out;
  out.reserve(q);
  std::uint64_t samples = 0, rounds = 0;
  for (std::uint64_t i = 0; i < q; ++i) {
    EstimateReport r = body();
    out.push_back(r.value);
    samples += r.samples;
    rounds += r.rounds;
  }
  EstimateReport rep;
  rep.rounds = rounds;
  rep.value = lower_median(std::move(out));
  rep.samples = samples;
  rep.trace.push_back({procedure, "median", rep.value, samples});
  return rep;
}

inline std::uint64_t indicator_first_phase(double eps, double eta) {
  return std::uint64_t(std::ceil(12.0 * std::log(10.0 / eta) / eps));
}

inline std::uint64_t indicator_second_phase(std::uint64_t s1, std::uint64_t m1, double eps, double eta) {
  return std::uint64_t(std::ceil(6.0 * std::log(10.0 / eta) * (double(s1) / double(m1) + eps) / (eps * eps)));
}

// Unbiased estimate of Pr[indicator]; within +-eps with probability 1 - eta.
inline EstimateReport estimate_indicator_additive(IndicatorOracle& ind, double eps, double eta) {
  require(eps > 0.0 && eps <= 1.0, "indicator estimate needs eps in (0,1]");
  require(eta > 0.0 && eta <= 1.0 / 3.0, "indicator estimate needs eta in (0,1/3]");
  const std::uint64_t before = ind.base().drawn();
  const std::uint64_t m1 = indicator_first_phase(eps, eta);
  const std::uint64_t s1 = ind.successes(m1);
  const std::uint64_t m2 = indicator_second_phase(s1, m1, eps, eta);
  const std::uint64_t s2 = ind.successes(m2);
  EstimateReport rep;
  rep.value = double(s2) / double(m2);
  rep.samples = ind.base().drawn() - before;
  rep.trace.push_back({"indicator_additive", "two_phase", rep.value, rep.samples});
  return rep;
}

// One sample of mu_A, or nullopt when the rejection budget ran out.
inline std::optional<Label> conditional_draw(ConditionalOracle& c) { return c.request(); }

}  // namespace cnorm
