#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "advice.hpp"
#include "distribution.hpp"
#include "norm_estimators.hpp"
#include "oracle.hpp"
#include "params.hpp"
#include "primitives.hpp"

namespace cnorm {

struct NotFriendly : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Every mass, zero-mass padding included, is at least 7/(13N).
inline bool is_friendly(const ExplicitDistribution& d) {
  const double floor = 7.0 / (13.0 * double(d.size()));
  return std::all_of(d.entries().begin(), d.entries().end(), [&](const Entry& e) { return e.mass >= floor; });
}

struct DeltaSums {
  double squares = 0.0;  // sum of delta_i^2
  double cubes = 0.0;    // sum of delta_i^3
  double large_cubes = 0.0;  // sum of delta_i^3 over delta_i >= 1
};

inline DeltaSums delta_sums(const std::vector<double>& deltas) {
  CompensatedSum sq, cu, lc;
  for (double x : deltas) {
    sq.add(x * x);
    cu.add(x * x * x);
    if (x >= 1.0) lc.add(x * x * x);
  }
  return {sq.value(), cu.value(), lc.value()};
}

// t written through the deltas: (1 + 3 S2/N + S3/N) / (1 + S2/N)^2 - 1.
inline double t_from_deltas(const std::vector<double>& deltas) {
  const double n = double(deltas.size());
  const DeltaSums s = delta_sums(deltas);
  const double q = 1.0 + s.squares / n;
  return (1.0 + 3.0 * s.squares / n + s.cubes / n) / (q * q) - 1.0;
}

// Lower bound on t for friendly distributions:
// (1/(90 (N |mu|_2^2)^2)) (1/N) (sum delta^2 + sum_{delta>=1} delta^3).
inline double t_friendly_lower_bound(const ExplicitDistribution& d) {
  if (!is_friendly(d)) throw NotFriendly("distribution has a mass below 7/(13N)");
  const double n = double(d.size());
  const DeltaSums s = delta_sums(delta_vector(d));
  const double nl2 = n * exact_l2_sq(d);
  return (s.squares + s.large_cubes) / (n * 90.0 * nl2 * nl2);
}

// A holds explicit labels; B is everything else.
struct Partition {
  std::unordered_set<Label> a_members;
  double ell = 0.0;
  double threshold = 0.0;

  bool in_a(Label l) const { return a_members.count(l) != 0; }
};

// A only has masses above (11/20)|mu|^2 and B only masses below (2/3)|mu|^2.
inline bool is_good_partition(const ExplicitDistribution& d, const Partition& p) {
  const double l2 = exact_l2_sq(d);
  for (const auto& e : d.entries()) {
    if (p.in_a(e.label)) {
      if (!(e.mass > 11.0 / 20.0 * l2)) return false;
    } else if (!(e.mass < 2.0 / 3.0 * l2)) {
      return false;
    }
  }
  return true;
}

// Splits at (3/5)|mu|^2, strictly inside the window a good partition allows.
inline Partition exact_good_partition(const ExplicitDistribution& d) {
  Partition p;
  p.ell = exact_l2_sq(d);
  p.threshold = 0.6 * p.ell;
  for (const auto& e : d.entries())
    if (e.mass > p.threshold) p.a_members.insert(e.label);
  return p;
}

inline double mass_outside(const ExplicitDistribution& d, const Partition& p) {
  CompensatedSum s;
  for (const auto& e : d.entries())
    if (!p.in_a(e.label)) s.add(e.mass);
  return s.value();
}

inline std::uint64_t sum_squares_rounds(double eps) { return std::uint64_t(std::ceil(std::log2(1.0 / eps))) + 2; }

// ceil(scale 1000 N ln(N^4/eta)), at least 1.
inline std::uint64_t sum_cubes_samples(std::uint64_t n, double eta, double scale) {
  const long double nn = (long double)n;
  return detail::saturating_count((long double)scale * 1000.0L * nn * std::log(nn * nn * nn * nn / (long double)eta), 1);
}

// ceil(scale 10^4 ln(100/(eta eps ell)) / ell), at least 1.
inline std::uint64_t partition_learning_samples(double eps, double eta, double ell, double scale) {
  ell = std::max(ell, std::numeric_limits<double>::epsilon());
  return detail::saturating_count((long double)scale * 1e4L * std::log(100.0L / ((long double)eta * eps * ell)) / ell, 1);
}

// Finite-domain procedures and the advice finder for the large-norm regime.
template <class Self>
class FiniteFriendly {
 public:
  // At least (1/N) sum delta^2 with probability 1 - eta; mean O((1/N) sum delta^2 + eps).
  EstimateReport sum_squares(SampleOracle& o, std::uint64_t n, double eps, double eta) {
    require(n >= 1, "sum_squares needs N >= 1");
    require(eps > 0.0 && eps <= 1.0, "sum_squares needs eps in (0,1]");
    require(eta > 0.0 && eta <= 1.0 / 3.0, "sum_squares needs eta in (0,1/3]");
    detail::Meter meter(o);
    const double nd = double(n);
    const std::uint64_t k = sum_squares_rounds(eps);
    EstimateReport r;
    r.trace.push_back({"sum_squares", "", 0.0, 0});
    auto finish = [&](double value, std::string_view branch) {
      r.value = value;
      r.samples = meter.used();
      r.trace.front() = {"sum_squares", branch, value, r.samples};
      return r;
    };
    double e_prev = 1.0;
    const EstimateReport p0 = self().l2_bc(o, e_prev / 12.0, std::pow(3.0, -double(k)) * eta / (32.0 * nd));
    r.trace.push_back(head_of(p0));
    double p = p0.value;
    if (p >= 1.25 / nd) {
      const EstimateReport again = self().l2_bc(o, 1.0 / 12.0, std::min(eta / 2.0, eps));
      r.trace.push_back(head_of(again));
      return finish(std::max(0.0, 3.0 * (nd * again.value - 1.0)), "heavy");
    }
    for (std::uint64_t i = 1; i <= k; ++i) {
      const double e_i = e_prev / 2.0;
      if (!(p < (1.0 + e_prev / 2.0) / nd)) return finish(2.0 * e_prev, "separated");
      const double t_i = e_prev * std::sqrt(nd);
      r.trace.push_back({"schedule", "advice", t_i, 0});
      const EstimateReport pi = self().l2_base(o, e_i / 12.0, std::pow(3.0, double(i) - double(k)) * eta / 32.0, t_i);
      r.trace.push_back(head_of(pi));
      p = pi.value;
      ++r.rounds;
      e_prev = e_i;
    }
    return finish(2.0 * e_prev, "exhausted");
  }

  // (8/N) sum of cubed empirical deltas that reach 1/2.
  EstimateReport sum_cubes(SampleOracle& o, std::uint64_t n, double eta) {
    require(n >= 1, "sum_cubes needs N >= 1");
    require(eta > 0.0 && eta <= 1.0 / 3.0, "sum_cubes needs eta in (0,1/3]");
    detail::Meter meter(o);
    const double nd = double(n);
    const std::uint64_t q = sum_cubes_samples(n, eta, self().scale());
    const Histogram h = o.draw_counts(q);
    CompensatedSum s;
    for (const auto& [l, x] : h) {
      const double d = nd * double(x) / double(q) - 1.0;
      if (d >= 0.5) s.add(d * d * d);
    }
    EstimateReport r;
    r.value = 8.0 / nd * s.value();
    r.samples = meter.used();
    r.trace.push_back({"sum_cubes", "single", r.value, r.samples});
    return r;
  }

  // At least t for friendly distributions, with probability 1 - eta.
  AdviceReport t_friendly(SampleOracle& o, std::uint64_t n, double eps, double eta) {
    require(n >= 1, "t_friendly needs N >= 1");
    require(eta > 0.0 && eta <= 1.0 / 3.0, "t_friendly needs eta in (0,1/3]");
    detail::Meter meter(o);
    const double nd = double(n);
    AdviceReport r;
    r.trace.push_back({"t_friendly", "", 0.0, 0});
    const EstimateReport l2 = self().l2_bc(o, 0.5, eta / 3.0);
    const EstimateReport a = self().sum_squares(o, n, eps, eta / 3.0);
    const EstimateReport b = self().sum_cubes(o, n, std::min(eta / 3.0, eps));
    for (const auto* sub : {&l2, &a, &b}) r.trace.push_back(head_of(*sub));
    const double nl = nd * l2.value;
    const double raw = 360.0 * (a.value + b.value) / (nl * nl);
    r.value = std::min(raw, std::sqrt(nd));
    r.trace.front().branch = raw < std::sqrt(nd) ? "bound" : "ceiling";
    r.samples = meter.used();
    r.trace.front().value = r.value;
    r.trace.front().samples = r.samples;
    return r;
  }

  AdviceReport find_advice_large(SampleOracle& o, double eps, double eta) {
    require(eps > 0.0 && eps <= 1.0, "find_advice_large needs eps in (0,1]");
    require(eta > 0.0 && eta <= 1.0 / 3.0, "find_advice_large needs eta in (0,1/3]");
    detail::Meter meter(o);
    AdviceReport r;
    r.trace.push_back({"find_advice_large", "", 0.0, 0});
    auto finish = [&](double value, std::string_view branch) {
      r.value = value;
      r.samples = meter.used();
      r.trace.front() = {"find_advice_large", branch, value, r.samples};
      return r;
    };
    constexpr double kDelta = 1e-4;
    const AdviceReport t1 = self().t_directly(o, kDelta, std::min(eta / 10.0, eps));
    r.trace.push_back(head_of(t1));
    if (t1.value >= 1.0 / 900.0) {
      const AdviceReport t2 = self().t_directly(o, kDelta, eta / 10.0);
      r.trace.push_back(head_of(t2));
      return finish(t2.value, "direct");
    }

    const EstimateReport l = self().l2_bc(o, 1.0 / 100.0, std::min(eta / 10.0, eps));
    r.trace.push_back(head_of(l));
    const std::uint64_t q = partition_learning_samples(eps, eta, l.value, self().scale());
    Partition part;
    part.ell = l.value;
    part.threshold = 0.6 * l.value;
    for (const auto& [label, x] : o.draw_counts(q))
      if (double(x) / double(q) > part.threshold) part.a_members.insert(label);
    r.trace.push_back({"learn_partition", "", double(part.a_members.size()), q});

    IndicatorOracle outside(o, [&](Label x) { return !part.in_a(x); });
    const EstimateReport rb = estimate_indicator_additive(outside, eps, eta / 10.0);
    r.trace.push_back(head_of(rb));
    if (part.a_members.empty()) return finish(0.0, "crash");

    ConditionalOracle cond(o, [&](Label x) { return part.in_a(x); }, eta / 10.0);
    ConditionalSource source(cond);
    double ra;
    try {
      const AdviceReport ta = self().t_friendly(source, part.a_members.size(), eps, eta / 10.0);
      r.trace.push_back(head_of(ta));
      ra = ta.value;
    } catch (const RejectionCrash&) {
      return finish(0.0, "crash");
    }
    return finish(ra + 5.0 * (rb.value + eps), "partition");
  }

 private:
  Self& self() { return static_cast<Self&>(*this); }
};

}  // namespace cnorm
