#pragma once

#include <cmath>
#include <cstdint>

#include "norm_estimators.hpp"
#include "oracle.hpp"
#include "params.hpp"
#include "primitives.hpp"

namespace cnorm {

// Per-round sample budget of the magnitude test: twelve rounds' worth of the
// expected cost of the amplified stop-at-k estimate at accuracy 1/4 on a
// distribution with norm exactly 2 eps (its most expensive accepted case).
inline std::uint64_t magnitude_round_budget(double eps, double scale) {
  const double k = to_double(bc_threshold(0.25, scale));
  const double per_copy = 1.0 + std::ceil(std::sqrt(2.0 * k) / (2.0 * eps));
  return std::uint64_t(12.0 * double(amplification_copies(0.25)) * per_copy);
}

inline std::uint64_t magnitude_rounds(double ell2, double eta) {
  return std::uint64_t(std::ceil(18.0 * std::log(2.0 / (std::min(1.0, ell2) * eta))));
}

enum class Branch { small, zero, medium, large };

inline std::string_view branch_name(Branch b) {
  switch (b) {
    case Branch::small: return "small";
    case Branch::zero: return "zero";
    case Branch::medium: return "medium";
    case Branch::large: return "large";
  }
  return "";
}

// Branch choice from the rough norm estimate; `magnitude_accepts` is only
// consulted outside the small regime.
inline Branch choose_branch(double ell, double eps, bool magnitude_accepts) {
  const double norm = std::sqrt(ell);
  if (norm <= 4.0 * eps) return Branch::small;
  if (magnitude_accepts) return Branch::zero;
  return norm <= 2.0 * std::pow(eps, 2.0 / 3.0) ? Branch::medium : Branch::large;
}

template <class Self>
class TopLevel {
 public:
  // value 1 = accept (norm looks at most eps), 0 = reject (norm looks at least 2 eps).
  EstimateReport test_l2_magnitude(SampleOracle& o, double eps, double eta) {
    require(eps > 0.0, "test_l2_magnitude needs eps > 0");
    require(eta > 0.0 && eta <= 1.0 / 3.0, "test_l2_magnitude needs eta in (0,1/3]");
    eps = std::min(eps, 0.25);
    detail::Meter meter(o);
    EstimateReport r;
    r.trace.push_back({"test_l2_magnitude", "", 0.0, 0});
    auto finish = [&](bool accept, std::string_view branch) {
      r.value = accept ? 1.0 : 0.0;
      r.samples = meter.used();
      r.trace.front() = {"test_l2_magnitude", branch, r.value, r.samples};
      return r;
    };
    const EstimateReport l1 = self().l2_bc(o, 0.25, eta / 2.0);
    r.trace.push_back(head_of(l1));
    if (std::sqrt(l1.value) <= 1.5 * eps) return finish(true, "accept_rough");
    const EstimateReport l2 = self().l2_moments(o, 0.25, 0.5);
    r.trace.push_back(head_of(l2));
    const std::uint64_t rounds = magnitude_rounds(l2.value, eta);
    const std::uint64_t budget = magnitude_round_budget(eps, self().scale());
    std::uint64_t large = 0;
    for (std::uint64_t i = 0; i < rounds; ++i) {
      ScopedCap limit(o, budget);
      try {
        const double v = self().l2_bc(o, 0.25, 0.25).value;
        if (std::sqrt(v) >= 1.5 * eps) ++large;
      } catch (const BudgetExceeded&) {
        if (!limit.hit_scoped_limit()) throw;
      }
    }
    r.rounds = rounds;
    return large >= rounds / 2 ? finish(false, "reject") : finish(true, "accept");
  }

  // The rough estimate that picks the branch.
  EstimateReport top_level_probe(SampleOracle& o, double eps, double eta) {
    return self().l2_bc(o, 0.25, std::min(eps * eps, eta / 4.0));
  }

  // Unbiased estimate of |mu|_2^2, within (1 +- eps) with probability 1 - eta.
  EstimateReport l2_top_level(SampleOracle& o, double eps, double eta) {
    require(eps > 0.0 && eps <= 1.0, "l2_top_level needs eps in (0,1]");
    require(eta > 0.0 && eta <= 1.0 / 3.0, "l2_top_level needs eta in (0,1/3]");
    detail::Meter meter(o);
    EstimateReport r;
    r.trace.push_back({"l2_top_level", "", 0.0, 0});
    const EstimateReport probe = self().top_level_probe(o, eps, eta);
    r.trace.push_back(head_of(probe));
    const double ell = probe.value;
    Branch b = choose_branch(ell, eps, false);
    double advice = 0.0;
    int sources = 0;
    if (b == Branch::small) {
      const AdviceReport a = self().find_advice_small(o, eps, eta / 4.0);
      r.trace.push_back(head_of(a));
      advice = a.value;
      ++sources;
    } else {
      const EstimateReport test = self().test_l2_magnitude(o, eps, eta / 4.0);
      r.trace.push_back(head_of(test));
      b = choose_branch(ell, eps, test.value > 0.5);
      if (b == Branch::zero) {
        advice = 0.0;
        ++sources;
      } else {
        const AdviceReport a = b == Branch::medium ? self().find_advice_medium(o, eps, eta / 4.0)
                                                   : self().find_advice_large(o, eps, eta / 4.0);
        r.trace.push_back(head_of(a));
        advice = a.value;
        ++sources;
      }
    }
    if (sources != 1) throw std::logic_error("l2_top_level: advice must come from exactly one branch");
    const EstimateReport fin = self().l2_base(o, eps, eta / 4.0, advice);
    r.trace.push_back(head_of(fin));
    r.value = fin.value;
    r.samples = meter.used();
    r.trace.front() = {"l2_top_level", branch_name(b), r.value, r.samples};
    return r;
  }

 private:
  Self& self() { return static_cast<Self&>(*this); }
};

}  // namespace cnorm
