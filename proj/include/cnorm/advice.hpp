#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "norm_estimators.hpp"
#include "params.hpp"

namespace cnorm {

// a = ((9/2) eps ell2^(3/2))^(1/3): the additive scale for the third-norm estimate.
inline double small_advice_magnitude(double eps, double ell2) {
  return std::cbrt(4.5 * eps * std::pow(ell2, 1.5));
}

inline double medium_advice_delta(double eps, double ell2) { return std::min(1.0, eps / std::sqrt(ell2)); }

// Advice finders for the small and medium norm regimes and the direct t estimate.
template <class Self>
class AdviceFinders {
 public:
  // Within [t, 15 t + 3 delta] with probability 1 - eta.
  AdviceReport t_directly(SampleOracle& o, double delta, double eta) {
    require(delta > 0.0 && delta <= 1.0, "t_directly needs delta in (0,1]");
    require(eta > 0.0 && eta <= 1.0 / 3.0, "t_directly needs eta in (0,1/3]");
    detail::Meter meter(o);
    const double e = std::min(eta, delta);
    AdviceReport r;
    r.trace.push_back({"t_directly", "", 0.0, 0});
    const EstimateReport l22 = self().l2_moments(o, delta / 40.0, e / 4.0);
    const EstimateReport l33 = self().l3(o, delta / 30.0, e / 4.0);
    const double y1 = std::max(0.0, l33.value / (l22.value * l22.value) - 1.0);
    const EstimateReport l22b = self().l2_moments(o, 0.5, e / 4.0);
    const EstimateReport l33b = self().l3_amplified(o, 0.5, e / 4.0);
    const double shrunk = l22b.value / 1.5;
    const double y2 = 2.0 * l33b.value / (shrunk * shrunk);
    for (const auto* sub : {&l22, &l33, &l22b, &l33b}) r.trace.push_back(head_of(*sub));
    const double lin = 2.0 * (y1 + delta);
    r.value = std::min(lin, y2);
    r.trace.front().branch = lin <= y2 ? "linear" : "ratio";
    if (!(r.value >= 0.0) || r.value > y2 || r.value > lin) throw std::logic_error("t_directly: min gate violated");
    r.samples = meter.used();
    r.trace.front().value = r.value;
    r.trace.front().samples = r.samples;
    return r;
  }

  AdviceReport find_advice_small(SampleOracle& o, double eps, double eta) {
    require(eps > 0.0 && eps <= 1.0, "find_advice_small needs eps in (0,1]");
    require(eta > 0.0 && eta <= 1.0 / 3.0, "find_advice_small needs eta in (0,1/3]");
    detail::Meter meter(o);
    AdviceReport r;
    r.trace.push_back({"find_advice_small", "small", 0.0, 0});
    const EstimateReport l2 = self().l2_moments(o, 1.0 / 1000.0, eta / 2.0);
    const double a = small_advice_magnitude(eps, l2.value);
    // The magnitude estimator takes a <= 1; a larger a only loosens its target.
    const EstimateReport l3 = self().l3_magnitude(o, std::min(a, 1.0), eta / 2.0);
    r.trace.push_back(head_of(l2));
    r.trace.push_back(head_of(l3));
    r.value = (1.0 + 1.0 / 200.0) * (l3.value + a * a * a) / (l2.value * l2.value);
    if (!(r.value >= 0.0)) throw std::logic_error("find_advice_small: negative advice");
    r.samples = meter.used();
    r.trace.front().value = r.value;
    r.trace.front().samples = r.samples;
    return r;
  }

  AdviceReport find_advice_medium(SampleOracle& o, double eps, double eta) {
    require(eps > 0.0 && eps <= 1.0, "find_advice_medium needs eps in (0,1]");
    require(eta > 0.0 && eta <= 1.0 / 3.0, "find_advice_medium needs eta in (0,1/3]");
    detail::Meter meter(o);
    AdviceReport r;
    r.trace.push_back({"find_advice_medium", "medium", 0.0, 0});
    const EstimateReport l2 = self().l2_moments(o, 1.0 / 10.0, 1.0 / 3.0);
    const AdviceReport t = self().t_directly(o, medium_advice_delta(eps, l2.value), eta);
    r.trace.push_back(head_of(l2));
    r.trace.push_back(head_of(t));
    r.value = t.value;
    r.samples = meter.used();
    r.trace.front().value = r.value;
    r.trace.front().samples = r.samples;
    return r;
  }

 private:
  Self& self() { return static_cast<Self&>(*this); }
};

}  // namespace cnorm
