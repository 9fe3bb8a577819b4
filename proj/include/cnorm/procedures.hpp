#pragma once

#include <cstdint>

#include "advice.hpp"
#include "finite_friendly.hpp"
#include "norm_estimators.hpp"
#include "toplevel.hpp"

namespace cnorm {

// All estimators, bound to one constant scale. A test can derive from
// ProcedureSet<Derived> and shadow any member; the others pick up the override.
template <class Self>
class ProcedureSet : public NormEstimators<Self>,
                     public AdviceFinders<Self>,
                     public FiniteFriendly<Self>,
                     public TopLevel<Self> {
 public:
  explicit ProcedureSet(double scale = 1.0) : scale_(scale) { require(scale > 0.0, "scale must be positive"); }
  double scale() const { return scale_; }

 private:
  double scale_;
};

class Procedures final : public ProcedureSet<Procedures> {
 public:
  using ProcedureSet::ProcedureSet;
};

inline EstimateReport estimate_l2_bc(SampleOracle& o, double eps, double eta, double scale = 1.0) {
  return Procedures(scale).l2_bc(o, eps, eta);
}
inline EstimateReport estimate_l2_base(SampleOracle& o, double eps, double eta, L2Advice advice, double scale = 1.0) {
  return Procedures(scale).l2_base(o, eps, eta, advice);
}
inline EstimateReport estimate_l2_moments(SampleOracle& o, double eps, double eta, double scale = 1.0) {
  return Procedures(scale).l2_moments(o, eps, eta);
}
inline EstimateReport estimate_l3(SampleOracle& o, double eps, double eta, double scale = 1.0) {
  return Procedures(scale).l3(o, eps, eta);
}
inline EstimateReport estimate_l3_amplified(SampleOracle& o, double eps, double eta, double scale = 1.0) {
  return Procedures(scale).l3_amplified(o, eps, eta);
}
inline EstimateReport estimate_l3_magnitude(SampleOracle& o, double a, double eta, double scale = 1.0) {
  return Procedures(scale).l3_magnitude(o, a, eta);
}
inline AdviceReport estimate_t_directly(SampleOracle& o, double delta, double eta, double scale = 1.0) {
  return Procedures(scale).t_directly(o, delta, eta);
}
inline AdviceReport find_advice_small(SampleOracle& o, double eps, double eta, double scale = 1.0) {
  return Procedures(scale).find_advice_small(o, eps, eta);
}
inline AdviceReport find_advice_medium(SampleOracle& o, double eps, double eta, double scale = 1.0) {
  return Procedures(scale).find_advice_medium(o, eps, eta);
}
inline AdviceReport find_advice_large(SampleOracle& o, double eps, double eta, double scale = 1.0) {
  return Procedures(scale).find_advice_large(o, eps, eta);
}
inline EstimateReport estimate_sum_squares(SampleOracle& o, std::uint64_t n, double eps, double eta, double scale = 1.0) {
  return Procedures(scale).sum_squares(o, n, eps, eta);
}
inline EstimateReport estimate_sum_cubes(SampleOracle& o, std::uint64_t n, double eta, double scale = 1.0) {
  return Procedures(scale).sum_cubes(o, n, eta);
}
inline AdviceReport estimate_t_friendly(SampleOracle& o, std::uint64_t n, double eps, double eta, double scale = 1.0) {
  return Procedures(scale).t_friendly(o, n, eps, eta);
}
inline bool test_l2_magnitude(SampleOracle& o, double eps, double eta, double scale = 1.0) {
  return Procedures(scale).test_l2_magnitude(o, eps, eta).value > 0.5;
}
inline EstimateReport estimate_l2_top_level(SampleOracle& o, double eps, double eta, double scale = 1.0) {
  return Procedures(scale).l2_top_level(o, eps, eta);
}

}  // namespace cnorm
