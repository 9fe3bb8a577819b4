#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include "cnorm/cnorm.hpp"

using namespace cnorm;

TEST(Amplify, CopyCount) {
  EXPECT_EQ(amplification_copies(1.0 / 3.0), 1u);
  EXPECT_EQ(amplification_copies(0.5), 1u);
  EXPECT_EQ(amplification_copies(0.01), 83u);
  EXPECT_EQ(amplification_copies(0.25), 25u);
}

TEST(Amplify, LowerMedian) {
  EXPECT_EQ(lower_median({3, 1, 2}), 2);
  EXPECT_EQ(lower_median({4, 1, 3, 2}), 2);
  EXPECT_EQ(lower_median({5}), 5);
}

TEST(Amplify, ConstantBody) {
  for (double eta : {1.0 / 3.0, 0.1, 0.01, 1e-6}) EXPECT_EQ(amplify_median([] { return 7.0; }, eta), 7.0);
}

TEST(Amplify, RunsOnceAtOneThird) {
  int calls = 0;
  EXPECT_EQ(amplify_median([&] { return double(++calls); }, 1.0 / 3.0), 1.0);
  EXPECT_EQ(calls, 1);
  calls = 0;
  amplify_median([&] { return double(++calls); }, 0.01);
  EXPECT_EQ(calls, 83);
}

TEST(Amplify, ReportAddsSamples) {
  int i = 0;
  const auto r = amplify_median_report(
      "body",
      [&] {
        EstimateReport e;
        e.value = double(i++);
        e.samples = 10;
        e.rounds = 1;
        return e;
      },
      0.01);
  EXPECT_EQ(r.samples, 830u);
  EXPECT_EQ(r.rounds, 83u);
  EXPECT_EQ(r.value, 41.0);
}

TEST(Amplify, HeavyTailInflationIsBounded) {
  // Pareto(1.5) with mean 1: the median of copies is far below 12 x the mean.
  Philox rng(5);
  auto pareto = [&] { return (1.0 / 3.0) * std::pow(1.0 - rng.uniform(), -1.0 / 1.5); };
  std::vector<double> v;
  for (int i = 0; i < 3000; ++i) v.push_back(amplify_median(pareto, 0.05));
  EXPECT_LT(mean_of(v), 12.0);
  EXPECT_GT(mean_of(v), 0.4);
}

TEST(Indicator, PhaseSizes) {
  EXPECT_EQ(indicator_first_phase(0.05, 0.1), std::uint64_t(std::ceil(12 * std::log(100.0) / 0.05)));
  EXPECT_EQ(indicator_second_phase(0, 100, 0.05, 0.1), std::uint64_t(std::ceil(6 * std::log(100.0) / 0.05)));
}

TEST(Indicator, AlwaysTrueAndAlwaysFalse) {
  const auto d = zoo("uniform", {{"n", "10"}});
  ExplicitOracle o(d, 1);
  IndicatorOracle yes(o, [](Label) { return true; }), no(o, [](Label) { return false; });
  EXPECT_EQ(estimate_indicator_additive(yes, 0.1, 0.1).value, 1.0);
  const auto before = o.drawn();
  const auto r = estimate_indicator_additive(no, 0.05, 0.1);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.samples, indicator_first_phase(0.05, 0.1) + indicator_second_phase(0, 1, 0.05, 0.1));
  EXPECT_EQ(o.drawn() - before, r.samples);
}

TEST(Indicator, UnbiasedAndAccurate) {
  const auto d = ExplicitDistribution::from_masses({0.3, 0.7});
  const auto table = std::make_shared<const SamplingTable>(d);
  std::vector<double> v;
  std::uint64_t close = 0;
  for (int i = 0; i < 3000; ++i) {
    ExplicitOracle o(table, derive_seed(31, i));
    IndicatorOracle ind(o, [](Label x) { return x == 0; });
    v.push_back(estimate_indicator_additive(ind, 0.05, 0.1).value);
    close += std::abs(v.back() - 0.3) <= 0.05;
  }
  EXPECT_TRUE(check_mean(v, 0.3).pass) << mean_of(v);
  EXPECT_TRUE(check_frequency_at_least(close, v.size(), 0.9).pass);
}

TEST(Indicator, RejectsBadArguments) {
  ExplicitOracle o(zoo("point"), 1);
  IndicatorOracle ind(o, [](Label) { return true; });
  EXPECT_THROW(estimate_indicator_additive(ind, 0.0, 0.1), PreconditionViolation);
  EXPECT_THROW(estimate_indicator_additive(ind, 0.1, 0.5), PreconditionViolation);
}

TEST(Conditional, BudgetRule) {
  ExplicitOracle o(zoo("uniform", {{"n", "4"}}), 1);
  ConditionalOracle c(o, [](Label) { return true; }, 1.0 / 3.0);
  EXPECT_EQ(c.slack(), 14u);
  EXPECT_EQ(c.budget_for(1), 60u);
  EXPECT_EQ(c.budget_for(10), 96u);
  EXPECT_THROW(ConditionalOracle(o, [](Label) { return true; }, 0.5), std::invalid_argument);
}

TEST(Conditional, WholeSupportNeverCrashes) {
  ExplicitOracle o(zoo("zipf", {{"n", "30"}, {"s", "1"}}), 2);
  ConditionalOracle c(o, [](Label) { return true; }, 0.1);
  for (int i = 0; i < 1000; ++i) ASSERT_TRUE(conditional_draw(c).has_value());
  EXPECT_EQ(c.base_draws(), 1000u);
  EXPECT_EQ(c.served(), 1000u);
  EXPECT_FALSE(c.crashed());
}

TEST(Conditional, EmptySetCrashesAtBudget) {
  ExplicitOracle o(zoo("uniform", {{"n", "4"}}), 3);
  ConditionalOracle c(o, [](Label) { return false; }, 1.0 / 3.0);
  EXPECT_FALSE(conditional_draw(c).has_value());
  EXPECT_TRUE(c.crashed());
  EXPECT_EQ(c.base_draws(), 60u);
  EXPECT_FALSE(conditional_draw(c).has_value());
  EXPECT_EQ(o.drawn(), 60u);
}

namespace {

// Chi-square goodness of fit of label counts against masses; returns the p-value.
double chi_square_p(const std::map<Label, std::uint64_t>& counts, const std::map<Label, double>& masses) {
  double n = 0, stat = 0;
  for (const auto& [l, c] : counts) n += double(c);
  for (const auto& [l, p] : masses) {
    const double expect = n * p;
    const double seen = counts.count(l) ? double(counts.at(l)) : 0.0;
    stat += (seen - expect) * (seen - expect) / expect;
  }
  boost::math::chi_squared chi(double(masses.size() - 1));
  return boost::math::cdf(boost::math::complement(chi, stat));
}

}  // namespace

TEST(Conditional, OutputFollowsConditionalLaw) {
  // A = {0..4} with masses 0.05, 0.1, 0.15, 0.2, 0.1; mu(A) = 0.6.
  const auto d = ExplicitDistribution::from_masses({0.05, 0.1, 0.15, 0.2, 0.1, 0.25, 0.15});
  const std::map<Label, double> target = {{0, 0.05 / 0.6}, {1, 0.1 / 0.6}, {2, 0.15 / 0.6}, {3, 0.2 / 0.6}, {4, 0.1 / 0.6}};
  auto in_a = [](Label x) { return x < 5; };

  ExplicitOracle o1(d, 41);
  ConditionalOracle one(o1, in_a, 0.1);
  std::map<Label, std::uint64_t> c1;
  for (int i = 0; i < 100000; ++i) {
    const auto l = one.request();
    ASSERT_TRUE(l.has_value());
    ASSERT_TRUE(in_a(*l));
    ++c1[*l];
  }
  EXPECT_GT(chi_square_p(c1, target), 1e-3);

  ExplicitOracle o2(d, 42);
  ConditionalOracle batch(o2, in_a, 0.1);
  const auto h = batch.request_batch(100000);
  ASSERT_TRUE(h.has_value());
  std::map<Label, std::uint64_t> c2;
  for (const auto& [l, x] : *h) c2[l] += x;
  EXPECT_GT(chi_square_p(c2, target), 1e-3);
  // The batched path charges the base oracle for the rejected draws too.
  EXPECT_GT(o2.drawn(), 100000u * 3 / 2);
  EXPECT_EQ(batch.served(), 100000u);
}

TEST(Conditional, CrashRateAtSixTenths) {
  const auto d = ExplicitDistribution::from_masses({0.2, 0.2, 0.2, 0.4});
  const auto table = std::make_shared<const SamplingTable>(d);
  std::uint64_t crashes = 0;
  const int trials = 2000;
  for (int i = 0; i < trials; ++i) {
    ExplicitOracle o(table, derive_seed(43, i));
    ConditionalOracle c(o, [](Label x) { return x < 3; }, 0.1);
    crashes += !c.request_batch(1000).has_value();
  }
  EXPECT_LE(double(crashes) / trials, 0.1 + binomial_margin(0.1, trials));
}

TEST(Conditional, SourceThrowsOnCrash) {
  ExplicitOracle o(zoo("uniform", {{"n", "4"}}), 3);
  ConditionalOracle c(o, [](Label) { return false; }, 0.25);
  ConditionalSource s(c);
  EXPECT_THROW(s.draw(), RejectionCrash);
}
