#include <gtest/gtest.h>

#include "checks.hpp"
#include "cnorm/cnorm.hpp"
#include "test_support.hpp"

using namespace cnorm;

namespace {

CollisionTally tally_of(const std::vector<Label>& s) {
  CollisionTally t;
  for (Label l : s) t.ingest(l);
  return t;
}

// Reference stopping rule: one draw at a time until k pairs.
std::uint64_t stop_one_at_a_time(SampleOracle& o, Count128 k) {
  CollisionTally t;
  while (t.s2() < k) t.ingest(o.draw());
  return t.m();
}

}  // namespace

TEST(Tally, SmallStreams) {
  const auto t = tally_of({7, 9, 7, 7});
  EXPECT_EQ(t.m(), 4u);
  EXPECT_TRUE(t.s2() == 3);
  EXPECT_TRUE(t.s3() == 1);
  const auto u = tally_of({1, 2, 3});
  EXPECT_TRUE(u.s2() == 0);
  EXPECT_TRUE(u.s3() == 0);
  EXPECT_EQ(u.count(1), 1u);
  EXPECT_EQ(u.count(42), 0u);
}

TEST(Tally, AgreesWithBruteForceScans) {
  const auto o = checks::tally_equivalence(100, 7);
  EXPECT_TRUE(o.pass) << o.first_failure;
  EXPECT_TRUE(checks::tally_equivalence(100, 8).pass);
}

TEST(Tally, BulkIngestMatchesRepeats) {
  CollisionTally a, b;
  a.ingest(5, 3);
  a.ingest(6, 1);
  a.ingest(5, 4);
  for (int i = 0; i < 3; ++i) b.ingest(5);
  b.ingest(6);
  for (int i = 0; i < 4; ++i) b.ingest(5);
  EXPECT_TRUE(a.s2() == b.s2());
  EXPECT_TRUE(a.s3() == b.s3());
  EXPECT_TRUE(a.s2() == choose2(7));
  EXPECT_TRUE(a.s3() == choose3(7));
  a.ingest(9, 0);
  EXPECT_EQ(a.m(), 8u);
}

TEST(Tally, ChooseHelpers) {
  EXPECT_TRUE(choose2(0) == 0);
  EXPECT_TRUE(choose2(1) == 0);
  EXPECT_TRUE(choose2(5) == 10);
  EXPECT_TRUE(choose3(2) == 0);
  EXPECT_TRUE(choose3(6) == 20);
  EXPECT_DOUBLE_EQ(binom2(20), 190.0);
  EXPECT_DOUBLE_EQ(binom3(4), 4.0);
  // 2^40 draws of one label stay exact in 128 bits.
  const std::uint64_t big = std::uint64_t(1) << 40;
  EXPECT_TRUE(choose3(big) == Count128(big) * (big - 1) * (big - 2) / 6);
}

TEST(Oracle, PointMassStopsAtFiveForTenPairs) {
  ExplicitOracle o(zoo("point"), 1);
  CollisionTally t;
  o.extend_until_pairs(t, 10);
  EXPECT_EQ(t.m(), 5u);
  EXPECT_TRUE(t.s2() == 10);
  EXPECT_EQ(o.drawn(), 5u);
}

TEST(Oracle, BatchedStoppingMatchesOneAtATimeInLaw) {
  const auto d = zoo("uniform", {{"n", "16"}});
  const auto table = std::make_shared<const SamplingTable>(d);
  const int trials = 4000;
  std::vector<double> batched, single;
  for (int i = 0; i < trials; ++i) {
    ExplicitOracle a(table, derive_seed(11, i)), b(table, derive_seed(12, i));
    CollisionTally t;
    a.extend_until_pairs(t, 40);
    ASSERT_TRUE(t.s2() >= 40);
    ASSERT_EQ(a.drawn(), t.m());
    batched.push_back(double(t.m()));
    single.push_back(double(stop_one_at_a_time(b, 40)));
  }
  const double gap = mean_of(batched) - mean_of(single);
  const double se = std::hypot(standard_error(batched), standard_error(single));
  EXPECT_LE(std::abs(gap), 4.0 * se) << mean_of(batched) << " vs " << mean_of(single);
  EXPECT_NEAR(stddev_of(batched) / stddev_of(single), 1.0, 0.1);
}

TEST(Oracle, BatchedStoppingIsMinimal) {
  // Removing any one sample of the final label must leave fewer than k pairs.
  const auto d = zoo("zipf", {{"n", "50"}, {"s", "1"}});
  for (int i = 0; i < 200; ++i) {
    ExplicitOracle o(d, derive_seed(13, i));
    CollisionTally t;
    const Count128 k = 5 + i % 30;
    o.extend_until_pairs(t, k);
    EXPECT_TRUE(t.s2() >= k);
    // The last draw created count(last) - 1 new pairs; some label must have
    // been the last and dropping it goes below k.
    bool some_label_is_last = false;
    t.counts().for_each([&](Label, std::uint64_t c) {
      if (c >= 1 && t.s2() - (c - 1) < k) some_label_is_last = true;
    });
    EXPECT_TRUE(some_label_is_last);
  }
}

TEST(Oracle, ExpectedCollisionCount) {
  // E[S_20] on uniform(4) is C(20,2)/4 = 47.5.
  const auto d = zoo("uniform", {{"n", "4"}});
  std::vector<double> v;
  for (int i = 0; i < 10000; ++i) {
    ExplicitOracle o(d, derive_seed(14, i));
    v.push_back(to_double(detail::sum_pairs(o.draw_counts(20))));
  }
  EXPECT_TRUE(check_mean(v, 47.5).pass) << mean_of(v);
}

TEST(Oracle, DrawCountsMatchMasses) {
  const auto d = ExplicitDistribution::from_masses({0.5, 0.25, 0.125, 0.125});
  ExplicitOracle o(d, 3);
  const std::uint64_t m = 400000;
  std::map<Label, std::uint64_t> c;
  for (const auto& [l, x] : o.draw_counts(m)) c[l] += x;
  EXPECT_EQ(o.drawn(), m);
  for (const auto& e : d.entries()) {
    const double f = double(c[e.label]) / double(m);
    EXPECT_NEAR(f, e.mass, 4.0 * std::sqrt(e.mass * (1 - e.mass) / double(m)));
  }
}

TEST(Oracle, SameSeedSameDraws) {
  const auto d = zoo("zipf", {{"n", "100"}, {"s", "1"}});
  ExplicitOracle a(d, 99), b(d, 99), c(d, 100);
  std::vector<Label> x, y, z;
  for (int i = 0; i < 200; ++i) {
    x.push_back(a.draw());
    y.push_back(b.draw());
    z.push_back(c.draw());
  }
  EXPECT_EQ(x, y);
  EXPECT_NE(x, z);
  EXPECT_EQ(a.draw_counts(1000), b.draw_counts(1000));
}

TEST(Oracle, CapRaisesBudgetExceeded) {
  ExplicitOracle o(zoo("uniform", {{"n", "1000000"}}), 5);
  o.set_cap(100);
  CollisionTally t;
  EXPECT_THROW(o.extend_until_pairs(t, 1000), BudgetExceeded);
  EXPECT_LE(o.drawn(), 100u);
  ExplicitOracle p(zoo("uniform", {{"n", "4"}}), 5);
  p.set_cap(10);
  EXPECT_THROW(p.draw_counts(11), BudgetExceeded);
  EXPECT_NO_THROW(p.draw_counts(10));
}

TEST(Oracle, ScopedCapRestores) {
  ExplicitOracle o(zoo("uniform", {{"n", "4"}}), 5);
  {
    ScopedCap cap(o, 3);
    EXPECT_THROW(o.draw_counts(4), BudgetExceeded);
  }
  EXPECT_NO_THROW(o.draw_counts(1000));
}

TEST(Oracle, HardLimitAppliesWithoutCap) {
  ExplicitOracle o(zoo("point"), 1);
  EXPECT_THROW(o.draw_counts(kHardDrawLimit + 1), BudgetExceeded);
}

TEST(Oracle, EstimatorSampleAccounting) {
  const auto d = zoo("uniform", {{"n", "16"}});
  ExplicitOracle o(d, 21);
  o.draw_counts(17);
  const auto before = o.drawn();
  const auto r = estimate_l2_base(o, 0.25, 0.25, std::nullopt, 1e-4);
  EXPECT_EQ(r.samples, o.drawn() - before);
  const auto before2 = o.drawn();
  const auto s = estimate_l2_top_level(o, 0.25, 0.25, 1e-6);
  EXPECT_EQ(s.samples, o.drawn() - before2);
}
