#include <gtest/gtest.h>

#include "cnorm/cnorm.hpp"

using namespace cnorm;

namespace {
ExplicitDistribution masses(std::vector<double> m) { return ExplicitDistribution::from_masses(m); }
}  // namespace

TEST(Skewed, PointMassExample) {
  const auto nu = build_skewed_perturbation(zoo("point"), 0.001);
  EXPECT_NEAR(exact_l2_sq(nu), 0.9802, 1e-12);
  EXPECT_LT(exact_l2_sq(nu), 1.0 - 2.25 * 0.001);
  EXPECT_NEAR(tv_distance(zoo("point"), nu), 0.01, 1e-15);
}

TEST(Skewed, TvIsMovedMass) {
  for (const char* spec : {"masses:p=0.5/0.3/0.2", "masses:p=0.75/0.25", "two_level:n=50,heavy_mass=0.5"}) {
    const auto mu = parse_dist_spec(spec);
    const double eps = 1e-3;
    const auto nu = build_skewed_perturbation(mu, eps);
    EXPECT_NEAR(tv_distance(mu, nu), 10 * eps * std::sqrt(exact_l2_sq(mu)), 1e-15) << spec;
    EXPECT_LT(exact_l2_sq(nu), (1 - 2.25 * eps) * exact_l2_sq(mu)) << spec;
  }
}

TEST(Skewed, Preconditions) {
  EXPECT_THROW(build_skewed_perturbation(zoo("uniform", {{"n", "1000"}}), 1e-3), PreconditionViolation);
  EXPECT_THROW(build_skewed_perturbation(zoo("point"), 0.01), PreconditionViolation);
}

TEST(Lambda, IntervalsAreDisjoint) {
  for (std::size_t i = 0; i < kLambdaIntervals.size(); ++i) {
    const auto& a = kLambdaIntervals[i];
    // K_lambda is where |lambda x + lambda^2| <= 5.
    EXPECT_DOUBLE_EQ(std::abs(a.lambda * a.lo + a.lambda * a.lambda), 5.0);
    EXPECT_DOUBLE_EQ(std::abs(a.lambda * a.hi + a.lambda * a.lambda), 5.0);
    for (std::size_t j = i + 1; j < kLambdaIntervals.size(); ++j) {
      const auto& b = kLambdaIntervals[j];
      EXPECT_TRUE(a.hi < b.lo || b.hi < a.lo) << a.lambda << " vs " << b.lambda;
    }
  }
}

TEST(Lambda, EqualPairsDeviateAlways) {
  const auto base = zoo("paired_flat", {{"j", "8"}});
  const auto p = lambda_probabilities(base, 1e-5, LambdaMode::exact);
  EXPECT_EQ(p[1], 1.0);
  EXPECT_EQ(p[2], 1.0);
  EXPECT_EQ(p[3], 1.0);
  const auto e = PerturbationEnsemble::select(base, 1e-5);
  EXPECT_GE(e.lambda(), 6.0);
  EXPECT_EQ(exact_deviation_probability(e), 1.0);
  EXPECT_EQ(deviation_experiment(e, 1000, 3), 1.0);
}

TEST(Lambda, SelectedProbabilityIsAtLeastThreeQuarters) {
  for (const char* spec : {"paired_random:j=10,seed=3", "paired_random:j=10,seed=4", "paired_geometric:j=10"}) {
    const auto base = parse_dist_spec(spec);
    const auto e = PerturbationEnsemble::select(base, 1e-5);
    EXPECT_GE(exact_deviation_probability(e), 0.75) << spec;
    const auto p = lambda_probabilities(base, 1e-5, LambdaMode::exact);
    EXPECT_GE(*std::max_element(p.begin(), p.end()), 0.75) << spec;
  }
}

TEST(Ensemble, TwoPointExample) {
  const PerturbationEnsemble e(masses({0.5, 0.5}), 1e-4, 2.0);
  EXPECT_NEAR(e.eps_hat(), 0.02, 1e-15);
  const auto nu = e.with_signs({1});
  EXPECT_NEAR(nu.mass_of(0), 0.49, 1e-15);
  EXPECT_NEAR(nu.mass_of(1), 0.51, 1e-15);
  EXPECT_NEAR(exact_l2_sq(nu), 0.5002, 1e-15);
  EXPECT_NEAR(exact_l2_sq(nu) - 0.5, e.predicted_shift({1}), 1e-15);
}

TEST(Ensemble, MirrorAndConservation) {
  const auto e = PerturbationEnsemble::select(parse_dist_spec("paired_random:j=10,seed=3"), 1e-4);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto p = e.draw(s);
    std::vector<int> flipped = p.signs;
    for (int& x : flipped) x = -x;
    const auto mirror = e.with_signs(flipped);
    CompensatedSum total;
    for (const auto& x : p.nu.entries()) {
      EXPECT_GE(x.mass, 0.0);
      total.add(x.mass);
    }
    EXPECT_NEAR(total.value(), 1.0, 1e-12);
    EXPECT_NEAR(exact_l2_sq(p.nu) - exact_l2_sq(e.base()), e.predicted_shift(p.signs), 1e-14);
    // Flipping every sign reverses the linear term and keeps the quadratic one.
    const double quad = (e.predicted_shift(p.signs) + e.predicted_shift(flipped)) / 2;
    EXPECT_NEAR(exact_l2_sq(p.nu) + exact_l2_sq(mirror) - 2 * exact_l2_sq(e.base()), 2 * quad, 1e-14);
  }
}

TEST(Ensemble, EqualPairsMirrorKeepsNorm) {
  const auto e = PerturbationEnsemble::select(zoo("paired_flat", {{"j", "8"}}), 1e-4);
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto p = e.draw(s);
    for (int& x : p.signs) x = -x;
    EXPECT_NEAR(exact_l2_sq(e.with_signs(p.signs)), exact_l2_sq(p.nu), 1e-15);
  }
}

TEST(Ensemble, Preconditions) {
  EXPECT_THROW(PerturbationEnsemble(masses({0.5, 0.5}), 1.0 / 7000, 2.0), PreconditionViolation);
  EXPECT_THROW(PerturbationEnsemble(masses({0.8, 0.2}), 1e-5, 2.0), PreconditionViolation);
  EXPECT_THROW(deviation_experiment(PerturbationEnsemble(masses({0.5, 0.5}), 1e-5, 2.0), 0, 1), PreconditionViolation);
  EXPECT_FALSE(is_pairing_compatible(masses({0.2, 0.3, 0.5})));
  EXPECT_TRUE(is_pairing_compatible(zoo("paired_geometric", {{"j", "10"}})));
}

TEST(Ensemble, MonteCarloMatchesEnumeration) {
  const auto e = PerturbationEnsemble::select(parse_dist_spec("paired_random:j=10,seed=5"), 1e-5);
  const double exact = exact_deviation_probability(e);
  const double mc = deviation_experiment(e, 4000, 9);
  EXPECT_LE(std::abs(mc - exact), 3 * std::sqrt(exact * (1 - exact) / 4000) + 1e-12);
  const double lam_mc = ensemble_select_lambda(e.base(), 1e-5, LambdaMode::monte_carlo, 20000, 4);
  const auto p = lambda_probabilities(e.base(), 1e-5, LambdaMode::exact);
  EXPECT_GE(p[std::size_t(std::find_if(kLambdaIntervals.begin(), kLambdaIntervals.end(),
                                       [&](const LambdaInterval& x) { return x.lambda == lam_mc; }) -
                          kLambdaIntervals.begin())],
            0.7);
}

TEST(PairReduce, SplitExamples) {
  // Ratio exactly sqrt 2 inside every pair: nothing is erased.
  std::vector<double> m;
  for (int j = 0; j < 6; ++j) {
    const double a = std::pow(0.5, j);
    m.push_back(a * std::sqrt(2.0));
    m.push_back(a);
  }
  CompensatedSum z;
  for (double x : m) z.add(x);
  for (double& x : m) x /= z.value();
  EXPECT_TRUE(split_pairs(masses(m)).b1.empty());

  const auto s = split_pairs(masses({0.4, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1}));
  // The heavy pair breaks the ratio and the unpartnered last label is erased too.
  ASSERT_EQ(s.b1.size(), 2u);
  EXPECT_EQ(s.b1[0], 0u);
  EXPECT_EQ(s.b1[1], 6u);
  ASSERT_EQ(s.b2.size(), 1u);
  EXPECT_EQ(s.b2[0], 1u);
}

TEST(PairReduce, PreconditionAndSweep) {
  EXPECT_THROW(pair_and_reduce(masses({0.4, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1})), PreconditionViolation);
  int checked = 0;
  for (const auto& spec : reference_specs()) {
    const auto d = parse_dist_spec(spec);
    const double norm = std::sqrt(exact_l2_sq(d));
    bool small = true;
    for (const auto& e : d.entries()) small = small && e.mass < norm / 8;
    if (!small) continue;
    ++checked;
    const auto r = pair_and_reduce(d);
    EXPECT_GE(r.mass_a, 0.25) << spec;
    EXPECT_GE(r.squares_a, 15.0 / 16.0 * r.l2) << spec;
    EXPECT_TRUE(is_pairing_compatible(r.restricted)) << spec;
  }
  EXPECT_GE(checked, 5);
}

TEST(Distinguish, NoSamplesNoInformation) {
  const auto base = parse_dist_spec("paired_random:j=10,seed=3");
  const auto e = PerturbationEnsemble::select(base, 1e-5);
  const auto r = distinguish_experiment(base, e, 0.0, 500, 1);
  EXPECT_EQ(r.success, 0.5);
  EXPECT_EQ(r.advantage, 0.0);
}

TEST(Distinguish, BudgetFormula) {
  EXPECT_DOUBLE_EQ(distinguish_budget(1e-5, 0.01), 1.0 / (1e4 * 1e-5 * 0.1));
  EXPECT_DOUBLE_EQ(distinguish_budget(1e-5, 0.01, 0.5), 0.5 / (1e4 * 1e-5 * 0.1));
}

TEST(Distinguish, SmallAdvantageAtBudget) {
  const auto base = parse_dist_spec("paired_random:j=10,seed=3");
  const auto e = PerturbationEnsemble::select(base, 1e-5);
  const double q = distinguish_budget(1e-5, exact_l2_sq(base));
  const auto r = distinguish_experiment(base, e, q, 400, 2);
  EXPECT_LE(r.advantage, 1.0 / 12 + 3 * 0.5 / std::sqrt(800.0));
  const auto fixed = distinguish_experiment(base, e, q, 400, 2, SampleCountMode::fixed);
  EXPECT_LE(fixed.advantage, 1.0 / 12 + 3 * 0.5 / std::sqrt(800.0));
}
