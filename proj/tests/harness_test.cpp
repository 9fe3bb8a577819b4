#include <gtest/gtest.h>

#include <sstream>

#include "cnorm/cnorm.hpp"

using namespace cnorm;

namespace {

ExperimentConfig base_config(std::uint64_t trials) {
  ExperimentConfig c;
  c.dist = "zipf:n=100,s=1";
  c.estimator.name = "base";
  c.estimator.params = {0.25, 0.25, 1e-4, {}};
  c.trials = trials;
  c.seed = 77;
  return c;
}

std::string csv_of(const std::vector<TrialRow>& rows) {
  std::ostringstream os;
  write_rows_csv(os, rows);
  return os.str();
}

}  // namespace

TEST(Harness, SingleTrialSummaryIsTheRow) {
  const auto r = run_experiment(base_config(1));
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.summary.mean, r.rows[0].value);
  EXPECT_EQ(r.summary.median, r.rows[0].value);
  EXPECT_EQ(r.summary.median_samples, double(r.rows[0].samples));
  EXPECT_EQ(r.rows[0].seed, derive_seed(77, 0));
}

TEST(Harness, ThreadsDoNotChangeRows) {
  auto c = base_config(12);
  const std::string one = csv_of(run_experiment(c).rows);
  c.threads = 3;
  EXPECT_EQ(csv_of(run_experiment(c).rows), one);
  EXPECT_EQ(csv_of(run_experiment(c).rows), one);
  c.seed = 78;
  EXPECT_NE(csv_of(run_experiment(c).rows), one);
}

TEST(Harness, CsvRoundTrip) {
  auto rows = run_experiment(base_config(5)).rows;
  rows[2].status = "budget_exceeded";
  rows[2].branch = "";
  std::istringstream is(csv_of(rows));
  const auto back = read_rows_csv(is);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].trial, rows[i].trial);
    EXPECT_EQ(back[i].seed, rows[i].seed);
    EXPECT_EQ(back[i].value, rows[i].value);
    EXPECT_EQ(back[i].samples, rows[i].samples);
    EXPECT_EQ(back[i].branch, rows[i].branch);
    EXPECT_EQ(back[i].status, rows[i].status);
  }
  std::istringstream bad("trial,value\n1,2\n");
  EXPECT_THROW(read_rows_csv(bad), std::runtime_error);
}

TEST(Harness, SummaryRecomputesFromRows) {
  const auto r = run_experiment(base_config(20));
  std::istringstream is(csv_of(r.rows));
  const auto s = summarize(read_rows_csv(is), r.target, 0.25);
  EXPECT_EQ(s.mean, r.summary.mean);
  EXPECT_EQ(s.median, r.summary.median);
  EXPECT_EQ(s.in_range, r.summary.in_range);
  EXPECT_EQ(s.median_samples, r.summary.median_samples);
  EXPECT_DOUBLE_EQ(r.target.value, exact_l2_sq(parse_dist_spec("zipf:n=100,s=1")));
}

TEST(Harness, FailedRowsAreExcluded) {
  std::vector<TrialRow> rows(3);
  rows[0].value = 1.0;
  rows[1].value = 3.0;
  rows[2].status = "crash";
  const auto s = summarize(rows, {2.0, TargetRule::relative}, 0.6);
  EXPECT_EQ(s.trials, 3u);
  EXPECT_EQ(s.ok, 2u);
  EXPECT_EQ(s.mean, 2.0);
  EXPECT_EQ(s.in_range, 1.0);
}

TEST(Harness, CapTurnsIntoStatus) {
  auto c = base_config(2);
  c.estimator.params.cap = 50;
  const auto r = run_experiment(c);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.status, "budget_exceeded");
    EXPECT_LE(row.samples, 50u);
  }
  EXPECT_EQ(r.summary.ok, 0u);
}

TEST(Harness, RejectsBadConfigs) {
  auto c = base_config(0);
  EXPECT_THROW(run_experiment(c), PreconditionViolation);
  c = base_config(1);
  c.format = "xml";
  EXPECT_THROW(run_experiment(c), PreconditionViolation);
  c = base_config(1);
  c.estimator.name = "nope";
  EXPECT_THROW(run_experiment(c), PreconditionViolation);
  EXPECT_THROW(parse_dist_spec("uniform:n=0"), SpecError);
  EXPECT_THROW(parse_dist_spec("nosuch"), SpecError);
  EXPECT_THROW(parse_dist_spec("uniform:n=4,bogus=1"), SpecError);
}

TEST(Harness, JsonlHasNullForNan) {
  std::vector<TrialRow> rows(1);
  rows[0].status = "crash";
  std::ostringstream os;
  write_rows_jsonl(os, rows);
  EXPECT_NE(os.str().find("\"value\":null"), std::string::npos);
}
