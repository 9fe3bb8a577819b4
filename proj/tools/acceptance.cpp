#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"

#include "checks.hpp"
#include "cnorm/cnorm.hpp"

using namespace cnorm;
using checks::fmt;

namespace {

// Pinned settings for every statistical run below.
constexpr std::uint64_t kUnbiasedTrials = 10000;
constexpr std::uint64_t kAccuracyTrials = 500;
constexpr std::uint64_t kAdviceTrials = 500;
constexpr std::uint64_t kShapeTrials = 15;
constexpr std::uint64_t kPairTrials = 9;
constexpr std::uint64_t kDeviationDraws = 1000;
constexpr std::uint64_t kDistinguishTrials = 1000;
constexpr std::uint64_t kIndicatorRuns = 10000;
constexpr std::uint64_t kConditionalTrials = 10000;
constexpr std::uint64_t kConditionalRequests = 1000;
constexpr std::uint64_t kMedianReps = 20000;

struct Line {
  bool pass = true;
  std::vector<std::string> notes;

  void note(const std::string& s) { notes.push_back(s); }
  void require(bool ok, const std::string& s) {
    pass = pass && ok;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + s);
  }
};

ExperimentResult run(const std::string& dist, const std::string& estimator, double eps, double eta, double scale,
                     std::uint64_t trials, std::uint64_t seed, unsigned threads) {
  ExperimentConfig c;
  c.dist = dist;
  c.estimator.name = estimator;
  c.estimator.params.eps = eps;
  c.estimator.params.eta = eta;
  c.estimator.params.scale = scale;
  c.trials = trials;
  c.seed = seed;
  c.threads = threads;
  return run_experiment(c);
}

std::uint64_t failed_rows(const ExperimentResult& r) {
  std::uint64_t n = 0;
  for (const auto& row : r.rows) n += row.status != "ok";
  return n;
}

Line criterion1() {
  Line l;
  const auto o = checks::identity_suite();
  l.require(o.pass, std::to_string(o.checked) + " identity and lemma checks over " +
                        std::to_string(reference_specs().size()) + " reference distributions and " +
                        std::to_string(checks::partition_instances().size()) + " partition instances" +
                        (o.pass ? "" : ": " + o.first_failure));
  return l;
}

Line criterion2() {
  Line l;
  const auto o = checks::tally_equivalence(100, 2024);
  l.require(o.pass, std::to_string(o.checked) + " tally comparisons on 100 streams" + (o.pass ? "" : ": " + o.first_failure));
  return l;
}

Line criterion3(unsigned threads) {
  Line l;
  std::uint64_t seed = 300;
  auto mean_line = [&](const std::string& what, const EstimatorOptions& opt, const std::string& dist) {
    ExperimentConfig c;
    c.dist = dist;
    c.estimator = opt;
    c.trials = kUnbiasedTrials;
    c.seed = ++seed;
    c.threads = threads;
    const auto r = run_experiment(c);
    std::vector<double> v;
    for (const auto& row : r.rows)
      if (row.status == "ok") v.push_back(row.value);
    const MeanCheck m = check_mean(v, r.target.value);
    const std::uint64_t bad = failed_rows(r);
    l.require(m.pass && bad == 0, what + " on " + dist + ": mean " + fmt(m.mean) + " target " + fmt(m.target) + " z " +
                                      fmt(m.z) + (bad ? ", " + std::to_string(bad) + " failed trials" : ""));
  };
  const std::vector<std::string> l2_dists = {"uniform:n=16", "zipf:n=100,s=1", "two_level:n=64,heavy_mass=0.3"};
  for (const auto& d : l2_dists) {
    EstimatorOptions o;
    o.name = "base";
    o.params = {0.25, 0.25, 1e-4, {}};
    mean_line("base, no advice", o, d);
    o.advice = exact_t(parse_dist_spec(d));
    mean_line("base, advice t", o, d);
  }
  for (const auto& d : {"uniform:n=8", "zipf:n=100,s=1", "two_level:n=64,heavy_mass=0.3"}) {
    EstimatorOptions o;
    o.name = "l3";
    o.params = {0.1, 0.25, 1e-8, {}};
    mean_line("l3", o, d);
  }
  for (const auto& d : {"uniform:n=4", "zipf:n=100,s=1", "two_level:n=64,heavy_mass=0.3"}) {
    EstimatorOptions o;
    o.name = "l3_magnitude";
    o.params = {0.25, 0.25, 1e-9, {}};
    o.a = 0.25;
    mean_line("l3_magnitude a=0.25", o, d);
  }
  for (const auto& d : {"uniform:n=4", "masses:p=0.5/0.3/0.2", "uniform:n=16"}) {
    EstimatorOptions o;
    o.name = "top_level";
    o.params = {0.25, 0.25, 1e-6, {}};
    mean_line("top_level", o, d);
  }
  return l;
}

Line criterion4(unsigned threads) {
  Line l;
  std::uint64_t seed = 400;
  for (const auto& d : {"uniform:n=16", "uniform:n=256", "two_level:n=64,heavy_mass=0.3", "zipf:n=100,s=1"}) {
    const auto r = run(d, "top_level", 0.25, 1.0 / 3.0, 1e-4, kAccuracyTrials, ++seed, threads);
    std::uint64_t hits = 0;
    for (const auto& row : r.rows) hits += row.status == "ok" && in_range(row.value, r.target, 0.25);
    const auto f = check_frequency_at_least(hits, kAccuracyTrials, 2.0 / 3.0);
    l.require(f.pass, std::string(d) + ": " + std::to_string(hits) + "/" + std::to_string(kAccuracyTrials) +
                          " within (1 +- 0.25), need " + fmt(f.need));
  }
  return l;
}

Line criterion5(unsigned threads) {
  Line l;
  struct Case {
    const char* finder;
    const char* dist;
    double eps, scale;
  };
  const double eta = 0.25;
  const Case cases[] = {
      {"advice_small", "two_level:n=64,heavy_mass=0.3", 0.1, 1e-6},
      {"advice_small", "uniform:n=16", 0.1, 1e-6},
      {"advice_medium", "uniform:n=256", 0.05, 1e-6},
      {"advice_medium", "tilted:n=256,tilt=0.5", 0.05, 1e-6},
      {"advice_large", "masses:p=0.9/0.05/0.05", 0.25, 3e-16},
      {"advice_large", "masses:p=0.51/0.49", 0.25, 3e-16},
  };
  std::uint64_t seed = 500;
  for (const auto& c : cases) {
    const auto r = run(c.dist, c.finder, c.eps, eta, c.scale, kAdviceTrials, ++seed, threads);
    std::uint64_t hits = 0;
    for (const auto& row : r.rows) hits += row.status == "ok" && row.value >= r.target.value;
    const auto f = check_frequency_at_least(hits, kAdviceTrials, 1.0 - eta);
    l.require(f.pass, std::string(c.finder) + " on " + c.dist + " (eps " + fmt(c.eps) + ", scale " + fmt(c.scale) +
                          "): r >= t in " + std::to_string(hits) + "/" + std::to_string(kAdviceTrials) + ", need " +
                          fmt(f.need) + ", t " + fmt(r.target.value));
  }
  // Not counted: on a large-norm distribution without a dominant element the
  // large-norm finder exhausts the hard draw limit at any usable scale.
  const auto r = run("two_level:n=50,heavy_mass=0.5", "advice_large", 0.25, eta, 3e-16, 3, 599, threads);
  std::map<std::string, int> statuses;
  for (const auto& row : r.rows) ++statuses[row.status];
  std::string s;
  for (const auto& [k, v] : statuses) s += " " + k + "=" + std::to_string(v);
  l.note("info advice_large on two_level:n=50,heavy_mass=0.5 at scale 3e-16, 3 trials:" + s);
  return l;
}

Line criterion6(unsigned threads) {
  Line l;
  std::vector<double> med;
  std::uint64_t seed = 600;
  for (int n : {64, 256, 1024}) {
    const auto r = run("uniform:n=" + std::to_string(n), "top_level", 0.25, 1.0 / 3.0, 1e-6, kShapeTrials, ++seed, threads);
    med.push_back(r.summary.median_samples);
    l.note("uniform(" + std::to_string(n) + "): median samples " + fmt(r.summary.median_samples));
  }
  for (std::size_t i = 1; i < med.size(); ++i) {
    const double ratio = med[i] / med[i - 1];
    l.require(ratio >= 1.0 && ratio <= 4.0, "consecutive median ratio " + fmt(ratio) + " in [1, 4] (sqrt(4) = 2 within a factor 2)");
  }

  // Same norm, t ratio near 10, in the regime where advice drives the final
  // stage. Total samples are compared as the criterion states; the final-stage
  // ratio is reported alongside.
  const std::string hard = "two_level:n=10500,heavy_mass=0.023", easy = "two_level:n=1960,heavy_mass=0.011";
  const double eps = 0.008, eta = 0.25, scale = 1e-6;
  std::vector<double> total[2], final_stage[2];
  const std::string pair[2] = {hard, easy};
  for (int k = 0; k < 2; ++k) {
    const ExplicitDistribution d = parse_dist_spec(pair[k]);
    const auto table = std::make_shared<const SamplingTable>(d);
    Procedures procs(scale);
    for (std::uint64_t i = 0; i < kPairTrials; ++i) {
      ExplicitOracle o(table, derive_seed(650 + k, i));
      try {
        const EstimateReport r = procs.l2_top_level(o, eps, eta);
        total[k].push_back(double(r.samples));
        final_stage[k].push_back(double(r.trace.back().samples));
      } catch (const std::exception& e) {
        l.note(pair[k] + " trial " + std::to_string(i) + ": " + e.what());
      }
    }
    const double norm = std::sqrt(exact_l2_sq(d));
    l.note(pair[k] + ": t " + fmt(exact_t(d)) + ", |mu|_2 " + fmt(norm));
  }
  if (total[0].empty() || total[1].empty()) {
    l.require(false, "matched pair produced no completed trials");
    return l;
  }
  const double ratio = median_of(total[0]) / median_of(total[1]);
  const double fin = median_of(final_stage[0]) / median_of(final_stage[1]);
  l.require(ratio >= 3.0 && ratio <= 30.0, "matched pair median total samples ratio " + fmt(ratio) + " in [3, 30]");
  l.note("final-stage (base estimator) median sample ratio " + fmt(fin));
  return l;
}

Line criterion7() {
  Line l;
  const ExplicitDistribution base = parse_dist_spec("paired_random:j=10,seed=3");
  const double eps = 1e-5;
  const auto e = PerturbationEnsemble::select(base, eps, LambdaMode::exact);
  const double exact = exact_deviation_probability(e);
  l.require(exact >= 0.75, "J=10, lambda " + fmt(e.lambda()) + ": enumerated deviation probability " + fmt(exact));
  const double mc = deviation_experiment(e, kDeviationDraws, 701);
  const double sigma = std::sqrt(exact * (1.0 - exact) / double(kDeviationDraws));
  l.require(std::abs(mc - exact) <= kTolerances.lower_bound_sigmas * sigma + 1e-12,
            "Monte-Carlo " + fmt(mc) + " vs enumerated " + fmt(exact) + ", sigma " + fmt(sigma));

  for (const char* spec : {"point", "masses:p=0.5/0.3/0.2", "masses:p=0.4/0.2/0.2/0.2"}) {
    const ExplicitDistribution mu = parse_dist_spec(spec);
    const double skew_eps = 1e-3;
    const ExplicitDistribution nu = build_skewed_perturbation(mu, skew_eps);
    const double a = exact_l2_sq(nu), b = (1.0 - 2.25 * skew_eps) * exact_l2_sq(mu);
    l.require(a < b, std::string("skewed ") + spec + ": |nu|^2 " + fmt(a) + " < " + fmt(b) + ", tv " + fmt(tv_distance(mu, nu)));
  }

  const double l2 = exact_l2_sq(base);
  const double q = distinguish_budget(eps, l2);
  const auto d = distinguish_experiment(base, e, q, kDistinguishTrials, 702);
  const double dsigma = 0.5 / std::sqrt(2.0 * double(kDistinguishTrials));
  l.require(d.advantage <= 1.0 / 12.0 + 3.0 * dsigma,
            "distinguisher at q = " + fmt(q) + ": advantage " + fmt(d.advantage) + " <= " + fmt(1.0 / 12.0 + 3.0 * dsigma));
  const auto big = distinguish_experiment(base, e, 2000.0 * q, 200, 703);
  l.note("info distinguisher at 2000 q: advantage " + fmt(big.advantage));
  return l;
}

Line criterion8() {
  Line l;
  {
    const ExplicitDistribution d = parse_dist_spec("masses:p=0.3/0.7");
    const auto table = std::make_shared<const SamplingTable>(d);
    const double eps = 0.05, eta = 0.1, p = 0.3;
    std::vector<double> v;
    std::uint64_t close = 0;
    for (std::uint64_t i = 0; i < kIndicatorRuns; ++i) {
      ExplicitOracle o(table, derive_seed(801, i));
      IndicatorOracle ind(o, [](Label x) { return x == 0; });
      const double x = estimate_indicator_additive(ind, eps, eta).value;
      v.push_back(x);
      close += std::abs(x - p) <= eps;
    }
    const MeanCheck m = check_mean(v, p);
    l.require(m.pass, "indicator p=0.3: mean " + fmt(m.mean) + " z " + fmt(m.z));
    const auto f = check_frequency_at_least(close, kIndicatorRuns, 1.0 - eta);
    l.require(f.pass, "indicator within +-0.05 in " + fmt(f.freq) + ", need " + fmt(f.need));
  }
  {
    const ExplicitDistribution d = parse_dist_spec("masses:p=0.2/0.2/0.2/0.1/0.1/0.1/0.1");
    const auto table = std::make_shared<const SamplingTable>(d);
    const double eta = 0.1;
    std::uint64_t crashes = 0;
    for (std::uint64_t i = 0; i < kConditionalTrials; ++i) {
      ExplicitOracle o(table, derive_seed(802, i));
      ConditionalOracle c(o, [](Label x) { return x < 3; }, eta);
      crashes += !c.request_batch(kConditionalRequests).has_value();
    }
    const double rate = double(crashes) / double(kConditionalTrials);
    const double allowed = eta + binomial_margin(eta, kConditionalTrials);
    l.require(rate <= allowed, "conditional, mu(A) = 0.6, " + std::to_string(kConditionalRequests) +
                                   " requests: crash rate " + fmt(rate) + " <= " + fmt(allowed));
  }
  {
    // Pareto(x_m = 1/3, alpha = 1.5), mean 1, infinite variance.
    const double alpha = 1.5, xm = 1.0 / 3.0, eta = 0.01;
    Philox rng(803);
    auto pareto = [&] { return xm * std::pow(1.0 - rng.uniform(), -1.0 / alpha); };
    std::vector<double> v;
    v.reserve(kMedianReps);
    for (std::uint64_t i = 0; i < kMedianReps; ++i) v.push_back(amplify_median(pareto, eta));
    const double inflation = mean_of(v) / 1.0;
    l.require(inflation <= kTolerances.median_inflation,
              "amplify_median on Pareto(1.5) at eta 0.01: E[median] / E[X] = " + fmt(inflation));
  }
  return l;
}

Line criterion9() {
  Line l;
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("cnorm_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  auto emit = [&](const std::string& estimator, const std::string& format, unsigned threads, const std::string& name) {
    ExperimentConfig c;
    c.dist = "zipf:n=100,s=1";
    c.estimator.name = estimator;
    c.estimator.params = {0.25, 0.25, estimator == "top_level" ? 1e-6 : 1e-4, {}};
    c.trials = 24;
    c.seed = 909;
    c.format = format;
    c.threads = threads;
    const std::string path = (dir / name).string();
    write_rows(path, format, run_experiment(c).rows);
    return checks::slurp(path);
  };
  for (const char* est : {"base", "top_level"})
    for (const char* fmt_name : {"csv", "jsonl"}) {
      const std::string tag = std::string(est) + "." + fmt_name;
      const std::string a = emit(est, fmt_name, 1, "a." + tag), b = emit(est, fmt_name, 1, "b." + tag),
                        c = emit(est, fmt_name, 2, "c." + tag);
      l.require(!a.empty() && a == b, tag + ": repeat run byte-identical (" + std::to_string(a.size()) + " bytes)");
      l.require(a == c, tag + ": two threads byte-identical to one");
    }
  fs::remove_all(dir);
  return l;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-9"};
  std::vector<int> only;
  std::vector<int> known;
  unsigned threads = 1;
  app.add_option("--only", only, "run just these criteria");
  app.add_option("--known-fail", known,
                 "criteria whose failure is documented; they still print FAIL but do not change the exit code");
  app.add_option("--threads", threads, "worker threads for the trial runs");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<int, std::function<Line()>>> all = {
      {1, criterion1},
      {2, criterion2},
      {3, [&] { return criterion3(threads); }},
      {4, [&] { return criterion4(threads); }},
      {5, [&] { return criterion5(threads); }},
      {6, [&] { return criterion6(threads); }},
      {7, criterion7},
      {8, criterion8},
      {9, criterion9},
  };
  const std::set<int> wanted(only.begin(), only.end()), documented(known.begin(), known.end());
  bool unexpected = false;
  for (const auto& [id, fn] : all) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Line l;
    try {
      l = fn();
    } catch (const std::exception& e) {
      l.require(false, std::string("threw: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %s (%.1f s)%s\n", id, l.pass ? "PASS" : "FAIL", secs,
                !l.pass && documented.count(id) ? " [documented]" : "");
    for (const auto& n : l.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
    if (!l.pass && !documented.count(id)) unexpected = true;
  }
  return unexpected ? 1 : 0;
}
