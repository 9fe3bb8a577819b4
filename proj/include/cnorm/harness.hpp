#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "distribution.hpp"
#include "finite_friendly.hpp"
#include "oracle.hpp"
#include "params.hpp"
#include "procedures.hpp"
#include "rng.hpp"
#include "stats.hpp"
#include "zoo.hpp"

namespace cnorm {

// How a trial's output is compared with the exact functional.
enum class TargetRule {
  relative,   // inside (1 +- eps) target
  dominates,  // at least the target (advice must upper-bound t)
  equals,     // exactly the target (accept/reject decisions)
  none,
};

struct EstimatorInfo {
  const char* name;
  const char* summary;
};

inline const std::vector<EstimatorInfo>& estimator_catalog() {
  static const std::vector<EstimatorInfo> catalog = {
      {"top_level", "unbiased |mu|_2^2 estimate with instance-optimal sample count"},
      {"bc", "stop after k collisions, k / C(M,2)"},
      {"base", "S_m / C(m,2) with m from a rough estimate and optional --advice"},
      {"moments", "base estimate gated by agreement with the stop-at-k estimate"},
      {"l3", "T_m / C(m,3)"},
      {"l3_amplified", "median of l3 runs"},
      {"l3_magnitude", "T_m / C(m,3) with m from a reference magnitude --a"},
      {"t_directly", "t from second and third norm estimates, accuracy --delta"},
      {"advice_small", "advice for small norms"},
      {"advice_medium", "advice for medium norms"},
      {"advice_large", "advice for large norms via a learned partition"},
      {"sum_squares", "upper estimate of (1/N) sum delta^2"},
      {"sum_cubes", "(8/N) sum of large empirical delta^3"},
      {"t_friendly", "upper bound on t for friendly distributions"},
      {"magnitude_test", "1 if the norm looks at most eps, 0 if at least 2 eps"},
  };
  return catalog;
}

struct EstimatorOptions {
  std::string name = "top_level";
  EstimatorParams params;
  L2Advice advice;                 // base only
  std::optional<double> a;         // l3_magnitude; defaults to eps
  std::optional<double> delta;     // t_directly; defaults to eps
};

inline EstimateReport run_estimator(SampleOracle& o, const EstimatorOptions& opt, std::uint64_t domain_size) {
  const auto& p = opt.params;
  Procedures procs(p.scale);
  const std::string& n = opt.name;
  if (n == "top_level") return procs.l2_top_level(o, p.eps, p.eta);
  if (n == "bc") return procs.l2_bc(o, std::min(p.eps, 0.5), p.eta);
  if (n == "base") return procs.l2_base(o, p.eps, p.eta, opt.advice);
  if (n == "moments") return procs.l2_moments(o, p.eps, p.eta);
  if (n == "l3") return procs.l3(o, p.eps, p.eta);
  if (n == "l3_amplified") return procs.l3_amplified(o, p.eps, p.eta);
  if (n == "l3_magnitude") return procs.l3_magnitude(o, opt.a.value_or(p.eps), p.eta);
  if (n == "t_directly") return procs.t_directly(o, opt.delta.value_or(p.eps), p.eta);
  if (n == "advice_small") return procs.find_advice_small(o, p.eps, p.eta);
  if (n == "advice_medium") return procs.find_advice_medium(o, p.eps, p.eta);
  if (n == "advice_large") return procs.find_advice_large(o, p.eps, p.eta);
  if (n == "sum_squares") return procs.sum_squares(o, domain_size, p.eps, p.eta);
  if (n == "sum_cubes") return procs.sum_cubes(o, domain_size, p.eta);
  if (n == "t_friendly") return procs.t_friendly(o, domain_size, p.eps, p.eta);
  if (n == "magnitude_test") return procs.test_l2_magnitude(o, p.eps, p.eta);
  throw PreconditionViolation("unknown estimator '" + n + "'");
}

struct Target {
  double value = std::numeric_limits<double>::quiet_NaN();
  TargetRule rule = TargetRule::none;
};

inline Target exact_target(const std::string& estimator, const ExplicitDistribution& d, double eps) {
  if (estimator == "top_level" || estimator == "bc" || estimator == "base" || estimator == "moments")
    return {exact_l2_sq(d), TargetRule::relative};
  if (estimator == "l3" || estimator == "l3_amplified" || estimator == "l3_magnitude")
    return {exact_l3_cube(d), TargetRule::relative};
  if (estimator == "t_directly" || estimator == "advice_small" || estimator == "advice_medium" ||
      estimator == "advice_large" || estimator == "t_friendly")
    return {exact_t(d), TargetRule::dominates};
  if (estimator == "sum_squares") {
    const DeltaSums s = delta_sums(delta_vector(d));
    return {s.squares / double(d.size()), TargetRule::dominates};
  }
  if (estimator == "magnitude_test") {
    const double norm = std::sqrt(exact_l2_sq(d));
    if (norm <= eps) return {1.0, TargetRule::equals};
    if (norm >= 2.0 * eps) return {0.0, TargetRule::equals};
  }
  return {};
}

inline bool in_range(double v, const Target& t, double eps) {
  switch (t.rule) {
    case TargetRule::relative: return std::abs(v - t.value) < eps * t.value;
    case TargetRule::dominates: return v >= t.value;
    case TargetRule::equals: return v == t.value;
    case TargetRule::none: return false;
  }
  return false;
}

struct ExperimentConfig {
  std::string kind = "estimate";  // estimate | bench | advice_check
  std::string dist;
  EstimatorOptions estimator;
  std::uint64_t trials = 1;
  std::uint64_t seed = 1;
  std::string out;               // empty: no file
  std::string format = "csv";    // csv | jsonl
  unsigned threads = 1;
  bool timing = false;           // record wall_ms; off keeps files byte-identical

  void validate() const {
    require(trials >= 1, "trials must be at least 1");
    require(format == "csv" || format == "jsonl", "format must be csv or jsonl");
    require(threads >= 1, "threads must be at least 1");
    estimator.params.validate();
  }
};

struct TrialRow {
  std::uint64_t trial = 0;
  std::uint64_t seed = 0;
  double value = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t samples = 0;
  std::string branch;
  double wall_ms = 0.0;
  std::string status = "ok";  // ok | budget_exceeded | iteration_cap | crash
};

struct Summary {
  std::uint64_t trials = 0;
  std::uint64_t ok = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  double min = std::numeric_limits<double>::quiet_NaN();
  double q25 = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
  double q75 = std::numeric_limits<double>::quiet_NaN();
  double max = std::numeric_limits<double>::quiet_NaN();
  double target = std::numeric_limits<double>::quiet_NaN();
  double in_range = std::numeric_limits<double>::quiet_NaN();  // fraction of ok rows
  double median_samples = std::numeric_limits<double>::quiet_NaN();
};

inline Summary summarize(const std::vector<TrialRow>& rows, const Target& target, double eps) {
  Summary s;
  s.trials = rows.size();
  s.target = target.value;
  std::vector<double> values, samples;
  std::uint64_t hits = 0;
  for (const auto& r : rows) {
    if (r.status != "ok") continue;
    values.push_back(r.value);
    samples.push_back(double(r.samples));
    if (in_range(r.value, target, eps)) ++hits;
  }
  s.ok = values.size();
  if (values.empty()) return s;
  s.mean = mean_of(values);
  s.se = standard_error(values);
  s.min = quantile(values, 0.0);
  s.q25 = quantile(values, 0.25);
  s.median = quantile(values, 0.5);
  s.q75 = quantile(values, 0.75);
  s.max = quantile(values, 1.0);
  s.median_samples = median_of(samples);
  if (target.rule != TargetRule::none) s.in_range = double(hits) / double(values.size());
  return s;
}

struct ExperimentResult {
  std::vector<TrialRow> rows;
  Summary summary;
  Target target;
};

inline TrialRow run_trial(const std::shared_ptr<const SamplingTable>& table, const EstimatorOptions& opt,
                          std::uint64_t domain_size, std::uint64_t trial, std::uint64_t seed, bool timing) {
  TrialRow row;
  row.trial = trial;
  row.seed = seed;
  ExplicitOracle o(table, seed);
  o.set_cap(opt.params.cap);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const EstimateReport r = run_estimator(o, opt, domain_size);
    row.value = r.value;
    row.samples = r.samples;
    row.branch = std::string(r.branch());
  } catch (const BudgetExceeded&) {
    row.status = "budget_exceeded";
    row.samples = o.drawn();
  } catch (const IterationCapExceeded&) {
    row.status = "iteration_cap";
    row.samples = o.drawn();
  } catch (const RejectionCrash&) {
    row.status = "crash";
    row.samples = o.drawn();
  }
  if (timing) row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

// Trials run on `threads` workers; rows come back in trial order regardless.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const ExplicitDistribution d = parse_dist_spec(cfg.dist);
  const auto table = std::make_shared<const SamplingTable>(d);
  ExperimentResult res;
  res.rows.resize(cfg.trials);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::uint64_t i; (i = next.fetch_add(1)) < cfg.trials;) {
      try {
        res.rows[i] = run_trial(table, cfg.estimator, d.size(), i, derive_seed(cfg.seed, i), cfg.timing);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(cfg.trials);
      }
    }
  };
  const unsigned n = unsigned(std::min<std::uint64_t>(cfg.threads, cfg.trials));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  res.target = exact_target(cfg.estimator.name, d, cfg.estimator.params.eps);
  res.summary = summarize(res.rows, res.target, cfg.estimator.params.eps);
  return res;
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline const char* kTrialRowHeader = "trial,seed,value,samples,branch,wall_ms,status";

inline void write_rows_csv(std::ostream& os, const std::vector<TrialRow>& rows) {
  os << kTrialRowHeader << '\n';
  for (const auto& r : rows)
    os << r.trial << ',' << r.seed << ',' << format_double(r.value) << ',' << r.samples << ',' << r.branch << ','
       << format_double(r.wall_ms) << ',' << r.status << '\n';
}

inline std::string json_number(double x) { return std::isfinite(x) ? format_double(x) : "null"; }

inline void write_rows_jsonl(std::ostream& os, const std::vector<TrialRow>& rows) {
  for (const auto& r : rows)
    os << "{\"trial\":" << r.trial << ",\"seed\":" << r.seed << ",\"value\":" << json_number(r.value)
       << ",\"samples\":" << r.samples << ",\"branch\":\"" << r.branch << "\",\"wall_ms\":" << json_number(r.wall_ms)
       << ",\"status\":\"" << r.status << "\"}\n";
}

inline std::vector<TrialRow> read_rows_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTrialRowHeader) throw std::runtime_error("trial csv: bad header");
  std::vector<TrialRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 7) throw std::runtime_error("trial csv: expected 7 fields in '" + line + "'");
    TrialRow r;
    r.trial = std::stoull(f[0]);
    r.seed = std::stoull(f[1]);
    r.value = std::strtod(f[2].c_str(), nullptr);
    r.samples = std::stoull(f[3]);
    r.branch = f[4];
    r.wall_ms = std::strtod(f[5].c_str(), nullptr);
    r.status = f[6];
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void write_rows(const std::string& path, const std::string& format, const std::vector<TrialRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  if (format == "jsonl")
    write_rows_jsonl(os, rows);
  else
    write_rows_csv(os, rows);
  if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace cnorm
