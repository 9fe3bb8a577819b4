#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cnorm/cnorm.hpp"

using json = nlohmann::ordered_json;
using namespace cnorm;

namespace {

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json summary_json(const Summary& s) {
  return json{{"trials", s.trials},     {"ok", s.ok},
              {"mean", number(s.mean)}, {"se", number(s.se)},
              {"min", number(s.min)},   {"q25", number(s.q25)},
              {"median", number(s.median)}, {"q75", number(s.q75)},
              {"max", number(s.max)},   {"target", number(s.target)},
              {"in_range", number(s.in_range)}, {"median_samples", number(s.median_samples)}};
}

// A bare file name goes under $CNORM_OUTPUT_DIR when that is set.
std::string resolve_out(const std::string& out) {
  if (out.empty() || out.find('/') != std::string::npos) return out;
  const char* dir = std::getenv("CNORM_OUTPUT_DIR");
  return dir && *dir ? std::string(dir) + "/" + out : out;
}

void add_estimator_options(CLI::App* cmd, ExperimentConfig& cfg) {
  auto& p = cfg.estimator.params;
  cmd->add_option("--dist", cfg.dist, "distribution spec, name:key=value,... or @file.csv")->required();
  cmd->add_option("--eps", p.eps, "accuracy");
  cmd->add_option("--eta", p.eta, "failure probability");
  cmd->add_option("--scale", p.scale, "multiplier on the hard-coded sample constants");
  cmd->add_option("--cap", p.cap, "sample budget per trial");
  cmd->add_option("--seed", cfg.seed, "master seed");
  cmd->add_option("--trials", cfg.trials, "number of trials");
  cmd->add_option("--out", cfg.out, "per-trial rows file");
  cmd->add_option("--format", cfg.format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
  cmd->add_option("--threads", cfg.threads, "worker threads");
  cmd->add_flag("--timing", cfg.timing, "record wall time per trial (output is then not reproducible)");
}

int run_and_report(ExperimentConfig& cfg, bool as_json) {
  cfg.out = resolve_out(cfg.out);
  const ExperimentResult res = run_experiment(cfg);
  if (!cfg.out.empty()) write_rows(cfg.out, cfg.format, res.rows);
  if (cfg.trials == 1 && !as_json) {
    const TrialRow& r = res.rows.front();
    std::cout << "value " << format_double(r.value) << "\nsamples " << r.samples << "\nbranch " << r.branch
              << "\nstatus " << r.status << "\n";
    return r.status == "ok" ? 0 : 3;
  }
  json j{{"estimator", cfg.estimator.name}, {"dist", cfg.dist}, {"seed", cfg.seed}, {"summary", summary_json(res.summary)}};
  if (cfg.trials == 1) {
    const TrialRow& r = res.rows.front();
    j["value"] = number(r.value);
    j["samples"] = r.samples;
    j["branch"] = r.branch;
    j["status"] = r.status;
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collision-norm estimators, sample-only access"};
  app.require_subcommand(1);

  ExperimentConfig est;
  bool est_json = false;
  double advice = -1.0;
  auto* estimate = app.add_subcommand("estimate", "run one estimator, once or over many seeded trials");
  add_estimator_options(estimate, est);
  estimate->add_option("--estimator", est.estimator.name, "which procedure (see `zoo list`)");
  estimate->add_option("--advice", advice, "advice r >= t for the base estimator");
  estimate->add_option("--a", est.estimator.a, "reference magnitude for l3_magnitude");
  estimate->add_option("--delta", est.estimator.delta, "accuracy of t_directly");
  estimate->add_flag("--json", est_json, "print JSON");

  ExperimentConfig bench_cfg;
  bench_cfg.trials = 20;
  std::vector<std::string> bench_dists;
  auto* bench = app.add_subcommand("bench", "median samples of the top-level estimator across distributions");
  bench->add_option("--dist", bench_dists, "distribution specs")->required();
  bench->add_option("--estimator", bench_cfg.estimator.name, "which procedure");
  bench->add_option("--eps", bench_cfg.estimator.params.eps, "accuracy");
  bench->add_option("--eta", bench_cfg.estimator.params.eta, "failure probability");
  bench->add_option("--scale", bench_cfg.estimator.params.scale, "constant multiplier");
  bench->add_option("--seed", bench_cfg.seed, "master seed");
  bench->add_option("--trials", bench_cfg.trials, "trials per distribution");
  bench->add_option("--threads", bench_cfg.threads, "worker threads");
  std::string bench_out;
  bench->add_option("--out", bench_out, "summary csv");

  ExperimentConfig adv;
  adv.trials = 100;
  std::string finder = "small";
  auto* advice_check = app.add_subcommand("advice-check", "how often an advice finder upper-bounds the exact t");
  add_estimator_options(advice_check, adv);
  advice_check->add_option("--finder", finder, "small, medium, large, t_directly or t_friendly")
      ->check(CLI::IsMember({"small", "medium", "large", "t_directly", "t_friendly"}));

  std::string lb_dist, lb_out, lb_mode = "exact";
  double lb_eps = 1e-5;
  std::uint64_t lb_trials = 1000, lb_seed = 1;
  auto* lowerbound = app.add_subcommand("lowerbound", "draw hard instances and record how far their norm moves");
  lowerbound->add_option("--dist", lb_dist, "base distribution")->required();
  lowerbound->add_option("--eps", lb_eps, "target accuracy");
  lowerbound->add_option("--trials", lb_trials, "number of drawn instances");
  lowerbound->add_option("--seed", lb_seed, "master seed");
  lowerbound->add_option("--out", lb_out, "per-trial csv");
  lowerbound->add_option("--lambda-mode", lb_mode, "exact or monte_carlo")->check(CLI::IsMember({"exact", "monte_carlo"}));

  auto* zoo_cmd = app.add_subcommand("zoo", "distribution catalog");
  zoo_cmd->require_subcommand(1);
  auto* zoo_list = zoo_cmd->add_subcommand("list", "list distributions and estimators");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*estimate) {
      if (advice >= 0.0) est.estimator.advice = advice;
      return run_and_report(est, est_json);
    }
    if (*bench) {
      std::ostringstream table;
      table << "dist,trials,ok,mean,se,target,in_range,median_samples\n";
      for (const auto& d : bench_dists) {
        ExperimentConfig c = bench_cfg;
        c.dist = d;
        const Summary s = run_experiment(c).summary;
        table << '"' << d << "\"," << s.trials << ',' << s.ok << ',' << format_double(s.mean) << ','
              << format_double(s.se) << ',' << format_double(s.target) << ',' << format_double(s.in_range) << ','
              << format_double(s.median_samples) << '\n';
      }
      std::cout << table.str();
      const std::string path = resolve_out(bench_out);
      if (!path.empty()) {
        std::ofstream os(path, std::ios::binary);
        if (!(os << table.str())) throw std::runtime_error("cannot write '" + path + "'");
      }
      return 0;
    }
    if (*advice_check) {
      adv.estimator.name = finder == "t_directly" || finder == "t_friendly" ? finder : "advice_" + finder;
      return run_and_report(adv, true);
    }
    if (*lowerbound) {
      const ExplicitDistribution d = parse_dist_spec(lb_dist);
      const double l2 = exact_l2_sq(d);
      json j{{"dist", lb_dist}, {"eps", lb_eps}, {"l2", l2}};
      std::ostringstream rows;
      rows << "trial,seed,lambda,l2_nu,deviates\n";
      std::uint64_t deviating = 0;
      if (is_pairing_compatible(d)) {
        const auto mode = lb_mode == "exact" ? LambdaMode::exact : LambdaMode::monte_carlo;
        const auto e = PerturbationEnsemble::select(d, lb_eps, mode, 100000, lb_seed);
        for (std::uint64_t t = 0; t < lb_trials; ++t) {
          const std::uint64_t s = derive_seed(lb_seed, t);
          const double l2nu = exact_l2_sq(ensemble_draw(e, s));
          const bool dev = e.deviates(l2nu);
          deviating += dev;
          rows << t << ',' << s << ',' << format_double(e.lambda()) << ',' << format_double(l2nu) << ',' << dev << '\n';
        }
        j["construction"] = "pair_ensemble";
        j["lambda"] = e.lambda();
        if (e.pairs() <= kMaxExactPairs) j["exact_deviation_probability"] = exact_deviation_probability(e);
        j["distinguish_budget"] = distinguish_budget(lb_eps, l2);
      } else if (std::any_of(d.entries().begin(), d.entries().end(),
                             [&](const Entry& x) { return x.mass >= std::sqrt(l2) / 8.0; })) {
        const ExplicitDistribution nu = build_skewed_perturbation(d, lb_eps);
        const double l2nu = exact_l2_sq(nu);
        const bool dev = l2nu < (1.0 - 2.25 * lb_eps) * l2;
        deviating = dev;
        lb_trials = 1;
        rows << 0 << ',' << lb_seed << ",," << format_double(l2nu) << ',' << dev << '\n';
        j["construction"] = "skewed";
        j["tv_distance"] = tv_distance(d, nu);
      } else {
        const PairReduction red = pair_and_reduce(d);
        const double eps_a = std::min(16.0 * lb_eps, 1.0 / 8000.0);
        const auto mode = lb_mode == "exact" && red.restricted.size() / 2 <= kMaxExactPairs ? LambdaMode::exact
                                                                                           : LambdaMode::monte_carlo;
        const auto e = PerturbationEnsemble::select(red.restricted, eps_a, mode, 100000, lb_seed);
        const double outside = red.squares_b1 + red.squares_b2;
        for (std::uint64_t t = 0; t < lb_trials; ++t) {
          const std::uint64_t s = derive_seed(lb_seed, t);
          const double l2nu = red.mass_a * red.mass_a * exact_l2_sq(ensemble_draw(e, s)) + outside;
          const bool dev = std::abs(l2nu - l2) >= 2.1 * lb_eps * l2;
          deviating += dev;
          rows << t << ',' << s << ',' << format_double(e.lambda()) << ',' << format_double(l2nu) << ',' << dev << '\n';
        }
        j["construction"] = "pair_and_reduce";
        j["lambda"] = e.lambda();
        j["mass_a"] = red.mass_a;
        j["erased_pairs"] = red.b1.size();
      }
      j["trials"] = lb_trials;
      j["deviation_fraction"] = double(deviating) / double(lb_trials);
      const std::string path = resolve_out(lb_out);
      if (!path.empty()) {
        std::ofstream os(path, std::ios::binary);
        if (!(os << rows.str())) throw std::runtime_error("cannot write '" + path + "'");
      }
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (*zoo_list) {
      std::cout << "distributions:\n";
      for (const auto& z : zoo_catalog())
        std::cout << "  " << z.name << (*z.params ? "(" + std::string(z.params) + ")" : std::string()) << "  " << z.summary << "\n";
      std::cout << "estimators:\n";
      for (const auto& e : estimator_catalog()) std::cout << "  " << e.name << "  " << e.summary << "\n";
      return 0;
    }
  } catch (const SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
