#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "distribution.hpp"
#include "rng.hpp"

namespace cnorm {

struct SpecError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

using ZooParams = std::map<std::string, std::string>;

struct ZooInfo {
  const char* name;
  const char* params;
  const char* summary;
};

inline const std::vector<ZooInfo>& zoo_catalog() {
  static const std::vector<ZooInfo> catalog = {
      {"uniform", "n", "n equal masses"},
      {"point", "", "a single label with mass 1"},
      {"two_level", "n, heavy=1, heavy_mass", "`heavy` labels of mass heavy_mass each, the rest uniform"},
      {"zipf", "n, s=1", "mass of rank i proportional to i^-s"},
      {"geometric", "n, ratio=0.5", "mass of rank i proportional to ratio^i"},
      {"paired_flat", "j", "j pairs, all 2j masses equal"},
      {"paired_geometric", "j, decay=0.8, skew=1.2", "pair j has masses (skew x, x) with x shrinking by `decay` per pair; skew <= sqrt 2"},
      {"paired_random", "j, seed=1", "j pairs with random sizes and within-pair ratio in [1, sqrt 2]"},
      {"tilted", "n, tilt=0.1", "even n; masses (1 +- tilt)/n alternating"},
      {"padded_uniform", "n, pad", "uniform over n plus pad zero-mass labels"},
      {"masses", "p", "explicit masses separated by '/', e.g. p=0.5/0.3/0.2"},
  };
  return catalog;
}

namespace detail {

inline ExplicitDistribution normalized(std::vector<double> w) {
  CompensatedSum s;
  for (double x : w) s.add(x);
  const double z = s.value();
  for (double& x : w) x /= z;
  CompensatedSum again;
  for (double x : w) again.add(x);
  std::size_t big = 0;
  for (std::size_t i = 1; i < w.size(); ++i)
    if (w[i] > w[big]) big = i;
  w[big] += 1.0 - again.value();
  return ExplicitDistribution::from_masses(w);
}

class ParamReader {
 public:
  ParamReader(const std::string& name, const ZooParams& p) : name_(name), p_(p) {}

  double real(const std::string& key) const {
    auto it = p_.find(key);
    if (it == p_.end()) throw SpecError(name_ + ": missing parameter '" + key + "'");
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::logic_error&) {
      throw SpecError(name_ + ": parameter '" + key + "' is not a number: '" + it->second + "'");
    }
  }
  double real(const std::string& key, double fallback) const { return p_.count(key) ? real(key) : fallback; }

  std::uint64_t integer(const std::string& key) const {
    const double v = real(key);
    if (!(v >= 0.0) || v != std::floor(v) || v > 1e15)
      throw SpecError(name_ + ": parameter '" + key + "' must be a non-negative integer");
    return std::uint64_t(v);
  }
  std::uint64_t integer(const std::string& key, std::uint64_t fallback) const {
    return p_.count(key) ? integer(key) : fallback;
  }

  std::string text(const std::string& key) const {
    auto it = p_.find(key);
    if (it == p_.end()) throw SpecError(name_ + ": missing parameter '" + key + "'");
    return it->second;
  }

  void positive(bool ok, const std::string& what) const {
    if (!ok) throw SpecError(name_ + ": " + what);
  }

 private:
  std::string name_;
  const ZooParams& p_;
};

}  // namespace detail

inline ExplicitDistribution zoo(const std::string& name, const ZooParams& params = {}) {
  detail::ParamReader in(name, params);
  for (const auto& z : zoo_catalog()) {
    if (name != z.name) continue;
    // Keys are listed as "n, s=1"; anything else is a typo.
    const std::string allowed = std::string(", ") + z.params + ",";
    for (const auto& [key, value] : params)
      if (allowed.find(", " + key + ",") == std::string::npos && allowed.find(", " + key + "=") == std::string::npos)
        throw SpecError(name + ": unknown parameter '" + key + "'");
  }
  if (name == "uniform") {
    const auto n = in.integer("n");
    in.positive(n >= 1, "n must be at least 1");
    return ExplicitDistribution::from_masses(std::vector<double>(n, 1.0 / double(n)));
  }
  if (name == "point") return ExplicitDistribution::from_masses({1.0});
  if (name == "two_level") {
    const auto n = in.integer("n");
    const auto heavy = in.integer("heavy", 1);
    const double p = in.real("heavy_mass");
    in.positive(heavy >= 1 && heavy < n, "need 1 <= heavy < n");
    in.positive(p > 0.0 && double(heavy) * p < 1.0, "need heavy * heavy_mass < 1");
    std::vector<double> m(n, (1.0 - double(heavy) * p) / double(n - heavy));
    for (std::uint64_t i = 0; i < heavy; ++i) m[i] = p;
    return detail::normalized(m);
  }
  if (name == "zipf") {
    const auto n = in.integer("n");
    const double s = in.real("s", 1.0);
    in.positive(n >= 1, "n must be at least 1");
    std::vector<double> w(n);
    for (std::uint64_t i = 0; i < n; ++i) w[i] = std::pow(double(i + 1), -s);
    return detail::normalized(w);
  }
  if (name == "geometric") {
    const auto n = in.integer("n");
    const double r = in.real("ratio", 0.5);
    in.positive(n >= 1, "n must be at least 1");
    in.positive(r > 0.0 && r <= 1.0, "ratio must be in (0,1]");
    std::vector<double> w(n);
    double x = 1.0;
    for (std::uint64_t i = 0; i < n; ++i, x *= r) w[i] = x;
    return detail::normalized(w);
  }
  if (name == "paired_flat") {
    const auto j = in.integer("j");
    in.positive(j >= 1, "j must be at least 1");
    return ExplicitDistribution::from_masses(std::vector<double>(2 * j, 1.0 / double(2 * j)));
  }
  if (name == "paired_geometric") {
    const auto j = in.integer("j");
    const double decay = in.real("decay", 0.8);
    const double skew = in.real("skew", 1.2);
    in.positive(j >= 1, "j must be at least 1");
    in.positive(decay > 0.0 && decay <= 1.0, "decay must be in (0,1]");
    in.positive(skew >= 1.0 && skew <= std::sqrt(2.0), "skew must be in [1, sqrt 2]");
    std::vector<double> w;
    double x = 1.0;
    for (std::uint64_t i = 0; i < j; ++i, x *= decay) {
      w.push_back(skew * x);
      w.push_back(x);
    }
    return detail::normalized(w);
  }
  if (name == "paired_random") {
    const auto j = in.integer("j");
    in.positive(j >= 1, "j must be at least 1");
    Philox rng(in.integer("seed", 1));
    std::vector<double> w;
    for (std::uint64_t i = 0; i < j; ++i) {
      const double x = 0.2 + rng.uniform();
      const double skew = 1.0 + (std::sqrt(2.0) - 1.0) * rng.uniform();
      w.push_back(skew * x);
      w.push_back(x);
    }
    return detail::normalized(w);
  }
  if (name == "tilted") {
    const auto n = in.integer("n");
    const double tilt = in.real("tilt", 0.1);
    in.positive(n >= 2 && n % 2 == 0, "n must be even and at least 2");
    in.positive(tilt >= 0.0 && tilt < 1.0, "tilt must be in [0,1)");
    std::vector<double> w(n);
    for (std::uint64_t i = 0; i < n; ++i) w[i] = (i % 2 == 0 ? 1.0 + tilt : 1.0 - tilt) / double(n);
    return detail::normalized(w);
  }
  if (name == "padded_uniform") {
    const auto n = in.integer("n");
    const auto pad = in.integer("pad");
    in.positive(n >= 1, "n must be at least 1");
    std::vector<double> w(n + pad, 0.0);
    for (std::uint64_t i = 0; i < n; ++i) w[i] = 1.0 / double(n);
    return ExplicitDistribution::from_masses(w);
  }
  if (name == "masses") {
    const std::string text = in.text("p");
    std::vector<double> w;
    std::size_t start = 0;
    while (start <= text.size()) {
      const std::size_t slash = std::min(text.find('/', start), text.size());
      const std::string piece = text.substr(start, slash - start);
      try {
        std::size_t used = 0;
        w.push_back(std::stod(piece, &used));
        if (used != piece.size()) throw std::invalid_argument("trailing");
      } catch (const std::logic_error&) {
        throw SpecError("masses: cannot parse '" + piece + "'");
      }
      start = slash + 1;
    }
    return ExplicitDistribution::from_masses(w);
  }
  throw SpecError("unknown distribution '" + name + "'");
}

// `name:key=value,key=value` or `@path.csv`.
inline ExplicitDistribution parse_dist_spec(const std::string& spec) {
  if (!spec.empty() && spec[0] == '@') {
    try {
      return read_csv_file(spec.substr(1));
    } catch (const InvalidDistribution& e) {
      throw SpecError(spec + ": " + e.what());
    }
  }
  const std::size_t colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  if (name.empty()) throw SpecError("position 0: expected a distribution name");
  ZooParams params;
  if (colon != std::string::npos) {
    std::size_t pos = colon + 1;
    while (pos <= spec.size()) {
      const std::size_t comma = std::min(spec.find(',', pos), spec.size());
      const std::string item = spec.substr(pos, comma - pos);
      const std::size_t eq = item.find('=');
      if (eq == std::string::npos || eq == 0)
        throw SpecError("position " + std::to_string(pos) + ": expected key=value, got '" + item + "'");
      params[item.substr(0, eq)] = item.substr(eq + 1);
      pos = comma + 1;
    }
  }
  try {
    return zoo(name, params);
  } catch (const InvalidDistribution& e) {
    throw SpecError(name + ": " + e.what());
  }
}

// Fixed sweep used by the identity checks: every family, N from 1 to 10^4.
inline const std::vector<std::string>& reference_specs() {
  static const std::vector<std::string> specs = {
      "point",
      "uniform:n=2",
      "uniform:n=16",
      "uniform:n=1000",
      "uniform:n=10000",
      "two_level:n=50,heavy_mass=0.5",
      "two_level:n=64,heavy_mass=0.3",
      "two_level:n=1000,heavy=5,heavy_mass=0.05",
      "zipf:n=100,s=1",
      "zipf:n=10000,s=1.2",
      "zipf:n=500,s=0.5",
      "geometric:n=20,ratio=0.5",
      "geometric:n=300,ratio=0.99",
      "paired_flat:j=8",
      "paired_geometric:j=10",
      "paired_random:j=10,seed=3",
      "paired_random:j=2000,seed=5",
      "tilted:n=2,tilt=0.2",
      "tilted:n=100,tilt=0.1",
      "tilted:n=10000,tilt=0.4",
      "padded_uniform:n=10,pad=5",
      "masses:p=0.4/0.2/0.2/0.2",
      "masses:p=0.75/0.25",
      "masses:p=0.5/0.3/0.2",
      "masses:p=0.7/0.1/0.1/0.1",
      "masses:p=0.6/0.4",
  };
  return specs;
}

}  // namespace cnorm
