#pragma once

// Deterministic checks shared by the unit tests and the acceptance binary.

#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "cnorm/cnorm.hpp"

namespace cnorm::checks {

struct Outcome {
  bool pass = true;
  std::size_t checked = 0;
  std::string first_failure;

  void expect(bool ok, const std::string& what) {
    ++checked;
    if (!ok && pass) {
      pass = false;
      first_failure = what;
    }
  }
};

inline std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

// Both sides of each delta identity, computed independently.
inline void delta_identities(const std::string& name, const ExplicitDistribution& d, Outcome& out) {
  const double n = double(d.size());
  const auto deltas = delta_vector(d);
  const DeltaSums s = delta_sums(deltas);
  const double l2 = exact_l2_sq(d), l3 = exact_l3_cube(d), t = exact_t(d);
  const double lhs2 = n * l2 - 1.0, rhs2 = s.squares / n;
  out.expect(std::abs(lhs2 - rhs2) <= 1e-9, name + ": N|mu|^2 - 1 = " + fmt(lhs2) + " vs " + fmt(rhs2));
  const double lhs3 = n * n * l3, rhs3 = 1.0 + 3.0 * s.squares / n + s.cubes / n;
  out.expect(std::abs(lhs3 - rhs3) <= 1e-9, name + ": N^2 |mu|_3^3 = " + fmt(lhs3) + " vs " + fmt(rhs3));
  const double tdel = t_from_deltas(deltas);
  out.expect(std::abs(t - tdel) <= 1e-9, name + ": t = " + fmt(t) + " vs delta form " + fmt(tdel));
  out.expect(t >= 0.0, name + ": negative t");
  out.expect(l3 >= l2 * l2 - 1e-12, name + ": |mu|_3^3 < |mu|_2^4");
}

// alpha^2 Pr_{i~mu}[mu(i) outside (1 +- alpha)|mu|^2] <= t on the grid 0.1, 0.2, ..., 3.0.
inline void mass_deviation_bound(const std::string& name, const ExplicitDistribution& d, Outcome& out) {
  const double l2 = exact_l2_sq(d), t = exact_t(d);
  for (int k = 1; k <= 30; ++k) {
    const double alpha = 0.1 * k;
    CompensatedSum p;
    for (const auto& e : d.entries())
      if (e.mass <= (1.0 - alpha) * l2 || e.mass >= (1.0 + alpha) * l2) p.add(e.mass);
    const double lhs = alpha * alpha * p.value();
    out.expect(lhs <= t + 1e-12, name + ": alpha " + fmt(alpha) + " gives " + fmt(lhs) + " > t " + fmt(t));
  }
}

// Near-uniform cores with a light tail, the shapes good partitions are about.
inline std::vector<std::pair<std::string, ExplicitDistribution>> partition_instances() {
  std::vector<std::pair<std::string, ExplicitDistribution>> out;
  for (int core : {2, 4, 16, 100})
    for (double tail : {1e-5, 1e-4, 1e-3, 1e-2, 0.05})
      for (int pieces : {1, 10, 1000})
        for (double tilt : {0.0, 0.01, 0.05}) {
          std::vector<double> m;
          for (int i = 0; i < core; ++i) m.push_back((1.0 - tail) * (1.0 + (i % 2 ? -tilt : tilt)) / core);
          for (int i = 0; i < pieces; ++i) m.push_back(tail / pieces);
          CompensatedSum z;
          for (double x : m) z.add(x);
          for (double& x : m) x /= z.value();
          std::ostringstream name;
          name << "core" << core << "_tail" << tail << "x" << pieces << "_tilt" << tilt;
          out.emplace_back(name.str(), ExplicitDistribution::from_masses(m));
        }
  out.emplace_back("two_level(50, 0.5)", zoo("two_level", {{"n", "50"}, {"heavy_mass", "0.5"}}));
  out.emplace_back("two_level(64, 0.3)", zoo("two_level", {{"n", "64"}, {"heavy_mass", "0.3"}}));
  return out;
}

// The three good-partition statements, checked at the exact split and at both
// ends of the allowed threshold window.
inline void good_partition_lemmas(const std::string& name, const ExplicitDistribution& d, Outcome& out) {
  const double l2 = exact_l2_sq(d), t = exact_t(d);
  for (double cut : {0.56, 0.6, 0.66}) {
    Partition p;
    p.ell = l2;
    p.threshold = cut * l2;
    for (const auto& e : d.entries())
      if (e.mass > p.threshold) p.a_members.insert(e.label);
    if (!is_good_partition(d, p)) {
      out.expect(false, name + ": split at " + fmt(cut) + " is not good");
      continue;
    }
    const double mb = mass_outside(d, p);
    const std::string at = name + " (cut " + fmt(cut) + ")";
    out.expect(mb <= 9.0 * t + 1e-12, at + ": mu(B) " + fmt(mb) + " > 9t " + fmt(9.0 * t));
    if (p.a_members.empty()) continue;
    const ExplicitDistribution a = restrict_to(d, [&](Label l) { return p.in_a(l); });
    if (t <= 1.0 / 900.0) out.expect(is_friendly(a), at + ": mu_A not friendly with t " + fmt(t));
    if (t <= 1.0 / 90.0) {
      const double ta = exact_t(a);
      out.expect(std::abs(ta - t) <= 5.0 * mb + 1e-12,
                 at + ": |t_A - t| " + fmt(std::abs(ta - t)) + " > 5 mu(B) " + fmt(5.0 * mb));
    }
  }
}

inline Outcome identity_suite() {
  Outcome out;
  for (const auto& spec : reference_specs()) {
    const ExplicitDistribution d = parse_dist_spec(spec);
    delta_identities(spec, d, out);
    mass_deviation_bound(spec, d, out);
    if (is_friendly(d)) {
      const double lb = t_friendly_lower_bound(d), t = exact_t(d);
      out.expect(lb <= t + 1e-12, spec + ": friendly lower bound " + fmt(lb) + " > t " + fmt(t));
    }
  }
  for (const auto& [name, d] : partition_instances()) good_partition_lemmas(name, d, out);
  return out;
}

inline Count128 brute_pairs(const std::vector<Label>& s) {
  Count128 c = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) c += s[i] == s[j];
  return c;
}

inline Count128 brute_triples(const std::vector<Label>& s) {
  Count128 c = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      if (s[i] != s[j]) continue;
      for (std::size_t k = j + 1; k < s.size(); ++k) c += s[k] == s[i];
    }
  return c;
}

// Random streams of length <= 200 over small alphabets of arbitrary 64-bit
// labels; the tally is fed one label at a time and, separately, in runs.
inline Outcome tally_equivalence(std::uint64_t streams = 100, std::uint64_t seed = 2024) {
  Outcome out;
  Philox rng(seed);
  for (std::uint64_t s = 0; s < streams; ++s) {
    const std::uint64_t len = rng.below(201);
    const std::uint64_t alphabet = 1 + rng.below(12);
    std::vector<Label> letters(alphabet);
    for (auto& l : letters) l = rng();
    std::vector<Label> stream(len);
    for (auto& l : stream) l = letters[rng.below(alphabet)];

    CollisionTally one, runs;
    for (Label l : stream) one.ingest(l);
    for (std::size_t i = 0; i < stream.size();) {
      std::size_t j = i;
      while (j < stream.size() && stream[j] == stream[i]) ++j;
      runs.ingest(stream[i], j - i);
      i = j;
    }
    const Count128 p = brute_pairs(stream), t = brute_triples(stream);
    const std::string at = "stream " + std::to_string(s) + " (length " + std::to_string(len) + ")";
    out.expect(one.s2() == p && one.s3() == t, at + ": per-label tally disagrees with the scan");
    out.expect(runs.s2() == p && runs.s3() == t, at + ": run-length tally disagrees with the scan");
    out.expect(one.m() == len && runs.m() == len, at + ": sample count");
  }
  return out;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace cnorm::checks
