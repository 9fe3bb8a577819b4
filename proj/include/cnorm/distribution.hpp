#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace cnorm {

using Label = std::uint64_t;

struct InvalidDistribution : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

template <class Range, class F>
double compensated_sum(const Range& r, F&& f) {
  CompensatedSum s;
  for (const auto& x : r) s.add(f(x));
  return s.value();
}

struct Entry {
  Label label;
  double mass;
};

// Finite list of (label, mass). Immutable after construction; copies share nothing
// mutable, so a const instance can be read from many threads.
class ExplicitDistribution {
 public:
  static constexpr double kSumTolerance = 1e-12;

  ExplicitDistribution() = default;

  explicit ExplicitDistribution(std::vector<Entry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw InvalidDistribution("distribution has no entries");
    std::unordered_set<Label> seen;
    seen.reserve(entries_.size() * 2);
    CompensatedSum total;
    for (const auto& e : entries_) {
      if (!(e.mass >= 0.0) || e.mass > 1.0)
        throw InvalidDistribution("mass out of [0,1] for label " + std::to_string(e.label));
      if (!seen.insert(e.label).second)
        throw InvalidDistribution("duplicate label " + std::to_string(e.label));
      total.add(e.mass);
    }
    if (std::abs(total.value() - 1.0) > kSumTolerance) {
      std::ostringstream os;
      os.precision(17);
      os << "masses sum to " << total.value() << ", not 1";
      throw InvalidDistribution(os.str());
    }
  }

  // Labels 0..n-1 in order.
  static ExplicitDistribution from_masses(const std::vector<double>& masses) {
    std::vector<Entry> e;
    e.reserve(masses.size());
    for (std::size_t i = 0; i < masses.size(); ++i) e.push_back({Label(i), masses[i]});
    return ExplicitDistribution(std::move(e));
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }

  double mass_of(Label l) const {
    for (const auto& e : entries_)
      if (e.label == l) return e.mass;
    return 0.0;
  }

  std::vector<double> masses() const {
    std::vector<double> m;
    m.reserve(entries_.size());
    for (const auto& e : entries_) m.push_back(e.mass);
    return m;
  }

  Label max_label() const {
    Label m = 0;
    for (const auto& e : entries_) m = std::max(m, e.label);
    return m;
  }

 private:
  std::vector<Entry> entries_;
};

inline double exact_l2_sq(const ExplicitDistribution& d) {
  return compensated_sum(d.entries(), [](const Entry& e) { return e.mass * e.mass; });
}

inline double exact_l3_cube(const ExplicitDistribution& d) {
  return compensated_sum(d.entries(), [](const Entry& e) { return e.mass * e.mass * e.mass; });
}

inline double exact_t(const ExplicitDistribution& d) {
  const double l2 = exact_l2_sq(d);
  const double t = exact_l3_cube(d) / (l2 * l2) - 1.0;
  return t < 0.0 && t > -1e-12 ? 0.0 : t;
}

// delta_i = N mu(i) - 1, with N counting zero-mass entries.
inline std::vector<double> delta_vector(const ExplicitDistribution& d) {
  const double n = double(d.size());
  std::vector<double> out;
  out.reserve(d.size());
  for (const auto& e : d.entries()) out.push_back(n * e.mass - 1.0);
  return out;
}

inline double tv_distance(const ExplicitDistribution& a, const ExplicitDistribution& b) {
  std::unordered_map<Label, double> diff;
  diff.reserve((a.size() + b.size()) * 2);
  for (const auto& e : a.entries()) diff[e.label] += e.mass;
  for (const auto& e : b.entries()) diff[e.label] -= e.mass;
  CompensatedSum s;
  for (const auto& [l, x] : diff) s.add(std::abs(x));
  return 0.5 * s.value();
}

// Var[S_m] bound: C(m,2) l2sq + m^3 (l3cube - l2sq^2).
inline double collision_variance_bound(std::uint64_t m, double l2sq, double l3cube) {
  if (m < 2) throw std::invalid_argument("collision_variance_bound needs m >= 2");
  const double md = double(m);
  return md * (md - 1.0) / 2.0 * l2sq + md * md * md * (l3cube - l2sq * l2sq);
}

// mu conditioned on the labels accepted by `keep`, renormalized.
inline ExplicitDistribution restrict_to(const ExplicitDistribution& d, const std::function<bool(Label)>& keep) {
  std::vector<Entry> kept;
  CompensatedSum total;
  for (const auto& e : d.entries())
    if (keep(e.label)) {
      kept.push_back(e);
      total.add(e.mass);
    }
  if (kept.empty() || total.value() <= 0.0) throw InvalidDistribution("restriction has zero mass");
  const double z = total.value();
  CompensatedSum renorm;
  for (auto& e : kept) {
    e.mass /= z;
    renorm.add(e.mass);
  }
  // Push the last rounding residue into the largest entry so the sum check passes.
  auto big = std::max_element(kept.begin(), kept.end(), [](const Entry& x, const Entry& y) { return x.mass < y.mass; });
  big->mass += 1.0 - renorm.value();
  return ExplicitDistribution(std::move(kept));
}

// CSV `label,mass` with a header line.
inline void write_csv(std::ostream& os, const ExplicitDistribution& d) {
  os << "label,mass\n";
  os.precision(17);
  for (const auto& e : d.entries()) os << e.label << ',' << e.mass << '\n';
}

inline ExplicitDistribution read_csv(std::istream& is) {
  std::vector<Entry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("label", 0) == 0) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw InvalidDistribution("csv line " + std::to_string(lineno) + ": expected label,mass");
    try {
      std::size_t used = 0;
      const Label l = std::stoull(line.substr(0, comma), &used);
      const double m = std::stod(line.substr(comma + 1));
      entries.push_back({l, m});
    } catch (const std::logic_error&) {
      throw InvalidDistribution("csv line " + std::to_string(lineno) + ": cannot parse '" + line + "'");
    }
  }
  return ExplicitDistribution(std::move(entries));
}

inline ExplicitDistribution read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidDistribution("cannot open " + path);
  return read_csv(in);
}

}  // namespace cnorm
