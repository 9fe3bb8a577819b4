#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cnorm {

struct PreconditionViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IterationCapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw PreconditionViolation(what);
}

struct EstimatorParams {
  double eps = 0.25;
  double eta = 1.0 / 3.0;
  double scale = 1.0;  // multiplies every hard-coded sample-count constant
  std::optional<std::uint64_t> cap;

  void validate() const {
    require(scale > 0.0, "scale must be positive");
    require(eps > 0.0 && eps <= 1.0, "eps must be in (0,1]");
    require(eta > 0.0 && eta <= 1.0 / 3.0, "eta must be in (0,1/3]");
  }
};

// Empty means no advice is available.
using L2Advice = std::optional<double>;

struct TraceEntry {
  std::string_view procedure;
  std::string_view branch;
  double value = 0.0;
  std::uint64_t samples = 0;
};

struct EstimateReport {
  double value = 0.0;
  std::uint64_t samples = 0;
  // Loop iterations or copies, where the procedure has a notion of them.
  std::uint64_t rounds = 0;
  // First entry describes the call itself; the rest are its direct sub-calls.
  std::vector<TraceEntry> trace;

  std::string_view branch() const { return trace.empty() ? std::string_view{} : trace.front().branch; }

  const TraceEntry* find(std::string_view procedure) const {
    for (std::size_t i = 1; i < trace.size(); ++i)
      if (trace[i].procedure == procedure) return &trace[i];
    return nullptr;
  }
};

using AdviceReport = EstimateReport;

inline TraceEntry head_of(const EstimateReport& r) {
  TraceEntry e = r.trace.empty() ? TraceEntry{} : r.trace.front();
  e.value = r.value;
  e.samples = r.samples;
  return e;
}

}  // namespace cnorm
