#pragma once

#include <stdexcept>
#include <string>

#include "sltmpc/slp.hpp"

namespace sltmpc {

class EntryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One tube sequence with its scaled terminal set alpha * X_f.
struct MemoryEntry {
  TubeSequence tubes;
  double alpha = 0.0;
  SystemResponse response;
  /// Multiplier certifying alpha A_cl X_f inside alpha X_f minus Gamma W.
  Matrix certificate;
  int birth_step = 0;
  std::string origin;
};

/// Admissible terminal scalings for fixed tubes: every alpha in
/// [lower, upper] satisfies the invariance, state and input inclusions.
struct ScalingBounds {
  double lower = 0.0;
  double upper = 0.0;
  bool feasible() const { return lower <= upper; }
};

/// Cap used when no state or input row limits the scaling (X_f = {0}).
inline constexpr double kMaxTerminalScaling = 1e6;

ScalingBounds terminal_scaling_bounds(const ProblemData& data, const TerminalIngredients& terminal,
                                      const TubeSequence& tubes);

/// Builds a certified entry with the largest admissible scaling.
/// Throws EntryError when no scaling works.
MemoryEntry make_entry(const ProblemData& data, const TerminalIngredients& terminal, SystemResponse response,
                       int birth_step, std::string origin);

/// Re-derives tubes and re-checks every terminal inclusion.
bool certify_entry(const MemoryEntry& entry, const ProblemData& data, const TerminalIngredients& terminal,
                   double tol = kSetTolerance);

/// Disturbance reachable sets of the closed loop A + B K as a memory entry.
MemoryEntry drs_tightenings(const ProblemData& data, const TerminalIngredients& terminal, const Matrix& K,
                            int birth_step = 0);

}  // namespace sltmpc
