#pragma once

#include <span>

#include "sltmpc/memory_entry.hpp"
#include "sltmpc/qp_solver.hpp"

namespace sltmpc {

enum class TerminalMode {
  kScaled,  // alpha X_f with the multiplier conditions on alpha and Gamma
  kFir,     // Gamma = 0; X_f only needs positive invariance
};

enum class SecondaryCost {
  kNominal,     // nominal trajectory cost
  kTightening,  // sum of all tightenings plus a weighted nominal cost
};

struct SecondaryOptions {
  TerminalMode terminal = TerminalMode::kScaled;
  SecondaryCost cost = SecondaryCost::kNominal;
  /// Weight of the nominal cost in the tightening cost.
  double nominal_weight = 0.01;
};

/// Problem tags stored in ProblemSpec::tag().
inline constexpr const char* kSecondaryTag = "sltmpc-scaled-terminal";
inline constexpr const char* kPrimaryTag = "primary-fused-memory";
inline constexpr const char* kFixedTubeTag = "fixed-tube";

/// Full tube-and-trajectory problem with the scaled terminal set.
/// Variables: z, v, phi_u (vec of Phi_u^1..N, column-major blocks), s_x, s_u
/// (per-step support epigraphs), alpha, and in scaled mode g (epigraph of
/// h_W(Gamma' H_f')). The invariance multiplier is alpha times the offline one.
ProblemSpec build_sltmpc(const ProblemData& data, const TerminalIngredients& terminal,
                         const SecondaryOptions& options, const Vector& x0);

/// Nominal trajectory problem over a convex combination of memory entries.
/// The regularization rho * sum_j age_j lambda_j measures ages relative to the
/// newest entry, which only shifts the objective by a constant.
ProblemSpec build_primary(const ProblemData& data, const TerminalIngredients& terminal,
                          std::span<const MemoryEntry> memory, const Vector& x0, double rho);

/// Nominal trajectory problem with one frozen tube sequence.
ProblemSpec build_fixed_tube(const ProblemData& data, const TerminalIngredients& terminal, const MemoryEntry& entry,
                             const Vector& x0);

/// v_0 of an optimal solution of any of the builders above.
Vector extract_control(const SolveResult& result, const ProblemData& data);

/// Error-system response encoded in an optimal build_sltmpc solution.
SystemResponse response_from_solution(const SolveResult& result, const ProblemData& data);

/// Invariance multiplier alpha * Lambda~ of an optimal build_sltmpc solution.
Matrix certificate_from_solution(const SolveResult& result, const TerminalIngredients& terminal);

}  // namespace sltmpc
