#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sltmpc/problem_spec.hpp"

namespace sltmpc {

enum class SolveStatus { kOptimal, kInfeasible, kNumericalFailure };

std::string to_string(SolveStatus status);

struct SolverSettings {
  /// Scaled primal/dual residual and relative complementarity targets.
  double tolerance = 1e-9;
  /// Accepted as optimal when the iteration stalls above `tolerance`.
  double acceptable_tolerance = 1e-7;
  /// Normalized Farkas residual below which primal infeasibility is declared.
  double infeasibility_tolerance = 1e-8;
  int max_iterations = 80;
  /// Static regularization of the quasi-definite KKT matrix.
  double regularization = 1e-10;
  int refinement_steps = 3;
  /// Decide infeasibility with a phase-one LP if the main iteration stalls.
  bool phase_one_fallback = true;
  /// Re-solve on the detected active set; inactive multipliers and slack
  /// variables at their bounds become exact.
  bool polish = true;
};

struct SolveResult {
  SolveStatus status = SolveStatus::kNumericalFailure;
  /// Primal values; empty unless status is optimal.
  Vector x;
  Vector eq_duals;
  Vector ineq_duals;
  double objective = 0.0;
  double solve_time_ms = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  bool polished = false;
  std::vector<Variable> layout;

  bool optimal() const { return status == SolveStatus::kOptimal; }
  /// Primal values of a named variable block. Throws unless optimal.
  Vector value(std::string_view name) const;
};

/// Primal-dual interior-point method (Mehrotra predictor-corrector) on the
/// sparse quasi-definite reduced KKT system. Deterministic for identical input.
SolveResult solve(const ProblemSpec& problem, const SolverSettings& settings = {});

}  // namespace sltmpc
