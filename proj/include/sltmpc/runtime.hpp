#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sltmpc/ocp.hpp"

namespace sltmpc {

/// Weights at or below this value count as zero when replacing slots.
inline constexpr double kZeroWeightTolerance = 1e-9;

struct Memory {
  std::vector<MemoryEntry> entries;
  std::size_t capacity = 3;
  /// Weights of the most recent primary solve, one per entry.
  Vector last_lambda;

  bool full() const { return entries.size() >= capacity; }
  std::size_t size() const { return entries.size(); }
};

enum class MemoryAction { kNone, kInsert, kReplace, kDiscard };

struct MemoryEvent {
  MemoryAction action = MemoryAction::kNone;
  int slot = -1;
};

/// "none", "insert(j)", "replace(j)" or "discard".
std::string to_string(const MemoryEvent& event);

/// Memory update rule: insert into a free slot, otherwise replace the first
/// slot whose last weight is zero, otherwise discard the new entry.
MemoryEvent update_memory(Memory& memory, MemoryEntry entry);

struct ControllerSettings {
  double rho = 1e-3;
  SolverSettings solver;
  SecondaryOptions secondary;
};

struct ControllerState {
  ProblemData data;
  TerminalIngredients terminal;
  Memory memory;
  int step = 0;
  ControllerSettings settings;
};

/// Primary solve did not return an optimal point.
class PrimaryFailure : public std::runtime_error {
 public:
  PrimaryFailure(SolveStatus status, const std::string& snapshot);
  SolveStatus status() const { return status_; }

 private:
  SolveStatus status_;
};

struct PrimaryDiagnostics {
  Vector u;
  Vector lambda;
  double objective = 0.0;
  double solve_time_ms = 0.0;
  SolveResult result;
};

/// Solves the fused-memory problem at x, stores the weights and returns v_0.
/// Throws PrimaryFailure unless the solve is optimal.
PrimaryDiagnostics primary_step(ControllerState& state, const Vector& x);

struct SecondaryOutcome {
  std::optional<MemoryEntry> entry;
  SolveStatus status = SolveStatus::kNumericalFailure;
  double solve_time_ms = 0.0;
};

/// Solves the scaled-terminal problem at x and converts the optimizer into a
/// certified entry. No entry when the solve fails; throws SynthesisError when
/// the certificate does not re-verify.
SecondaryOutcome run_secondary(const ProblemData& data, const TerminalIngredients& terminal, const Vector& x,
                               const SecondaryOptions& options, int birth_step, const SolverSettings& solver = {});

/// Shifted candidate for the primary problem at x(k+1) = z_1 + w, built from
/// the optimizer at step k. `next` is the memory used at k+1; slots beyond the
/// previous memory, or replaced ones, get weight zero.
Vector shifted_candidate(const ProblemData& data, const TerminalIngredients& terminal, const Memory& previous,
                         const Memory& next, const SolveResult& solution, const Vector& w);

struct Schedule {
  enum class Kind { kDeterministic, kBackground };
  Kind kind = Kind::kDeterministic;
  /// Secondary period in steps; never runs when <= 0.
  int period = 5;

  static Schedule deterministic(int period) { return {Kind::kDeterministic, period}; }
  static Schedule background() { return {Kind::kBackground, 1}; }
  static Schedule never() { return {Kind::kDeterministic, 0}; }
};

struct StepRecord {
  int k = 0;
  Vector x;
  Vector u;
  Vector w;
  Vector lambda;
  double objective = 0.0;
  double solve_time_ms = 0.0;
  MemoryEvent event;
};

struct TrajectoryLog {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<StepRecord> records;
  Vector final_state;
};

/// Closed loop failed; carries the records up to the failing step.
class ClosedLoopFailure : public std::runtime_error {
 public:
  ClosedLoopFailure(const PrimaryFailure& cause, TrajectoryLog partial);
  const TrajectoryLog& partial() const { return partial_; }
  SolveStatus status() const { return status_; }

 private:
  TrajectoryLog partial_;
  SolveStatus status_;
};

/// Disturbance realized at step k.
using DisturbanceSource = std::function<Vector(int k)>;

/// Called after every primary solve with the memory that solve used.
using StepObserver =
    std::function<void(const ControllerState& state, const PrimaryDiagnostics& diagnostics, const StepRecord& record)>;

/// Runs `steps` closed-loop steps from x0. Memory updates are applied only
/// between primary solves.
TrajectoryLog run_closed_loop(ControllerState& state, const Vector& x0, const Schedule& schedule, int steps,
                              const DisturbanceSource& disturbance, const StepObserver& observer = {});

}  // namespace sltmpc
