#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sltmpc/sim.hpp"

namespace sltmpc {

/// Malformed or inconsistent configuration; the message names the field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Constraint set given either as a box or as H x <= h.
struct SetConfig {
  Vector lower;
  Vector upper;
  Matrix H;
  Vector h;

  bool is_box() const { return H.size() == 0; }
  HPolytope polytope() const;
};

/// How the memory is seeded before the first step.
struct SeedConfig {
  /// Entries from secondary solves at these states, after the DRS entry.
  std::vector<Vector> states;
  SecondaryCost cost = SecondaryCost::kTightening;
};

struct ExperimentConfig {
  Matrix A;
  Matrix B;
  SetConfig X;
  SetConfig U;
  SetConfig W;
  Matrix Q;
  Matrix R;
  int horizon = 8;

  std::size_t memory_capacity = 3;
  double rho = 1e-3;
  SeedConfig seed_memory;
  Schedule schedule = Schedule::deterministic(5);

  SecondaryOptions secondary;
  MrpiOptions mrpi;
  SolverSettings solver;

  std::uint64_t seed = 0;
  int steps = 25;
  int runs = 1;
  Vector x0;
  DisturbanceLaw disturbance = DisturbanceLaw::kUniform;
  bool log_timing = true;
  std::vector<int> tube_steps;

  GridSpec grid;
  SeedConfig roa_memory;
  std::vector<RoaVariant> roa_variants;

  int bench_repeats = 1;
  int bench_states = 100;
};

/// Numerical example with a double integrator-like plant, N = 8, M = 3.
ExperimentConfig default_config();

/// Fields absent from the file keep their default_config() values.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text);
std::string serialize_config(const ExperimentConfig& config);

/// Throws ConfigError naming the first offending field.
void validate_config(const ExperimentConfig& config);

/// 16 hex digits identifying the serialized configuration.
std::string config_hash(const ExperimentConfig& config);

std::string schedule_to_string(const Schedule& schedule);
/// "never", "background" or a positive period.
Schedule parse_schedule(const std::string& text);

ProblemData make_problem_data(const ExperimentConfig& config);

/// DRS entry of the terminal gain followed by secondary entries at the seed states.
std::vector<MemoryEntry> seed_entries(const ProblemData& data, const TerminalIngredients& terminal,
                                      const SeedConfig& seed, const SecondaryOptions& options,
                                      const SolverSettings& solver);

/// Offline ingredients plus seeded memory, ready for run_closed_loop.
ControllerState make_controller(const ExperimentConfig& config);

RoaSetup make_roa_setup(const ExperimentConfig& config);

}  // namespace sltmpc
