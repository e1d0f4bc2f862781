#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sltmpc/runtime.hpp"

namespace sltmpc {

using Rng = std::mt19937_64;

struct Box {
  Vector lower;
  Vector upper;
};

/// Bounds of P when every row of H is a signed unit vector, else nullopt.
std::optional<Box> as_box(const HPolytope& P);

enum class DisturbanceLaw {
  kUniform,  // uniform over the box
  kVertex,   // uniformly chosen box vertex
};

/// Throws InvalidInput when W is not a box.
Vector sample_disturbance(const HPolytope& W, Rng& rng, DisturbanceLaw law = DisturbanceLaw::kUniform);

/// Seeded source for run_closed_loop; w is drawn in step order.
DisturbanceSource make_disturbance_source(const HPolytope& W, std::uint64_t seed,
                                          DisturbanceLaw law = DisturbanceLaw::kUniform);

enum class RoaVariant { kFixedTube, kPrimary, kFullSltmpc };
std::string to_string(RoaVariant variant);
RoaVariant roa_variant_from_string(const std::string& name);

enum class CellStatus { kFeasible, kInfeasible, kSolverFailure };
std::string to_string(CellStatus status);

struct GridSpec {
  Vector lower;
  Vector upper;
  double spacing = 0.05;
};

/// Grid points lower + spacing * k, inclusive of `upper` up to rounding.
std::vector<Vector> grid_points(const GridSpec& grid);

/// Ingredients shared by the region-of-attraction variants.
struct RoaSetup {
  ProblemData data;
  TerminalIngredients terminal;
  MemoryEntry fixed_entry;
  std::vector<MemoryEntry> primary_memory;
  SecondaryOptions secondary;
  SolverSettings solver;
  double rho = 1e-3;
};

struct RoaGrid {
  GridSpec grid;
  std::vector<Vector> points;
  std::vector<RoaVariant> variants;
  /// status[v][c] for variant v and cell c.
  std::vector<std::vector<CellStatus>> status;

  std::size_t feasible_count(std::size_t variant) const;
};

SolveStatus solve_variant(const RoaSetup& setup, RoaVariant variant, const Vector& x0);

RoaGrid roa_grid(const RoaSetup& setup, const std::vector<RoaVariant>& variants, const GridSpec& grid);

struct TimingSummary {
  std::string variant;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  std::size_t samples = 0;
};

TimingSummary summarize(std::string variant, std::vector<double> times_ms);

/// Solve times of every variant on the same states; each state is solved
/// `repeats` times. Requires at least 30 samples per variant.
std::vector<TimingSummary> bench_solve_times(const RoaSetup& setup, const std::vector<Vector>& states,
                                             int repeats);

struct CsvOptions {
  std::string config_hash;
  /// Zero the solve-time column so logs compare byte for byte.
  bool include_timing = true;
};

void write_trajectory_csv(std::ostream& out, const TrajectoryLog& log, std::size_t memory_capacity,
                          const CsvOptions& options);
void write_roa_csv(std::ostream& out, const RoaGrid& grid, const CsvOptions& options);
/// 2-D state tube polygons of each entry for steps 0..N.
void write_tubes_csv(std::ostream& out, const std::vector<MemoryEntry>& entries, const Matrix& H_x,
                     const CsvOptions& options);
void write_bench_csv(std::ostream& out, const std::vector<TimingSummary>& summaries, const CsvOptions& options);

}  // namespace sltmpc
