#include "sltmpc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <ostream>

namespace sltmpc {

std::optional<Box> as_box(const HPolytope& P) {
  const Index n = P.dim();
  Box box{Vector::Constant(n, -std::numeric_limits<double>::infinity()),
          Vector::Constant(n, std::numeric_limits<double>::infinity())};
  for (Index r = 0; r < P.num_constraints(); ++r) {
    Index axis = -1;
    for (Index c = 0; c < n; ++c) {
      if (P.H()(r, c) == 0.0) continue;
      if (axis >= 0) return std::nullopt;
      axis = c;
    }
    if (axis < 0) return std::nullopt;
    const double a = P.H()(r, axis);
    const double bound = P.h()(r) / std::abs(a);
    if (a > 0.0) {
      box.upper(axis) = std::min(box.upper(axis), bound);
    } else {
      box.lower(axis) = std::max(box.lower(axis), -bound);
    }
  }
  if (!box.lower.allFinite() || !box.upper.allFinite() || (box.upper - box.lower).minCoeff() < 0.0) {
    return std::nullopt;
  }
  return box;
}

Vector sample_disturbance(const HPolytope& W, Rng& rng, DisturbanceLaw law) {
  const auto box = as_box(W);
  if (!box) throw InvalidInput("sample_disturbance: W is not a box");
  Vector w(W.dim());
  for (Index i = 0; i < w.size(); ++i) {
    const double lo = box->lower(i), hi = box->upper(i);
    if (law == DisturbanceLaw::kVertex) {
      w(i) = std::bernoulli_distribution(0.5)(rng) ? hi : lo;
    } else {
      w(i) = lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
    }
  }
  return w;
}

DisturbanceSource make_disturbance_source(const HPolytope& W, std::uint64_t seed, DisturbanceLaw law) {
  auto rng = std::make_shared<Rng>(seed);
  return [W, rng, law](int) { return sample_disturbance(W, *rng, law); };
}

std::string to_string(RoaVariant variant) {
  switch (variant) {
    case RoaVariant::kFixedTube:
      return "fixed_tube_baseline";
    case RoaVariant::kPrimary:
      return "primary_async";
    case RoaVariant::kFullSltmpc:
      return "full_sltmpc";
  }
  return "unknown";
}

RoaVariant roa_variant_from_string(const std::string& name) {
  for (auto v : {RoaVariant::kFixedTube, RoaVariant::kPrimary, RoaVariant::kFullSltmpc}) {
    if (to_string(v) == name) return v;
  }
  throw InvalidInput("unknown variant '" + name + "'");
}

std::string to_string(CellStatus status) {
  switch (status) {
    case CellStatus::kFeasible:
      return "feasible";
    case CellStatus::kInfeasible:
      return "infeasible";
    case CellStatus::kSolverFailure:
      return "solver-failure";
  }
  return "solver-failure";
}

std::vector<Vector> grid_points(const GridSpec& grid) {
  if (!(grid.spacing > 0.0)) throw InvalidInput("grid spacing must be positive");
  const Index n = grid.lower.size();
  if (grid.upper.size() != n) throw InvalidInput("grid bounds differ in dimension");
  std::vector<Index> counts(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const double span = grid.upper(i) - grid.lower(i);
    if (span < 0.0) throw InvalidInput("grid upper bound below lower bound");
    counts[static_cast<std::size_t>(i)] = static_cast<Index>(std::floor(span / grid.spacing + 1e-9)) + 1;
  }
  std::vector<Vector> points;
  std::vector<Index> idx(static_cast<std::size_t>(n), 0);
  // Last coordinate varies slowest, so rows of a 2-D grid share x2.
  while (true) {
    Vector p(n);
    for (Index i = 0; i < n; ++i) p(i) = grid.lower(i) + grid.spacing * static_cast<double>(idx[static_cast<std::size_t>(i)]);
    points.push_back(p);
    Index i = 0;
    while (i < n && ++idx[static_cast<std::size_t>(i)] == counts[static_cast<std::size_t>(i)]) {
      idx[static_cast<std::size_t>(i)] = 0;
      ++i;
    }
    if (i == n) break;
  }
  return points;
}

std::size_t RoaGrid::feasible_count(std::size_t variant) const {
  return static_cast<std::size_t>(
      std::count(status.at(variant).begin(), status.at(variant).end(), CellStatus::kFeasible));
}

namespace {

ProblemSpec variant_problem(const RoaSetup& setup, RoaVariant variant, const Vector& x0) {
  switch (variant) {
    case RoaVariant::kFixedTube:
      return build_fixed_tube(setup.data, setup.terminal, setup.fixed_entry, x0);
    case RoaVariant::kPrimary:
      return build_primary(setup.data, setup.terminal, setup.primary_memory, x0, setup.rho);
    case RoaVariant::kFullSltmpc:
      return build_sltmpc(setup.data, setup.terminal, setup.secondary, x0);
  }
  throw InvalidInput("unknown variant");
}

CellStatus cell_status(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal:
      return CellStatus::kFeasible;
    case SolveStatus::kInfeasible:
      return CellStatus::kInfeasible;
    case SolveStatus::kNumericalFailure:
      return CellStatus::kSolverFailure;
  }
  return CellStatus::kSolverFailure;
}

}  // namespace

SolveStatus solve_variant(const RoaSetup& setup, RoaVariant variant, const Vector& x0) {
  return solve(variant_problem(setup, variant, x0), setup.solver).status;
}

RoaGrid roa_grid(const RoaSetup& setup, const std::vector<RoaVariant>& variants, const GridSpec& grid) {
  RoaGrid out;
  out.grid = grid;
  out.points = grid_points(grid);
  out.variants = variants;
  for (RoaVariant v : variants) {
    std::vector<CellStatus> flags;
    flags.reserve(out.points.size());
    for (const auto& p : out.points) flags.push_back(cell_status(solve_variant(setup, v, p)));
    out.status.push_back(std::move(flags));
  }
  return out;
}

TimingSummary summarize(std::string variant, std::vector<double> times_ms) {
  TimingSummary s;
  s.variant = std::move(variant);
  s.samples = times_ms.size();
  if (times_ms.empty()) return s;
  std::sort(times_ms.begin(), times_ms.end());
  s.mean_ms = std::accumulate(times_ms.begin(), times_ms.end(), 0.0) / static_cast<double>(times_ms.size());
  const std::size_t mid = times_ms.size() / 2;
  s.median_ms = times_ms.size() % 2 == 1 ? times_ms[mid] : 0.5 * (times_ms[mid - 1] + times_ms[mid]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(times_ms.size())));
  s.p95_ms = times_ms[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

std::vector<TimingSummary> bench_solve_times(const RoaSetup& setup, const std::vector<Vector>& states,
                                             int repeats) {
  if (repeats < 1 || states.size() * static_cast<std::size_t>(repeats) < 30) {
    throw InvalidInput("bench_solve_times: need at least 30 solves per variant");
  }
  std::vector<TimingSummary> out;
  for (auto v : {RoaVariant::kPrimary, RoaVariant::kFixedTube, RoaVariant::kFullSltmpc}) {
    std::vector<double> times;
    for (const auto& x : states) {
      const ProblemSpec p = variant_problem(setup, v, x);
      for (int r = 0; r < repeats; ++r) times.push_back(solve(p, setup.solver).solve_time_ms);
    }
    out.push_back(summarize(to_string(v), std::move(times)));
  }
  return out;
}

namespace {

void begin_csv(std::ostream& out, const CsvOptions& options) {
  out.precision(17);
  out << "# config_hash=" << options.config_hash << '\n';
}

void put(std::ostream& out, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) out << ',' << v(i);
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const TrajectoryLog& log, std::size_t memory_capacity,
                          const CsvOptions& options) {
  begin_csv(out, options);
  if (log.records.empty()) {
    out << "k\n";
    return;
  }
  const Index n = log.records.front().x.size();
  const Index m = log.records.front().u.size();
  out << 'k';
  for (Index i = 1; i <= n; ++i) out << ",x" << i;
  for (Index i = 1; i <= m; ++i) out << ",u" << i;
  for (Index i = 1; i <= n; ++i) out << ",w" << i;
  for (std::size_t j = 0; j < memory_capacity; ++j) out << ",lambda_" << j;
  out << ",objective,solve_time_ms,mem_event\n";
  for (const auto& r : log.records) {
    out << r.k;
    put(out, r.x);
    put(out, r.u);
    put(out, r.w);
    for (std::size_t j = 0; j < memory_capacity; ++j) {
      out << ',' << (static_cast<Index>(j) < r.lambda.size() ? r.lambda(static_cast<Index>(j)) : 0.0);
    }
    out << ',' << r.objective << ',' << (options.include_timing ? r.solve_time_ms : 0.0) << ','
        << to_string(r.event) << '\n';
  }
}

void write_roa_csv(std::ostream& out, const RoaGrid& grid, const CsvOptions& options) {
  begin_csv(out, options);
  const Index n = grid.points.empty() ? 0 : grid.points.front().size();
  for (Index i = 1; i <= n; ++i) out << (i > 1 ? "," : "") << 'x' << i;
  out << ",variant,status\n";
  for (std::size_t v = 0; v < grid.variants.size(); ++v) {
    for (std::size_t c = 0; c < grid.points.size(); ++c) {
      const Vector& p = grid.points[c];
      for (Index i = 0; i < n; ++i) out << (i > 0 ? "," : "") << p(i);
      out << ',' << to_string(grid.variants[v]) << ',' << to_string(grid.status[v][c]) << '\n';
    }
  }
}

void write_tubes_csv(std::ostream& out, const std::vector<MemoryEntry>& entries, const Matrix& H_x,
                     const CsvOptions& options) {
  if (H_x.cols() != 2) throw InvalidInput("write_tubes_csv: tube polygons need a 2-D state");
  begin_csv(out, options);
  out << "entry_id,step_i,vertex_index,vx1,vx2\n";
  for (std::size_t e = 0; e < entries.size(); ++e) {
    for (int i = 0; i <= entries[e].tubes.horizon(); ++i) {
      const VertexSet poly = state_tube_polygon(entries[e].tubes, H_x, i);
      for (Index k = 0; k < poly.size(); ++k) {
        out << e << ',' << i << ',' << k << ',' << poly.points()(0, k) << ',' << poly.points()(1, k) << '\n';
      }
    }
  }
}

void write_bench_csv(std::ostream& out, const std::vector<TimingSummary>& summaries, const CsvOptions& options) {
  begin_csv(out, options);
  out << "variant,mean_ms,median_ms,p95_ms\n";
  for (const auto& s : summaries) {
    out << s.variant << ',' << s.mean_ms << ',' << s.median_ms << ',' << s.p95_ms << '\n';
  }
}

}  // namespace sltmpc
