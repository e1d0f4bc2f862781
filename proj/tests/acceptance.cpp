// Acceptance checks on the bundled preset. Prints one PASS/FAIL line per
// criterion and exits nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sltmpc/config.hpp"

using namespace sltmpc;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << detail << std::endl;
  failures += ok ? 0 : 1;
}

std::string num(double v) {
  std::ostringstream out;
  out.precision(3);
  out << v;
  return out.str();
}

double violation(const HPolytope& P, const Vector& x) { return (P.H() * x - P.h()).maxCoeff(); }

// Everything the closed-loop campaign feeds into later criteria.
struct Campaign {
  std::vector<MemoryEntry> secondary_entries;
  std::vector<MemoryEntry> all_entries;
  int runs = 0;
  int failed_runs = 0;
  double worst_constraint = 0.0;
  int candidate_checks = 0;
  double worst_candidate = 0.0;
  int replacements = 0;
  double worst_replaced_weight = 0.0;
  std::string first_failure;
};

Campaign closed_loop_campaign(const ExperimentConfig& config) {
  Campaign c;
  const ControllerState prototype = make_controller(config);
  const ProblemData& data = prototype.data;
  for (const auto& e : prototype.memory.entries) {
    c.all_entries.push_back(e);
    if (e.origin.rfind("secondary", 0) == 0) c.secondary_entries.push_back(e);
  }
  std::mt19937_64 pick(2024);
  std::bernoulli_distribution chosen(0.1);

  for (int run = 0; run < 500; ++run) {
    ControllerState state = prototype;
    std::optional<std::pair<Memory, SolveResult>> previous;
    Vector previous_w;
    auto observer = [&](const ControllerState& s, const PrimaryDiagnostics& d, const StepRecord& r) {
      c.worst_constraint = std::max({c.worst_constraint, violation(data.X, r.x), violation(data.U, r.u)});
      if (r.event.action == MemoryAction::kInsert || r.event.action == MemoryAction::kReplace) {
        const MemoryEntry& e = s.memory.entries[static_cast<std::size_t>(r.event.slot)];
        c.secondary_entries.push_back(e);
        c.all_entries.push_back(e);
      }
      if (previous) {
        if (r.event.action == MemoryAction::kReplace) {
          ++c.replacements;
          c.worst_replaced_weight =
              std::max(c.worst_replaced_weight, previous->second.value("lambda")(r.event.slot));
        }
        if (chosen(pick)) {
          const Vector candidate =
              shifted_candidate(data, s.terminal, previous->first, s.memory, previous->second, previous_w);
          const ProblemSpec next = build_primary(data, s.terminal, s.memory.entries, r.x, s.settings.rho);
          c.worst_candidate = std::max(c.worst_candidate, next.max_violation(candidate));
          ++c.candidate_checks;
        }
      }
      previous.emplace(s.memory, d.result);
      previous_w = r.w;
    };
    try {
      run_closed_loop(state, config.x0, Schedule::deterministic(5), 25,
                      make_disturbance_source(data.W, static_cast<std::uint64_t>(run)), observer);
    } catch (const ClosedLoopFailure& failure) {
      ++c.failed_runs;
      if (c.first_failure.empty()) c.first_failure = "run " + std::to_string(run) + ": " + failure.what();
    }
    ++c.runs;
  }
  return c;
}

// Criterion 3 grid, reused by criterion 5.
RoaGrid region_grid(const ExperimentConfig& config, const RoaSetup& setup) {
  GridSpec grid{config.X.lower, config.X.upper, 0.05};
  return roa_grid(setup, {RoaVariant::kFixedTube, RoaVariant::kPrimary, RoaVariant::kFullSltmpc}, grid);
}

void criterion_3(const RoaGrid& g) {
  std::size_t violations = 0, failures_seen = 0;
  for (std::size_t c = 0; c < g.points.size(); ++c) {
    const bool fixed = g.status[0][c] == CellStatus::kFeasible;
    const bool primary = g.status[1][c] == CellStatus::kFeasible;
    const bool full = g.status[2][c] == CellStatus::kFeasible;
    violations += (fixed && !primary) + (primary && !full);
    for (std::size_t v = 0; v < 3; ++v) failures_seen += g.status[v][c] == CellStatus::kSolverFailure;
  }
  const std::size_t nf = g.feasible_count(0), np = g.feasible_count(1), ns = g.feasible_count(2);
  report(3, "region nesting", violations == 0 && failures_seen == 0 && np > nf,
         std::to_string(g.points.size()) + " cells; feasible fixed " + std::to_string(nf) + ", primary " +
             std::to_string(np) + ", full " + std::to_string(ns) + "; nesting violations " +
             std::to_string(violations) + ", solver failures " + std::to_string(failures_seen));
}

void criterion_4(const ExperimentConfig& config) {
  ControllerState state = make_controller(config);
  const MemoryEntry drs = state.memory.entries.front();
  state.memory.entries = {drs};
  state.memory.capacity = 1;
  state.memory.last_lambda = Vector();
  double worst = 0.0;
  int steps = 0;
  std::string detail;
  try {
    run_closed_loop(state, config.x0, Schedule::never(), 25, [&](int) { return Vector::Zero(state.data.n()); },
                    [&](const ControllerState& s, const PrimaryDiagnostics& d, const StepRecord& r) {
                      const SolveResult fixed = solve(build_fixed_tube(s.data, s.terminal, drs, r.x), s.settings.solver);
                      if (!fixed.optimal()) throw std::runtime_error("fixed-tube solve " + to_string(fixed.status));
                      worst = std::max(worst, (d.u - extract_control(fixed, s.data)).lpNorm<Eigen::Infinity>());
                      ++steps;
                    });
    detail = std::to_string(steps) + " steps, max |u_primary - u_fixed| = " + num(worst);
  } catch (const std::exception& e) {
    detail = e.what();
    steps = 0;
  }
  report(4, "fixed-tube equivalence", steps == 25 && worst <= 1e-6, detail);
}

void criterion_5(const RoaSetup& setup, const RoaGrid& g) {
  std::vector<Vector> feasible;
  for (std::size_t c = 0; c < g.points.size(); ++c) {
    if (g.status[1][c] == CellStatus::kFeasible) feasible.push_back(g.points[c]);
  }
  const std::size_t count = 20;
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t runs = 0, transitions = 0;
  std::string error;
  for (std::size_t s = 0; s < count && feasible.size() >= count; ++s) {
    ControllerState state;
    state.data = setup.data;
    state.terminal = setup.terminal;
    state.memory.entries = setup.primary_memory;
    state.memory.capacity = setup.primary_memory.size();
    state.settings.rho = setup.rho;
    state.settings.solver = setup.solver;
    std::optional<std::pair<double, double>> last;  // value, stage cost
    try {
      run_closed_loop(state, feasible[s * feasible.size() / count], Schedule::never(), 25,
                      [&](int) { return Vector::Zero(setup.data.n()); },
                      [&](const ControllerState&, const PrimaryDiagnostics& d, const StepRecord& r) {
                        const double stage = r.x.dot(setup.data.Q * r.x) + r.u.dot(setup.data.R * r.u);
                        if (last) {
                          worst = std::max(worst, d.objective - last->first + last->second);
                          ++transitions;
                        }
                        last.emplace(d.objective, stage);
                      });
      ++runs;
    } catch (const ClosedLoopFailure& e) {
      if (error.empty()) error = std::string("; ") + e.what();
    }
  }
  report(5, "nominal decrease", runs == count && worst <= 1e-6,
         std::to_string(runs) + " of " + std::to_string(count) + " runs, " + std::to_string(transitions) +
             " transitions, max V(k+1) - V(k) + l(k) = " + num(worst) + error);
}

MemoryEntry tagged(int birth) {
  MemoryEntry e;
  e.birth_step = birth;
  e.origin = "tag";
  return e;
}

void criterion_6(const Campaign& campaign) {
  // Every fill level against every zero pattern of the weights.
  int cases = 0, mismatches = 0;
  const std::size_t capacity = 3;
  for (std::size_t size = 0; size <= capacity; ++size) {
    for (int pattern = 0; pattern < (1 << size); ++pattern) {
      Memory m;
      m.capacity = capacity;
      m.last_lambda = Vector::Zero(static_cast<Index>(size));
      for (std::size_t j = 0; j < size; ++j) {
        m.entries.push_back(tagged(static_cast<int>(j)));
        m.last_lambda(static_cast<Index>(j)) = ((pattern >> j) & 1) ? 0.0 : 1.0 / static_cast<double>(size);
      }
      const Vector weights = m.last_lambda;
      MemoryAction expected_action = MemoryAction::kDiscard;
      int expected_slot = -1;
      if (size < capacity) {
        expected_action = MemoryAction::kInsert;
        expected_slot = static_cast<int>(size);
      } else {
        for (std::size_t j = 0; j < size; ++j) {
          if ((pattern >> j) & 1) {
            expected_action = MemoryAction::kReplace;
            expected_slot = static_cast<int>(j);
            break;
          }
        }
      }
      const MemoryEvent e = update_memory(m, tagged(100));
      bool ok = e.action == expected_action && e.slot == expected_slot;
      if (ok && e.action != MemoryAction::kDiscard) ok = m.entries[static_cast<std::size_t>(e.slot)].birth_step == 100;
      if (ok && e.action == MemoryAction::kReplace) ok = weights(e.slot) <= kZeroWeightTolerance;
      if (ok && e.action == MemoryAction::kDiscard) {
        for (std::size_t j = 0; j < size; ++j) ok = ok && m.entries[j].birth_step == static_cast<int>(j);
      }
      mismatches += ok ? 0 : 1;
      ++cases;
    }
  }
  // Weights on either side of the zero threshold.
  Memory edge;
  edge.capacity = 2;
  edge.entries = {tagged(0), tagged(1)};
  edge.last_lambda = (Vector(2) << 1.0 - 1e-9, 1e-9).finished();
  mismatches += update_memory(edge, tagged(100)).slot == 1 ? 0 : 1;
  edge.entries = {tagged(0), tagged(1)};
  edge.last_lambda = (Vector(2) << 1.0 - 1.1e-9, 1.1e-9).finished();
  mismatches += update_memory(edge, tagged(100)).action == MemoryAction::kDiscard ? 0 : 1;
  cases += 2;

  const bool closed_loop_ok = campaign.worst_replaced_weight <= kZeroWeightTolerance;
  report(6, "memory update rule", mismatches == 0 && closed_loop_ok,
         std::to_string(cases) + " table cases, " + std::to_string(mismatches) + " mismatches; " +
             std::to_string(campaign.replacements) + " closed-loop replacements, max replaced weight " +
             num(campaign.worst_replaced_weight));
}

void criterion_7(const ExperimentConfig& config, const RoaSetup& setup) {
  std::vector<Vector> states;
  for (std::uint64_t seed = 0; states.size() < 100; ++seed) {
    ControllerState state = make_controller(config);
    const TrajectoryLog log =
        run_closed_loop(state, config.x0, config.schedule, config.steps, make_disturbance_source(state.data.W, seed));
    for (const auto& r : log.records) {
      if (states.size() < 100) states.push_back(r.x);
    }
  }
  const auto s = bench_solve_times(setup, states, 1);
  const TimingSummary& primary = s[0];
  const TimingSummary& full = s[2];
  const double ratio = primary.mean_ms / full.mean_ms;
  report(7, "solve-time ratio", primary.samples >= 100 && full.samples >= 100 && ratio <= 0.25,
         std::to_string(primary.samples) + " solves each; mean primary " + num(primary.mean_ms) + " ms, full " +
             num(full.mean_ms) + " ms, fixed tube " + num(s[1].mean_ms) + " ms, ratio " + num(ratio));
}

HPolytope random_polygon(std::mt19937_64& rng, int rows) {
  std::uniform_real_distribution<double> jitter(-0.25, 0.25);
  std::uniform_real_distribution<double> offset(0.5, 2.0);
  Matrix H(rows, 2);
  Vector h(rows);
  for (int r = 0; r < rows; ++r) {
    const double a = 2.0 * 3.141592653589793 * (r + jitter(rng)) / rows;
    H.row(r) << std::cos(a), std::sin(a);
    h(r) = offset(rng);
  }
  return HPolytope(H, h);
}

void criterion_8(const Campaign& campaign, const ProblemData& data, const TerminalIngredients& terminal) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  // Pontryagin difference against brute-force membership on a dense grid.
  long false_members = 0, missed_members = 0, grid_checks = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const HPolytope P = random_polygon(rng, 4 + trial % 5);
    Matrix S(2, 4);
    for (Index k = 0; k < S.cols(); ++k) S.col(k) << 0.4 * u(rng), 0.4 * u(rng);
    const TightenedSet T = pontryagin_tighten(P, VertexSet(S));
    for (double x = -2.0; x <= 2.0 + 1e-12; x += 0.02) {
      for (double y = -2.0; y <= 2.0 + 1e-12; y += 0.02) {
        const Vector p = (Vector(2) << x, y).finished();
        bool brute = true;
        for (Index k = 0; k < S.cols() && brute; ++k) brute = violation(P, p + S.col(k)) <= 0.0;
        const double margin = T.empty ? std::numeric_limits<double>::infinity() : violation(T.set, p);
        // Claimed members must be true members within 1e-6 ...
        if (margin <= 0.0) {
          double worst = -std::numeric_limits<double>::infinity();
          for (Index k = 0; k < S.cols(); ++k) worst = std::max(worst, violation(P, p + S.col(k)));
          false_members += worst > 1e-6;
        }
        // ... and true members must be claimed within 1e-6.
        missed_members += brute && margin > 1e-6;
        ++grid_checks;
      }
    }
  }

  // Support functions against vertex enumeration of the polygon.
  double worst_support = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const HPolytope P = random_polygon(rng, 3 + trial % 8);
    const Vector eta = (Vector(2) << u(rng), u(rng)).finished();
    const double expected = oracle::polygon_support(P.H(), P.h(), eta);
    worst_support = std::max({worst_support, std::abs(support_lp(P, eta) - expected),
                              std::abs(support(vertices_2d(P), eta) - expected)});
  }

  // Secondary entries: certificate re-verification and sampled containment of
  // alpha A_cl X_f + Gamma W inside alpha X_f.
  const Matrix& Vf = terminal.X_f_vertices->points();
  const Matrix Vw = data.W_vertices.points();
  std::exponential_distribution<double> expo(1.0);
  auto sample_hull = [&](const Matrix& V) {
    Vector theta(V.cols());
    for (Index k = 0; k < V.cols(); ++k) theta(k) = expo(rng);
    return Vector(V * theta / theta.sum());
  };
  std::size_t uncertified = 0;
  double worst_sample = -std::numeric_limits<double>::infinity();
  for (const MemoryEntry& e : campaign.secondary_entries) {
    const bool lemma = check_lemma1(e.certificate, e.alpha, e.alpha, terminal.closed_loop, e.tubes.gamma, terminal.X_f,
                                    terminal.X_f, data.W_vertices);
    uncertified += lemma && certify_entry(e, data, terminal) ? 0 : 1;
    const HPolytope target = scale(terminal.X_f, e.alpha);
    for (int k = 0; k < 1000; ++k) {
      const Vector x = k < Vf.cols() ? Vector(Vf.col(k)) : sample_hull(Vf);
      const Vector w = k < Vw.cols() ? Vector(Vw.col(k)) : sample_hull(Vw);
      worst_sample = std::max(worst_sample, violation(target, e.alpha * terminal.closed_loop * x + e.tubes.gamma * w));
    }
  }
  const bool ok = false_members == 0 && missed_members == 0 && worst_support <= 1e-9 && uncertified == 0 &&
                  !campaign.secondary_entries.empty() && worst_sample <= 1e-6;
  report(8, "set-algebra oracles", ok,
         "50 tightenings over " + std::to_string(grid_checks) + " grid points, " + std::to_string(false_members) +
             " false and " + std::to_string(missed_members) + " missed members; support error " +
             num(worst_support) + "; " + std::to_string(campaign.secondary_entries.size()) + " secondary entries, " +
             std::to_string(uncertified) + " uncertified, worst sampled violation " + num(worst_sample));
}

void criterion_9(const Campaign& campaign, const ProblemData& data) {
  const Matrix Vw = data.W_vertices.points();
  std::size_t bad = 0;
  double worst = 0.0;
  auto increment = [&](const Matrix& Phi, const Matrix& H) {
    Vector out(H.rows());
    for (Index r = 0; r < H.rows(); ++r) out(r) = oracle::mapped_support(Phi, Vw, H.row(r).transpose());
    return out;
  };
  for (const MemoryEntry& e : campaign.all_entries) {
    const auto& t = e.tubes;
    const auto N = static_cast<std::size_t>(t.horizon());
    bool ok = t.t_x[0].cwiseAbs().maxCoeff() == 0.0 && t.t_u[0].cwiseAbs().maxCoeff() == 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      ok = ok && (t.t_x[i + 1] - t.t_x[i]).minCoeff() >= 0.0 && (t.t_u[i + 1] - t.t_u[i]).minCoeff() >= 0.0;
      const Vector dx = t.t_x[i + 1] - t.t_x[i] - increment(e.response.phi_x[i], data.X.H());
      const Vector du = t.t_u[i + 1] - t.t_u[i] - increment(e.response.phi_u[i], data.U.H());
      worst = std::max({worst, dx.cwiseAbs().maxCoeff(), du.cwiseAbs().maxCoeff()});
      ok = ok && dx.cwiseAbs().maxCoeff() <= 1e-12 && du.cwiseAbs().maxCoeff() <= 1e-12;
    }
    ok = ok && check_tube_structure(t, e.response, data.W_vertices, data.X.H(), data.U.H());
    bad += ok ? 0 : 1;
  }
  report(9, "tube structure", bad == 0 && !campaign.all_entries.empty(),
         std::to_string(campaign.all_entries.size()) + " tube sequences, " + std::to_string(bad) +
             " malformed, worst recursion residual " + num(worst));
}

void criterion_10(const ProblemData& data, const TerminalIngredients& terminal) {
  const SecondaryOptions fir{TerminalMode::kFir, SecondaryCost::kNominal, 0.01};
  int produced = 0, tried = 0;
  double worst_gamma = 0.0;
  std::string error;
  for (const Vector& x : {Vector((Vector(2) << -1.25, -0.5).finished()), Vector((Vector(2) << -1.0, 0.0).finished()),
                          Vector((Vector(2) << 0.2, 0.5).finished())}) {
    ++tried;
    try {
      const SecondaryOutcome out = run_secondary(data, terminal, x, fir, 0);
      if (!out.entry) {
        error += " status " + to_string(out.status);
        continue;
      }
      worst_gamma = std::max(worst_gamma, out.entry->tubes.gamma.lpNorm<Eigen::Infinity>());
      produced += certify_entry(*out.entry, data, terminal) ? 1 : 0;
    } catch (const SynthesisError& e) {
      error += std::string(" ") + e.what();
    }
  }
  report(10, "FIR mode", produced == tried && worst_gamma <= 1e-6,
         std::to_string(produced) + " of " + std::to_string(tried) + " certified entries, max |Gamma| " +
             num(worst_gamma) + error);
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentConfig config = default_config();

  const Campaign campaign = closed_loop_campaign(config);
  report(1, "recursive feasibility and constraints",
         campaign.failed_runs == 0 && campaign.worst_constraint <= 1e-6,
         std::to_string(campaign.runs) + " runs x 25 steps, " + std::to_string(campaign.failed_runs) +
             " failed, max constraint violation " + num(campaign.worst_constraint) +
             (campaign.first_failure.empty() ? "" : "; " + campaign.first_failure));
  report(2, "shifted candidate", campaign.candidate_checks >= 1000 && campaign.worst_candidate <= 1e-6,
         std::to_string(campaign.candidate_checks) + " random (run, step) pairs, max violation " +
             num(campaign.worst_candidate));

  const RoaSetup setup = make_roa_setup(config);
  const RoaGrid grid = region_grid(config, setup);
  criterion_3(grid);
  criterion_4(config);
  criterion_5(setup, grid);
  criterion_6(campaign);
  criterion_7(config, setup);
  criterion_8(campaign, setup.data, setup.terminal);
  criterion_9(campaign, setup.data);
  criterion_10(setup.data, setup.terminal);

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << " in "
            << num(seconds) << " s" << std::endl;
  return failures == 0 ? 0 : 1;
}
