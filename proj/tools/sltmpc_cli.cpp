#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include "sltmpc/config.hpp"

namespace fs = std::filesystem;
using namespace sltmpc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitSolver = 4;

struct Paths {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> schedule;
};

ExperimentConfig load(const Paths& paths) {
  ExperimentConfig config = paths.config.empty() ? default_config() : load_config(paths.config);
  if (paths.seed) config.seed = *paths.seed;
  if (paths.schedule) config.schedule = parse_schedule(*paths.schedule);
  return config;
}

std::ofstream open_output(const Paths& paths, const std::string& name) {
  fs::create_directories(paths.out);
  const fs::path file = fs::path(paths.out) / name;
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  return out;
}

CsvOptions csv_options(const ExperimentConfig& config) { return {config_hash(config), config.log_timing}; }

bool constraints_hold(const ProblemData& data, const StepRecord& r, double tol) {
  return contains(data.X, r.x, tol) && contains(data.U, r.u, tol);
}

int simulate(const Paths& paths) {
  const ExperimentConfig config = load(paths);
  int violations = 0;
  for (int run = 0; run < config.runs; ++run) {
    ControllerState state = make_controller(config);
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(run);
    const std::set<int> snapshot_steps(config.tube_steps.begin(), config.tube_steps.end());
    std::map<int, std::vector<MemoryEntry>> snapshots;
    auto observer = [&](const ControllerState& s, const PrimaryDiagnostics&, const StepRecord& r) {
      if (run == 0 && snapshot_steps.count(r.k)) snapshots[r.k] = s.memory.entries;
    };
    const std::string name = run == 0 ? "trajectory.csv" : "trajectory_" + std::to_string(run) + ".csv";
    TrajectoryLog log;
    int code = kExitOk;
    try {
      log = run_closed_loop(state, config.x0, config.schedule, config.steps,
                            make_disturbance_source(state.data.W, seed, config.disturbance), observer);
    } catch (const ClosedLoopFailure& failure) {
      std::cerr << failure.what() << '\n';
      log = failure.partial();
      code = failure.status() == SolveStatus::kInfeasible ? kExitInfeasible : kExitSolver;
    }
    log.seed = seed;
    log.config_hash = config_hash(config);
    auto out = open_output(paths, name);
    write_trajectory_csv(out, log, config.memory_capacity, csv_options(config));
    if (code != kExitOk) return code;
    for (const auto& r : log.records) violations += constraints_hold(state.data, r, 1e-6) ? 0 : 1;
    if (state.data.n() == 2) {
      for (const auto& [k, entries] : snapshots) {
        auto tubes = open_output(paths, "tubes_k" + std::to_string(k) + ".csv");
        write_tubes_csv(tubes, entries, state.data.X.H(), csv_options(config));
      }
    }
  }
  std::cout << "simulate: " << config.runs << " run(s), " << config.steps << " steps, " << violations
            << " constraint violation(s)\n";
  return violations == 0 ? kExitOk : kExitCheckFailed;
}

int roa(const Paths& paths) {
  const ExperimentConfig config = load(paths);
  const RoaSetup setup = make_roa_setup(config);
  const RoaGrid grid = roa_grid(setup, config.roa_variants, config.grid);
  auto out = open_output(paths, "roa.csv");
  write_roa_csv(out, grid, csv_options(config));
  for (std::size_t v = 0; v < grid.variants.size(); ++v) {
    std::cout << to_string(grid.variants[v]) << ": " << grid.feasible_count(v) << " of " << grid.points.size()
              << " cells feasible\n";
  }
  return kExitOk;
}

int bench(const Paths& paths) {
  const ExperimentConfig config = load(paths);
  const RoaSetup setup = make_roa_setup(config);
  // Closed-loop states of successive seeds.
  std::vector<Vector> states;
  for (std::uint64_t seed = config.seed; states.size() < static_cast<std::size_t>(config.bench_states); ++seed) {
    ControllerState state = make_controller(config);
    const TrajectoryLog log = run_closed_loop(state, config.x0, config.schedule, config.steps,
                                              make_disturbance_source(state.data.W, seed, config.disturbance));
    for (const auto& r : log.records) {
      if (states.size() < static_cast<std::size_t>(config.bench_states)) states.push_back(r.x);
    }
  }
  const auto summaries = bench_solve_times(setup, states, config.bench_repeats);
  auto out = open_output(paths, "bench.csv");
  write_bench_csv(out, summaries, csv_options(config));
  for (const auto& s : summaries) {
    std::cout << s.variant << ": mean " << s.mean_ms << " ms, median " << s.median_ms << " ms, p95 " << s.p95_ms
              << " ms\n";
  }
  std::cout << "primary / full ratio: " << summaries[0].mean_ms / summaries[2].mean_ms << '\n';
  return kExitOk;
}

int tubes(const Paths& paths) {
  const ExperimentConfig config = load(paths);
  const ControllerState state = make_controller(config);
  auto out = open_output(paths, "tubes.csv");
  write_tubes_csv(out, state.memory.entries, state.data.X.H(), csv_options(config));
  return kExitOk;
}

int verify(const Paths& paths) {
  const ExperimentConfig config = load(paths);
  int failures = 0;
  auto report = [&](const std::string& name, bool ok, const std::string& detail = {}) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << (detail.empty() ? "" : ": " + detail) << '\n';
    failures += ok ? 0 : 1;
  };

  report("config round trip", serialize_config(parse_config(serialize_config(config))) == serialize_config(config));

  ControllerState state = make_controller(config);
  const ProblemData& data = state.data;
  const TerminalIngredients& terminal = state.terminal;
  report("terminal set robust invariance",
         check_lemma1(terminal.invariance_multiplier, 1.0, 1.0, terminal.closed_loop, Matrix::Identity(data.n(), data.n()),
                      terminal.X_f, terminal.X_f, data.W_vertices));

  bool certified = true, structured = true;
  auto check_entry = [&](const MemoryEntry& e) {
    certified = certified && certify_entry(e, data, terminal);
    structured = structured && check_tube_structure(e.tubes, e.response, data.W_vertices, data.X.H(), data.U.H());
  };
  for (const auto& e : state.memory.entries) check_entry(e);

  double worst_candidate = 0.0, worst_simplex = 0.0;
  bool safe_updates = true;
  std::optional<std::pair<Memory, SolveResult>> previous;
  Vector previous_w;
  auto observer = [&](const ControllerState& s, const PrimaryDiagnostics& d, const StepRecord& r) {
    if (r.event.action == MemoryAction::kInsert || r.event.action == MemoryAction::kReplace) {
      check_entry(s.memory.entries[static_cast<std::size_t>(r.event.slot)]);
    }
    if (previous) {
      if (r.event.action == MemoryAction::kReplace) {
        safe_updates = safe_updates &&
                       previous->second.value("lambda")(r.event.slot) <= kZeroWeightTolerance;
      }
      const Vector candidate = shifted_candidate(data, terminal, previous->first, s.memory, previous->second, previous_w);
      const ProblemSpec spec = build_primary(data, terminal, s.memory.entries, r.x, s.settings.rho);
      worst_candidate = std::max(worst_candidate, spec.max_violation(candidate));
    }
    worst_simplex = std::max(worst_simplex, std::abs(d.lambda.sum() - 1.0));
    previous.emplace(s.memory, d.result);
    previous_w = r.w;
  };
  double max_violation = 0.0;
  try {
    const TrajectoryLog log = run_closed_loop(state, config.x0, config.schedule, config.steps,
                                              make_disturbance_source(data.W, config.seed, config.disturbance),
                                              [&](const ControllerState& s, const PrimaryDiagnostics& d,
                                                  const StepRecord& r) {
                                                observer(s, d, r);
                                                max_violation = std::max(
                                                    {max_violation, (data.X.H() * r.x - data.X.h()).maxCoeff(),
                                                     (data.U.H() * r.u - data.U.h()).maxCoeff()});
                                              });
    report("recursive feasibility", true);
    report("closed-loop constraints", max_violation <= 1e-6, "max violation " + std::to_string(max_violation));
    report("shifted candidate feasibility", worst_candidate <= 1e-6, "max violation " + std::to_string(worst_candidate));
    report("weights on the simplex", worst_simplex <= 1e-6);
    report("memory updates only touch zero-weight slots", safe_updates);
  } catch (const ClosedLoopFailure& failure) {
    report("recursive feasibility", false, failure.what());
  }
  report("entry certificates", certified);
  report("tube structure", structured);

  ControllerState nominal = make_controller(config);
  double worst_decrease = -std::numeric_limits<double>::infinity();
  std::optional<std::pair<double, double>> last;  // objective, stage cost
  try {
    run_closed_loop(nominal, config.x0, Schedule::never(), config.steps,
                    [&](int) { return Vector::Zero(data.n()); },
                    [&](const ControllerState&, const PrimaryDiagnostics& d, const StepRecord& r) {
                      const double stage = r.x.dot(data.Q * r.x) + r.u.dot(data.R * r.u);
                      if (last) worst_decrease = std::max(worst_decrease, d.objective - last->first + last->second);
                      last.emplace(d.objective, stage);
                    });
    report("nominal decrease", worst_decrease <= 1e-6, "worst excess " + std::to_string(worst_decrease));
  } catch (const ClosedLoopFailure& failure) {
    report("nominal decrease", false, failure.what());
  }
  return failures == 0 ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tube MPC with a memory of asynchronously computed tube sequences"};
  app.require_subcommand(1);
  Paths paths;
  app.add_option("--config", paths.config, "YAML experiment configuration (default: built-in preset)")
      ->check(CLI::ExistingFile);
  app.add_option("--out", paths.out, "output directory");
  app.add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) { paths.seed = s; }, "override the seed");
  app.add_option_function<std::string>("--schedule", [&](const std::string& s) { paths.schedule = s; },
                                       "period K, 'background' or 'never'");

  std::map<std::string, int (*)(const Paths&)> commands{
      {"simulate", simulate}, {"roa", roa}, {"bench", bench}, {"tubes", tubes}, {"verify", verify}};
  const std::map<std::string, std::string> help{
      {"simulate", "closed-loop runs, writes trajectory.csv and tube snapshots"},
      {"roa", "feasible initial states per variant, writes roa.csv"},
      {"bench", "solve-time statistics, writes bench.csv"},
      {"tubes", "tube polygons of the seeded memory, writes tubes.csv"},
      {"verify", "checks the invariants on the configuration"}};
  for (const auto& [name, fn] : commands) app.add_subcommand(name, help.at(name))->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    for (const auto& [name, fn] : commands) {
      if (app.got_subcommand(name)) return fn(paths);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ClosedLoopFailure& e) {
    std::cerr << e.what() << '\n';
    return e.status() == SolveStatus::kInfeasible ? kExitInfeasible : kExitSolver;
  } catch (const SynthesisError& e) {
    std::cerr << "synthesis failed: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolver;
  }
  return kExitConfig;
}
