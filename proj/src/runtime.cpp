#include "sltmpc/runtime.hpp"

#include <chrono>
#include <future>
#include <sstream>

namespace sltmpc {

std::string to_string(const MemoryEvent& event) {
  switch (event.action) {
    case MemoryAction::kNone:
      return "none";
    case MemoryAction::kInsert:
      return "insert(" + std::to_string(event.slot) + ")";
    case MemoryAction::kReplace:
      return "replace(" + std::to_string(event.slot) + ")";
    case MemoryAction::kDiscard:
      return "discard";
  }
  return "none";
}

MemoryEvent update_memory(Memory& memory, MemoryEntry entry) {
  if (!memory.full()) {
    memory.entries.push_back(std::move(entry));
    const auto old = memory.last_lambda.size();
    if (old + 1 == static_cast<Index>(memory.entries.size())) {
      memory.last_lambda.conservativeResize(old + 1);
      memory.last_lambda(old) = 0.0;
    }
    return {MemoryAction::kInsert, static_cast<int>(memory.entries.size()) - 1};
  }
  // Weights from a solve against a different layout say nothing about slots.
  if (memory.last_lambda.size() == static_cast<Index>(memory.entries.size())) {
    for (Index j = 0; j < memory.last_lambda.size(); ++j) {
      if (memory.last_lambda(j) <= kZeroWeightTolerance) {
        memory.entries[static_cast<std::size_t>(j)] = std::move(entry);
        return {MemoryAction::kReplace, static_cast<int>(j)};
      }
    }
  }
  return {MemoryAction::kDiscard, -1};
}

PrimaryFailure::PrimaryFailure(SolveStatus status, const std::string& snapshot)
    : std::runtime_error("primary solve " + to_string(status) + ": " + snapshot), status_(status) {}

namespace {

std::string snapshot(const ControllerState& state, const Vector& x) {
  std::ostringstream out;
  out.precision(17);
  out << "step " << state.step << ", x = [" << x.transpose() << "], memory";
  for (const auto& e : state.memory.entries) out << " {" << e.origin << ", birth " << e.birth_step << ", alpha " << e.alpha << "}";
  out << ", last lambda [" << state.memory.last_lambda.transpose() << "]";
  return out.str();
}

}  // namespace

PrimaryDiagnostics primary_step(ControllerState& state, const Vector& x) {
  if (state.memory.entries.empty()) throw InvalidInput("primary_step: memory is empty");
  const ProblemSpec spec = build_primary(state.data, state.terminal, state.memory.entries, x, state.settings.rho);
  PrimaryDiagnostics d;
  d.result = solve(spec, state.settings.solver);
  if (!d.result.optimal()) throw PrimaryFailure(d.result.status, snapshot(state, x));
  d.u = extract_control(d.result, state.data);
  d.lambda = d.result.value("lambda");
  d.objective = d.result.objective;
  d.solve_time_ms = d.result.solve_time_ms;
  state.memory.last_lambda = d.lambda;
  return d;
}

SecondaryOutcome run_secondary(const ProblemData& data, const TerminalIngredients& terminal, const Vector& x,
                               const SecondaryOptions& options, int birth_step, const SolverSettings& solver) {
  SecondaryOutcome out;
  const SolveResult r = solve(build_sltmpc(data, terminal, options, x), solver);
  out.status = r.status;
  out.solve_time_ms = r.solve_time_ms;
  if (!r.optimal()) return out;
  const std::string origin = options.terminal == TerminalMode::kFir ? "secondary-fir" : "secondary";
  MemoryEntry entry;
  try {
    entry = make_entry(data, terminal, response_from_solution(r, data), birth_step, origin);
  } catch (const EntryError& e) {
    throw SynthesisError(std::string("run_secondary: optimizer does not yield an entry: ") + e.what());
  }
  if (!certify_entry(entry, data, terminal)) throw SynthesisError("run_secondary: entry certificate does not re-verify");
  out.entry = std::move(entry);
  return out;
}

Vector shifted_candidate(const ProblemData& data, const TerminalIngredients& terminal, const Memory& previous,
                         const Memory& next, const SolveResult& solution, const Vector& w) {
  const Index n = data.n(), m = data.m();
  const int N = data.horizon;
  const auto M0 = static_cast<Index>(previous.entries.size());
  const auto M1 = static_cast<Index>(next.entries.size());
  const Vector lambda = solution.value("lambda");
  const Vector zeta = solution.value("zeta");
  const Vector nu = solution.value("nu");
  const Vector z = solution.value("z");

  // Slots that still hold the entry the step-k solve used.
  std::vector<bool> kept(static_cast<std::size_t>(M1), false);
  for (Index j = 0; j < std::min(M0, M1); ++j) {
    const auto& a = previous.entries[static_cast<std::size_t>(j)];
    const auto& b = next.entries[static_cast<std::size_t>(j)];
    kept[static_cast<std::size_t>(j)] = a.birth_step == b.birth_step && a.alpha == b.alpha && a.origin == b.origin;
  }

  Vector lam = Vector::Zero(M1);
  double alpha_bar = 0.0;
  for (Index j = 0; j < M1; ++j) {
    if (!kept[static_cast<std::size_t>(j)]) continue;
    lam(j) = lambda(j);
    alpha_bar += lam(j) * next.entries[static_cast<std::size_t>(j)].alpha;
  }
  const Vector zN = z.segment(N * n, n);

  Matrix zeta_hat = Matrix::Zero(n, N * M1);  // column i * M1 + j
  Matrix nu_hat = Matrix::Zero(m, N * M1);
  for (Index j = 0; j < M1; ++j) {
    if (!kept[static_cast<std::size_t>(j)]) continue;
    const auto& response = next.entries[static_cast<std::size_t>(j)].response;
    for (int i = 0; i + 1 < N; ++i) {
      const auto k = static_cast<std::size_t>(i);
      zeta_hat.col(i * M1 + j) = zeta.segment(((i + 1) * M0 + j) * n, n) + lam(j) * response.phi_x[k] * w;
      nu_hat.col(i * M1 + j) = nu.segment(((i + 1) * M0 + j) * m, m) + lam(j) * response.phi_u[k] * w;
    }
    const double share =
        alpha_bar > 0.0 ? lam(j) * next.entries[static_cast<std::size_t>(j)].alpha / alpha_bar : lam(j);
    const auto last = static_cast<std::size_t>(N - 1);
    zeta_hat.col((N - 1) * M1 + j) = share * zN + lam(j) * response.phi_x[last] * w;
    nu_hat.col((N - 1) * M1 + j) = share * terminal.K * zN + lam(j) * response.phi_u[last] * w;
  }

  ProblemSpec layout = build_primary(data, terminal, next.entries, Vector::Zero(n), 0.0);
  Vector x = Vector::Zero(layout.num_variables());
  const Variable vz = layout.variable("z"), vv = layout.variable("v"), vl = layout.variable("lambda"),
                 vzeta = layout.variable("zeta"), vnu = layout.variable("nu");
  for (int i = 0; i < N; ++i) {
    Vector zi = Vector::Zero(n), vi = Vector::Zero(m);
    for (Index j = 0; j < M1; ++j) {
      zi += zeta_hat.col(i * M1 + j);
      vi += nu_hat.col(i * M1 + j);
      x.segment(vzeta.offset + (i * M1 + j) * n, n) = zeta_hat.col(i * M1 + j);
      x.segment(vnu.offset + (i * M1 + j) * m, m) = nu_hat.col(i * M1 + j);
    }
    x.segment(vz.offset + i * n, n) = zi;
    x.segment(vv.offset + i * m, m) = vi;
  }
  x.segment(vz.offset + N * n, n) =
      data.model.A() * x.segment(vz.offset + (N - 1) * n, n) + data.model.B() * x.segment(vv.offset + (N - 1) * m, m);
  x.segment(vl.offset, M1) = lam;
  return x;
}

ClosedLoopFailure::ClosedLoopFailure(const PrimaryFailure& cause, TrajectoryLog partial)
    : std::runtime_error(cause.what()), partial_(std::move(partial)), status_(cause.status()) {}

TrajectoryLog run_closed_loop(ControllerState& state, const Vector& x0, const Schedule& schedule, int steps,
                              const DisturbanceSource& disturbance, const StepObserver& observer) {
  TrajectoryLog log;
  Vector x = x0;
  std::future<SecondaryOutcome> pending;
  const bool background = schedule.kind == Schedule::Kind::kBackground && schedule.period > 0;

  for (int k = 0; k < steps; ++k) {
    state.step = k;
    MemoryEvent event;
    if (background) {
      if (pending.valid() && pending.wait_for(std::chrono::seconds(0)) == std::future_status::ready) {
        SecondaryOutcome outcome = pending.get();
        if (outcome.entry) event = update_memory(state.memory, std::move(*outcome.entry));
      }
      if (!pending.valid() && k % schedule.period == 0) {
        // The worker gets copies; memory stays owned by this loop.
        pending = std::async(std::launch::async, [data = state.data, terminal = state.terminal, snapshot = x,
                                                  options = state.settings.secondary,
                                                  solver = state.settings.solver, k] {
          return run_secondary(data, terminal, snapshot, options, k, solver);
        });
      }
    } else if (schedule.period > 0 && k > 0 && k % schedule.period == 0) {
      SecondaryOutcome outcome =
          run_secondary(state.data, state.terminal, x, state.settings.secondary, k, state.settings.solver);
      if (outcome.entry) event = update_memory(state.memory, std::move(*outcome.entry));
    }

    PrimaryDiagnostics d;
    try {
      d = primary_step(state, x);
    } catch (const PrimaryFailure& failure) {
      log.final_state = x;
      throw ClosedLoopFailure(failure, std::move(log));
    }
    StepRecord record;
    record.k = k;
    record.x = x;
    record.u = d.u;
    record.w = disturbance(k);
    record.lambda = d.lambda;
    record.objective = d.objective;
    record.solve_time_ms = d.solve_time_ms;
    record.event = event;
    if (observer) observer(state, d, record);
    x = step_dynamics(state.data.model, x, d.u, record.w);
    log.records.push_back(std::move(record));
  }
  log.final_state = x;
  return log;
}

}  // namespace sltmpc
