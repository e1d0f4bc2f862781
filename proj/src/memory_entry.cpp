#include "sltmpc/memory_entry.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace sltmpc {

namespace {

std::string fmt_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

ScalingBounds terminal_scaling_bounds(const ProblemData& data, const TerminalIngredients& terminal,
                                      const TubeSequence& tubes) {
  ScalingBounds b{0.0, kMaxTerminalScaling};
  const int N = tubes.horizon();
  auto limit = [&](const Vector& support, const Vector& room) {
    for (Index r = 0; r < support.size(); ++r) {
      if (support(r) > 0.0) {
        b.upper = std::min(b.upper, room(r) / support(r));
      } else if (room(r) < 0.0) {
        b.upper = -1.0;
      }
    }
  };
  limit(terminal.h_Xf_at_Hx, data.X.h() - tubes.t_x[static_cast<std::size_t>(N)]);
  limit(terminal.h_KXf_at_Hu, data.U.h() - tubes.t_u[static_cast<std::size_t>(N)]);

  const Vector& hf = terminal.X_f.h();
  const Vector gamma_support = mapped_support_rows(tubes.gamma, data.W_vertices, terminal.X_f.H());
  for (Index r = 0; r < hf.size(); ++r) {
    const double margin = hf(r) - terminal.h_Xf_at_AclHf(r);
    if (margin > 0.0) {
      b.lower = std::max(b.lower, gamma_support(r) / margin);
    } else if (gamma_support(r) > 0.0) {
      b.lower = std::numeric_limits<double>::infinity();
    }
  }
  return b;
}

MemoryEntry make_entry(const ProblemData& data, const TerminalIngredients& terminal, SystemResponse response,
                       int birth_step, std::string origin) {
  if (!validate_response(response, data.model)) throw EntryError("make_entry: response violates the SLP recursion");
  MemoryEntry entry;
  entry.tubes = tube_tightenings(response, data.model, data.W_vertices, data.X.H(), data.U.H());
  const ScalingBounds bounds = terminal_scaling_bounds(data, terminal, entry.tubes);
  // Optimizers of the secondary problem sit where both bounds meet, so allow
  // round-off of the order of the set tolerance.
  const bool close = bounds.lower <= bounds.upper + kSetTolerance * (1.0 + bounds.upper);
  if (!close || bounds.upper < 0.0) {
    throw EntryError("make_entry: no terminal scaling satisfies the inclusions (lower " +
                     fmt_double(bounds.lower) + ", upper " + fmt_double(bounds.upper) + ")");
  }
  entry.alpha = bounds.upper;
  entry.certificate = entry.alpha * terminal.invariance_multiplier;
  entry.response = std::move(response);
  entry.birth_step = birth_step;
  entry.origin = std::move(origin);
  return entry;
}

bool certify_entry(const MemoryEntry& entry, const ProblemData& data, const TerminalIngredients& terminal,
                   double tol) {
  if (!(entry.alpha >= 0.0) || !validate_response(entry.response, data.model)) return false;
  const TubeSequence fresh =
      tube_tightenings(entry.response, data.model, data.W_vertices, data.X.H(), data.U.H());
  if (fresh.horizon() != entry.tubes.horizon()) return false;
  for (int i = 0; i <= fresh.horizon(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if ((fresh.t_x[k] - entry.tubes.t_x[k]).lpNorm<Eigen::Infinity>() > tol) return false;
    if ((fresh.t_u[k] - entry.tubes.t_u[k]).lpNorm<Eigen::Infinity>() > tol) return false;
  }
  if ((fresh.gamma - entry.tubes.gamma).lpNorm<Eigen::Infinity>() > tol) return false;

  if (!check_lemma1(entry.certificate, entry.alpha, entry.alpha, terminal.closed_loop, fresh.gamma, terminal.X_f,
                    terminal.X_f, data.W_vertices, tol)) {
    return false;
  }
  const auto N = static_cast<std::size_t>(fresh.horizon());
  const Vector state = entry.alpha * terminal.h_Xf_at_Hx + fresh.t_x[N] - data.X.h();
  const Vector input = entry.alpha * terminal.h_KXf_at_Hu + fresh.t_u[N] - data.U.h();
  return state.maxCoeff() <= tol && input.maxCoeff() <= tol;
}

MemoryEntry drs_tightenings(const ProblemData& data, const TerminalIngredients& terminal, const Matrix& K,
                            int birth_step) {
  return make_entry(data, terminal, response_from_gain(data.model, K, data.horizon), birth_step, "drs");
}

}  // namespace sltmpc
