#include "sltmpc/ocp.hpp"

#include <algorithm>

namespace sltmpc {

namespace {

// Shared trajectory variables, initial condition, dynamics and stage cost.
struct Trajectory {
  Variable z;
  Variable v;
};

Trajectory add_trajectory(ProblemSpec& p, const ProblemData& data, const TerminalIngredients& terminal,
                          const Vector& x0, double cost_weight) {
  const Index n = data.n();
  const Index m = data.m();
  const int N = data.horizon;
  if (x0.size() != n) throw InvalidInput("initial state has wrong dimension");
  Trajectory t{p.add_variable("z", (N + 1) * n), p.add_variable("v", N * m)};

  for (Index a = 0; a < n; ++a) p.add_equality(LinearExpr{}.add(t.z, a, 1.0), x0(a), "initial");
  const Matrix& A = data.model.A();
  const Matrix& B = data.model.B();
  for (int i = 0; i < N; ++i) {
    for (Index a = 0; a < n; ++a) {
      LinearExpr e;
      e.add(t.z, (i + 1) * n + a, 1.0);
      e.add(t.z, i * n, -A.row(a));
      e.add(t.v, i * m, -B.row(a));
      p.add_equality(e, 0.0, "dynamics");
    }
  }
  if (cost_weight > 0.0) {
    for (int i = 0; i < N; ++i) {
      p.add_quadratic(t.z, i * n, cost_weight * data.Q);
      p.add_quadratic(t.v, i * m, cost_weight * data.R);
    }
    p.add_quadratic(t.z, N * n, cost_weight * terminal.P);
  }
  return t;
}

void add_terminal_scaled(ProblemSpec& p, const Trajectory& t, const ProblemData& data,
                         const TerminalIngredients& terminal, double alpha) {
  const Matrix& Hf = terminal.X_f.H();
  const Index n = data.n();
  for (Index r = 0; r < Hf.rows(); ++r) {
    p.add_inequality(LinearExpr{}.add(t.z, data.horizon * n, Hf.row(r)), alpha * terminal.X_f.h()(r), "terminal");
  }
}

// Coefficients of  h Phi w  with respect to the entries of a column-major
// m x n block Phi: (h)_a * w_b at index a + m * b.
RowVector bilinear_coeffs(const RowVector& h, const Vector& w) {
  RowVector out(h.size() * w.size());
  for (Index b = 0; b < w.size(); ++b) out.segment(b * h.size(), h.size()) = w(b) * h;
  return out;
}

}  // namespace

ProblemSpec build_sltmpc(const ProblemData& data, const TerminalIngredients& terminal,
                         const SecondaryOptions& options, const Vector& x0) {
  const Index n = data.n();
  const Index m = data.m();
  const int N = data.horizon;
  const Matrix& A = data.model.A();
  const Matrix& B = data.model.B();
  const Matrix& Hx = data.X.H();
  const Matrix& Hu = data.U.H();
  const Matrix& Hf = terminal.X_f.H();
  const Vector& hf = terminal.X_f.h();
  const Matrix& Wv = data.W_vertices.points();
  const Index nx = Hx.rows(), nu = Hu.rows(), nf = Hf.rows(), nw = Wv.cols();
  const Index block = m * n;

  ProblemSpec p(kSecondaryTag);
  const bool tightening = options.cost == SecondaryCost::kTightening;
  const Trajectory t = add_trajectory(p, data, terminal, x0, tightening ? options.nominal_weight : 1.0);
  const Variable phi_u = p.add_variable("phi_u", N * block);
  const Variable s_x = p.add_variable("s_x", N * nx);
  const Variable s_u = p.add_variable("s_u", N * nu);
  const Variable alpha = p.add_variable("alpha", 1);

  // powers[k] = A^k, lifted[k] = A^k B
  std::vector<Matrix> powers{Matrix::Identity(n, n)};
  for (int k = 1; k <= N; ++k) powers.push_back(A * powers.back());
  std::vector<Matrix> lifted;
  for (int k = 0; k <= N; ++k) lifted.push_back(powers[static_cast<std::size_t>(k)] * B);

  // h Phi_x^j w = h A^{j-1} w + sum_{l<j} (h A^{j-1-l} B) Phi_u^l w; moves the
  // response part into `e` and returns the constant.
  auto state_response = [&](LinearExpr& e, const RowVector& h, const Vector& w, int j) {
    for (int l = 1; l < j; ++l) {
      const RowVector hc = h * lifted[static_cast<std::size_t>(j - 1 - l)];
      e.add(phi_u, (l - 1) * block, bilinear_coeffs(hc, w));
    }
    return (h * powers[static_cast<std::size_t>(j - 1)] * w)(0);
  };

  for (int j = 1; j <= N; ++j) {
    for (Index r = 0; r < nx; ++r) {
      for (Index k = 0; k < nw; ++k) {
        LinearExpr e;
        const double constant = state_response(e, Hx.row(r), Wv.col(k), j);
        e.add(s_x, (j - 1) * nx + r, -1.0);
        p.add_inequality(e, -constant, "state-tube-support");
      }
    }
    for (Index r = 0; r < nu; ++r) {
      for (Index k = 0; k < nw; ++k) {
        LinearExpr e;
        e.add(phi_u, (j - 1) * block, bilinear_coeffs(Hu.row(r), Wv.col(k)));
        e.add(s_u, (j - 1) * nu + r, -1.0);
        p.add_inequality(e, 0.0, "input-tube-support");
      }
    }
  }

  // Tightened state and input constraints, i = 0..N-1.
  for (int i = 0; i < N; ++i) {
    for (Index r = 0; r < nx; ++r) {
      LinearExpr e;
      e.add(t.z, i * n, Hx.row(r));
      for (int j = 1; j <= i; ++j) e.add(s_x, (j - 1) * nx + r, 1.0);
      p.add_inequality(e, data.X.h()(r), "state");
    }
    for (Index r = 0; r < nu; ++r) {
      LinearExpr e;
      e.add(t.v, i * m, Hu.row(r));
      for (int j = 1; j <= i; ++j) e.add(s_u, (j - 1) * nu + r, 1.0);
      p.add_inequality(e, data.U.h()(r), "input");
    }
  }

  // z_N in alpha X_f, alpha X_f inside X - F_N^x, alpha K X_f inside U - F_N^u.
  for (Index r = 0; r < nf; ++r) {
    p.add_inequality(LinearExpr{}.add(t.z, N * n, Hf.row(r)).add(alpha, 0, -hf(r)), 0.0, "terminal");
  }
  for (Index r = 0; r < nx; ++r) {
    LinearExpr e;
    e.add(alpha, 0, terminal.h_Xf_at_Hx(r));
    for (int j = 1; j <= N; ++j) e.add(s_x, (j - 1) * nx + r, 1.0);
    p.add_inequality(e, data.X.h()(r), "terminal-state-inclusion");
  }
  for (Index r = 0; r < nu; ++r) {
    LinearExpr e;
    e.add(alpha, 0, terminal.h_KXf_at_Hu(r));
    for (int j = 1; j <= N; ++j) e.add(s_u, (j - 1) * nu + r, 1.0);
    p.add_inequality(e, data.U.h()(r), "terminal-input-inclusion");
  }
  p.add_inequality(LinearExpr{}.add(alpha, 0, -1.0), 0.0, "alpha-nonnegative");

  if (options.terminal == TerminalMode::kScaled) {
    // Any multiplier Lambda feasible for alpha satisfies Lambda h_f >= alpha
    // sigma with sigma = Lambda~ h_f, since Lambda / alpha is feasible for the
    // row-wise LP that Lambda~ solves. Fixing Lambda = alpha Lambda~ is exact.
    const Variable g = p.add_variable("g", nf);
    const Vector sigma = terminal.invariance_multiplier * hf;
    for (Index r = 0; r < nf; ++r) {
      p.add_inequality(LinearExpr{}.add(g, r, 1.0).add(alpha, 0, sigma(r) - hf(r)), 0.0, "terminal-invariance");
      // g_r >= H_f[r] Gamma w for every vertex w.
      for (Index k = 0; k < nw; ++k) {
        LinearExpr eg;
        const RowVector h = Hf.row(r);
        for (int l = 1; l <= N; ++l) {
          eg.add(phi_u, (l - 1) * block, bilinear_coeffs(h * lifted[static_cast<std::size_t>(N - l)], Wv.col(k)));
        }
        eg.add(g, r, -1.0);
        p.add_inequality(eg, -(h * powers[static_cast<std::size_t>(N)] * Wv.col(k))(0), "gamma-support");
      }
    }
  } else {
    // Gamma = A^N + sum_l A^{N-l} B Phi_u^l = 0, entry (a, b).
    for (Index b = 0; b < n; ++b) {
      for (Index a = 0; a < n; ++a) {
        LinearExpr e;
        for (int l = 1; l <= N; ++l) {
          const Matrix& C = lifted[static_cast<std::size_t>(N - l)];
          for (Index c = 0; c < m; ++c) e.add(phi_u, (l - 1) * block + c + m * b, C(a, c));
        }
        p.add_equality(e, -powers[static_cast<std::size_t>(N)](a, b), "finite-impulse-response");
      }
    }
  }

  if (tightening) {
    for (int j = 1; j <= N; ++j) {
      const double weight = static_cast<double>(N - j + 1);
      for (Index r = 0; r < nx; ++r) p.add_linear(s_x[(j - 1) * nx + r], weight);
      for (Index r = 0; r < nu; ++r) p.add_linear(s_u[(j - 1) * nu + r], weight);
    }
  }
  return p;
}

ProblemSpec build_primary(const ProblemData& data, const TerminalIngredients& terminal,
                          std::span<const MemoryEntry> memory, const Vector& x0, double rho) {
  if (memory.empty()) throw InvalidInput("build_primary: memory is empty");
  const Index n = data.n();
  const Index m = data.m();
  const int N = data.horizon;
  const auto M = static_cast<Index>(memory.size());
  const Matrix& Hx = data.X.H();
  const Matrix& Hu = data.U.H();
  const Matrix& Hf = terminal.X_f.H();

  ProblemSpec p(kPrimaryTag);
  const Trajectory t = add_trajectory(p, data, terminal, x0, 1.0);
  const Variable lambda = p.add_variable("lambda", M);
  const Variable zeta = p.add_variable("zeta", N * M * n);
  const Variable nu = p.add_variable("nu", N * M * m);

  for (const auto& entry : memory) {
    if (entry.tubes.horizon() != N) throw InvalidInput("build_primary: entry horizon differs from the problem");
  }

  for (int i = 0; i < N; ++i) {
    // z_i = sum_j zeta_ij, v_i = sum_j nu_ij
    for (Index a = 0; a < n; ++a) {
      LinearExpr e;
      e.add(t.z, i * n + a, 1.0);
      for (Index j = 0; j < M; ++j) e.add(zeta, (i * M + j) * n + a, -1.0);
      p.add_equality(e, 0.0, "state-decomposition");
    }
    for (Index a = 0; a < m; ++a) {
      LinearExpr e;
      e.add(t.v, i * m + a, 1.0);
      for (Index j = 0; j < M; ++j) e.add(nu, (i * M + j) * m + a, -1.0);
      p.add_equality(e, 0.0, "input-decomposition");
    }
    for (Index j = 0; j < M; ++j) {
      const auto& tubes = memory[static_cast<std::size_t>(j)].tubes;
      const Vector room_x = data.X.h() - tubes.t_x[static_cast<std::size_t>(i)];
      const Vector room_u = data.U.h() - tubes.t_u[static_cast<std::size_t>(i)];
      for (Index r = 0; r < Hx.rows(); ++r) {
        p.add_inequality(LinearExpr{}.add(zeta, (i * M + j) * n, Hx.row(r)).add(lambda, j, -room_x(r)), 0.0,
                         "state");
      }
      for (Index r = 0; r < Hu.rows(); ++r) {
        p.add_inequality(LinearExpr{}.add(nu, (i * M + j) * m, Hu.row(r)).add(lambda, j, -room_u(r)), 0.0,
                         "input");
      }
    }
  }

  // sum_j lambda_j alpha_j X_f = (sum_j lambda_j alpha_j) X_f
  for (Index r = 0; r < Hf.rows(); ++r) {
    LinearExpr e;
    e.add(t.z, N * n, Hf.row(r));
    for (Index j = 0; j < M; ++j) e.add(lambda, j, -memory[static_cast<std::size_t>(j)].alpha * terminal.X_f.h()(r));
    p.add_inequality(e, 0.0, "terminal");
  }

  LinearExpr sum;
  int newest = memory.front().birth_step;
  for (const auto& entry : memory) newest = std::max(newest, entry.birth_step);
  for (Index j = 0; j < M; ++j) {
    sum.add(lambda, j, 1.0);
    p.add_inequality(LinearExpr{}.add(lambda, j, -1.0), 0.0, "lambda-nonnegative");
    const double age = newest - memory[static_cast<std::size_t>(j)].birth_step;
    p.add_linear(lambda[j], rho * age);
  }
  p.add_equality(sum, 1.0, "lambda-simplex");
  return p;
}

ProblemSpec build_fixed_tube(const ProblemData& data, const TerminalIngredients& terminal, const MemoryEntry& entry,
                             const Vector& x0) {
  const Index n = data.n();
  const Index m = data.m();
  const int N = data.horizon;
  if (entry.tubes.horizon() != N) throw InvalidInput("build_fixed_tube: entry horizon differs from the problem");
  ProblemSpec p(kFixedTubeTag);
  const Trajectory t = add_trajectory(p, data, terminal, x0, 1.0);
  for (int i = 0; i < N; ++i) {
    const Vector room_x = data.X.h() - entry.tubes.t_x[static_cast<std::size_t>(i)];
    const Vector room_u = data.U.h() - entry.tubes.t_u[static_cast<std::size_t>(i)];
    for (Index r = 0; r < data.X.H().rows(); ++r) {
      p.add_inequality(LinearExpr{}.add(t.z, i * n, data.X.H().row(r)), room_x(r), "state");
    }
    for (Index r = 0; r < data.U.H().rows(); ++r) {
      p.add_inequality(LinearExpr{}.add(t.v, i * m, data.U.H().row(r)), room_u(r), "input");
    }
  }
  add_terminal_scaled(p, t, data, terminal, entry.alpha);
  return p;
}

Vector extract_control(const SolveResult& result, const ProblemData& data) {
  if (!result.optimal()) throw std::logic_error("extract_control: solve status is " + to_string(result.status));
  return result.value("v").head(data.m());
}

SystemResponse response_from_solution(const SolveResult& result, const ProblemData& data) {
  const Vector phi = result.value("phi_u");
  const Index m = data.m(), n = data.n();
  std::vector<Matrix> blocks;
  for (int j = 0; j < data.horizon; ++j) {
    blocks.push_back(Eigen::Map<const Matrix>(phi.data() + j * m * n, m, n));
  }
  return response_from_inputs(data.model, std::move(blocks));
}

Matrix certificate_from_solution(const SolveResult& result, const TerminalIngredients& terminal) {
  return result.value("alpha")(0) * terminal.invariance_multiplier;
}

}  // namespace sltmpc
