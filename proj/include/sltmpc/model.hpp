#pragma once

#include <optional>
#include <stdexcept>

#include "sltmpc/polytope.hpp"

namespace sltmpc {

class SynthesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// x+ = A x + B u + w.
class LtiModel {
 public:
  LtiModel() = default;
  LtiModel(Matrix A, Matrix B);

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  Index state_dim() const { return A_.rows(); }
  Index input_dim() const { return B_.cols(); }

 private:
  Matrix A_;
  Matrix B_;
};

Vector step_dynamics(const LtiModel& model, const Vector& x, const Vector& u, const Vector& w);

/// Plant, constraint sets, disturbance set and stage cost of one control task.
struct ProblemData {
  LtiModel model;
  HPolytope X;
  HPolytope U;
  HPolytope W;
  VertexSet W_vertices;
  Matrix Q;
  Matrix R;
  int horizon = 8;

  Index n() const { return model.state_dim(); }
  Index m() const { return model.input_dim(); }

  /// Throws InvalidInput when an invariant is violated.
  void validate() const;
};

/// Box constraint sets and box disturbance; vertex form of W is derived.
ProblemData make_problem_data(LtiModel model, HPolytope X, HPolytope U, const Vector& w_lower,
                              const Vector& w_upper, Matrix Q, Matrix R, int horizon);

struct LqrSolution {
  Matrix K;  // u = K x
  Matrix P;
  int iterations = 0;
  double residual = 0.0;
};

/// Riccati value iteration to the stabilizing fixed point.
LqrSolution lqr(const LtiModel& model, const Matrix& Q, const Matrix& R, int max_iterations = 100000,
                double tolerance = 1e-13);
LqrSolution lqr_terminal(const ProblemData& data);

/// max |P - (Q + A'PA - A'PB (R + B'PB)^-1 B'PA)|.
double riccati_residual(const LtiModel& model, const Matrix& Q, const Matrix& R, const Matrix& P);

/// (A+BK)'P(A+BK) - P + Q + K'RK is negative semidefinite up to tol.
bool verify_lyapunov(const LtiModel& model, const Matrix& P, const Matrix& K, const Matrix& Q,
                     const Matrix& R, double tol = 1e-9);

double spectral_radius(const Matrix& A);

struct MrpiOptions {
  /// Target contraction: stop at the first s with A^s W inside rho * W.
  double rho = 0.1;
  /// Slack allowed in the invariance verification.
  double eps = 1e-9;
  int max_terms = 200;
};

struct RpiSet {
  HPolytope set;
  std::optional<VertexSet> vertices;  // available for 2-D sets
  int terms = 0;
  double contraction = 0.0;
};

/// Outer approximation (1 - a_s)^-1 * (W + A W + ... + A^{s-1} W) of the
/// minimal RPI set of x+ = A_cl x + w. Exact polygon in 2-D; otherwise the
/// supports are evaluated along `normal_template` (default: +/- unit vectors
/// and the rows of H_W). The result is verified invariant before returning.
RpiSet mrpi_set(const Matrix& A_cl, const HPolytope& W, const VertexSet& W_vertices,
                const MrpiOptions& options = {}, const std::optional<Matrix>& normal_template = std::nullopt);

/// Offline terminal controller, cost and RPI set shared by every memory entry.
struct TerminalIngredients {
  Matrix K;
  Matrix P;
  Matrix closed_loop;  // A + B K
  HPolytope X_f;
  std::optional<VertexSet> X_f_vertices;
  Vector h_Xf_at_Hx;   // h_{X_f}(H_x rows)
  Vector h_KXf_at_Hu;  // h_{K X_f}(H_u rows)
  Vector h_Xf_at_AclHf;  // h_{X_f}(A_cl' H_f rows)
  /// Nonnegative multiplier with invariance_multiplier * H_f = H_f * A_cl and
  /// invariance_multiplier * h_f = h_Xf_at_AclHf.
  Matrix invariance_multiplier;
  int mrpi_terms = 0;
};

TerminalIngredients make_terminal_ingredients(const ProblemData& data, const MrpiOptions& options = {});

}  // namespace sltmpc
