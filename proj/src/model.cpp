#include "sltmpc/model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "sltmpc/qp_solver.hpp"

namespace sltmpc {

LtiModel::LtiModel(Matrix A, Matrix B) : A_(std::move(A)), B_(std::move(B)) {
  if (A_.rows() == 0 || A_.rows() != A_.cols()) throw InvalidInput("LtiModel: A must be square and non-empty");
  if (B_.rows() != A_.rows() || B_.cols() == 0) throw InvalidInput("LtiModel: B must have as many rows as A");
}

Vector step_dynamics(const LtiModel& model, const Vector& x, const Vector& u, const Vector& w) {
  if (x.size() != model.state_dim() || w.size() != model.state_dim() || u.size() != model.input_dim()) {
    throw InvalidInput("step_dynamics: dimension mismatch");
  }
  return model.A() * x + model.B() * u + w;
}

namespace {

bool positive_definite(const Matrix& M) {
  if (M.rows() != M.cols() || !M.isApprox(M.transpose(), 1e-12)) return false;
  Eigen::LLT<Matrix> llt(M);
  return llt.info() == Eigen::Success;
}

Matrix box_vertices(const Vector& lower, const Vector& upper) {
  const Index n = lower.size();
  const Index count = Index{1} << n;
  Matrix V(n, count);
  for (Index k = 0; k < count; ++k) {
    for (Index i = 0; i < n; ++i) V(i, k) = ((k >> i) & 1) ? upper(i) : lower(i);
  }
  return V;
}

}  // namespace

void ProblemData::validate() const {
  const Index nx = n();
  if (X.dim() != nx || W.dim() != nx || W_vertices.dim() != nx) throw InvalidInput("ProblemData: state dimension mismatch");
  if (U.dim() != m()) throw InvalidInput("ProblemData: input dimension mismatch");
  if (!X.is_constraint_set()) throw InvalidInput("ProblemData: X must be a compact set with the origin in its interior");
  if (!U.is_constraint_set()) throw InvalidInput("ProblemData: U must be a compact set with the origin in its interior");
  if ((W.h().array() < 0.0).any()) throw InvalidInput("ProblemData: W must contain the origin");
  if (Q.rows() != nx || !positive_definite(Q)) throw InvalidInput("ProblemData: Q must be symmetric positive definite");
  if (R.rows() != m() || !positive_definite(R)) throw InvalidInput("ProblemData: R must be symmetric positive definite");
  if (horizon < 2) throw InvalidInput("ProblemData: horizon must be at least 2");
}

ProblemData make_problem_data(LtiModel model, HPolytope X, HPolytope U, const Vector& w_lower,
                              const Vector& w_upper, Matrix Q, Matrix R, int horizon) {
  if ((w_lower.array() > w_upper.array()).any()) throw InvalidInput("disturbance box has lower > upper");
  ProblemData data{std::move(model),
                   std::move(X),
                   std::move(U),
                   HPolytope::box(w_lower, w_upper),
                   VertexSet(box_vertices(w_lower, w_upper)),
                   std::move(Q),
                   std::move(R),
                   horizon};
  data.validate();
  return data;
}

double riccati_residual(const LtiModel& model, const Matrix& Q, const Matrix& R, const Matrix& P) {
  const Matrix& A = model.A();
  const Matrix& B = model.B();
  const Matrix S = R + B.transpose() * P * B;
  const Matrix next = Q + A.transpose() * P * A -
                      A.transpose() * P * B * S.ldlt().solve(B.transpose() * P * A);
  return (next - P).lpNorm<Eigen::Infinity>();
}

LqrSolution lqr(const LtiModel& model, const Matrix& Q, const Matrix& R, int max_iterations, double tolerance) {
  const Matrix& A = model.A();
  const Matrix& B = model.B();
  Matrix P = Q;
  for (int it = 1; it <= max_iterations; ++it) {
    const Matrix S = R + B.transpose() * P * B;
    Matrix next = Q + A.transpose() * P * A - A.transpose() * P * B * S.ldlt().solve(B.transpose() * P * A);
    next = 0.5 * (next + next.transpose());
    if (!next.allFinite()) break;
    const double change = (next - P).lpNorm<Eigen::Infinity>();
    P = std::move(next);
    if (change <= tolerance * (1.0 + P.lpNorm<Eigen::Infinity>())) {
      LqrSolution out;
      out.P = P;
      out.K = -(R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
      out.iterations = it;
      out.residual = riccati_residual(model, Q, R, P);
      return out;
    }
  }
  throw SynthesisError("lqr: Riccati iteration did not converge (is (A, B) stabilizable?)");
}

LqrSolution lqr_terminal(const ProblemData& data) { return lqr(data.model, data.Q, data.R); }

bool verify_lyapunov(const LtiModel& model, const Matrix& P, const Matrix& K, const Matrix& Q, const Matrix& R,
                     double tol) {
  const Matrix A_cl = model.A() + model.B() * K;
  Matrix M = A_cl.transpose() * P * A_cl - P + Q + K.transpose() * R * K;
  M = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(M, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff() <= tol;
}

double spectral_radius(const Matrix& A) {
  Eigen::EigenSolver<Matrix> eig(A, false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

Vector supports_of(const HPolytope& set, const std::optional<VertexSet>& vertices, const Matrix& directions) {
  if (vertices) return support_rows(*vertices, directions);
  Vector out(directions.rows());
  for (Index r = 0; r < directions.rows(); ++r) out(r) = support_lp(set, directions.row(r).transpose());
  return out;
}

}  // namespace

RpiSet mrpi_set(const Matrix& A_cl, const HPolytope& W, const VertexSet& W_vertices, const MrpiOptions& options,
                const std::optional<Matrix>& normal_template) {
  const Index n = A_cl.rows();
  if (A_cl.cols() != n || W.dim() != n || W_vertices.dim() != n) throw InvalidInput("mrpi_set: dimension mismatch");
  if (!(options.eps > 0.0) || !(options.rho > 0.0 && options.rho < 1.0)) {
    throw InvalidInput("mrpi_set: need eps > 0 and 0 < rho < 1");
  }
  if (spectral_radius(A_cl) >= 1.0) throw SynthesisError("mrpi_set: closed loop is not stable");

  Matrix directions;
  if (normal_template) {
    directions = *normal_template;
  } else if (n != 2) {
    directions.resize(2 * n + W.num_constraints(), n);
    directions << Matrix::Identity(n, n), -Matrix::Identity(n, n), W.H();
  }

  RpiSet out;
  if (W_vertices.points().cwiseAbs().maxCoeff() == 0.0) {
    if (directions.size() == 0) directions = HPolytope::box(Vector::Zero(n), Vector::Zero(n)).H();
    out.set = HPolytope(directions, Vector::Zero(directions.rows()));
    out.vertices = VertexSet(Matrix::Zero(n, 1));
    return out;
  }
  if ((W.h().array() <= 0.0).any()) throw InvalidInput("mrpi_set: W must contain the origin in its interior");

  // Smallest s with A^s W inside a_s W, a_s <= rho.
  Matrix power = A_cl;
  int s = 1;
  double contraction = 0.0;
  for (;; ++s) {
    if (s > options.max_terms) {
      throw SynthesisError("mrpi_set: no contraction within " + std::to_string(options.max_terms) +
                           " terms; increase rho");
    }
    contraction = mapped_support_rows(power, W_vertices, W.H()).cwiseQuotient(W.h()).maxCoeff();
    if (contraction <= options.rho) break;
    power = A_cl * power;
  }
  const double scale = 1.0 / (1.0 - std::max(contraction, 0.0));

  if (directions.size() == 0) {
    Matrix points = W_vertices.points();
    Matrix image = W_vertices.points();
    for (int j = 1; j < s; ++j) {
      image = A_cl * image;
      points = convex_hull_2d(minkowski_sum_points(points, image)).points();
    }
    points *= scale;
    out.set = hrep_from_points_2d(points);
    out.vertices = convex_hull_2d(points);
  } else {
    Vector offsets = Vector::Zero(directions.rows());
    Matrix image = Matrix::Identity(n, n);
    for (int j = 0; j < s; ++j) {
      offsets += mapped_support_rows(image, W_vertices, directions);
      image = A_cl * image;
    }
    out.set = HPolytope(directions, scale * offsets);
    if (n == 2) out.vertices = vertices_2d(out.set);
  }
  out.terms = s;
  out.contraction = contraction;

  // Invariance: h_X(A_cl' c) + h_W(c) <= h_c for every facet normal c.
  const Vector lhs = supports_of(out.set, out.vertices, out.set.H() * A_cl) + support_rows(W_vertices, out.set.H());
  if (((lhs - out.set.h()).array() > options.eps * (1.0 + out.set.h().cwiseAbs().maxCoeff())).any()) {
    throw SynthesisError("mrpi_set: outer approximation is not robustly invariant; refine the normal template");
  }
  return out;
}

TerminalIngredients make_terminal_ingredients(const ProblemData& data, const MrpiOptions& options) {
  data.validate();
  const LqrSolution gain = lqr_terminal(data);
  TerminalIngredients t;
  t.K = gain.K;
  t.P = gain.P;
  t.closed_loop = data.model.A() + data.model.B() * gain.K;
  RpiSet rpi = mrpi_set(t.closed_loop, data.W, data.W_vertices, options);
  t.X_f = std::move(rpi.set);
  t.X_f_vertices = std::move(rpi.vertices);
  t.mrpi_terms = rpi.terms;
  t.h_Xf_at_Hx = supports_of(t.X_f, t.X_f_vertices, data.X.H());
  t.h_KXf_at_Hu = supports_of(t.X_f, t.X_f_vertices, data.U.H() * t.K);

  // Row-wise dual of  max c'A_cl x  s.t.  H_f x <= h_f.
  const Matrix& Hf = t.X_f.H();
  const Index nf = Hf.rows();
  t.invariance_multiplier = Matrix::Zero(nf, nf);
  t.h_Xf_at_AclHf = Vector::Zero(nf);
  for (Index r = 0; r < nf; ++r) {
    ProblemSpec lp("invariance-multiplier");
    const auto& lam = lp.add_variable("lambda", nf);
    const RowVector target = Hf.row(r) * t.closed_loop;
    for (Index c = 0; c < Hf.cols(); ++c) {
      lp.add_equality(LinearExpr{}.add(lam, Hf.col(c).transpose()), target(c), "multiplier");
    }
    for (Index k = 0; k < nf; ++k) lp.add_inequality(LinearExpr{}.add(lam, k, -1.0), 0.0, "nonnegative");
    lp.add_linear(lam, t.X_f.h());
    const SolveResult res = solve(lp);
    if (!res.optimal()) throw SynthesisError("terminal set multiplier LP failed: " + to_string(res.status));
    const Vector row = res.value("lambda").cwiseMax(0.0);
    t.invariance_multiplier.row(r) = row.transpose();
    t.h_Xf_at_AclHf(r) = row.dot(t.X_f.h());
  }
  return t;
}

}  // namespace sltmpc
