#include "sltmpc/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "sltmpc/qp_solver.hpp"

namespace sltmpc {

HPolytope::HPolytope(Matrix H, Vector h) : H_(std::move(H)), h_(std::move(h)) {
  if (H_.rows() != h_.size()) throw InvalidInput("HPolytope: H and h row counts differ");
  for (Index r = 0; r < H_.rows(); ++r) {
    if (H_.row(r).lpNorm<Eigen::Infinity>() == 0.0) {
      throw InvalidInput("HPolytope: row " + std::to_string(r) + " of H is zero");
    }
  }
  if (!H_.allFinite() || !h_.allFinite()) throw InvalidInput("HPolytope: non-finite data");
}

HPolytope HPolytope::box(const Vector& lower, const Vector& upper) {
  if (lower.size() != upper.size()) throw InvalidInput("box: bound sizes differ");
  const Index n = lower.size();
  Matrix H(2 * n, n);
  H << Matrix::Identity(n, n), -Matrix::Identity(n, n);
  Vector h(2 * n);
  h << upper, -lower;
  return HPolytope(std::move(H), std::move(h));
}

HPolytope HPolytope::constraint_set(Matrix H, Vector h) {
  HPolytope P(std::move(H), std::move(h));
  if (P.num_constraints() < P.dim() + 1) throw InvalidInput("constraint set needs at least dim+1 halfspaces");
  if ((P.h().array() <= 0.0).any()) throw InvalidInput("constraint set must contain the origin in its interior");
  if (P.dim() == 2) (void)vertices_2d(P);  // throws when unbounded
  P.constraint_set_ = true;
  return P;
}

VertexSet::VertexSet(Matrix points) : points_(std::move(points)) {
  if (points_.cols() == 0) throw InvalidInput("VertexSet: empty vertex set");
}

VertexSet::VertexSet(const std::vector<Vector>& points) {
  if (points.empty()) throw InvalidInput("VertexSet: empty vertex set");
  points_.resize(points.front().size(), static_cast<Index>(points.size()));
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (points[k].size() != points_.rows()) throw InvalidInput("VertexSet: inconsistent dimensions");
    points_.col(static_cast<Index>(k)) = points[k];
  }
}

double support(const VertexSet& vertices, const Vector& eta) {
  if (vertices.empty()) throw InvalidInput("support: empty vertex set");
  if (eta.size() != vertices.dim()) throw InvalidInput("support: dimension mismatch");
  return (eta.transpose() * vertices.points()).maxCoeff();
}

double mapped_support(const Matrix& M, const VertexSet& vertices, const Vector& eta) {
  if (M.cols() != vertices.dim() || M.rows() != eta.size()) {
    throw InvalidInput("mapped_support: dimension mismatch");
  }
  return support(vertices, M.transpose() * eta);
}

Vector support_rows(const VertexSet& vertices, const Matrix& directions) {
  if (vertices.empty()) throw InvalidInput("support_rows: empty vertex set");
  if (directions.cols() != vertices.dim()) throw InvalidInput("support_rows: dimension mismatch");
  return (directions * vertices.points()).rowwise().maxCoeff();
}

Vector mapped_support_rows(const Matrix& M, const VertexSet& vertices, const Matrix& directions) {
  if (M.cols() != vertices.dim() || M.rows() != directions.cols()) {
    throw InvalidInput("mapped_support_rows: dimension mismatch");
  }
  return (directions * M * vertices.points()).rowwise().maxCoeff();
}

double support_lp(const HPolytope& P, const Vector& eta) {
  if (eta.size() != P.dim()) throw InvalidInput("support_lp: dimension mismatch");
  ProblemSpec lp("support");
  const auto& x = lp.add_variable("x", P.dim());
  for (Index r = 0; r < P.num_constraints(); ++r) {
    lp.add_inequality(LinearExpr{}.add(x, P.H().row(r)), P.h()(r), "polytope");
  }
  lp.add_linear(x, -eta);
  const SolveResult res = solve(lp);
  if (!res.optimal()) throw InvalidInput("support_lp: polytope is empty or unbounded along eta");
  return -res.objective;
}

TightenedSet pontryagin_tighten(const HPolytope& P, const VertexSet& subtrahend) {
  if (subtrahend.dim() != P.dim()) throw InvalidInput("pontryagin_tighten: dimension mismatch");
  Vector offsets = P.h() - support_rows(subtrahend, P.H());
  TightenedSet out{HPolytope(P.H(), std::move(offsets)), false};
  out.empty = is_empty(out.set);
  return out;
}

HPolytope scale(const HPolytope& P, double alpha) {
  if (!(alpha >= 0.0)) throw InvalidInput("scale: alpha must be non-negative");
  return HPolytope(P.H(), alpha * P.h());
}

bool contains(const HPolytope& P, const Vector& x, double tol) {
  if (x.size() != P.dim()) throw InvalidInput("contains: dimension mismatch");
  return ((P.H() * x - P.h()).array() <= tol).all();
}

namespace {

constexpr double kGeomTol = 1e-9;

double cross(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

bool bounded_2d(const Matrix& H) {
  std::vector<double> angles;
  angles.reserve(static_cast<std::size_t>(H.rows()));
  for (Index r = 0; r < H.rows(); ++r) angles.push_back(std::atan2(H(r, 1), H(r, 0)));
  std::sort(angles.begin(), angles.end());
  double largest_gap = angles.front() + 2.0 * std::numbers::pi - angles.back();
  for (std::size_t k = 1; k < angles.size(); ++k) largest_gap = std::max(largest_gap, angles[k] - angles[k - 1]);
  return largest_gap < std::numbers::pi - 1e-12;
}

}  // namespace

bool is_empty(const HPolytope& P) {
  if (P.dim() == 2 && bounded_2d(P.H())) {
    try {
      (void)vertices_2d(P);
      return false;
    } catch (const InvalidInput&) {
      return true;
    }
  }
  ProblemSpec lp("feasibility");
  const auto& x = lp.add_variable("x", P.dim());
  for (Index r = 0; r < P.num_constraints(); ++r) {
    lp.add_inequality(LinearExpr{}.add(x, P.H().row(r)), P.h()(r), "polytope");
  }
  lp.add_quadratic(x, 1e-6 * Matrix::Identity(P.dim(), P.dim()));
  return solve(lp).status == SolveStatus::kInfeasible;
}

VertexSet convex_hull_2d(const Matrix& points) {
  if (points.rows() != 2 || points.cols() == 0) throw InvalidInput("convex_hull_2d: need non-empty 2-D points");
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(static_cast<std::size_t>(points.cols()));
  for (Index k = 0; k < points.cols(); ++k) pts.emplace_back(points(0, k), points(1, k));
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  double extent = 1.0;
  for (const auto& p : pts) extent = std::max(extent, p.cwiseAbs().maxCoeff());
  const double tol = kGeomTol * extent * extent;

  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= tol) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= tol) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k > 1 ? k - 1 : k);

  // Merge points closer than the tolerance (degenerate hulls).
  std::vector<Eigen::Vector2d> unique;
  for (const auto& p : hull) {
    if (unique.empty() || (p - unique.back()).norm() > 1e-9 * extent) unique.push_back(p);
  }
  if (unique.size() > 1 && (unique.front() - unique.back()).norm() <= 1e-9 * extent) unique.pop_back();

  Matrix out(2, static_cast<Index>(unique.size()));
  for (std::size_t i = 0; i < unique.size(); ++i) out.col(static_cast<Index>(i)) = unique[i];
  return VertexSet(std::move(out));
}

VertexSet vertices_2d(const HPolytope& P) {
  if (P.dim() != 2) throw InvalidInput("vertices_2d: polytope is not 2-D");
  if (P.num_constraints() < 3 || !bounded_2d(P.H())) throw InvalidInput("vertices_2d: polytope is unbounded");
  const Matrix& H = P.H();
  const Vector& h = P.h();
  const double scale = 1.0 + h.cwiseAbs().maxCoeff();
  std::vector<Vector> candidates;
  for (Index i = 0; i < H.rows(); ++i) {
    for (Index j = i + 1; j < H.rows(); ++j) {
      Eigen::Matrix2d M;
      M << H.row(i), H.row(j);
      const double det = M.determinant();
      if (std::abs(det) <= 1e-12 * H.row(i).norm() * H.row(j).norm()) continue;
      const Eigen::Vector2d v = M.inverse() * Eigen::Vector2d(h(i), h(j));
      if (((H * v - h).array() <= kGeomTol * scale).all()) candidates.push_back(v);
    }
  }
  if (candidates.empty()) throw InvalidInput("vertices_2d: polytope is empty");
  return convex_hull_2d(VertexSet(candidates).points());
}

HPolytope hrep_from_points_2d(const Matrix& points) {
  const VertexSet hull = convex_hull_2d(points);
  const Index k = hull.size();
  if (k < 3) throw InvalidInput("hrep_from_points_2d: hull is degenerate");
  Matrix H(k, 2);
  Vector h(k);
  for (Index i = 0; i < k; ++i) {
    const Eigen::Vector2d a = hull.vertex(i);
    const Eigen::Vector2d b = hull.vertex((i + 1) % k);
    Eigen::Vector2d normal(b.y() - a.y(), a.x() - b.x());
    normal.normalize();
    H.row(i) = normal.transpose();
    h(i) = normal.dot(a);
  }
  return HPolytope(std::move(H), std::move(h));
}

Matrix minkowski_sum_points(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw InvalidInput("minkowski_sum_points: dimension mismatch");
  Matrix out(a.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.cols(); ++i) {
    for (Index j = 0; j < b.cols(); ++j) out.col(i * b.cols() + j) = a.col(i) + b.col(j);
  }
  return out;
}

bool check_lemma1(const Matrix& Lambda, double alpha, double beta, const Matrix& A, const Matrix& Gamma,
                  const HPolytope& X, const HPolytope& Y, const VertexSet& Z, double tol) {
  const Index p = X.dim();
  if (Y.dim() != p || A.rows() != p || A.cols() != p || Gamma.rows() != p || Gamma.cols() != Z.dim() ||
      Lambda.rows() != Y.num_constraints() || Lambda.cols() != X.num_constraints()) {
    throw InvalidInput("check_lemma1: dimension mismatch");
  }
  if (Lambda.size() > 0 && Lambda.minCoeff() < -tol) return false;
  const Matrix equality = Lambda * X.H() - alpha * Y.H() * A;
  if (equality.size() > 0 && equality.lpNorm<Eigen::Infinity>() > tol) return false;
  const Vector rhs = beta * Y.h() - mapped_support_rows(Gamma, Z, Y.H());
  return ((Lambda * X.h() - rhs).array() <= tol).all();
}

}  // namespace sltmpc
