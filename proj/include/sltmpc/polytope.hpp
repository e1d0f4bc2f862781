#pragma once

#include <stdexcept>
#include <vector>

#include "sltmpc/problem_spec.hpp"

namespace sltmpc {

/// Default tolerance for membership and certificate checks.
inline constexpr double kSetTolerance = 1e-7;

class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Convex polytope {x | H x <= h}.
class HPolytope {
 public:
  HPolytope() = default;
  /// Rows of H must be nonzero.
  HPolytope(Matrix H, Vector h);

  /// Axis-aligned box lower <= x <= upper.
  static HPolytope box(const Vector& lower, const Vector& upper);
  /// Validated constraint set: compact with the origin in its interior
  /// (h > 0, at least dim + 1 rows).
  static HPolytope constraint_set(Matrix H, Vector h);

  const Matrix& H() const { return H_; }
  const Vector& h() const { return h_; }
  Index dim() const { return H_.cols(); }
  Index num_constraints() const { return H_.rows(); }
  bool is_constraint_set() const { return constraint_set_; }

 private:
  Matrix H_;
  Vector h_;
  bool constraint_set_ = false;
};

/// Finite generator of a polytope; one vertex per column.
class VertexSet {
 public:
  VertexSet() = default;
  explicit VertexSet(Matrix points);
  explicit VertexSet(const std::vector<Vector>& points);

  const Matrix& points() const { return points_; }
  Index size() const { return points_.cols(); }
  Index dim() const { return points_.rows(); }
  Vector vertex(Index k) const { return points_.col(k); }
  bool empty() const { return points_.cols() == 0; }

 private:
  Matrix points_;
};

/// h_V(eta) = max_v eta'v.
double support(const VertexSet& vertices, const Vector& eta);
/// h_{MV}(eta) = h_V(M' eta).
double mapped_support(const Matrix& M, const VertexSet& vertices, const Vector& eta);
/// Stacked supports along the rows of `directions` (one direction per row).
Vector support_rows(const VertexSet& vertices, const Matrix& directions);
/// Stacked supports h_V((M' D_r')) for the rows D_r of `directions`.
Vector mapped_support_rows(const Matrix& M, const VertexSet& vertices, const Matrix& directions);

/// Support of an H-polytope via linear programming (any dimension).
double support_lp(const HPolytope& P, const Vector& eta);

struct TightenedSet {
  HPolytope set;
  bool empty = false;
};

/// P minus conv(V_S) in the Pontryagin sense; offsets h_r - h_S(H_r').
TightenedSet pontryagin_tighten(const HPolytope& P, const VertexSet& subtrahend);

/// alpha * P; requires alpha >= 0.
HPolytope scale(const HPolytope& P, double alpha);

bool contains(const HPolytope& P, const Vector& x, double tol = kSetTolerance);

/// True when {x | Hx <= h} has no point (decided by LP; exact in 2-D).
bool is_empty(const HPolytope& P);

/// Counterclockwise vertices of a bounded, non-empty 2-D polytope.
VertexSet vertices_2d(const HPolytope& P);
/// Counterclockwise convex hull of 2-D points with collinear points removed.
VertexSet convex_hull_2d(const Matrix& points);
/// Irredundant H-representation (unit normals) of the hull of 2-D points.
HPolytope hrep_from_points_2d(const Matrix& points);
/// All pairwise sums a + b.
Matrix minkowski_sum_points(const Matrix& a, const Matrix& b);

/// Sufficient conditions for alpha*A*X contained in beta*Y minus Gamma*Z:
///   Lambda >= 0,  Lambda H_x = alpha H_y A,
///   Lambda h_x <= beta h_y - h_Z(Gamma' H_y').
bool check_lemma1(const Matrix& Lambda, double alpha, double beta, const Matrix& A,
                  const Matrix& Gamma, const HPolytope& X, const HPolytope& Y,
                  const VertexSet& Z, double tol = kSetTolerance);

}  // namespace sltmpc
