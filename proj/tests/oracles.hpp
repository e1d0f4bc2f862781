#pragma once

// Independent reference computations used by the tests. Nothing here calls the
// library's solver or polygon routines.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sltmpc/config.hpp"

namespace oracle {

using sltmpc::Index;
using sltmpc::Matrix;
using sltmpc::Vector;

/// Vertices of {x in R^2 | Hx <= h} from all pairwise row intersections.
inline std::vector<Eigen::Vector2d> polygon_vertices(const Matrix& H, const Vector& h, double tol = 1e-9) {
  std::vector<Eigen::Vector2d> out;
  for (Index a = 0; a < H.rows(); ++a) {
    for (Index b = a + 1; b < H.rows(); ++b) {
      Eigen::Matrix2d M;
      M << H.row(a), H.row(b);
      if (std::abs(M.determinant()) < 1e-12) continue;
      const Eigen::Vector2d p = M.partialPivLu().solve(Eigen::Vector2d(h(a), h(b)));
      if (((H * p - h).array() <= tol * (1.0 + h.cwiseAbs().maxCoeff())).all()) out.push_back(p);
    }
  }
  return out;
}

/// max eta'x over the polygon, by vertex enumeration.
inline double polygon_support(const Matrix& H, const Vector& h, const Vector& eta) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& p : polygon_vertices(H, h)) best = std::max(best, eta.dot(p));
  return best;
}

/// max over the columns of V of eta' M v.
inline double mapped_support(const Matrix& M, const Matrix& V, const Vector& eta) {
  double best = -std::numeric_limits<double>::infinity();
  for (Index k = 0; k < V.cols(); ++k) best = std::max(best, eta.dot(M * V.col(k)));
  return best;
}

/// Corners of an axis-aligned box, one per column.
inline Matrix box_corners(const Vector& lo, const Vector& hi) {
  const Index n = lo.size();
  Matrix out(n, Index{1} << n);
  for (Index k = 0; k < out.cols(); ++k) {
    for (Index i = 0; i < n; ++i) out(i, k) = ((k >> i) & 1) ? hi(i) : lo(i);
  }
  return out;
}

/// Exact solution of a small QP  min 1/2 x'Px + c'x  s.t.  Ax = b, Gx <= h
/// by enumerating active sets. Returns false when no active set is feasible.
inline bool active_set_qp(const Matrix& P, const Vector& c, const Matrix& A, const Vector& b, const Matrix& G,
                          const Vector& h, Vector& x_best) {
  const Index n = P.rows(), p = A.rows(), m = G.rows();
  double best = std::numeric_limits<double>::infinity();
  for (Index mask = 0; mask < (Index{1} << m); ++mask) {
    std::vector<Index> act;
    for (Index i = 0; i < m; ++i) {
      if ((mask >> i) & 1) act.push_back(i);
    }
    const Index k = p + static_cast<Index>(act.size());
    if (k > n) continue;
    Matrix K = Matrix::Zero(n + k, n + k);
    Vector rhs(n + k);
    K.topLeftCorner(n, n) = P;
    Matrix E(k, n);
    Vector e(k);
    if (p > 0) {
      E.topRows(p) = A;
      e.head(p) = b;
    }
    for (std::size_t j = 0; j < act.size(); ++j) {
      E.row(p + static_cast<Index>(j)) = G.row(act[j]);
      e(p + static_cast<Index>(j)) = h(act[j]);
    }
    K.topRightCorner(n, k) = E.transpose();
    K.bottomLeftCorner(k, n) = E;
    rhs << -c, e;
    Eigen::FullPivLU<Matrix> lu(K);
    if (lu.rank() < n + k) continue;
    const Vector sol = lu.solve(rhs);
    const Vector x = sol.head(n);
    bool ok = m == 0 || ((G * x - h).array() <= 1e-9).all();
    for (std::size_t j = 0; j < act.size() && ok; ++j) ok = sol(n + p + static_cast<Index>(j)) >= -1e-9;
    if (!ok) continue;
    const double obj = 0.5 * x.dot(P * x) + c.dot(x);
    if (obj < best) {
      best = obj;
      x_best = x;
    }
  }
  return std::isfinite(best);
}

/// The bundled two-state example.
inline sltmpc::ProblemData preset_data() { return sltmpc::make_problem_data(sltmpc::default_config()); }

}  // namespace oracle
