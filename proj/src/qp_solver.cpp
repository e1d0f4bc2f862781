#include "sltmpc/qp_solver.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sltmpc {

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal:
      return "optimal";
    case SolveStatus::kInfeasible:
      return "infeasible";
    case SolveStatus::kNumericalFailure:
      return "numerical-failure";
  }
  return "unknown";
}

Vector SolveResult::value(std::string_view name) const {
  if (!optimal()) throw std::logic_error("SolveResult::value on non-optimal result (" + to_string(status) + ")");
  for (const auto& v : layout) {
    if (v.name == name) return x.segment(v.offset, v.size);
  }
  throw std::out_of_range("unknown variable '" + std::string(name) + "'");
}

namespace {

struct QpData {
  SparseMatrix P;
  Vector c;
  SparseMatrix A;
  Vector b;
  SparseMatrix G;
  Vector h;
};

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

// Reduced Newton system
//   [P + G'DG   A'] [dx]   [r1]
//   [A          0 ] [dy] = [r2]
// factored with static regularization and refined against the exact matrix.
class ReducedKkt {
 public:
  ReducedKkt(const QpData& d, double regularization, int refinement_steps)
      : d_(d),
        gt_(d.G.transpose()),
        at_(d.A.transpose()),
        n_(d.P.rows()),
        p_(d.A.rows()),
        reg_(regularization),
        refinement_steps_(refinement_steps) {}

  bool factor(const Vector& weights) {
    SparseMatrix weighted_g = weights.asDiagonal() * d_.G;
    h0_ = d_.P + gt_ * weighted_g;
    for (int attempt = 0; attempt < 6; ++attempt) {
      assemble();
      if (!analyzed_ || k_.nonZeros() != pattern_nnz_) {
        ldlt_.analyzePattern(k_);
        analyzed_ = true;
        pattern_nnz_ = k_.nonZeros();
      }
      ldlt_.factorize(k_);
      if (ldlt_.info() == Eigen::Success) return true;
      reg_ *= 100.0;
    }
    return false;
  }

  void solve(const Vector& r1, const Vector& r2, Vector& dx, Vector& dy) const {
    Vector rhs(n_ + p_);
    rhs << r1, r2;
    Vector sol = ldlt_.solve(rhs);
    for (int k = 0; k < refinement_steps_; ++k) {
      Vector res = rhs - apply(sol);
      if (inf_norm(res) <= 1e-15 * (1.0 + inf_norm(rhs))) break;
      sol += ldlt_.solve(res);
    }
    dx = sol.head(n_);
    dy = sol.tail(p_);
  }

 private:
  Vector apply(const Vector& sol) const {
    Vector out(n_ + p_);
    const auto x = sol.head(n_);
    const auto y = sol.tail(p_);
    out.head(n_) = h0_ * x + at_ * y;
    out.tail(p_) = d_.A * x;
    return out;
  }

  void assemble() {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(h0_.nonZeros() + d_.A.nonZeros() + n_ + p_));
    for (int col = 0; col < h0_.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(h0_, col); it; ++it) {
        if (it.row() >= col) t.emplace_back(static_cast<int>(it.row()), col, it.value());
      }
    }
    for (int col = 0; col < d_.A.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(d_.A, col); it; ++it) {
        t.emplace_back(static_cast<int>(n_ + it.row()), col, it.value());
      }
    }
    for (Index i = 0; i < n_; ++i) t.emplace_back(static_cast<int>(i), static_cast<int>(i), reg_);
    for (Index i = 0; i < p_; ++i) t.emplace_back(static_cast<int>(n_ + i), static_cast<int>(n_ + i), -reg_);
    k_.resize(n_ + p_, n_ + p_);
    k_.setFromTriplets(t.begin(), t.end());
  }

  const QpData& d_;
  SparseMatrix gt_;
  SparseMatrix at_;
  Index n_;
  Index p_;
  double reg_;
  int refinement_steps_;
  SparseMatrix h0_;
  SparseMatrix k_;
  Index pattern_nnz_ = -1;
  bool analyzed_ = false;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

double max_step(const Vector& v, const Vector& dv) {
  double step = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) step = std::min(step, -v(i) / dv(i));
  }
  return step;
}

struct IpmOutcome {
  SolveStatus status = SolveStatus::kNumericalFailure;
  Vector x, y, z;
  int iterations = 0;
  double pres = 0.0, dres = 0.0, gap = 0.0;
};

IpmOutcome equality_qp(const QpData& d, const SolverSettings& settings) {
  IpmOutcome out;
  ReducedKkt kkt(d, settings.regularization, settings.refinement_steps + 2);
  if (!kkt.factor(Vector::Zero(0))) return out;
  Vector x, y;
  kkt.solve(-d.c, d.b, x, y);
  out.pres = inf_norm(d.A * x - d.b) / (1.0 + inf_norm(d.b));
  out.dres = inf_norm(d.P * x + d.c + d.A.transpose() * y) / (1.0 + inf_norm(d.c));
  out.x = x;
  out.y = y;
  out.z = Vector::Zero(0);
  out.iterations = 1;
  if (out.pres <= settings.acceptable_tolerance && out.dres <= settings.acceptable_tolerance) {
    out.status = SolveStatus::kOptimal;
  }
  return out;
}

IpmOutcome interior_point(const QpData& d, const SolverSettings& settings) {
  const Index n = d.P.rows();
  const Index m = d.G.rows();
  if (m == 0) return equality_qp(d, settings);

  IpmOutcome out;
  ReducedKkt kkt(d, settings.regularization, settings.refinement_steps);
  const SparseMatrix at = d.A.transpose();
  const SparseMatrix gt = d.G.transpose();
  const double scale_p = 1.0 + std::max(inf_norm(d.b), inf_norm(d.h));
  const double scale_c = 1.0 + inf_norm(d.c);

  // Starting point from the least-squares problem with unit slack weights.
  Vector x(n), y(d.A.rows()), s(m), z(m);
  if (!kkt.factor(Vector::Ones(m))) return out;
  kkt.solve(-d.c + gt * d.h, d.b, x, y);
  s = d.h - d.G * x;
  z = -s;
  if (const double shift = -s.minCoeff(); shift >= 0.0) s.array() += 1.0 + shift;
  if (const double shift = -z.minCoeff(); shift >= 0.0) z.array() += 1.0 + shift;

  struct Best {
    double merit = std::numeric_limits<double>::infinity();
    Vector x, y, z;
    double pres = 0, dres = 0, gap = 0;
  } best;

  int stalled = 0;
  for (int it = 0; it <= settings.max_iterations; ++it) {
    out.iterations = it;
    const Vector px = d.P * x;
    const Vector aty = at * y;
    const Vector gtz = gt * z;
    const Vector rd = px + d.c + aty + gtz;
    const Vector rp = d.A * x - d.b;
    const Vector rg = d.G * x + s - d.h;
    const double sz = s.dot(z);
    const double mu = sz / static_cast<double>(m);
    const double pobj = 0.5 * x.dot(px) + d.c.dot(x);

    const double pres = std::max(inf_norm(rp), inf_norm(rg)) / scale_p;
    const double dres = inf_norm(rd) / std::max(scale_c, 1.0 + inf_norm(px));
    const double gap = sz / (1.0 + std::abs(pobj));
    const double merit = std::max({pres, dres, gap});
    if (merit < best.merit) best = Best{merit, x, y, z, pres, dres, gap};

    if (pres <= settings.tolerance && dres <= settings.tolerance && gap <= settings.tolerance) {
      out.status = SolveStatus::kOptimal;
      out.x = x, out.y = y, out.z = z;
      out.pres = pres, out.dres = dres, out.gap = gap;
      return out;
    }

    // Farkas certificate: A'y + G'z = 0, z >= 0, b'y + h'z < 0.
    const double tau = -(d.b.dot(y) + d.h.dot(z));
    if (it > 2 && tau > 0.0 && inf_norm(aty + gtz) <= settings.infeasibility_tolerance * tau &&
        pres > settings.tolerance) {
      out.status = SolveStatus::kInfeasible;
      return out;
    }
    if (it == settings.max_iterations || stalled >= 5) break;

    const Vector weights = z.cwiseQuotient(s);
    if (!kkt.factor(weights)) break;

    auto newton = [&](const Vector& rsz, Vector& dx, Vector& ds, Vector& dz) {
      const Vector tmp = (z.cwiseProduct(rg) - rsz).cwiseQuotient(s);
      Vector dy;
      kkt.solve(-rd - gt * tmp, -rp, dx, dy);
      const Vector gdx = d.G * dx;
      dz = weights.cwiseProduct(gdx) + tmp;
      ds = -rg - gdx;
      return dy;
    };

    Vector dx, ds, dz;
    Vector rsz = s.cwiseProduct(z);
    newton(rsz, dx, ds, dz);
    const double a_aff = std::min(1.0, std::min(max_step(s, ds), max_step(z, dz)));
    const double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / static_cast<double>(m);
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    rsz += ds.cwiseProduct(dz);
    rsz.array() -= sigma * mu;
    Vector dy = newton(rsz, dx, ds, dz);
    const double a_max = std::min(max_step(s, ds), max_step(z, dz));
    const double step = std::min(1.0, 0.99 * a_max);
    if (!std::isfinite(step) || !dx.allFinite() || !dz.allFinite()) break;

    x += step * dx;
    y += step * dy;
    s += step * ds;
    z += step * dz;
    stalled = step < 1e-8 ? stalled + 1 : 0;
  }

  out.iterations = std::max(out.iterations, 1);
  if (best.merit <= settings.acceptable_tolerance) {
    out.status = SolveStatus::kOptimal;
    out.x = best.x, out.y = best.y, out.z = best.z;
    out.pres = best.pres, out.dres = best.dres, out.gap = best.gap;
  }
  return out;
}

// Equality-constrained re-solve with the inequalities where z > s held tight.
// Replaces the iterate only if the result is primal and dual feasible.
bool polish(const QpData& d, const SolverSettings& settings, IpmOutcome& out) {
  const Index m = d.G.rows();
  if (m == 0 || out.x.size() == 0) return false;
  const Vector s = d.h - d.G * out.x;
  std::vector<Index> active;
  for (Index i = 0; i < m; ++i) {
    if (out.z(i) > s(i)) active.push_back(i);
  }
  QpData eq;
  eq.P = d.P;
  eq.c = d.c;
  eq.G.resize(0, d.P.rows());
  eq.h.resize(0);
  const Index p = d.A.rows();
  const auto na = static_cast<Index>(active.size());
  std::vector<Eigen::Triplet<double>> t;
  for (int col = 0; col < d.A.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(d.A, col); it; ++it) t.emplace_back(static_cast<int>(it.row()), col, it.value());
  }
  std::vector<Index> slot(static_cast<std::size_t>(m), -1);
  for (Index k = 0; k < na; ++k) slot[static_cast<std::size_t>(active[static_cast<std::size_t>(k)])] = p + k;
  for (int col = 0; col < d.G.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(d.G, col); it; ++it) {
      const Index row = slot[static_cast<std::size_t>(it.row())];
      if (row >= 0) t.emplace_back(static_cast<int>(row), col, it.value());
    }
  }
  eq.A.resize(p + na, d.P.rows());
  eq.A.setFromTriplets(t.begin(), t.end());
  eq.b.resize(p + na);
  eq.b.head(p) = d.b;
  for (Index k = 0; k < na; ++k) eq.b(p + k) = d.h(active[static_cast<std::size_t>(k)]);

  SolverSettings inner = settings;
  inner.refinement_steps = std::max(settings.refinement_steps, 8);
  const IpmOutcome r = equality_qp(eq, inner);
  if (!r.x.allFinite() || !r.y.allFinite()) return false;

  const double scale_p = 1.0 + std::max(inf_norm(d.b), inf_norm(d.h));
  const double scale_c = 1.0 + inf_norm(d.c);
  Vector z = Vector::Zero(m);
  for (Index k = 0; k < na; ++k) z(active[static_cast<std::size_t>(k)]) = r.y(p + k);
  const Vector y = r.y.head(p);
  const Vector px = d.P * r.x;
  const double pres = std::max(inf_norm(d.A * r.x - d.b), std::max(0.0, (d.G * r.x - d.h).maxCoeff())) / scale_p;
  const double dres = inf_norm(px + d.c + d.A.transpose() * y + d.G.transpose() * z) /
                      std::max(scale_c, 1.0 + inf_norm(px));
  const double dual_sign = std::max(0.0, -z.minCoeff()) / scale_c;
  if (pres > settings.tolerance || dres > settings.tolerance || dual_sign > settings.tolerance) return false;
  out.x = r.x;
  out.y = y;
  out.z = z;
  out.pres = pres;
  out.dres = dres;
  out.gap = 0.0;
  return true;
}

// min t  s.t.  Ax = b, Gx - t <= h, t >= -1. Returns t* or NaN on failure.
double phase_one(const QpData& d, const SolverSettings& settings) {
  const Index n = d.P.rows();
  const Index m = d.G.rows();
  QpData aux;
  aux.P.resize(n + 1, n + 1);
  aux.c = Vector::Zero(n + 1);
  aux.c(n) = 1.0;
  aux.A = SparseMatrix(d.A.rows(), n + 1);
  {
    std::vector<Eigen::Triplet<double>> t;
    for (int col = 0; col < d.A.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(d.A, col); it; ++it) t.emplace_back(it.row(), col, it.value());
    aux.A.setFromTriplets(t.begin(), t.end());
  }
  aux.b = d.b;
  aux.G = SparseMatrix(m + 1, n + 1);
  {
    std::vector<Eigen::Triplet<double>> t;
    for (int col = 0; col < d.G.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(d.G, col); it; ++it) t.emplace_back(it.row(), col, it.value());
    for (Index r = 0; r < m; ++r) t.emplace_back(static_cast<int>(r), static_cast<int>(n), -1.0);
    t.emplace_back(static_cast<int>(m), static_cast<int>(n), -1.0);
    aux.G.setFromTriplets(t.begin(), t.end());
  }
  aux.h.resize(m + 1);
  aux.h << d.h, 1.0;
  SolverSettings inner = settings;
  inner.phase_one_fallback = false;
  inner.max_iterations = std::max(inner.max_iterations, 100);
  const IpmOutcome r = interior_point(aux, inner);
  if (r.status != SolveStatus::kOptimal) return std::numeric_limits<double>::quiet_NaN();
  return r.x(n);
}

}  // namespace

SolveResult solve(const ProblemSpec& problem, const SolverSettings& settings) {
  const auto start = std::chrono::steady_clock::now();
  QpData d;
  d.P = problem.hessian();
  d.c = problem.linear_cost();
  d.A = problem.equality_matrix();
  d.b = problem.equality_rhs();
  d.G = problem.inequality_matrix();
  d.h = problem.inequality_rhs();

  IpmOutcome outcome = interior_point(d, settings);
  if (outcome.status == SolveStatus::kNumericalFailure && settings.phase_one_fallback && d.G.rows() > 0) {
    const double t_star = phase_one(d, settings);
    if (std::isfinite(t_star) && t_star > 1e-7 * (1.0 + inf_norm(d.h))) outcome.status = SolveStatus::kInfeasible;
  }

  SolveResult result;
  if (outcome.status == SolveStatus::kOptimal && settings.polish) result.polished = polish(d, settings, outcome);
  result.status = outcome.status;
  result.iterations = outcome.iterations;
  result.layout = problem.variables();
  if (outcome.status == SolveStatus::kOptimal) {
    result.x = std::move(outcome.x);
    result.eq_duals = std::move(outcome.y);
    result.ineq_duals = std::move(outcome.z);
    result.objective = problem.objective(result.x);
    result.primal_residual = outcome.pres;
    result.dual_residual = outcome.dres;
    result.gap = outcome.gap;
  }
  result.solve_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace sltmpc
