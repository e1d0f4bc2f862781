#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sltmpc {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Contiguous block of decision variables inside a ProblemSpec.
struct Variable {
  std::string name;
  Index offset = 0;
  Index size = 0;

  Index operator[](Index k) const { return offset + k; }
};

/// Sparse linear form sum_k a_k x_{i_k}.
class LinearExpr {
 public:
  LinearExpr& add(Index column, double coeff);
  LinearExpr& add(const Variable& var, Index k, double coeff);
  /// Adds coeffs(k) * var[k] for every k; zero coefficients are skipped.
  LinearExpr& add(const Variable& var, const Eigen::Ref<const RowVector>& coeffs);
  /// Adds coeffs(k) * var[first + k].
  LinearExpr& add(const Variable& var, Index first,
                  const Eigen::Ref<const RowVector>& coeffs);

  const std::vector<std::pair<Index, double>>& terms() const { return terms_; }
  double evaluate(const Vector& x) const;

 private:
  std::vector<std::pair<Index, double>> terms_;
};

/// Solver-agnostic convex quadratic program
///
///   min  1/2 x'Px + q'x   s.t.  A x = b,  G x <= h.
///
/// Constraints are added row by row and tagged with a group name, which is
/// only used for diagnostics (dump, violation reports).
class ProblemSpec {
 public:
  explicit ProblemSpec(std::string tag = {});

  const std::string& tag() const { return tag_; }

  const Variable& add_variable(std::string name, Index size);
  const Variable& variable(std::string_view name) const;
  bool has_variable(std::string_view name) const;
  const std::vector<Variable>& variables() const { return variables_; }
  Index num_variables() const { return num_vars_; }

  void add_equality(const LinearExpr& expr, double rhs, std::string_view group);
  /// expr <= rhs
  void add_inequality(const LinearExpr& expr, double rhs, std::string_view group);

  Index num_equalities() const { return static_cast<Index>(eq_rhs_.size()); }
  Index num_inequalities() const { return static_cast<Index>(ineq_rhs_.size()); }

  /// Adds x_var' W x_var to the cost. W must be symmetric PSD.
  void add_quadratic(const Variable& var, Index first, const Matrix& weight);
  void add_quadratic(const Variable& var, const Matrix& weight) {
    add_quadratic(var, 0, weight);
  }
  void add_linear(Index column, double coeff);
  void add_linear(const Variable& var, const Vector& coeffs);

  SparseMatrix hessian() const;  // P, with the 1/2 convention
  Vector linear_cost() const;
  SparseMatrix equality_matrix() const;
  Vector equality_rhs() const;
  SparseMatrix inequality_matrix() const;
  Vector inequality_rhs() const;

  double objective(const Vector& x) const;
  /// Largest violation of any equality (absolute) or inequality (positive part).
  double max_violation(const Vector& x) const;
  /// Name of the constraint group holding the worst violated row.
  std::string worst_violation_group(const Vector& x) const;

  /// Human-readable listing for bug reports; not a stable format.
  std::string dump() const;

 private:
  struct Row {
    std::vector<std::pair<Index, double>> terms;
    int group = 0;
  };
  int group_id(std::string_view group);
  std::vector<double> row_values(const std::vector<Row>& rows, const Vector& x) const;

  std::string tag_;
  std::vector<Variable> variables_;
  Index num_vars_ = 0;
  std::vector<Row> eq_rows_;
  std::vector<double> eq_rhs_;
  std::vector<Row> ineq_rows_;
  std::vector<double> ineq_rhs_;
  std::vector<std::string> groups_;
  std::vector<Eigen::Triplet<double>> hessian_;
  std::vector<std::pair<Index, double>> linear_;
};

}  // namespace sltmpc
