#include "sltmpc/problem_spec.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace sltmpc {

LinearExpr& LinearExpr::add(Index column, double coeff) {
  if (coeff != 0.0) terms_.emplace_back(column, coeff);
  return *this;
}

LinearExpr& LinearExpr::add(const Variable& var, Index k, double coeff) {
  if (k < 0 || k >= var.size) {
    throw std::out_of_range("LinearExpr: index " + std::to_string(k) +
                            " outside variable '" + var.name + "'");
  }
  return add(var[k], coeff);
}

LinearExpr& LinearExpr::add(const Variable& var,
                            const Eigen::Ref<const RowVector>& coeffs) {
  return add(var, 0, coeffs);
}

LinearExpr& LinearExpr::add(const Variable& var, Index first,
                            const Eigen::Ref<const RowVector>& coeffs) {
  if (first < 0 || first + coeffs.size() > var.size) {
    throw std::out_of_range("LinearExpr: block exceeds variable '" + var.name + "'");
  }
  for (Index k = 0; k < coeffs.size(); ++k) add(var[first + k], coeffs(k));
  return *this;
}

double LinearExpr::evaluate(const Vector& x) const {
  double acc = 0.0;
  for (const auto& [col, a] : terms_) acc += a * x(col);
  return acc;
}

ProblemSpec::ProblemSpec(std::string tag) : tag_(std::move(tag)) {}

const Variable& ProblemSpec::add_variable(std::string name, Index size) {
  if (size <= 0) throw std::invalid_argument("variable '" + name + "' has non-positive size");
  if (has_variable(name)) throw std::invalid_argument("duplicate variable '" + name + "'");
  variables_.push_back(Variable{std::move(name), num_vars_, size});
  num_vars_ += size;
  return variables_.back();
}

const Variable& ProblemSpec::variable(std::string_view name) const {
  for (const auto& v : variables_) {
    if (v.name == name) return v;
  }
  throw std::out_of_range("unknown variable '" + std::string(name) + "'");
}

bool ProblemSpec::has_variable(std::string_view name) const {
  return std::any_of(variables_.begin(), variables_.end(),
                     [&](const Variable& v) { return v.name == name; });
}

int ProblemSpec::group_id(std::string_view group) {
  for (std::size_t k = 0; k < groups_.size(); ++k) {
    if (groups_[k] == group) return static_cast<int>(k);
  }
  groups_.emplace_back(group);
  return static_cast<int>(groups_.size()) - 1;
}

void ProblemSpec::add_equality(const LinearExpr& expr, double rhs, std::string_view group) {
  for (const auto& t : expr.terms()) {
    if (t.first < 0 || t.first >= num_vars_) throw std::out_of_range("equality references undeclared column");
  }
  eq_rows_.push_back(Row{expr.terms(), group_id(group)});
  eq_rhs_.push_back(rhs);
}

void ProblemSpec::add_inequality(const LinearExpr& expr, double rhs, std::string_view group) {
  for (const auto& t : expr.terms()) {
    if (t.first < 0 || t.first >= num_vars_) throw std::out_of_range("inequality references undeclared column");
  }
  ineq_rows_.push_back(Row{expr.terms(), group_id(group)});
  ineq_rhs_.push_back(rhs);
}

void ProblemSpec::add_quadratic(const Variable& var, Index first, const Matrix& weight) {
  if (weight.rows() != weight.cols() || first < 0 || first + weight.rows() > var.size) {
    throw std::invalid_argument("quadratic weight does not fit variable '" + var.name + "'");
  }
  if (!weight.isApprox(weight.transpose(), 1e-12)) {
    throw std::invalid_argument("quadratic weight must be symmetric");
  }
  for (Index i = 0; i < weight.rows(); ++i) {
    for (Index j = 0; j < weight.cols(); ++j) {
      if (weight(i, j) != 0.0) {
        hessian_.emplace_back(static_cast<int>(var[first + i]), static_cast<int>(var[first + j]),
                              2.0 * weight(i, j));
      }
    }
  }
}

void ProblemSpec::add_linear(Index column, double coeff) {
  if (column < 0 || column >= num_vars_) throw std::out_of_range("linear cost on undeclared column");
  if (coeff != 0.0) linear_.emplace_back(column, coeff);
}

void ProblemSpec::add_linear(const Variable& var, const Vector& coeffs) {
  if (coeffs.size() != var.size) throw std::invalid_argument("linear cost size mismatch");
  for (Index k = 0; k < var.size; ++k) add_linear(var[k], coeffs(k));
}

SparseMatrix ProblemSpec::hessian() const {
  SparseMatrix P(num_vars_, num_vars_);
  P.setFromTriplets(hessian_.begin(), hessian_.end());
  return P;
}

Vector ProblemSpec::linear_cost() const {
  Vector q = Vector::Zero(num_vars_);
  for (const auto& [col, c] : linear_) q(col) += c;
  return q;
}

namespace {

SparseMatrix assemble(const auto& rows, Index cols) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& [col, a] : rows[r].terms) {
      triplets.emplace_back(static_cast<int>(r), static_cast<int>(col), a);
    }
  }
  SparseMatrix M(static_cast<Index>(rows.size()), cols);
  M.setFromTriplets(triplets.begin(), triplets.end());
  return M;
}

}  // namespace

SparseMatrix ProblemSpec::equality_matrix() const { return assemble(eq_rows_, num_vars_); }
SparseMatrix ProblemSpec::inequality_matrix() const { return assemble(ineq_rows_, num_vars_); }

Vector ProblemSpec::equality_rhs() const {
  return Eigen::Map<const Vector>(eq_rhs_.data(), static_cast<Index>(eq_rhs_.size()));
}

Vector ProblemSpec::inequality_rhs() const {
  return Eigen::Map<const Vector>(ineq_rhs_.data(), static_cast<Index>(ineq_rhs_.size()));
}

double ProblemSpec::objective(const Vector& x) const {
  double value = 0.0;
  for (const auto& t : hessian_) value += 0.5 * t.value() * x(t.row()) * x(t.col());
  for (const auto& [col, c] : linear_) value += c * x(col);
  return value;
}

std::vector<double> ProblemSpec::row_values(const std::vector<Row>& rows, const Vector& x) const {
  std::vector<double> values(rows.size(), 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& [col, a] : rows[r].terms) values[r] += a * x(col);
  }
  return values;
}

double ProblemSpec::max_violation(const Vector& x) const {
  if (x.size() != num_vars_) throw std::invalid_argument("point has wrong dimension");
  double worst = 0.0;
  const auto eq = row_values(eq_rows_, x);
  for (std::size_t r = 0; r < eq.size(); ++r) worst = std::max(worst, std::abs(eq[r] - eq_rhs_[r]));
  const auto in = row_values(ineq_rows_, x);
  for (std::size_t r = 0; r < in.size(); ++r) worst = std::max(worst, in[r] - ineq_rhs_[r]);
  return worst;
}

std::string ProblemSpec::worst_violation_group(const Vector& x) const {
  double worst = -1.0;
  int group = -1;
  const auto eq = row_values(eq_rows_, x);
  for (std::size_t r = 0; r < eq.size(); ++r) {
    const double v = std::abs(eq[r] - eq_rhs_[r]);
    if (v > worst) worst = v, group = eq_rows_[r].group;
  }
  const auto in = row_values(ineq_rows_, x);
  for (std::size_t r = 0; r < in.size(); ++r) {
    const double v = in[r] - ineq_rhs_[r];
    if (v > worst) worst = v, group = ineq_rows_[r].group;
  }
  return group < 0 ? std::string{} : groups_[static_cast<std::size_t>(group)];
}

std::string ProblemSpec::dump() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "problem " << tag_ << "\n";
  os << "variables " << num_vars_ << "\n";
  for (const auto& v : variables_) os << "  " << v.name << " [" << v.offset << ", " << v.offset + v.size << ")\n";
  auto print_rows = [&](const char* kind, const std::vector<Row>& rows, const std::vector<double>& rhs,
                        const char* rel) {
    os << kind << " " << rows.size() << "\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
      os << "  [" << groups_[static_cast<std::size_t>(rows[r].group)] << "]";
      for (const auto& [col, a] : rows[r].terms) os << " " << a << "*x" << col;
      os << " " << rel << " " << rhs[r] << "\n";
    }
  };
  print_rows("equalities", eq_rows_, eq_rhs_, "==");
  print_rows("inequalities", ineq_rows_, ineq_rhs_, "<=");
  os << "hessian_triplets " << hessian_.size() << "\n";
  for (const auto& t : hessian_) os << "  " << t.row() << " " << t.col() << " " << t.value() << "\n";
  os << "linear " << linear_.size() << "\n";
  for (const auto& [col, c] : linear_) os << "  " << col << " " << c << "\n";
  return os.str();
}

}  // namespace sltmpc
