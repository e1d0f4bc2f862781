#include "sltmpc/slp.hpp"

#include <cmath>

namespace sltmpc {

SystemResponse response_from_gain(const LtiModel& model, const Matrix& K, int horizon) {
  if (horizon < 1) throw InvalidInput("response_from_gain: horizon must be positive");
  if (K.rows() != model.input_dim() || K.cols() != model.state_dim()) {
    throw InvalidInput("response_from_gain: gain has wrong shape");
  }
  const Matrix A_cl = model.A() + model.B() * K;
  SystemResponse sr;
  Matrix power = Matrix::Identity(model.state_dim(), model.state_dim());
  for (int j = 0; j < horizon; ++j) {
    sr.phi_x.push_back(power);
    sr.phi_u.push_back(K * power);
    power = A_cl * power;
  }
  return sr;
}

SystemResponse response_from_inputs(const LtiModel& model, std::vector<Matrix> phi_u) {
  if (phi_u.empty()) throw InvalidInput("response_from_inputs: empty response");
  SystemResponse sr;
  sr.phi_u = std::move(phi_u);
  Matrix phi = Matrix::Identity(model.state_dim(), model.state_dim());
  for (const auto& block : sr.phi_u) {
    if (block.rows() != model.input_dim() || block.cols() != model.state_dim()) {
      throw InvalidInput("response_from_inputs: block has wrong shape");
    }
    sr.phi_x.push_back(phi);
    phi = model.A() * phi + model.B() * block;
  }
  return sr;
}

SystemResponse blend(const SystemResponse& a, const SystemResponse& b, double theta) {
  if (a.horizon() != b.horizon()) throw InvalidInput("blend: horizons differ");
  SystemResponse out;
  for (int j = 0; j < a.horizon(); ++j) {
    const auto k = static_cast<std::size_t>(j);
    out.phi_x.push_back(theta * a.phi_x[k] + (1.0 - theta) * b.phi_x[k]);
    out.phi_u.push_back(theta * a.phi_u[k] + (1.0 - theta) * b.phi_u[k]);
  }
  return out;
}

bool validate_response(const SystemResponse& response, const LtiModel& model, double tol) {
  const int N = response.horizon();
  if (N < 1 || static_cast<int>(response.phi_u.size()) != N) return false;
  const Index n = model.state_dim();
  const Index m = model.input_dim();
  for (int j = 0; j < N; ++j) {
    const auto& px = response.phi_x[static_cast<std::size_t>(j)];
    const auto& pu = response.phi_u[static_cast<std::size_t>(j)];
    if (px.rows() != n || px.cols() != n || pu.rows() != m || pu.cols() != n) return false;
  }
  if ((response.phi_x.front() - Matrix::Identity(n, n)).lpNorm<Eigen::Infinity>() > tol) return false;
  for (int j = 0; j + 1 < N; ++j) {
    const auto k = static_cast<std::size_t>(j);
    const Matrix next = model.A() * response.phi_x[k] + model.B() * response.phi_u[k];
    if ((next - response.phi_x[k + 1]).lpNorm<Eigen::Infinity>() > tol) return false;
  }
  return true;
}

Matrix gamma_of(const SystemResponse& response, const LtiModel& model) {
  return model.A() * response.phi_x.back() + model.B() * response.phi_u.back();
}

Vector state_tube_increment(const SystemResponse& response, const VertexSet& W_vertices, const Matrix& H_x, int j) {
  return mapped_support_rows(response.phi_x.at(static_cast<std::size_t>(j - 1)), W_vertices, H_x);
}

Vector input_tube_increment(const SystemResponse& response, const VertexSet& W_vertices, const Matrix& H_u, int j) {
  return mapped_support_rows(response.phi_u.at(static_cast<std::size_t>(j - 1)), W_vertices, H_u);
}

TubeSequence tube_tightenings(const SystemResponse& response, const LtiModel& model, const VertexSet& W_vertices,
                              const Matrix& H_x, const Matrix& H_u) {
  const int N = response.horizon();
  TubeSequence tubes;
  tubes.t_x.push_back(Vector::Zero(H_x.rows()));
  tubes.t_u.push_back(Vector::Zero(H_u.rows()));
  for (int j = 1; j <= N; ++j) {
    tubes.t_x.push_back(tubes.t_x.back() + state_tube_increment(response, W_vertices, H_x, j));
    tubes.t_u.push_back(tubes.t_u.back() + input_tube_increment(response, W_vertices, H_u, j));
  }
  tubes.gamma = gamma_of(response, model);
  return tubes;
}

bool check_tube_structure(const TubeSequence& tubes, const SystemResponse& response, const VertexSet& W_vertices,
                          const Matrix& H_x, const Matrix& H_u, double tol) {
  const int N = response.horizon();
  if (tubes.horizon() != N || static_cast<int>(tubes.t_u.size()) != N + 1) return false;
  if (tubes.t_x[0].lpNorm<Eigen::Infinity>() != 0.0 || tubes.t_u[0].lpNorm<Eigen::Infinity>() != 0.0) return false;
  for (int i = 0; i < N; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if ((tubes.t_x[k + 1] - tubes.t_x[k]).minCoeff() < -tol) return false;
    if ((tubes.t_u[k + 1] - tubes.t_u[k]).minCoeff() < -tol) return false;
    const Vector dx = tubes.t_x[k + 1] - tubes.t_x[k] - state_tube_increment(response, W_vertices, H_x, i + 1);
    const Vector du = tubes.t_u[k + 1] - tubes.t_u[k] - input_tube_increment(response, W_vertices, H_u, i + 1);
    const double scale = 1.0 + tubes.t_x[k + 1].cwiseAbs().maxCoeff() + tubes.t_u[k + 1].cwiseAbs().maxCoeff();
    if (dx.lpNorm<Eigen::Infinity>() > tol * scale || du.lpNorm<Eigen::Infinity>() > tol * scale) return false;
  }
  return true;
}

VertexSet state_tube_polygon(const TubeSequence& tubes, const Matrix& H_x, int i) {
  const auto& t = tubes.t_x.at(static_cast<std::size_t>(i));
  if (t.lpNorm<Eigen::Infinity>() == 0.0) return VertexSet(Matrix::Zero(H_x.cols(), 1));
  return vertices_2d(HPolytope(H_x, t));
}

}  // namespace sltmpc
