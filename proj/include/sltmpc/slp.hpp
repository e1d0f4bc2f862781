#pragma once

#include <vector>

#include "sltmpc/model.hpp"

namespace sltmpc {

/// Toeplitz error-system responses, one block per diagonal:
/// phi_x[j-1] = Phi_x^j (n x n), phi_u[j-1] = Phi_u^j (m x n), j = 1..N.
struct SystemResponse {
  std::vector<Matrix> phi_x;
  std::vector<Matrix> phi_u;

  int horizon() const { return static_cast<int>(phi_x.size()); }
};

/// Phi_x^j = (A+BK)^{j-1}, Phi_u^j = K (A+BK)^{j-1}.
SystemResponse response_from_gain(const LtiModel& model, const Matrix& K, int horizon);
/// Completes Phi_x from Phi_u through Phi_x^1 = I, Phi_x^{j+1} = A Phi_x^j + B Phi_u^j.
SystemResponse response_from_inputs(const LtiModel& model, std::vector<Matrix> phi_u);
/// theta * a + (1 - theta) * b, blockwise.
SystemResponse blend(const SystemResponse& a, const SystemResponse& b, double theta);

/// Phi_x^1 = I and Phi_x^{j+1} = A Phi_x^j + B Phi_u^j within tol.
bool validate_response(const SystemResponse& response, const LtiModel& model, double tol = 1e-8);

/// Gamma = A Phi_x^N + B Phi_u^N.
Matrix gamma_of(const SystemResponse& response, const LtiModel& model);

/// Support-function form of the system level disturbance reachable sets:
/// t_x[i] = h_{F_i^x}(H_x rows), t_u[i] = h_{F_i^u}(H_u rows), i = 0..N.
struct TubeSequence {
  std::vector<Vector> t_x;
  std::vector<Vector> t_u;
  Matrix gamma;

  int horizon() const { return static_cast<int>(t_x.size()) - 1; }
};

TubeSequence tube_tightenings(const SystemResponse& response, const LtiModel& model, const VertexSet& W_vertices,
                              const Matrix& H_x, const Matrix& H_u);

/// Support increments h_{Phi^j W}(H rows) of step j (1-based).
Vector state_tube_increment(const SystemResponse& response, const VertexSet& W_vertices, const Matrix& H_x, int j);
Vector input_tube_increment(const SystemResponse& response, const VertexSet& W_vertices, const Matrix& H_u, int j);

/// t[0] = 0, t[i] <= t[i+1] and t[i+1] - t[i] equals the step increment, all within tol.
bool check_tube_structure(const TubeSequence& tubes, const SystemResponse& response, const VertexSet& W_vertices,
                          const Matrix& H_x, const Matrix& H_u, double tol = 1e-12);

/// Plane-polygon materialization {x | H_x x <= t_x[i]} of a 2-D state tube.
VertexSet state_tube_polygon(const TubeSequence& tubes, const Matrix& H_x, int i);

}  // namespace sltmpc
