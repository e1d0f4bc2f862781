#include "sltmpc/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace sltmpc {

HPolytope SetConfig::polytope() const {
  return is_box() ? HPolytope::box(lower, upper) : HPolytope(H, h);
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.A = (Matrix(2, 2) << 1.05, 0.25, 0.0, 1.0).finished();
  c.B = (Matrix(2, 1) << 0.5, 0.5).finished();
  c.X.lower = (Vector(2) << -1.5, -1.5).finished();
  c.X.upper = (Vector(2) << 0.5, 1.5).finished();
  c.U.lower = Vector::Constant(1, -0.75);
  c.U.upper = Vector::Constant(1, 0.75);
  c.W.lower = Vector::Constant(2, -0.1);
  c.W.upper = Vector::Constant(2, 0.1);
  c.Q = 10.0 * Matrix::Identity(2, 2);
  c.R = Matrix::Identity(1, 1);
  c.horizon = 8;
  c.memory_capacity = 3;
  c.x0 = (Vector(2) << -1.25, -0.5).finished();
  c.seed_memory.states = {c.x0};
  c.seed_memory.cost = SecondaryCost::kTightening;
  c.tube_steps = {1, 5, 10, 15};
  c.grid.lower = c.X.lower;
  c.grid.upper = c.X.upper;
  c.grid.spacing = 0.05;
  c.roa_memory.states = {(Vector(2) << -1.0, 0.0).finished()};
  c.roa_memory.cost = SecondaryCost::kNominal;
  c.roa_variants = {RoaVariant::kFixedTube, RoaVariant::kPrimary, RoaVariant::kFullSltmpc};
  return c;
}

std::string schedule_to_string(const Schedule& schedule) {
  if (schedule.kind == Schedule::Kind::kBackground) return "background";
  if (schedule.period <= 0) return "never";
  return std::to_string(schedule.period);
}

Schedule parse_schedule(const std::string& text) {
  if (text == "background") return Schedule::background();
  if (text == "never") return Schedule::never();
  try {
    std::size_t used = 0;
    const int period = std::stoi(text, &used);
    if (used == text.size() && period > 0) return Schedule::deterministic(period);
  } catch (const std::exception&) {
  }
  throw ConfigError("schedule: expected a positive period, 'background' or 'never', got '" + text + "'");
}

namespace {

std::string cost_name(SecondaryCost c) { return c == SecondaryCost::kNominal ? "nominal" : "tightening"; }

SecondaryCost parse_cost(const std::string& field, const std::string& text) {
  if (text == "nominal") return SecondaryCost::kNominal;
  if (text == "tightening") return SecondaryCost::kTightening;
  throw ConfigError(field + ": expected 'nominal' or 'tightening', got '" + text + "'");
}

void check_keys(const YAML::Node& node, const std::string& section, const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw ConfigError(section + ": expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError(section + (section.empty() ? "" : ".") + key + ": unknown field");
  }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& field) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(field + ": wrong type");
  }
}

Vector vector_of(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence()) throw ConfigError(field + ": expected a list of numbers");
  Vector v(static_cast<Index>(node.size()));
  for (std::size_t i = 0; i < node.size(); ++i) v(static_cast<Index>(i)) = scalar<double>(node[i], field);
  return v;
}

Matrix matrix_of(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence() || node.size() == 0) throw ConfigError(field + ": expected a list of rows");
  const std::size_t cols = node[0].IsSequence() ? node[0].size() : 0;
  if (cols == 0) throw ConfigError(field + ": expected a list of rows");
  Matrix M(static_cast<Index>(node.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < node.size(); ++r) {
    if (!node[r].IsSequence() || node[r].size() != cols) throw ConfigError(field + ": rows differ in length");
    for (std::size_t c = 0; c < cols; ++c) {
      M(static_cast<Index>(r), static_cast<Index>(c)) = scalar<double>(node[r][c], field);
    }
  }
  return M;
}

// Matrix, or a scalar meaning scalar * identity of size `dim`.
Matrix weight_of(const YAML::Node& node, const std::string& field, Index dim) {
  if (node.IsScalar()) return scalar<double>(node, field) * Matrix::Identity(dim, dim);
  return matrix_of(node, field);
}

std::vector<Vector> vectors_of(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence()) throw ConfigError(field + ": expected a list of vectors");
  std::vector<Vector> out;
  for (const auto& item : node) out.push_back(vector_of(item, field));
  return out;
}

SetConfig set_of(const YAML::Node& node, const std::string& field) {
  check_keys(node, field, {"lower", "upper", "H", "h"});
  SetConfig s;
  if (node["H"] || node["h"]) {
    if (node["lower"] || node["upper"]) throw ConfigError(field + ": give either lower/upper or H/h");
    if (!node["H"] || !node["h"]) throw ConfigError(field + ": H and h are both required");
    s.H = matrix_of(node["H"], field + ".H");
    s.h = vector_of(node["h"], field + ".h");
  } else {
    if (!node["lower"] || !node["upper"]) throw ConfigError(field + ": lower and upper are both required");
    s.lower = vector_of(node["lower"], field + ".lower");
    s.upper = vector_of(node["upper"], field + ".upper");
  }
  return s;
}

void read_seed(const YAML::Node& node, const std::string& section, SeedConfig& seed) {
  if (node["seed_states"]) seed.states = vectors_of(node["seed_states"], section + ".seed_states");
  if (node["seed_cost"]) {
    seed.cost = parse_cost(section + ".seed_cost", scalar<std::string>(node["seed_cost"], section + ".seed_cost"));
  }
}

YAML::Node vector_node(const Vector& v) {
  YAML::Node n(YAML::NodeType::Sequence);
  for (Index i = 0; i < v.size(); ++i) n.push_back(v(i));
  n.SetStyle(YAML::EmitterStyle::Flow);
  return n;
}

YAML::Node matrix_node(const Matrix& M) {
  YAML::Node n(YAML::NodeType::Sequence);
  for (Index r = 0; r < M.rows(); ++r) n.push_back(vector_node(M.row(r).transpose()));
  n.SetStyle(YAML::EmitterStyle::Flow);
  return n;
}

YAML::Node set_node(const SetConfig& s) {
  YAML::Node n;
  if (s.is_box()) {
    n["lower"] = vector_node(s.lower);
    n["upper"] = vector_node(s.upper);
  } else {
    n["H"] = matrix_node(s.H);
    n["h"] = vector_node(s.h);
  }
  return n;
}

YAML::Node seed_states_node(const SeedConfig& seed) {
  YAML::Node n(YAML::NodeType::Sequence);
  for (const auto& s : seed.states) n.push_back(vector_node(s));
  n.SetStyle(YAML::EmitterStyle::Flow);
  return n;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig c = default_config();
  if (root.IsNull()) return c;
  check_keys(root, "", {"model", "constraints", "cost", "memory", "schedule", "secondary", "terminal", "solver",
                        "simulation", "roa", "bench"});

  if (const auto n = root["model"]) {
    check_keys(n, "model", {"A", "B"});
    if (n["A"]) c.A = matrix_of(n["A"], "model.A");
    if (n["B"]) c.B = matrix_of(n["B"], "model.B");
  }
  if (const auto n = root["constraints"]) {
    check_keys(n, "constraints", {"X", "U", "W"});
    if (n["X"]) c.X = set_of(n["X"], "constraints.X");
    if (n["U"]) c.U = set_of(n["U"], "constraints.U");
    if (n["W"]) c.W = set_of(n["W"], "constraints.W");
  }
  if (const auto n = root["cost"]) {
    check_keys(n, "cost", {"Q", "R", "horizon"});
    if (n["Q"]) c.Q = weight_of(n["Q"], "cost.Q", c.A.rows());
    if (n["R"]) c.R = weight_of(n["R"], "cost.R", c.B.cols());
    if (n["horizon"]) c.horizon = scalar<int>(n["horizon"], "cost.horizon");
  }
  if (const auto n = root["memory"]) {
    check_keys(n, "memory", {"capacity", "rho", "seed_states", "seed_cost"});
    if (n["capacity"]) {
      const int cap = scalar<int>(n["capacity"], "memory.capacity");
      if (cap < 1) throw ConfigError("memory.capacity: must be at least 1");
      c.memory_capacity = static_cast<std::size_t>(cap);
    }
    if (n["rho"]) c.rho = scalar<double>(n["rho"], "memory.rho");
    read_seed(n, "memory", c.seed_memory);
  }
  if (const auto n = root["schedule"]) c.schedule = parse_schedule(scalar<std::string>(n, "schedule"));
  if (const auto n = root["secondary"]) {
    check_keys(n, "secondary", {"terminal", "cost", "nominal_weight"});
    if (n["terminal"]) {
      const auto t = scalar<std::string>(n["terminal"], "secondary.terminal");
      if (t == "scaled") {
        c.secondary.terminal = TerminalMode::kScaled;
      } else if (t == "fir") {
        c.secondary.terminal = TerminalMode::kFir;
      } else {
        throw ConfigError("secondary.terminal: expected 'scaled' or 'fir', got '" + t + "'");
      }
    }
    if (n["cost"]) c.secondary.cost = parse_cost("secondary.cost", scalar<std::string>(n["cost"], "secondary.cost"));
    if (n["nominal_weight"]) c.secondary.nominal_weight = scalar<double>(n["nominal_weight"], "secondary.nominal_weight");
  }
  if (const auto n = root["terminal"]) {
    check_keys(n, "terminal", {"mrpi_rho", "mrpi_eps", "mrpi_max_terms"});
    if (n["mrpi_rho"]) c.mrpi.rho = scalar<double>(n["mrpi_rho"], "terminal.mrpi_rho");
    if (n["mrpi_eps"]) c.mrpi.eps = scalar<double>(n["mrpi_eps"], "terminal.mrpi_eps");
    if (n["mrpi_max_terms"]) c.mrpi.max_terms = scalar<int>(n["mrpi_max_terms"], "terminal.mrpi_max_terms");
  }
  if (const auto n = root["solver"]) {
    check_keys(n, "solver", {"tolerance", "acceptable_tolerance", "infeasibility_tolerance", "max_iterations"});
    if (n["tolerance"]) c.solver.tolerance = scalar<double>(n["tolerance"], "solver.tolerance");
    if (n["acceptable_tolerance"]) {
      c.solver.acceptable_tolerance = scalar<double>(n["acceptable_tolerance"], "solver.acceptable_tolerance");
    }
    if (n["infeasibility_tolerance"]) {
      c.solver.infeasibility_tolerance = scalar<double>(n["infeasibility_tolerance"], "solver.infeasibility_tolerance");
    }
    if (n["max_iterations"]) c.solver.max_iterations = scalar<int>(n["max_iterations"], "solver.max_iterations");
  }
  if (const auto n = root["simulation"]) {
    check_keys(n, "simulation", {"seed", "steps", "runs", "x0", "disturbance", "log_timing", "tube_steps"});
    if (n["seed"]) c.seed = scalar<std::uint64_t>(n["seed"], "simulation.seed");
    if (n["steps"]) c.steps = scalar<int>(n["steps"], "simulation.steps");
    if (n["runs"]) c.runs = scalar<int>(n["runs"], "simulation.runs");
    if (n["x0"]) c.x0 = vector_of(n["x0"], "simulation.x0");
    if (n["disturbance"]) {
      const auto d = scalar<std::string>(n["disturbance"], "simulation.disturbance");
      if (d == "uniform") {
        c.disturbance = DisturbanceLaw::kUniform;
      } else if (d == "vertex") {
        c.disturbance = DisturbanceLaw::kVertex;
      } else {
        throw ConfigError("simulation.disturbance: expected 'uniform' or 'vertex', got '" + d + "'");
      }
    }
    if (n["log_timing"]) c.log_timing = scalar<bool>(n["log_timing"], "simulation.log_timing");
    if (n["tube_steps"]) {
      c.tube_steps.clear();
      if (!n["tube_steps"].IsSequence()) throw ConfigError("simulation.tube_steps: expected a list of steps");
      for (const auto& s : n["tube_steps"]) c.tube_steps.push_back(scalar<int>(s, "simulation.tube_steps"));
    }
  }
  if (const auto n = root["roa"]) {
    check_keys(n, "roa", {"spacing", "lower", "upper", "seed_states", "seed_cost", "variants"});
    if (n["spacing"]) c.grid.spacing = scalar<double>(n["spacing"], "roa.spacing");
    if (n["lower"]) c.grid.lower = vector_of(n["lower"], "roa.lower");
    if (n["upper"]) c.grid.upper = vector_of(n["upper"], "roa.upper");
    read_seed(n, "roa", c.roa_memory);
    if (n["variants"]) {
      if (!n["variants"].IsSequence()) throw ConfigError("roa.variants: expected a list");
      c.roa_variants.clear();
      for (const auto& v : n["variants"]) {
        try {
          c.roa_variants.push_back(roa_variant_from_string(scalar<std::string>(v, "roa.variants")));
        } catch (const InvalidInput& e) {
          throw ConfigError(std::string("roa.variants: ") + e.what());
        }
      }
    }
  }
  if (const auto n = root["bench"]) {
    check_keys(n, "bench", {"repeats", "states"});
    if (n["repeats"]) c.bench_repeats = scalar<int>(n["repeats"], "bench.repeats");
    if (n["states"]) c.bench_states = scalar<int>(n["states"], "bench.states");
  }
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  YAML::Node root;
  root["model"]["A"] = matrix_node(c.A);
  root["model"]["B"] = matrix_node(c.B);
  root["constraints"]["X"] = set_node(c.X);
  root["constraints"]["U"] = set_node(c.U);
  root["constraints"]["W"] = set_node(c.W);
  root["cost"]["Q"] = matrix_node(c.Q);
  root["cost"]["R"] = matrix_node(c.R);
  root["cost"]["horizon"] = c.horizon;
  root["memory"]["capacity"] = c.memory_capacity;
  root["memory"]["rho"] = c.rho;
  root["memory"]["seed_states"] = seed_states_node(c.seed_memory);
  root["memory"]["seed_cost"] = cost_name(c.seed_memory.cost);
  root["schedule"] = schedule_to_string(c.schedule);
  root["secondary"]["terminal"] = c.secondary.terminal == TerminalMode::kScaled ? "scaled" : "fir";
  root["secondary"]["cost"] = cost_name(c.secondary.cost);
  root["secondary"]["nominal_weight"] = c.secondary.nominal_weight;
  root["terminal"]["mrpi_rho"] = c.mrpi.rho;
  root["terminal"]["mrpi_eps"] = c.mrpi.eps;
  root["terminal"]["mrpi_max_terms"] = c.mrpi.max_terms;
  root["solver"]["tolerance"] = c.solver.tolerance;
  root["solver"]["acceptable_tolerance"] = c.solver.acceptable_tolerance;
  root["solver"]["infeasibility_tolerance"] = c.solver.infeasibility_tolerance;
  root["solver"]["max_iterations"] = c.solver.max_iterations;
  root["simulation"]["seed"] = c.seed;
  root["simulation"]["steps"] = c.steps;
  root["simulation"]["runs"] = c.runs;
  root["simulation"]["x0"] = vector_node(c.x0);
  root["simulation"]["disturbance"] = c.disturbance == DisturbanceLaw::kUniform ? "uniform" : "vertex";
  root["simulation"]["log_timing"] = c.log_timing;
  YAML::Node steps(YAML::NodeType::Sequence);
  for (int s : c.tube_steps) steps.push_back(s);
  steps.SetStyle(YAML::EmitterStyle::Flow);
  root["simulation"]["tube_steps"] = steps;
  root["roa"]["spacing"] = c.grid.spacing;
  root["roa"]["lower"] = vector_node(c.grid.lower);
  root["roa"]["upper"] = vector_node(c.grid.upper);
  root["roa"]["seed_states"] = seed_states_node(c.roa_memory);
  root["roa"]["seed_cost"] = cost_name(c.roa_memory.cost);
  YAML::Node variants(YAML::NodeType::Sequence);
  for (auto v : c.roa_variants) variants.push_back(to_string(v));
  variants.SetStyle(YAML::EmitterStyle::Flow);
  root["roa"]["variants"] = variants;
  root["bench"]["repeats"] = c.bench_repeats;
  root["bench"]["states"] = c.bench_states;

  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << root;
  return std::string(out.c_str()) + "\n";
}

void validate_config(const ExperimentConfig& c) {
  const Index n = c.A.rows();
  if (c.A.cols() != n) throw ConfigError("model.A: must be square");
  if (c.B.rows() != n) throw ConfigError("model.B: row count must match model.A");
  const Index m = c.B.cols();
  auto check_set = [](const SetConfig& s, Index dim, const std::string& field) {
    if (s.is_box()) {
      if (s.lower.size() != dim || s.upper.size() != dim) throw ConfigError(field + ": bounds have wrong dimension");
      if ((s.lower.array() > s.upper.array()).any()) throw ConfigError(field + ": lower exceeds upper");
    } else if (s.H.cols() != dim || s.H.rows() != s.h.size()) {
      throw ConfigError(field + ": H and h have inconsistent dimensions");
    }
  };
  check_set(c.X, n, "constraints.X");
  check_set(c.U, m, "constraints.U");
  check_set(c.W, n, "constraints.W");
  if (!c.W.is_box() && n != 2) throw ConfigError("constraints.W: polytopic disturbance sets need a 2-D state");
  if (c.Q.rows() != n || c.Q.cols() != n) throw ConfigError("cost.Q: wrong dimension");
  if (c.R.rows() != m || c.R.cols() != m) throw ConfigError("cost.R: wrong dimension");
  if (c.horizon < 2) throw ConfigError("cost.horizon: must be at least 2");
  if (c.rho < 0.0) throw ConfigError("memory.rho: must be nonnegative");
  if (c.seed_memory.states.size() + 1 > c.memory_capacity) {
    throw ConfigError("memory.seed_states: seeded entries exceed memory.capacity");
  }
  for (const auto& s : c.seed_memory.states) {
    if (s.size() != n) throw ConfigError("memory.seed_states: wrong dimension");
  }
  for (const auto& s : c.roa_memory.states) {
    if (s.size() != n) throw ConfigError("roa.seed_states: wrong dimension");
  }
  if (!(c.secondary.nominal_weight >= 0.0)) throw ConfigError("secondary.nominal_weight: must be nonnegative");
  if (!(c.mrpi.rho > 0.0 && c.mrpi.rho < 1.0)) throw ConfigError("terminal.mrpi_rho: must lie in (0, 1)");
  if (!(c.mrpi.eps >= 0.0)) throw ConfigError("terminal.mrpi_eps: must be nonnegative");
  if (c.mrpi.max_terms < 1) throw ConfigError("terminal.mrpi_max_terms: must be positive");
  if (!(c.solver.tolerance > 0.0)) throw ConfigError("solver.tolerance: must be positive");
  if (c.solver.max_iterations < 1) throw ConfigError("solver.max_iterations: must be positive");
  if (c.steps < 1) throw ConfigError("simulation.steps: must be positive");
  if (c.runs < 1) throw ConfigError("simulation.runs: must be positive");
  if (c.x0.size() != n) throw ConfigError("simulation.x0: wrong dimension");
  if (c.grid.lower.size() != n || c.grid.upper.size() != n) throw ConfigError("roa: bounds have wrong dimension");
  if (!(c.grid.spacing > 0.0)) throw ConfigError("roa.spacing: must be positive");
  if (c.bench_repeats < 1 || c.bench_states < 1) throw ConfigError("bench: repeats and states must be positive");
  if (static_cast<long>(c.bench_repeats) * c.bench_states < 30) {
    throw ConfigError("bench: repeats * states must be at least 30");
  }
}

std::string config_hash(const ExperimentConfig& config) {
  // 64-bit FNV-1a of the canonical serialization.
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_config(config)) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << hash;
  return out.str();
}

ProblemData make_problem_data(const ExperimentConfig& c) {
  try {
    LtiModel model(c.A, c.B);
    auto constraint = [](const SetConfig& s) {
      if (!s.is_box()) return HPolytope::constraint_set(s.H, s.h);
      const HPolytope box = HPolytope::box(s.lower, s.upper);
      return HPolytope::constraint_set(box.H(), box.h());
    };
    HPolytope X = constraint(c.X);
    HPolytope U = constraint(c.U);
    if (c.W.is_box()) {
      return make_problem_data(std::move(model), std::move(X), std::move(U), c.W.lower, c.W.upper, c.Q, c.R,
                               c.horizon);
    }
    HPolytope W(c.W.H, c.W.h);
    VertexSet vertices = vertices_2d(W);
    ProblemData data{std::move(model), std::move(X), std::move(U), std::move(W), std::move(vertices),
                     c.Q,               c.R,          c.horizon};
    data.validate();
    return data;
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("constraints: ") + e.what());
  }
}

std::vector<MemoryEntry> seed_entries(const ProblemData& data, const TerminalIngredients& terminal,
                                      const SeedConfig& seed, const SecondaryOptions& options,
                                      const SolverSettings& solver) {
  std::vector<MemoryEntry> entries{drs_tightenings(data, terminal, terminal.K, 0)};
  SecondaryOptions seeded = options;
  seeded.cost = seed.cost;
  for (const auto& x : seed.states) {
    SecondaryOutcome outcome = run_secondary(data, terminal, x, seeded, 0, solver);
    if (!outcome.entry) throw SynthesisError("seed secondary solve " + to_string(outcome.status));
    entries.push_back(std::move(*outcome.entry));
  }
  return entries;
}

ControllerState make_controller(const ExperimentConfig& config) {
  ControllerState state;
  state.data = make_problem_data(config);
  state.terminal = make_terminal_ingredients(state.data, config.mrpi);
  state.memory.capacity = config.memory_capacity;
  state.memory.entries =
      seed_entries(state.data, state.terminal, config.seed_memory, config.secondary, config.solver);
  state.settings.rho = config.rho;
  state.settings.solver = config.solver;
  state.settings.secondary = config.secondary;
  return state;
}

RoaSetup make_roa_setup(const ExperimentConfig& config) {
  RoaSetup setup;
  setup.data = make_problem_data(config);
  setup.terminal = make_terminal_ingredients(setup.data, config.mrpi);
  setup.primary_memory =
      seed_entries(setup.data, setup.terminal, config.roa_memory, config.secondary, config.solver);
  setup.fixed_entry = setup.primary_memory.front();
  setup.secondary = config.secondary;
  setup.solver = config.solver;
  setup.rho = config.rho;
  return setup;
}

}  // namespace sltmpc
