#include "nsto/io/config.hpp"

#include <functional>
#include <initializer_list>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "nsto/error.hpp"
#include "nsto/io/files.hpp"
#include "nsto/mesh/benchmarks.hpp"

namespace nsto::io {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string kind_name(const json& j) {
  if (j.is_null()) return "null";
  if (j.is_boolean()) return "boolean";
  if (j.is_number()) return "number";
  if (j.is_string()) return "string";
  if (j.is_array()) return "array";
  return "object";
}

class Parser {
 public:
  std::vector<std::string> errors;

  void error(const std::string& path, const std::string& msg) {
    errors.push_back((path.empty() ? std::string("<root>") : path) + ": " + msg);
  }

  // Verifies `j` is an object whose keys are all in `allowed`.
  bool object(const json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) {
      error(path, "expected an object, got " + kind_name(j));
      return false;
    }
    for (const auto& [key, value] : j.items()) {
      bool known = false;
      for (auto a : allowed) known = known || key == a;
      if (!known) error(join(path, key), "unknown key");
    }
    return true;
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  void real(const json& obj, const std::string& path, const char* key, double& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_number()) {
      error(join(path, key), "expected a number, got " + kind_name(v));
      return;
    }
    out = v.get<double>();
  }

  void integer(const json& obj, const std::string& path, const char* key, int& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) {
      error(join(path, key), "expected an integer, got " + kind_name(v));
      return;
    }
    const auto x = v.get<long long>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
      error(join(path, key), "integer out of range");
      return;
    }
    out = static_cast<int>(x);
  }

  void unsigned64(const json& obj, const std::string& path, const char* key, std::uint64_t& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_number_unsigned()) {
      error(join(path, key), "expected a non-negative integer, got " + kind_name(v));
      return;
    }
    out = v.get<std::uint64_t>();
  }

  void boolean(const json& obj, const std::string& path, const char* key, bool& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_boolean()) {
      error(join(path, key), "expected true or false, got " + kind_name(v));
      return;
    }
    out = v.get<bool>();
  }

  std::optional<std::string> string(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj.at(key);
    if (!v.is_string()) {
      error(join(path, key), "expected a string, got " + kind_name(v));
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  // Fixed-length numeric array; components beyond `n` keep their defaults.
  template <class T, std::size_t N>
  void array(const json& obj, const std::string& path, const char* key, int n,
             std::array<T, N>& out, bool required) {
    if (!obj.contains(key)) {
      if (required) error(join(path, key), "missing required field");
      return;
    }
    const json& v = obj.at(key);
    if (!v.is_array() || static_cast<int>(v.size()) != n) {
      error(join(path, key), "expected an array of " + std::to_string(n) + " entries");
      return;
    }
    for (int i = 0; i < n; ++i) {
      const json& e = v[i];
      if constexpr (std::is_same_v<T, bool>) {
        if (!e.is_boolean()) {
          error(join(path, key) + "[" + std::to_string(i) + "]", "expected true or false");
          continue;
        }
        out[i] = e.get<bool>();
      } else {
        if (!e.is_number()) {
          error(join(path, key) + "[" + std::to_string(i) + "]", "expected a number");
          continue;
        }
        out[i] = e.get<double>();
      }
    }
  }

  // Runs a validate() member and records its message instead of throwing.
  void check(const std::string& path, const std::function<void()>& validate) {
    try {
      validate();
    } catch (const Error& e) {
      error(path, e.what());
    }
  }
};

mesh::Box parse_box(Parser& p, const json& j, const std::string& path, int dim) {
  mesh::Box b;
  p.array(j, path, "lo", dim, b.lo, true);
  p.array(j, path, "hi", dim, b.hi, true);
  for (int a = 0; a < dim; ++a) {
    if (b.lo[a] > b.hi[a]) p.error(path, "lo must not exceed hi on axis " + std::to_string(a));
  }
  return b;
}

template <class F>
void parse_list(Parser& p, const json& obj, const std::string& path, const char* key, F&& each) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  const std::string at = Parser::join(path, key);
  if (!v.is_array()) {
    p.error(at, "expected an array");
    return;
  }
  for (std::size_t i = 0; i < v.size(); ++i) each(v[i], at + "[" + std::to_string(i) + "]");
}

std::optional<mesh::BoundarySpec> parse_boundary(Parser& p, const json& j, const std::string& path,
                                                 const std::optional<mesh::Grid>& grid) {
  if (!p.object(j, path, {"preset", "position", "positions", "fixed", "loads", "passive"})) {
    return std::nullopt;
  }
  const int dim = grid ? grid->dim() : 2;
  if (auto preset = p.string(j, path, "preset")) {
    if (j.contains("fixed") || j.contains("loads") || j.contains("passive")) {
      p.error(path, "a preset cannot be combined with explicit fixed/loads/passive lists");
      return std::nullopt;
    }
    if (!grid) return std::nullopt;
    try {
      if (*preset == "mbb_support") {
        int position = 0;
        int positions = 0;
        p.integer(j, path, "position", position);
        p.integer(j, path, "positions", positions);
        return mesh::mbb_support_variant(*grid, position, positions);
      }
      if (j.contains("position") || j.contains("positions")) {
        p.error(path, "position/positions only apply to the mbb_support preset");
      }
      if (!mesh::is_preset_name(*preset)) {
        p.error(Parser::join(path, "preset"),
                "unknown preset '" + *preset + "' (expected mbb, bridge, lbracket, cantilever or mbb_support)");
        return std::nullopt;
      }
      return mesh::preset_boundary(*preset, *grid);
    } catch (const Error& e) {
      p.error(path, e.what());
      return std::nullopt;
    }
  }
  if (j.contains("position") || j.contains("positions")) {
    p.error(path, "position/positions need preset mbb_support");
  }
  mesh::BoundarySpec spec;
  parse_list(p, j, path, "fixed", [&](const json& e, const std::string& at) {
    if (!p.object(e, at, {"lo", "hi", "dofs"})) return;
    mesh::FixedRegion r;
    r.box = parse_box(p, e, at, dim);
    if (dim == 2) r.dofs[2] = false;
    p.array(e, at, "dofs", dim, r.dofs, false);
    spec.fixed.push_back(r);
  });
  parse_list(p, j, path, "loads", [&](const json& e, const std::string& at) {
    if (!p.object(e, at, {"lo", "hi", "force", "distribution"})) return;
    mesh::LoadRegion r;
    r.box = parse_box(p, e, at, dim);
    p.array(e, at, "force", dim, r.force, true);
    if (auto d = p.string(e, at, "distribution")) {
      if (*d == "per_node") {
        r.distribution = mesh::LoadDistribution::per_node;
      } else if (*d == "total") {
        r.distribution = mesh::LoadDistribution::total;
      } else {
        p.error(Parser::join(at, "distribution"), "expected per_node or total");
      }
    }
    spec.loads.push_back(r);
  });
  parse_list(p, j, path, "passive", [&](const json& e, const std::string& at) {
    if (!p.object(e, at, {"lo", "hi", "kind"})) return;
    mesh::PassiveRegion r;
    r.box = parse_box(p, e, at, dim);
    if (auto k = p.string(e, at, "kind")) {
      if (*k == "void") {
        r.kind = mesh::Passive::void_;
      } else if (*k == "solid") {
        r.kind = mesh::Passive::solid;
      } else {
        p.error(Parser::join(at, "kind"), "expected void or solid");
      }
    } else {
      p.error(Parser::join(at, "kind"), "missing required field");
    }
    spec.passive.push_back(r);
  });
  return spec;
}

void parse_optimizer(Parser& p, const json& j, const std::string& path, neural::OptimizerConfig& o) {
  if (!p.object(j, path, {"kind", "learning_rate", "eta_plus", "eta_minus", "step_min",
                          "step_max_factor", "beta1", "beta2", "epsilon"})) {
    return;
  }
  if (auto k = p.string(j, path, "kind")) {
    if (*k == "rprop") {
      o.kind = neural::OptimizerKind::rprop;
    } else if (*k == "adam") {
      o.kind = neural::OptimizerKind::adam;
    } else {
      p.error(Parser::join(path, "kind"), "expected rprop or adam");
    }
  }
  p.real(j, path, "learning_rate", o.learning_rate);
  p.real(j, path, "eta_plus", o.eta_plus);
  p.real(j, path, "eta_minus", o.eta_minus);
  p.real(j, path, "step_min", o.step_min);
  p.real(j, path, "step_max_factor", o.step_max_factor);
  p.real(j, path, "beta1", o.beta1);
  p.real(j, path, "beta2", o.beta2);
  p.real(j, path, "epsilon", o.epsilon);
}

void parse_train(Parser& p, const json& j, optimize::TrainConfig& t) {
  const std::string path = "train";
  if (!p.object(j, path, {"max_epochs", "tau_start", "tau_end", "tau_ramp_epochs", "sigma0",
                          "sigma_growth", "lambda0", "optimizer", "compliance_tolerance",
                          "volume_tolerance", "stop_on_convergence"})) {
    return;
  }
  p.integer(j, path, "max_epochs", t.max_epochs);
  p.real(j, path, "tau_start", t.tau_start);
  p.real(j, path, "tau_end", t.tau_end);
  p.integer(j, path, "tau_ramp_epochs", t.tau_ramp_epochs);
  if (j.contains("sigma0")) {
    const json& s = j.at("sigma0");
    if (s.is_string() && s.get<std::string>() == "auto") {
      t.sigma0.reset();
    } else if (s.is_number()) {
      t.sigma0 = s.get<double>();
    } else {
      p.error("train.sigma0", "expected a number or \"auto\"");
    }
  }
  p.real(j, path, "sigma_growth", t.sigma_growth);
  p.real(j, path, "lambda0", t.lambda0);
  if (j.contains("optimizer")) parse_optimizer(p, j.at("optimizer"), "train.optimizer", t.optimizer);
  p.real(j, path, "compliance_tolerance", t.compliance_tolerance);
  p.real(j, path, "volume_tolerance", t.volume_tolerance);
  p.boolean(j, path, "stop_on_convergence", t.stop_on_convergence);
}

void parse_solver(Parser& p, const json& j, linsolve::SolverConfig& s) {
  const std::string path = "solver";
  if (!p.object(j, path, {"tolerance", "max_iterations", "preconditioner", "smoother_damping",
                          "smoothing_sweeps"})) {
    return;
  }
  p.real(j, path, "tolerance", s.tolerance);
  p.integer(j, path, "max_iterations", s.max_iterations);
  if (auto k = p.string(j, path, "preconditioner")) {
    if (*k == "multigrid") {
      s.preconditioner = linsolve::PreconditionerKind::multigrid_v;
    } else if (*k == "jacobi") {
      s.preconditioner = linsolve::PreconditionerKind::jacobi;
    } else {
      p.error("solver.preconditioner", "expected multigrid or jacobi");
    }
  }
  p.real(j, path, "smoother_damping", s.smoother_damping);
  p.integer(j, path, "smoothing_sweeps", s.smoothing_sweeps);
}

void check_fraction(Parser& p, const std::string& path, double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) {
    std::ostringstream ss;
    ss << "must lie in (0, 1], got " << delta;
    p.error(path, ss.str());
  }
}

ojson box_json(const mesh::Box& b, int dim) {
  ojson lo = ojson::array();
  ojson hi = ojson::array();
  for (int a = 0; a < dim; ++a) {
    lo.push_back(b.lo[a]);
    hi.push_back(b.hi[a]);
  }
  return ojson{{"lo", lo}, {"hi", hi}};
}

ojson boundary_json(const mesh::BoundarySpec& spec, int dim) {
  ojson fixed = ojson::array();
  for (const auto& f : spec.fixed) {
    ojson e = box_json(f.box, dim);
    ojson dofs = ojson::array();
    for (int a = 0; a < dim; ++a) dofs.push_back(f.dofs[a]);
    e["dofs"] = dofs;
    fixed.push_back(e);
  }
  ojson loads = ojson::array();
  for (const auto& l : spec.loads) {
    ojson e = box_json(l.box, dim);
    ojson force = ojson::array();
    for (int a = 0; a < dim; ++a) force.push_back(l.force[a]);
    e["force"] = force;
    e["distribution"] = l.distribution == mesh::LoadDistribution::total ? "total" : "per_node";
    loads.push_back(e);
  }
  ojson passive = ojson::array();
  for (const auto& r : spec.passive) {
    ojson e = box_json(r.box, dim);
    e["kind"] = r.kind == mesh::Passive::solid ? "solid" : "void";
    passive.push_back(e);
  }
  return ojson{{"fixed", fixed}, {"loads", loads}, {"passive", passive}};
}

}  // namespace

ProblemSpec parse_problem(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ValidationError({std::string("document is not valid JSON: ") + e.what()});
  }
  Parser p;
  ProblemSpec spec;
  if (!p.object(root, "", {"mode", "grid", "material", "boundary", "volume_fraction", "subtasks",
                           "network", "train", "solver", "simp"})) {
    throw ValidationError(p.errors);
  }

  std::optional<mesh::Grid> grid;
  if (!root.contains("grid")) {
    p.error("grid", "missing required field");
  } else if (p.object(root.at("grid"), "grid", {"dims", "element_size"})) {
    const json& g = root.at("grid");
    std::vector<int> dims;
    std::vector<double> size;
    bool ok = true;
    if (!g.contains("dims") || !g.at("dims").is_array() ||
        (g.at("dims").size() != 2 && g.at("dims").size() != 3)) {
      p.error("grid.dims", "expected an array of 2 or 3 positive integers");
      ok = false;
    } else {
      for (const auto& d : g.at("dims")) {
        if (!d.is_number_integer() || d.get<long long>() < 1 || d.get<long long>() > (1 << 20)) {
          p.error("grid.dims", "entries must be positive integers");
          ok = false;
          break;
        }
        dims.push_back(d.get<int>());
      }
    }
    if (ok) {
      size.assign(dims.size(), 1.0);
      if (g.contains("element_size")) {
        const json& s = g.at("element_size");
        if (!s.is_array() || s.size() != dims.size()) {
          p.error("grid.element_size", "expected one positive number per axis");
          ok = false;
        } else {
          for (std::size_t a = 0; a < dims.size(); ++a) {
            if (!s[a].is_number() || !(s[a].get<double>() > 0.0)) {
              p.error("grid.element_size", "entries must be positive numbers");
              ok = false;
              break;
            }
            size[a] = s[a].get<double>();
          }
        }
      }
    }
    if (ok) {
      try {
        grid = mesh::Grid(dims, size);
      } catch (const Error& e) {
        p.error("grid", e.what());
      }
    }
  }
  if (grid) spec.problem.grid = *grid;

  if (root.contains("material") &&
      p.object(root.at("material"), "material", {"youngs_modulus", "poisson_ratio", "e_min"})) {
    const json& m = root.at("material");
    p.real(m, "material", "youngs_modulus", spec.problem.material.youngs_modulus);
    p.real(m, "material", "poisson_ratio", spec.problem.material.poisson_ratio);
    p.real(m, "material", "e_min", spec.problem.material.e_min);
    p.check("material", [&] { spec.problem.material.validate(); });
  }

  std::optional<mesh::BoundarySpec> default_boundary;
  if (root.contains("boundary")) default_boundary = parse_boundary(p, root.at("boundary"), "boundary", grid);
  std::optional<double> default_fraction;
  if (root.contains("volume_fraction")) {
    double d = 0.0;
    p.real(root, "", "volume_fraction", d);
    if (root.at("volume_fraction").is_number()) {
      check_fraction(p, "volume_fraction", d);
      default_fraction = d;
    }
  }

  bool boundary_missing = false;
  if (root.contains("subtasks")) {
    const json& list = root.at("subtasks");
    if (!list.is_array() || list.empty()) {
      p.error("subtasks", "expected a non-empty array");
    } else {
      for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string at = "subtasks[" + std::to_string(i) + "]";
        const json& s = list[i];
        if (!p.object(s, at, {"volume_fraction", "boundary", "label"})) continue;
        optimize::Subtask task;
        if (s.contains("volume_fraction")) {
          p.real(s, at, "volume_fraction", task.volume_fraction);
          check_fraction(p, at + ".volume_fraction", task.volume_fraction);
        } else if (default_fraction) {
          task.volume_fraction = *default_fraction;
        } else {
          p.error(at + ".volume_fraction", "missing required field");
        }
        if (s.contains("boundary")) {
          if (auto b = parse_boundary(p, s.at("boundary"), at + ".boundary", grid)) task.boundary = *b;
        } else if (default_boundary) {
          task.boundary = *default_boundary;
        } else if (!root.contains("boundary")) {
          boundary_missing = true;
        }
        if (auto label = p.string(s, at, "label")) task.label = *label;
        spec.problem.subtasks.push_back(std::move(task));
      }
    }
  } else {
    optimize::Subtask task;
    if (default_fraction) {
      task.volume_fraction = *default_fraction;
    } else if (!root.contains("volume_fraction")) {
      p.error("volume_fraction", "missing required field (or give a subtasks list)");
    }
    if (default_boundary) {
      task.boundary = *default_boundary;
    } else if (!root.contains("boundary")) {
      boundary_missing = true;
    }
    spec.problem.subtasks.push_back(std::move(task));
  }
  if (boundary_missing) p.error("boundary", "missing required field");

  const int n_sub = static_cast<int>(spec.problem.subtasks.size());
  spec.mode = n_sub > 1 ? RunMode::multi : RunMode::single;
  if (auto mode = p.string(root, "", "mode")) {
    if (*mode == "single") {
      spec.mode = RunMode::single;
      if (n_sub > 1) p.error("mode", "single mode takes exactly one subtask");
    } else if (*mode == "multi") {
      spec.mode = RunMode::multi;
      if (n_sub < 2) p.error("mode", "multi mode needs at least two subtasks");
    } else {
      p.error("mode", "expected single or multi");
    }
  }

  if (root.contains("network")) {
    const json& n = root.at("network");
    if (p.object(n, "network", {"width", "depth", "omega", "alpha", "latent_dim", "seed"})) {
      p.integer(n, "network", "width", spec.network.width);
      p.integer(n, "network", "depth", spec.network.depth);
      p.real(n, "network", "omega", spec.network.omega);
      p.real(n, "network", "alpha", spec.network.alpha);
      p.integer(n, "network", "latent_dim", spec.network.latent_dim);
      p.unsigned64(n, "network", "seed", spec.network.seed);
    }
  }
  p.check("network", [&] { spec.network.validate(); });
  if (root.contains("train")) parse_train(p, root.at("train"), spec.train);
  p.check("train", [&] { spec.train.validate(); });
  if (root.contains("solver")) parse_solver(p, root.at("solver"), spec.problem.solver);
  p.check("solver", [&] { spec.problem.solver.validate(); });
  if (root.contains("simp")) {
    const json& s = root.at("simp");
    if (p.object(s, "simp", {"penal", "filter_radius", "move", "oc_tolerance", "max_iterations"})) {
      p.real(s, "simp", "penal", spec.simp.penal);
      p.real(s, "simp", "filter_radius", spec.simp.filter_radius);
      p.real(s, "simp", "move", spec.simp.move);
      p.real(s, "simp", "oc_tolerance", spec.simp.oc_tolerance);
      p.integer(s, "simp", "max_iterations", spec.simp.max_iterations);
    }
  }
  p.check("simp", [&] { spec.simp.validate(); });

  // Resolve every boundary on the grid so empty regions surface now.
  if (grid && p.errors.empty()) {
    for (int i = 0; i < n_sub; ++i) {
      p.check(n_sub == 1 && !root.contains("subtasks") ? "boundary"
                                                        : "subtasks[" + std::to_string(i) + "].boundary",
              [&] { mesh::resolve_boundary(*grid, spec.problem.subtasks[i].boundary); });
    }
  }
  if (!p.errors.empty()) throw ValidationError(p.errors);
  return spec;
}

std::string print_problem(const ProblemSpec& spec) {
  const auto& pr = spec.problem;
  const int dim = pr.grid.dim();
  ojson root;
  root["mode"] = spec.mode == RunMode::multi ? "multi" : "single";
  root["grid"] = ojson{{"dims", pr.grid.dims()}, {"element_size", pr.grid.element_size()}};
  root["material"] = ojson{{"youngs_modulus", pr.material.youngs_modulus},
                           {"poisson_ratio", pr.material.poisson_ratio},
                           {"e_min", pr.material.e_min}};
  ojson subtasks = ojson::array();
  for (const auto& s : pr.subtasks) {
    subtasks.push_back(ojson{{"volume_fraction", s.volume_fraction},
                             {"boundary", boundary_json(s.boundary, dim)},
                             {"label", s.label}});
  }
  root["subtasks"] = subtasks;
  const auto& n = spec.network;
  root["network"] = ojson{{"width", n.width},   {"depth", n.depth},           {"omega", n.omega},
                          {"alpha", n.alpha},   {"latent_dim", n.latent_dim}, {"seed", n.seed}};
  const auto& t = spec.train;
  const auto& o = t.optimizer;
  ojson opt{{"kind", o.kind == neural::OptimizerKind::adam ? "adam" : "rprop"},
            {"learning_rate", o.learning_rate},
            {"eta_plus", o.eta_plus},
            {"eta_minus", o.eta_minus},
            {"step_min", o.step_min},
            {"step_max_factor", o.step_max_factor},
            {"beta1", o.beta1},
            {"beta2", o.beta2},
            {"epsilon", o.epsilon}};
  ojson train{{"max_epochs", t.max_epochs},
              {"tau_start", t.tau_start},
              {"tau_end", t.tau_end},
              {"tau_ramp_epochs", t.tau_ramp_epochs}};
  if (t.sigma0) {
    train["sigma0"] = *t.sigma0;
  } else {
    train["sigma0"] = "auto";
  }
  train["sigma_growth"] = t.sigma_growth;
  train["lambda0"] = t.lambda0;
  train["optimizer"] = opt;
  train["compliance_tolerance"] = t.compliance_tolerance;
  train["volume_tolerance"] = t.volume_tolerance;
  train["stop_on_convergence"] = t.stop_on_convergence;
  root["train"] = train;
  const auto& s = pr.solver;
  root["solver"] = ojson{
      {"tolerance", s.tolerance},
      {"max_iterations", s.max_iterations},
      {"preconditioner", s.preconditioner == linsolve::PreconditionerKind::jacobi ? "jacobi" : "multigrid"},
      {"smoother_damping", s.smoother_damping},
      {"smoothing_sweeps", s.smoothing_sweeps}};
  const auto& sc = spec.simp;
  root["simp"] = ojson{{"penal", sc.penal},
                       {"filter_radius", sc.filter_radius},
                       {"move", sc.move},
                       {"oc_tolerance", sc.oc_tolerance},
                       {"max_iterations", sc.max_iterations}};
  return root.dump(2) + "\n";
}

ProblemSpec load_problem(const std::filesystem::path& path) { return parse_problem(read_file(path)); }

}  // namespace nsto::io
