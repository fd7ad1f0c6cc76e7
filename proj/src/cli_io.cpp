#include "convopt/cli_io.hpp"

#include "convopt/digest.hpp"
#include "convopt/error.hpp"

#include <json.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

namespace convopt {
namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string escape_pointer(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

bool contains(const std::vector<std::string>& options, const std::string& v) {
  return std::find(options.begin(), options.end(), v) != options.end();
}

std::string joined(const std::vector<std::string>& options) {
  std::string out;
  for (const auto& o : options) out += (out.empty() ? "" : ", ") + o;
  return out;
}

// One JSON object of the configuration. Every accessor marks its key as
// known; finish() rejects whatever was not asked for.
class Section {
 public:
  Section(const Json* node, std::string pointer) : node_(node), pointer_(std::move(pointer)) {
    if (node_ && !node_->is_object()) throw ParseError(pointer_path(), "expected an object");
  }

  std::string path(const std::string& key) const { return pointer_ + "/" + escape_pointer(key); }

  const Json* get(const std::string& key) {
    known_.insert(key);
    if (!node_) return nullptr;
    const auto it = node_->find(key);
    return it == node_->end() ? nullptr : &*it;
  }

  double real(const std::string& key, double fallback) {
    const Json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number()) throw ParseError(path(key), "expected a number");
    return v->get<double>();
  }

  /// null stands for an infinite bound of the given sign.
  double bound(const std::string& key, double fallback, double infinite) {
    const Json* v = get(key);
    if (!v) return fallback;
    if (v->is_null()) return infinite;
    if (!v->is_number()) throw ParseError(path(key), "expected a number or null");
    return v->get<double>();
  }

  int integer(const std::string& key, int fallback) {
    const Json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) throw ParseError(path(key), "expected an integer");
    const auto x = v->get<std::int64_t>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
      throw ParseError(path(key), "integer out of range");
    }
    return static_cast<int>(x);
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    const Json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number_unsigned()) throw ParseError(path(key), "expected a nonnegative integer");
    return v->get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    const Json* v = get(key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw ParseError(path(key), "expected true or false");
    return v->get<bool>();
  }

  std::string text(const std::string& key, const std::string& fallback,
                   const std::vector<std::string>& options = {}) {
    const Json* v = get(key);
    if (!v) return fallback;
    if (!v->is_string()) throw ParseError(path(key), "expected a string");
    std::string s = v->get<std::string>();
    if (!options.empty() && !contains(options, s)) {
      throw ParseError(path(key), "unknown value '" + s + "' (expected one of: " + joined(options) + ")");
    }
    return s;
  }

  std::vector<int> integers(const std::string& key, const std::vector<int>& fallback) {
    const Json* v = get(key);
    if (!v) return fallback;
    if (!v->is_array()) throw ParseError(path(key), "expected an array of integers");
    std::vector<int> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number_integer()) {
        throw ParseError(path(key) + "/" + std::to_string(i), "expected an integer");
      }
      out.push_back((*v)[i].get<int>());
    }
    return out;
  }

  std::vector<std::string> texts(const std::string& key, const std::vector<std::string>& fallback,
                                 const std::vector<std::string>& options) {
    const Json* v = get(key);
    if (!v) return fallback;
    if (!v->is_array()) throw ParseError(path(key), "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string p = path(key) + "/" + std::to_string(i);
      if (!(*v)[i].is_string()) throw ParseError(p, "expected a string");
      const auto s = (*v)[i].get<std::string>();
      if (!contains(options, s)) {
        throw ParseError(p, "unknown value '" + s + "' (expected one of: " + joined(options) + ")");
      }
      out.push_back(s);
    }
    return out;
  }

  Section child(const std::string& key) { return Section(get(key), path(key)); }

  void finish() const {
    if (!node_) return;
    for (const auto& [key, value] : node_->items()) {
      if (!known_.count(key)) throw ParseError(path(key), "unknown key '" + key + "'");
    }
  }

 private:
  std::string pointer_path() const { return pointer_.empty() ? "/" : pointer_; }

  const Json* node_;
  std::string pointer_;
  std::set<std::string> known_;
};

const std::vector<std::string> kControlKinds{"zero", "constant", "sine", "bump"};
const std::vector<std::string> kNonlinearities{"zero", "power", "exponential"};
const std::vector<std::string> kLinearMethods{"sparse_lu", "gmres_ilut"};
const std::vector<std::string> kOptimizers{"semismooth_newton", "projected_gradient"};
const std::vector<std::string> kFormats{"csv", "vtk"};

// Command keys accepted by each task besides "task" and "seed".
std::vector<std::string> task_keys(const std::string& task) {
  if (task == "solve-state" || task == "optimize") return {"control"};
  if (task == "check-gradient") return {"control", "directions", "tolerance"};
  if (task == "check-hessian") return {"control", "directions", "tolerance", "symmetry_tolerance"};
  if (task == "comparison-suite") return {"pairs", "amplitude", "assert", "tolerance"};
  if (task == "convergence-study") return {"exact", "grids"};
  if (task == "diagnose-coercivity") return {"reaction"};
  if (task == "growth-check") return {"control", "probes", "radius"};
  return {};
}

double default_tolerance(const std::string& task) {
  if (task == "check-gradient") return 1e-8;
  if (task == "check-hessian") return 1e-4;
  if (task == "comparison-suite") return 1e-9;
  return 0.0;
}

Json real_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json echo_json(const RunConfig& c) {
  const ProblemChoices& p = c.choices;
  Json problem;
  if (!p.preset.empty()) problem["preset"] = p.preset;
  problem["domain"] = {{"x_min", p.domain.x_min}, {"x_max", p.domain.x_max},
                       {"y_min", p.domain.y_min}, {"y_max", p.domain.y_max}};
  problem["grid"] = {{"nx", p.nx}, {"ny", p.ny}};
  problem["diffusion"] = p.diffusion;
  problem["convection"] = {{"kind", p.convection}, {"scale", p.convection_scale}};
  problem["nonlinearity"] = {{"kind", p.nonlinearity}, {"r", p.r}, {"weight", p.weight}};
  problem["objective"] = {{"target", p.target}, {"amplitude", p.target_amplitude}, {"nu", p.nu}};
  problem["bounds"] = {{"alpha", real_or_null(p.alpha)}, {"beta", real_or_null(p.beta)}};

  const SolverChoices& s = c.solver;
  Json solver = {{"tol_state", s.tol_state},         {"max_newton", s.max_newton},
                 {"stabilization", s.stabilization}, {"linear", s.linear},
                 {"linear_tolerance", s.linear_tolerance}, {"optimizer", s.optimizer},
                 {"max_outer", s.max_outer},         {"tol_opt", s.tol_opt}};

  const TaskParams& t = c.params;
  Json command;
  command["task"] = c.task;
  for (const auto& key : task_keys(c.task)) {
    if (key == "control") command[key] = {{"kind", t.control.kind}, {"value", t.control.value}};
    else if (key == "directions") command[key] = t.directions;
    else if (key == "tolerance") command[key] = t.tolerance;
    else if (key == "symmetry_tolerance") command[key] = t.symmetry_tolerance;
    else if (key == "pairs") command[key] = t.pairs;
    else if (key == "amplitude") command[key] = t.amplitude;
    else if (key == "assert") command[key] = t.assert_pass;
    else if (key == "exact") command[key] = t.exact;
    else if (key == "grids") command[key] = t.grids;
    else if (key == "reaction") command[key] = t.reaction;
    else if (key == "probes") command[key] = t.probes;
    else if (key == "radius") command[key] = t.radius;
  }

  Json formats = Json::array();
  for (FieldFormat f : c.formats) formats.push_back(f == FieldFormat::csv ? "csv" : "vtk");
  Json output = {{"directory", c.output_dir.generic_string()}, {"formats", formats}};
  return Json{{"problem", problem}, {"solver", solver}, {"command", command}, {"output", output}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

ScalarField control_field(const UniformGrid& g, const ControlChoice& c) {
  const RectDomain d = g.domain;
  const double v = c.value;
  if (c.kind == "zero") return ScalarField::Zero(g.interior_count());
  if (c.kind == "constant") return ScalarField::Constant(g.interior_count(), v);
  if (c.kind == "sine") {
    return interpolate(g, [d, v](double x, double y) {
      return v * std::sin(std::numbers::pi * (x - d.x_min) / (d.x_max - d.x_min)) *
             std::sin(std::numbers::pi * (y - d.y_min) / (d.y_max - d.y_min));
    });
  }
  return interpolate(g, [d, v](double x, double y) {
    const double s = (x - d.x_min) / (d.x_max - d.x_min), t = (y - d.y_min) / (d.y_max - d.y_min);
    return v * 16.0 * s * (1 - s) * t * (1 - t);
  });
}

Json values_json(const DiagnosticReport& r) {
  Json out = Json::object();
  for (const auto& [k, v] : r.values) out[k] = real_or_null(v);
  return out;
}

Json series_json(const std::vector<double>& s) {
  Json out = Json::array();
  for (double v : s) out.push_back(real_or_null(v));
  return out;
}

Json diagnostic_json(const DiagnosticReport& r, const std::string& digest) {
  Json out;
  out["kind"] = "diagnostic";
  out["check"] = r.check;
  out["config_digest"] = digest;
  out["inputs_digest"] = r.inputs_digest;
  out["seed"] = r.seed;
  out["pass"] = r.pass;
  out["tolerance"] = real_or_null(r.tolerance);
  out["values"] = values_json(r);
  Json series = Json::object();
  for (const auto& [k, s] : r.series) series[k] = series_json(s);
  out["series"] = series;
  out["note"] = r.note;
  return out;
}

Json optimization_json(const OptResult& r, const std::string& digest) {
  Json out;
  out["kind"] = "optimization";
  out["method"] = r.method;
  out["config_digest"] = digest;
  out["status"] = to_string(r.status);
  out["iterations"] = r.iterations;
  out["gradient_fallbacks"] = r.gradient_fallbacks;
  out["message"] = r.message;
  out["objective"] = r.objective_history.empty() ? Json(nullptr) : real_or_null(r.objective_history.back());
  out["residual"] = r.residual_history.empty() ? Json(nullptr) : real_or_null(r.residual_history.back());
  out["objective_history"] = series_json(r.objective_history);
  out["residual_history"] = series_json(r.residual_history);
  out["active_set_sizes"] = r.active_set_sizes;
  return out;
}

Json convergence_json(const ConvergenceStudy& s, const std::string& digest) {
  Json out;
  out["kind"] = "convergence";
  out["name"] = s.name;
  out["config_digest"] = digest;
  out["grids"] = s.grids;
  out["h"] = series_json(s.h);
  out["errors"] = {{"l2", series_json(s.l2)}, {"h1", series_json(s.h1)}, {"max", series_json(s.max)}};
  out["orders"] = {{"l2", series_json(s.l2_order)},
                   {"h1", series_json(s.h1_order)},
                   {"max", series_json(s.max_order)}};
  return out;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string version_string() { return "1.0.0"; }

void apply_preset(ProblemChoices& c, const std::string& preset) {
  if (!contains(catalog::control_problem_names(), preset)) {
    throw UsageError("unknown preset '" + preset + "'");
  }
  c = ProblemChoices{};
  c.preset = preset;
  c.target = "sine";
  c.target_amplitude = 1.0;
  if (preset == "linear_quadratic") {
    c.nonlinearity = "zero";
    c.convection = "affine";
  } else if (preset == "cubic") {
    c.nonlinearity = "power";
    c.r = 2.0;
    c.convection = "expansion";
    c.convection_scale = 2.0;
  } else {
    c.nonlinearity = "exponential";
    c.convection = "rotation";
  }
}

ProblemSpec build_problem(const ProblemChoices& c, const SolverChoices& s) {
  if (!(c.nu > 0.0)) throw SemanticError("/problem/objective/nu: ν > 0 required (got " + format_real(c.nu) + ")");
  if (!(c.alpha < c.beta)) {
    throw SemanticError("/problem/bounds: α < β required (got " + format_real(c.alpha) + " and " +
                        format_real(c.beta) + ")");
  }
  if (c.nx < 2 || c.ny < 2) throw SemanticError("/problem/grid: nx and ny must be at least 2");
  if (!(c.domain.x_min < c.domain.x_max) || !(c.domain.y_min < c.domain.y_max)) {
    throw SemanticError("/problem/domain: requires x_min < x_max and y_min < y_max");
  }
  if (c.nonlinearity == "power" && !(c.r >= 1.0)) {
    throw SemanticError("/problem/nonlinearity/r: r >= 1 required");
  }
  if (!(s.tol_state > 0.0)) throw SemanticError("/solver/tol_state: must be positive");
  if (!(s.linear_tolerance > 0.0)) throw SemanticError("/solver/linear_tolerance: must be positive");
  if (!(s.tol_opt > 0.0)) throw SemanticError("/solver/tol_opt: must be positive");
  if (!(s.stabilization >= 0.0)) throw SemanticError("/solver/stabilization: must be >= 0");
  if (s.max_newton < 1 || s.max_outer < 0) {
    throw SemanticError("/solver: max_newton >= 1 and max_outer >= 0 required");
  }

  ProblemSpec p;
  p.grid = build_grid(c.domain, c.nx, c.ny);
  p.diffusion = catalog::diffusion(c.diffusion);
  p.convection = catalog::convection(c.convection, c.convection_scale);
  if (c.nonlinearity == "power") p.nonlinearity = NonlinearitySpec::power(c.r, catalog::weight(c.weight));
  else if (c.nonlinearity == "exponential") p.nonlinearity = NonlinearitySpec::exponential(catalog::weight(c.weight));
  p.objective.nu = c.nu;
  p.alpha = c.alpha;
  p.beta = c.beta;
  p.solver.tol_state = s.tol_state;
  p.solver.max_newton = s.max_newton;
  p.solver.stabilization = s.stabilization;
  p.solver.linear.method = s.linear == "gmres_ilut" ? LinearSolverOptions::Method::gmres_ilut
                                                    : LinearSolverOptions::Method::sparse_lu;
  p.solver.linear.tolerance = s.linear_tolerance;
  p.objective.target = ScalarField::Zero(p.grid.interior_count());
  p.objective.target = catalog::target(c.target, c.target_amplitude, p);
  validate(p);
  return p;
}

void refresh_echo(RunConfig& config) {
  config.problem = build_problem(config.choices, config.solver);
  config.opt.max_outer = config.solver.max_outer;
  config.opt.tol_opt = config.solver.tol_opt;
  config.echo = dump(echo_json(config));
  config.digest = digest_hex(config.echo);
}

RunConfig parse_config(std::string_view text, const std::string& task) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("", std::string("invalid JSON: ") + e.what());
  }
  Section root(&doc, "");
  RunConfig c;

  Section problem = root.child("problem");
  const std::string preset = problem.text("preset", "", catalog::control_problem_names());
  if (!preset.empty()) apply_preset(c.choices, preset);
  ProblemChoices& p = c.choices;
  {
    Section d = problem.child("domain");
    p.domain.x_min = d.real("x_min", p.domain.x_min);
    p.domain.x_max = d.real("x_max", p.domain.x_max);
    p.domain.y_min = d.real("y_min", p.domain.y_min);
    p.domain.y_max = d.real("y_max", p.domain.y_max);
    d.finish();
  }
  {
    Section g = problem.child("grid");
    p.nx = g.integer("nx", p.nx);
    p.ny = g.integer("ny", p.ny);
    g.finish();
  }
  p.diffusion = problem.text("diffusion", p.diffusion, catalog::diffusion_names());
  {
    Section b = problem.child("convection");
    p.convection = b.text("kind", p.convection, catalog::convection_names());
    p.convection_scale = b.real("scale", p.convection_scale);
    b.finish();
  }
  {
    Section f = problem.child("nonlinearity");
    p.nonlinearity = f.text("kind", p.nonlinearity, kNonlinearities);
    p.r = f.real("r", p.r);
    p.weight = f.text("weight", p.weight, catalog::weight_names());
    f.finish();
  }
  {
    Section o = problem.child("objective");
    p.target = o.text("target", p.target, catalog::target_names());
    p.target_amplitude = o.real("amplitude", p.target_amplitude);
    p.nu = o.real("nu", p.nu);
    o.finish();
  }
  {
    Section b = problem.child("bounds");
    p.alpha = b.bound("alpha", p.alpha, -kInf);
    p.beta = b.bound("beta", p.beta, kInf);
    b.finish();
  }
  problem.finish();

  {
    Section s = root.child("solver");
    SolverChoices& v = c.solver;
    v.tol_state = s.real("tol_state", v.tol_state);
    v.max_newton = s.integer("max_newton", v.max_newton);
    v.stabilization = s.real("stabilization", v.stabilization);
    v.linear = s.text("linear", v.linear, kLinearMethods);
    v.linear_tolerance = s.real("linear_tolerance", v.linear_tolerance);
    v.optimizer = s.text("optimizer", v.optimizer, kOptimizers);
    v.max_outer = s.integer("max_outer", v.max_outer);
    v.tol_opt = s.real("tol_opt", v.tol_opt);
    s.finish();
  }

  {
    Section cmd = root.child("command");
    c.task = cmd.text("task", task, kTasks);
    if (!task.empty() && c.task != task) {
      throw UsageError("task '" + task + "' does not match command.task '" + c.task + "'");
    }
    if (!task.empty() && !contains(kTasks, task)) throw UsageError("unknown task '" + task + "'");
    c.seed = cmd.unsigned_integer("seed", 0);
    TaskParams& t = c.params;
    const auto keys = task_keys(c.task);
    auto allowed = [&](const std::string& key) { return contains(keys, key); };
    if (allowed("control")) {
      Section u = cmd.child("control");
      t.control.kind = u.text("kind", t.control.kind, kControlKinds);
      t.control.value = u.real("value", t.control.value);
      u.finish();
    }
    if (allowed("directions")) t.directions = cmd.integer("directions", t.directions);
    t.tolerance = default_tolerance(c.task);
    if (allowed("tolerance")) t.tolerance = cmd.real("tolerance", t.tolerance);
    if (allowed("symmetry_tolerance")) {
      t.symmetry_tolerance = cmd.real("symmetry_tolerance", t.symmetry_tolerance);
    }
    if (allowed("pairs")) t.pairs = cmd.integer("pairs", t.pairs);
    if (allowed("amplitude")) t.amplitude = cmd.real("amplitude", t.amplitude);
    if (allowed("assert")) t.assert_pass = cmd.boolean("assert", t.assert_pass);
    if (allowed("exact")) t.exact = cmd.text("exact", t.exact, {"sine", "zero"});
    if (allowed("grids")) t.grids = cmd.integers("grids", t.grids);
    if (allowed("reaction")) t.reaction = cmd.real("reaction", t.reaction);
    if (allowed("probes")) t.probes = cmd.integer("probes", t.probes);
    if (allowed("radius")) t.radius = cmd.real("radius", t.radius);
    cmd.finish();

    if (t.directions < 0) throw SemanticError("/command/directions: must be >= 0");
    if (t.pairs < 1) throw SemanticError("/command/pairs: must be >= 1");
    if (t.probes < 1) throw SemanticError("/command/probes: must be >= 1");
    if (!(t.radius > 0.0)) throw SemanticError("/command/radius: must be positive");
    if (!(t.amplitude > 0.0)) throw SemanticError("/command/amplitude: must be positive");
    if (t.reaction < 0.0) throw SemanticError("/command/reaction: must be >= 0");
    if (!c.task.empty() && allowed("tolerance") && !(t.tolerance > 0.0)) {
      throw SemanticError("/command/tolerance: must be positive");
    }
    for (std::size_t i = 0; i + 1 < t.grids.size(); ++i) {
      if (t.grids[i + 1] <= t.grids[i]) throw SemanticError("/command/grids: must strictly increase");
    }
    if (t.grids.empty() || t.grids.front() < 2) {
      throw SemanticError("/command/grids: needs at least one grid with n >= 2");
    }
  }

  {
    Section o = root.child("output");
    c.output_dir = o.text("directory", c.output_dir.generic_string());
    const auto formats = o.texts("formats", {"csv"}, kFormats);
    c.formats.clear();
    for (const auto& f : formats) {
      const FieldFormat ff = f == "csv" ? FieldFormat::csv : FieldFormat::vtk;
      if (std::find(c.formats.begin(), c.formats.end(), ff) == c.formats.end()) c.formats.push_back(ff);
    }
    o.finish();
  }
  root.finish();

  refresh_echo(c);
  return c;
}

void export_field(const UniformGrid& g, const ScalarField& field, FieldFormat format,
                  const fs::path& path, const std::string& name, const std::string& config_digest) {
  if (field.size() != g.interior_count()) throw UsageError("export_field: field does not match the grid");
  const NodalField full = extend_by_zero(g, field);
  std::string out;
  if (format == FieldFormat::csv) {
    out = "x,y,value\n";
    for (int j = 0; j <= g.ny; ++j) {
      for (int i = 0; i <= g.nx; ++i) {
        const Point x = g.node(i, j);
        out += format_real(x.x1) + "," + format_real(x.x2) + "," +
               format_real(full.values[g.node_index(i, j)]) + "\n";
      }
    }
  } else {
    out = "# vtk DataFile Version 3.0\n";
    out += "convopt " + name + (config_digest.empty() ? "" : " config " + config_digest) + "\n";
    out += "ASCII\nDATASET STRUCTURED_POINTS\n";
    out += "DIMENSIONS " + std::to_string(g.nx + 1) + " " + std::to_string(g.ny + 1) + " 1\n";
    out += "ORIGIN " + format_real(g.domain.x_min) + " " + format_real(g.domain.y_min) + " 0\n";
    out += "SPACING " + format_real(g.hx) + " " + format_real(g.hy) + " 1\n";
    out += "POINT_DATA " + std::to_string(g.node_count()) + "\n";
    out += "SCALARS " + name + " double 1\nLOOKUP_TABLE default\n";
    for (Eigen::Index k = 0; k < full.values.size(); ++k) out += format_real(full.values[k]) + "\n";
  }
  write_text(path, out);
}

CsvField read_field_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "x,y,value") {
    throw IoError("'" + path.string() + "' lacks the x,y,value header");
  }
  CsvField f;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    double v[3];
    const char* p = line.c_str();
    for (int k = 0; k < 3; ++k) {
      char* end = nullptr;
      v[k] = std::strtod(p, &end);
      if (end == p || (k < 2 && *end != ',') || (k == 2 && *end != '\0')) {
        throw IoError("'" + path.string() + "' row " + std::to_string(row) + " is malformed");
      }
      p = end + 1;
    }
    f.x.push_back(v[0]);
    f.y.push_back(v[1]);
    f.value.push_back(v[2]);
  }
  return f;
}

std::string report_json(const DiagnosticReport& report, const std::string& digest) {
  return dump(diagnostic_json(report, digest));
}
std::string report_json(const OptResult& result, const std::string& digest) {
  return dump(optimization_json(result, digest));
}
std::string report_json(const ConvergenceStudy& study, const std::string& digest) {
  return dump(convergence_json(study, digest));
}

std::vector<fs::path> export_report(const DiagnosticReport& report, const fs::path& path,
                                    const std::string& digest) {
  write_text(path, report_json(report, digest));
  return {path};
}

std::vector<fs::path> export_report(const OptResult& result, const fs::path& path,
                                    const std::string& digest) {
  write_text(path, report_json(result, digest));
  return {path};
}

std::vector<fs::path> export_report(const ConvergenceStudy& study, const fs::path& path,
                                    const std::string& digest) {
  std::vector<fs::path> written{path};
  write_text(path, report_json(study, digest));
  const std::pair<const char*, const std::vector<double>*> norms[] = {
      {"l2", &study.l2}, {"h1", &study.h1}, {"max", &study.max}};
  for (const auto& [norm, errors] : norms) {
    fs::path plot = path;
    plot.replace_filename(path.stem().string() + "_" + norm + ".dat");
    std::string text = "# h " + std::string(norm) + "_error\n";
    for (std::size_t k = 0; k < errors->size(); ++k) {
      text += format_real(study.h[k]) + " " + format_real((*errors)[k]) + "\n";
    }
    write_text(plot, text);
    written.push_back(plot);
  }
  return written;
}

namespace {

struct TaskOutcome {
  bool pass = false;
  std::string status;
  std::string message;
};

class Runner {
 public:
  explicit Runner(const RunConfig& c) : c_(c), disc_(c.problem) {}

  TaskOutcome dispatch() {
    const std::string& t = c_.task;
    if (t == "solve-state") return solve_state();
    if (t == "optimize") return optimize();
    if (t == "check-gradient") return check_gradient();
    if (t == "check-hessian") return check_hessian();
    if (t == "comparison-suite") return comparison();
    if (t == "convergence-study") return convergence();
    if (t == "diagnose-coercivity") return coercivity();
    if (t == "growth-check") return growth();
    throw UsageError("no task given (expected one of: " + joined(kTasks) + ")");
  }

  std::vector<std::string> artifacts;

 private:
  fs::path out(const std::string& name) {
    artifacts.push_back(name);
    return c_.output_dir / name;
  }

  void fields(const std::string& name, const ScalarField& v) {
    for (FieldFormat f : c_.formats) {
      const std::string file = name + (f == FieldFormat::csv ? ".csv" : ".vtk");
      export_field(disc_.grid(), v, f, out(file), name, c_.digest);
    }
  }

  TaskOutcome diagnostic(const DiagnosticReport& rep, bool pass) {
    export_report(rep, out("report.json"), c_.digest);
    return {pass, pass ? "pass" : "fail", rep.note};
  }

  ScalarField control() const { return control_field(disc_.grid(), c_.params.control); }

  OptResult run_optimizer(const ScalarField& u0) const {
    return c_.solver.optimizer == "projected_gradient" ? optimize_projected_gradient(disc_, u0, c_.opt)
                                                       : optimize_semismooth_newton(disc_, u0, c_.opt);
  }

  TaskOutcome solve_state() {
    const ScalarField u = control();
    const StateSolution sol = solve_state_newton(disc_, u);
    DiagnosticReport rep;
    rep.check = "solve_state";
    rep.inputs_digest = Digest().text(problem_digest(disc_)).field(u).hex();
    rep.tolerance = c_.problem.solver.tol_state;
    rep.set("converged", sol.report.converged ? 1.0 : 0.0);
    rep.set("newton_iterations", sol.newton_iterations);
    rep.set("globalization_used", sol.globalization_used ? 1.0 : 0.0);
    rep.set("residual_norm", sol.residual_norm);
    rep.set("state_max", sol.y.size() ? sol.y.lpNorm<Eigen::Infinity>() : 0.0);
    rep.set("objective", objective_value(disc_, u, sol.y));
    rep.series.emplace_back("residual_history", sol.report.residual_history);
    rep.pass = sol.report.converged;
    fields("state", sol.y);
    return diagnostic(rep, rep.pass);
  }

  TaskOutcome optimize() {
    const OptResult res = run_optimizer(control());
    export_report(res, out("report.json"), c_.digest);
    fields("control", res.u);
    fields("state", res.y);
    fields("adjoint", res.phi);
    const bool ok = res.status == OptStatus::converged;
    return {ok, to_string(res.status), res.message};
  }

  TaskOutcome check_gradient() {
    const auto& t = c_.params;
    const DiagnosticReport rep = gradient_fd_check(disc_, control(), t.directions, c_.seed, t.tolerance);
    return diagnostic(rep, rep.pass);
  }

  TaskOutcome check_hessian() {
    const auto& t = c_.params;
    const DiagnosticReport rep =
        hessian_fd_check(disc_, control(), t.directions, c_.seed, t.tolerance, t.symmetry_tolerance);
    return diagnostic(rep, rep.pass);
  }

  TaskOutcome comparison() {
    const auto& t = c_.params;
    ComparisonSuiteOptions opts;
    opts.amplitude = t.amplitude;
    opts.tolerance = t.tolerance;
    opts.assert_pass = t.assert_pass;
    const DiagnosticReport rep = comparison_suite(disc_, t.pairs, c_.seed, opts);
    return diagnostic(rep, rep.pass || !t.assert_pass);
  }

  TaskOutcome convergence() {
    const auto& t = c_.params;
    ManufacturedProblem mp = catalog::manufactured_sine(c_.choices.diffusion, c_.problem);
    if (t.exact == "zero") {
      if (c_.problem.nonlinearity.kind == NonlinearitySpec::Kind::exponential) {
        throw UsageError("exact solution 'zero' needs f(x, 0) = 0; the exponential entry has f(x, 0) = a0");
      }
      mp.name = "zero";
      mp.exact = [](double, double) { return 0.0; };
      mp.gradient = [](double, double) { return std::array<double, 2>{0.0, 0.0}; };
      mp.load = [](double, double) { return 0.0; };
    }
    const ConvergenceStudy s = manufactured_convergence(mp, t.grids);
    for (const auto& p : export_report(s, out("report.json"), c_.digest)) {
      if (p.filename() != "report.json") artifacts.push_back(p.filename().string());
    }
    bool pass = true;
    if (t.exact == "zero") {
      for (double e : s.l2) pass = pass && e <= 1e-12;
    } else {
      for (double o : s.l2_order) pass = pass && std::abs(o - 2.0) <= 0.4;
      for (double o : s.h1_order) pass = pass && std::abs(o - 1.0) <= 0.3;
    }
    return {pass, pass ? "pass" : "fail",
            pass ? "observed orders within L2 2.0 +- 0.4 and H1 1.0 +- 0.3"
                 : "observed orders outside L2 2.0 +- 0.4 or H1 1.0 +- 0.3"};
  }

  TaskOutcome coercivity() {
    if (disc_.size() > 4096) {
      throw UsageError("diagnose-coercivity uses dense eigensolves; limit is 4096 interior nodes");
    }
    const double c = c_.params.reaction;
    const DiagnosticReport rep =
        garding_diagnostic(disc_.grid(), c_.problem.diffusion, c_.problem.convection,
                           [c](double, double) { return c; });
    return diagnostic(rep, rep.pass);
  }

  TaskOutcome growth() {
    const auto& t = c_.params;
    const OptResult opt = run_optimizer(control());
    if (opt.status != OptStatus::converged) {
      export_report(opt, out("report.json"), c_.digest);
      return {false, to_string(opt.status), "optimizer did not converge: " + opt.message};
    }
    CurvatureOptions copts;
    copts.stationarity_tol = std::max(1e-8, 10 * c_.opt.tol_opt);
    const CurvatureReport cone = critical_cone_curvature(disc_, opt.u, t.probes, c_.seed, copts);
    const double nu = c_.problem.objective.nu;
    // an empty cone leaves only the Tikhonov curvature to certify
    const double kappa0 = cone.vacuous ? nu : cone.minimum;
    DiagnosticReport rep;
    bool cone_ok = cone.vacuous || cone.minimum >= 0.5 * nu;
    if (kappa0 > 0.0) {
      rep = quadratic_growth_check(disc_, opt.u, kappa0, t.probes, t.radius, c_.seed,
                                   copts.stationarity_tol);
    } else {
      rep.check = "quadratic_growth";
      rep.seed = c_.seed;
      rep.note = "critical cone curvature is not positive";
    }
    rep.set("cone_minimum", cone.vacuous ? kInf : cone.minimum);
    rep.set("cone_rayleigh_minimum", cone.rayleigh_minimum);
    rep.set("cone_sampled_minimum", cone.sampled_minimum);
    rep.set("cone_vacuous", cone.vacuous ? 1.0 : 0.0);
    rep.set("cone_free_nodes", cone.free_nodes);
    rep.set("cone_sign_constrained_nodes", cone.sign_constrained_nodes);
    rep.set("cone_fixed_nodes", cone.fixed_nodes);
    rep.set("cone_threshold", 0.5 * nu);
    rep.set("optimizer_iterations", opt.iterations);
    rep.set("optimality_residual", opt.residual_history.back());
    fields("control", opt.u);
    const bool pass = rep.pass && cone_ok;
    return diagnostic(rep, pass);
  }

  const RunConfig& c_;
  Discretization disc_;
};

Json versions_json() {
  return {{"convopt", version_string()},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                        "." + std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__}};
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunResult run(const RunConfig& config) {
  RunResult result;
  const auto start = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec || !fs::is_directory(config.output_dir)) {
    result.exit_code = 2;
    result.status = "io_error";
    result.message = "cannot create output directory '" + config.output_dir.string() + "'";
    return result;
  }

  std::vector<std::string> artifacts;
  try {
    Runner runner(config);
    TaskOutcome outcome;
    try {
      outcome = runner.dispatch();
    } catch (...) {
      artifacts = runner.artifacts;
      throw;
    }
    artifacts = runner.artifacts;
    result.exit_code = outcome.pass ? 0 : 1;
    result.status = outcome.status;
    result.message = outcome.message;
  } catch (const ParseError& e) {
    result = {2, "usage_error", e.what(), {}};
  } catch (const SemanticError& e) {
    result = {2, "usage_error", e.what(), {}};
  } catch (const UsageError& e) {
    result = {2, "usage_error", e.what(), {}};
  } catch (const CapabilityError& e) {
    result = {2, "usage_error", e.what(), {}};
  } catch (const IoError& e) {
    result = {2, "io_error", e.what(), {}};
  } catch (const std::exception& e) {
    result = {1, "failure", e.what(), {}};
  }
  result.artifacts = artifacts;

  Json manifest;
  manifest["tool"] = "convopt";
  manifest["task"] = config.task;
  manifest["seed"] = config.seed;
  manifest["config_digest"] = config.digest;
  manifest["config"] = Json::parse(config.echo);
  manifest["versions"] = versions_json();
  manifest["exit_code"] = result.exit_code;
  manifest["status"] = result.status;
  manifest["message"] = result.message;
  manifest["artifacts"] = artifacts;
  manifest["timings"] = "timings.json";

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Json timings = {{"config_digest", config.digest}, {"started_utc", started}, {"wall_seconds", seconds}};
  try {
    write_text(config.output_dir / "manifest.json", dump(manifest));
    write_text(config.output_dir / "timings.json", dump(timings));
  } catch (const IoError& e) {
    result.exit_code = 2;
    result.status = "io_error";
    result.message = e.what();
  }
  return result;
}

}  // namespace convopt
