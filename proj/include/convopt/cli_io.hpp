#pragma once

// Configuration parsing, task dispatch and artifact export for the convopt
// command line tool.

#include "convopt/catalog.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace convopt {

enum class FieldFormat { csv, vtk };

inline const std::vector<std::string> kTasks{
    "solve-state",       "optimize",           "check-gradient",      "check-hessian",
    "comparison-suite",  "convergence-study",  "diagnose-coercivity", "growth-check"};

/// Control used as evaluation point or initial guess.
struct ControlChoice {
  std::string kind = "zero";  ///< zero, constant, sine, bump
  double value = 0.0;
};

struct TaskParams {
  ControlChoice control;
  int directions = 3;
  double tolerance = 0.0;  ///< 0 selects the task default
  double symmetry_tolerance = 1e-9;
  int pairs = 50;
  double amplitude = 5.0;
  bool assert_pass = true;
  std::string exact = "sine";  ///< manufactured solution: sine or zero
  std::vector<int> grids{8, 16, 32, 64};
  double reaction = 0.0;
  int probes = 200;
  double radius = 0.1;
};

/// Catalog selections of the problem section; `problem` is built from these.
struct ProblemChoices {
  std::string preset;  ///< empty or a control problem name providing the defaults
  RectDomain domain;
  int nx = 16;
  int ny = 16;
  std::string diffusion = "identity";
  std::string convection = "zero";
  double convection_scale = 1.0;
  std::string nonlinearity = "power";  ///< zero, power, exponential
  double r = 2.0;
  std::string weight = "one";
  std::string target = "zero";
  double target_amplitude = 1.0;
  double nu = 1e-2;
  double alpha = -1.0;
  double beta = 1.0;
};

struct SolverChoices {
  double tol_state = 1e-10;
  int max_newton = 50;
  double stabilization = 0.0;
  std::string linear = "sparse_lu";  ///< sparse_lu, gmres_ilut
  double linear_tolerance = 1e-10;
  std::string optimizer = "semismooth_newton";  ///< or projected_gradient
  int max_outer = 200;
  double tol_opt = 1e-9;
};

/// Applies the defaults of a control problem preset to `choices`.
void apply_preset(ProblemChoices& choices, const std::string& preset);

/// Builds the problem; throws SemanticError for invalid values.
ProblemSpec build_problem(const ProblemChoices& choices, const SolverChoices& solver);

struct RunConfig {
  ProblemChoices choices;
  SolverChoices solver;
  ProblemSpec problem;
  OptOptions opt;
  std::string task;
  TaskParams params;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "convopt-out";
  std::vector<FieldFormat> formats{FieldFormat::csv};
  /// Canonical JSON of the configuration with every default filled in.
  std::string echo;
  /// Digest of `echo`.
  std::string digest;
};

/// Strict parse of a JSON configuration. Unknown keys and type mismatches
/// raise ParseError with the JSON pointer of the offending value; invalid
/// problems raise SemanticError. A non-empty `task` supplies command.task when
/// the document has none; a conflicting command.task is a UsageError.
RunConfig parse_config(std::string_view text, const std::string& task = "");

/// Rebuilds problem, options, echo and digest after fields were changed
/// programmatically.
void refresh_echo(RunConfig& config);

struct RunResult {
  int exit_code = 0;  ///< 0 pass/converged, 1 check failure or non-convergence, 2 usage error
  std::string status;
  std::string message;
  std::vector<std::string> artifacts;  ///< file names relative to the output directory
};

/// Runs the configured task and writes manifest.json, timings.json, report.json
/// and task artifacts into config.output_dir. Errors inside the task are
/// mapped to exit codes and recorded in the manifest.
RunResult run(const RunConfig& config);

/// Writes every grid node (boundary zeros included), row-major with x fastest.
/// CSV has columns x,y,value at 17 significant digits; VTK is legacy ASCII
/// STRUCTURED_POINTS. Throws IoError when the file cannot be written.
void export_field(const UniformGrid& grid, const ScalarField& field, FieldFormat format,
                  const std::filesystem::path& path, const std::string& name = "value",
                  const std::string& config_digest = "");

struct CsvField {
  std::vector<double> x, y, value;
};
/// Reads a CSV written by export_field. Throws IoError on malformed input.
CsvField read_field_csv(const std::filesystem::path& path);

/// JSON text of a report with stable key order.
std::string report_json(const DiagnosticReport& report, const std::string& config_digest = "");
std::string report_json(const OptResult& result, const std::string& config_digest = "");
std::string report_json(const ConvergenceStudy& study, const std::string& config_digest = "");

/// Writes report_json to `path`. Convergence studies also write
/// <stem>_<norm>.dat files with two columns (h, error) next to it. Returns
/// the written paths.
std::vector<std::filesystem::path> export_report(const DiagnosticReport& report,
                                                 const std::filesystem::path& path,
                                                 const std::string& config_digest = "");
std::vector<std::filesystem::path> export_report(const OptResult& result,
                                                 const std::filesystem::path& path,
                                                 const std::string& config_digest = "");
std::vector<std::filesystem::path> export_report(const ConvergenceStudy& study,
                                                 const std::filesystem::path& path,
                                                 const std::string& config_digest = "");

/// %.17g rendering, which round-trips every double.
std::string format_real(double v);

std::string version_string();

}  // namespace convopt
