#include "convopt/cli_io.hpp"
#include "convopt/error.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

int main(int argc, char** argv) {
  CLI::App app{"Optimal control of semilinear convection-diffusion equations"};
  app.set_version_flag("--version", convopt::version_string());
  std::string task;
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("task", task, "Task to run")->required()->check(CLI::IsMember(convopt::kTasks));
  app.add_option("--config", config_path, "JSON configuration file")->required();
  app.add_option("--out", out_dir, "Output directory (overrides output.directory)");
  app.add_option("--seed", seed, "Random seed (overrides command.seed)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  convopt::RunConfig config;
  try {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw convopt::IoError("cannot read config '" + config_path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    config = convopt::parse_config(text.str(), task);
  } catch (const convopt::Error& e) {
    std::cerr << "convopt: " << e.what() << "\n";
    return 2;
  }
  if (out_dir) config.output_dir = *out_dir;
  if (seed) config.seed = *seed;

  const convopt::RunResult result = convopt::run(config);
  std::cout << task << ": " << result.status;
  if (!result.message.empty()) std::cout << " (" << result.message << ")";
  std::cout << "\n";
  if (result.exit_code == 2) std::cerr << "convopt: " << result.message << "\n";
  return result.exit_code;
}
