// Command-line front-end: solve / benchmark / compare / lp subcommands over
// a JSON run configuration (file or built-in preset).
//
// Exit codes: 0 success, 2 configuration error, 3 solver failure,
// 4 size-cap refusal.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lotsol/cli/commands.hpp"
#include "lotsol/cli/config.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw lotsol::cli::ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string preset_list() {
  std::string names;
  for (const auto& [key, text] : lotsol::cli::builtin_presets()) {
    if (!names.empty()) names += ", ";
    names += key;
  }
  return names;
}

}  // namespace

int main(int argc, char** argv) {
  using lotsol::cli::ConfigError;
  using lotsol::cli::RunConfig;

  CLI::App app{
      "lotsol: optimal lottery solutions to non-convex constrained planning problems\n"
      "via projected-subgradient iteration on the dual, with a dense LP oracle."};
  app.require_subcommand(1);

  std::string config_path;
  std::string preset_name;
  std::string out_dir;
  std::string window_spec;
  int iters = -1;
  std::vector<double> ladder;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration file");
    sub->add_option("--preset", preset_name, "built-in preset (" + preset_list() + ")");
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
    sub->add_option("--iters", iters, "iteration count (overrides the config)");
    sub->add_option("--window", window_spec,
                    "lottery window A:B over iterations (overrides the config)");
  };

  CLI::App* solve =
      app.add_subcommand("solve", "run the multiplier iteration and write lottery artifacts");
  add_common(solve);
  CLI::App* benchmark = app.add_subcommand(
      "benchmark", "time the canonical run over a ladder of action-grid spacings");
  add_common(benchmark);
  benchmark->add_option("--ladder", ladder, "comma-separated action spacings")->delimiter(',');
  CLI::App* compare =
      app.add_subcommand("compare", "solve twice (iteration and LP oracle) and report gaps");
  add_common(compare);
  CLI::App* lp = app.add_subcommand("lp", "assemble the LP oracle and export it as fixed MPS");
  add_common(lp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems are configuration errors
  }

  int exit_code = 0;
  try {
    if (!config_path.empty() && !preset_name.empty()) {
      throw ConfigError("pass either --config or --preset, not both");
    }
    RunConfig cfg;
    if (!preset_name.empty()) {
      cfg = lotsol::cli::load_preset(preset_name);
    } else if (!config_path.empty()) {
      cfg = lotsol::cli::parse_run_config_text(read_file(config_path), config_path);
    } else {
      throw ConfigError("one of --config or --preset is required");
    }

    if (iters >= 0) {
      if (iters < 1) throw ConfigError("--iters must be >= 1");
      cfg.iterations = iters;
      // A configured window that no longer fits falls back to the final 5%.
      if (cfg.window && cfg.window->second > cfg.iterations) cfg.window.reset();
    }
    if (!window_spec.empty()) {
      const std::pair<int, int> w = lotsol::cli::parse_window_spec(window_spec);
      if (w.second > cfg.iterations) {
        throw ConfigError("--window end exceeds the iteration count");
      }
      cfg.window = w;
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (benchmark->count("--ladder") > 0) {
      for (double v : ladder) {
        if (!(v > 0.0)) throw ConfigError("--ladder entries must be > 0");
      }
      cfg.ladder = ladder;
    }

    if (*solve) {
      exit_code = lotsol::cli::cmd_solve(cfg, std::cout);
    } else if (*benchmark) {
      exit_code = lotsol::cli::cmd_benchmark(cfg, std::cout);
    } else if (*compare) {
      exit_code = lotsol::cli::cmd_compare(cfg, std::cout);
    } else {
      exit_code = lotsol::cli::cmd_lp(cfg, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cout << "config error: " << e.what() << "\n";
    exit_code = 2;
  } catch (const std::exception& e) {
    std::cout << "error: " << e.what() << "\n";
    exit_code = 3;
  }
  return exit_code;
}
