// lpsolve <command> --config <path> [--jobs N] [--out DIR]

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lp/cli_io.hpp"
#include "lp/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Little-Parks solver: flux sweeps, eigenvalues and Ginzburg-Landau minimisers"};
  std::string command;
  std::string config;
  int jobs = 0;
  std::string out;
  app.add_option("command", command, "potential | eig | sweep | gl-min | converge | oscillate | degennes | verify")
      ->required();
  app.add_option("--config", config, "JSON run configuration")->required();
  app.add_option("--jobs", jobs, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "output directory (overrides the config)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? lp::kExitOk : lp::kExitInvalid;
  }

  try {
    lp::RunConfig cfg = lp::load_config(config, command);
    if (jobs > 0) cfg.jobs = jobs;
    if (!out.empty()) cfg.out_dir = out;
    if (const char* seed = std::getenv("LP_SEED")) {
      std::size_t used = 0;
      try {
        cfg.eig.seed = std::stoull(seed, &used, 0);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || seed[used] != '\0') {
        throw lp::Error(lp::ErrorCode::ConfigInvalid, "LP_SEED: expected an unsigned integer");
      }
    }
    return lp::run(cfg, std::cout, std::cerr);
  } catch (const lp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return lp::exit_code_for(e);
  }
}
