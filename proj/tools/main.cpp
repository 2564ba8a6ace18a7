#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "phifno/cli.hpp"
#include "phifno/errors.hpp"

// Exit codes: 0 success, 1 configuration error, 2 numerical failure,
// 3 I/O failure.

int main(int argc, char** argv) {
  CLI::App app{"phi-FEM + Fourier neural operator pipeline"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  bool deterministic = false;
  uint64_t seed = 0;
  app.add_option("--config", config_path, "JSON configuration file (omit for defaults)");
  CLI::Option* seed_opt = app.add_option("--seed", seed, "override the config seed");
  app.add_option("--out", out_dir, "output directory (overrides config)");
  app.add_flag("--deterministic", deterministic,
               "zero wall-time fields so reruns are bitwise identical");

  const char* subs[][2] = {
      {"generate", "sample geometries, solve them, write a dataset"},
      {"train", "train the neural operator on a dataset"},
      {"evaluate", "per-sample errors of one or more checkpoints"},
      {"convergence", "manufactured-solution convergence study"},
      {"predict", "run a checkpoint on one sample or raw grids"},
  };
  for (auto& s : subs) app.add_subcommand(s[0], s[1])->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    phifno::cli::RunConfig cfg = phifno::cli::load_config(config_path);
    if (seed_opt->count() > 0) cfg.seed = seed;
    if (!out_dir.empty()) cfg.out = out_dir;
    if (deterministic) cfg.deterministic = true;

    if (app.got_subcommand("generate")) return phifno::cli::cmd_generate(cfg);
    if (app.got_subcommand("train")) return phifno::cli::cmd_train(cfg);
    if (app.got_subcommand("evaluate")) return phifno::cli::cmd_evaluate(cfg);
    if (app.got_subcommand("convergence")) return phifno::cli::cmd_convergence(cfg);
    return phifno::cli::cmd_predict(cfg);
  } catch (const phifno::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const phifno::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const phifno::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  }
}
