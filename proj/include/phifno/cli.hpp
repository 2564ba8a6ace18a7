#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phifno/grid.hpp"
#include "phifno/training.hpp"

namespace phifno::cli {

// One JSON document drives every subcommand; unknown keys are rejected so a
// typo cannot silently fall back to a default. The resolved form (every
// default filled in) is written into each output directory as config.json
// and can be fed back through --config unchanged.

struct GenerateConfig {
  std::string generator = "ellipse";  // or "gaussian_shapes"
  int n_samples = 10;
  double margin = -1.0;  // ellipse bounding-box margin; < 0 means 2/(nx-1)
  int threads = 1;
};

struct SplitConfig {
  int train = 1500, val = 300, test = 300;
};

struct FnoConfig {
  int n_d = 20, m = 10, n_q = 128, pad = 8;
  bool pad_per_layer = false;
  bool predict_u = false;
};

struct TrainCmdConfig {
  std::string dataset;  // dataset directory to read
  int epochs = 2000;
  int batch_size = 32;
  double lr = 5e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-7;
  double l2_lambda = 0.0, weight_decay = 0.0;
  std::string loss = "full_h1";  // or "semi_h1"
  train::SchedulerConfig scheduler;
  int checkpoint_every = 100;  // 0 disables periodic checkpoints
  std::string resume;          // earlier run directory to continue from
};

struct EvaluateConfig {
  std::string dataset;
  std::string checkpoint;                // single-checkpoint mode
  std::vector<std::string> checkpoints;  // multi-checkpoint mode, wins if set
  std::string hausdorff_against;  // training dataset dir; adds a distance column
};

struct ConvergenceConfig {
  std::string case_id = "sine";  // sine | quadratic | affine
  std::string domain = "disk";   // disk | ellipse (seed-sampled)
  std::vector<int> resolutions = {17, 33, 65, 129};
};

struct PredictConfig {
  std::string checkpoint;
  std::string dataset;  // dataset mode: directory plus index
  int index = -1;
  std::string f, phi, g;  // raw mode: three grid files
};

struct RunConfig {
  uint64_t seed = 0;
  double sigma_d = 1.0;
  int nx = 64, ny = 64;
  std::string out = "phifno_out";
  bool deterministic = false;  // zero out wall-time fields in artifacts
  GenerateConfig generate;
  SplitConfig split;
  FnoConfig fno;
  TrainCmdConfig train;
  EvaluateConfig evaluate;
  ConvergenceConfig convergence;
  PredictConfig predict;
};

// Empty path gives pure defaults. Throws ConfigError on unknown keys, type
// mismatches, or out-of-contract values; IoError when the file is unreadable.
RunConfig load_config(const std::string& path);

// Resolved JSON document, loadable by load_config.
std::string config_snapshot(const RunConfig& cfg);

// Raw grid container for predict: u64le nx, u64le ny, then nx*ny f64le values.
void write_grid_file(const FieldGrid& grid, const std::string& path);
FieldGrid read_grid_file(const std::string& path);

// Subcommand bodies. Each creates cfg.out, drops config.json there, writes
// its artifacts, prints a short report, and returns 0; failures throw.
int cmd_generate(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg);
int cmd_evaluate(const RunConfig& cfg);
int cmd_convergence(const RunConfig& cfg);
int cmd_predict(const RunConfig& cfg);

}  // namespace phifno::cli
