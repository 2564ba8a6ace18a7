#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "phifno/fno.hpp"
#include "phifno/grid.hpp"
#include "phifno/sample.hpp"
#include "phifno/tensor.hpp"

namespace phifno::train {

enum class LossMode { full_h1, semi_h1 };

struct SchedulerConfig {
  double factor = 0.5;
  int patience = 40;
  double min_lr = 1e-6;
};

struct TrainConfig {
  int epochs = 2000;
  int batch_size = 32;
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-7;
  double l2_lambda = 0.0;     // loss-side penalty, lambda/(2*batch)*sum theta^2
  double weight_decay = 0.0;  // decoupled w1*theta term in the update
  SchedulerConfig scheduler;
  LossMode loss_mode = LossMode::full_h1;
  uint64_t seed = 0;
};

// Centered differences of a nodal field, spacing delta in both directions.
// Border entries are zero; the eroded mask keeps them out of every sum.
std::pair<FieldGrid, FieldGrid> fd_gradients(const FieldGrid& u, double delta);

// Mean over the batch of the squared-difference sums: values on the s0
// pixels plus centered-difference terms on the s1 pixels (full_h1), or the
// difference terms alone (semi_h1). Inputs are [b,1,nx,ny]; predictions must
// already live in u-space.
ad::Tensor loss(const ad::Tensor& u_true, const ad::Tensor& u_pred,
                const ad::MaskStack& s0, const ad::MaskStack& s1, LossMode mode,
                double dx, double dy);

// sqrt( sum_{s0}(u_true - u_pred)^2 / sum_{s0} u_true^2 )
double metric_E1(const FieldGrid& u_true, const FieldGrid& u_pred,
                 const std::vector<uint8_t>& s0);

struct AdamState {
  int64_t t = 0;
  std::vector<double> m, v;
};

// One ADAM update with bias correction and the decoupled decay term; the
// decay reads the pre-update parameters. Throws on non-finite gradients.
void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, const TrainConfig& cfg, double lr);

// Cuts the learning rate by `factor` after `patience` consecutive epochs
// without a relative improvement of at least 1e-4 over the best seen loss.
// The priming observation only records the baseline.
class PlateauScheduler {
 public:
  PlateauScheduler(const SchedulerConfig& cfg, double lr0) : cfg_(cfg), lr_(lr0) {}

  double observe(double val_loss);
  double lr() const { return lr_; }

  // resume plumbing
  bool primed() const { return primed_; }
  double best() const { return best_; }
  int bad() const { return bad_; }
  void restore(bool primed, double best, int bad, double lr) {
    primed_ = primed;
    best_ = best;
    bad_ = bad;
    lr_ = lr;
  }

 private:
  SchedulerConfig cfg_;
  double lr_;
  bool primed_ = false;
  double best_ = 0.0;
  int bad_ = 0;
};

struct EpochRow {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_e1_mean = 0.0;
  double lr = 0.0;  // rate used for this epoch's updates
  bool is_best = false;
};

// Everything needed to continue a run as if it had never stopped: optimizer
// moments, scheduler position, the RNG mid-stream, the frozen train-loss
// subset, and the best-so-far bookkeeping.
struct TrainState {
  int epoch = 0;  // epochs completed
  AdamState adam;
  double lr = 0.0;
  bool sched_primed = false;
  double sched_best = 0.0;
  int sched_bad = 0;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  std::vector<int> subset;  // fixed train-loss report subset
  std::string rng_state;    // serialized engine
};

void save_train_state(const TrainState& st, const std::string& path);
TrainState load_train_state(const std::string& path);

struct TrainResult {
  fno::FnoParams best;
  std::vector<EpochRow> log;  // rows for the epochs run by this call
};

struct ResumePoint {
  fno::FnoParams current;
  fno::FnoParams best;
  TrainState state;
};

// Called after every epoch with the fresh log row and the state a resumed
// run would need to continue from here.
using EpochCallback = std::function<void(const EpochRow&, const fno::FnoParams& current,
                                         const fno::FnoParams& best, const TrainState&)>;

// Seeded full loop: channel stats from the training split, initialization,
// shuffled disjoint batches, ADAM, plateau scheduling, best-model selection
// by validation loss. With `resume`, continues exactly where the stored
// state stopped (the seed only feeds a fresh start). Runs until cfg.epochs
// epochs are complete in total.
TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const fno::FnoHyperparams& hyper, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {}, const ResumePoint* resume = nullptr);

// Per-sample relative errors of a checkpoint over a dataset.
struct EvalSummary {
  std::vector<double> e1;
  double mean = 0.0, median = 0.0, q1 = 0.0, q3 = 0.0;
};

EvalSummary summarize(std::vector<double> e1);
EvalSummary evaluate(const fno::FnoParams& p, const std::vector<Sample>& set);

// EpochLog CSV: "epoch,train_loss,val_loss,val_E1_mean,lr,is_best"
std::string epoch_csv_header();
std::string epoch_csv_row(const EpochRow& row);

}  // namespace phifno::train
