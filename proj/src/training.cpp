#include "phifno/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "phifno/binio.hpp"
#include "phifno/errors.hpp"
#include "phifno/mesh.hpp"
#include "phifno/poisson.hpp"
#include "phifno/rng.hpp"

namespace phifno::train {

namespace {

using ad::MaskStack;
using ad::Shape;
using ad::Tape;
using ad::Tensor;

constexpr int kTrainLossSubset = 300;

void validate_config(const TrainConfig& cfg) {
  if (cfg.epochs < 0) throw ConfigError("train: epochs must be nonnegative");
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be at least 1");
  if (!(cfg.lr > 0.0)) throw ConfigError("train: learning rate must be positive");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0)
    throw ConfigError("train: betas must lie in [0, 1)");
  if (!(cfg.eps > 0.0)) throw ConfigError("train: eps must be positive");
  if (cfg.l2_lambda < 0.0 || cfg.weight_decay < 0.0)
    throw ConfigError("train: regularization strengths must be nonnegative");
  if (!(cfg.scheduler.factor > 0.0) || cfg.scheduler.factor >= 1.0)
    throw ConfigError("train: scheduler factor must lie in (0, 1)");
  if (cfg.scheduler.patience < 1) throw ConfigError("train: scheduler patience must be >= 1");
  if (cfg.scheduler.min_lr < 0.0) throw ConfigError("train: min_lr must be nonnegative");
}

// Mask rows and reconstructed truths for one split, all on a common grid.
struct SetView {
  const std::vector<Sample>* set = nullptr;
  std::vector<mesh::PixelMasks> masks;
  std::vector<FieldGrid> u_true;
  int nx = 0, ny = 0;
};

SetView view_of(const std::vector<Sample>& set, const char* which) {
  if (set.empty()) throw ConfigError(std::string("train: empty ") + which + " split");
  SetView view;
  view.set = &set;
  view.nx = set.front().f.nx;
  view.ny = set.front().f.ny;
  const auto bg = mesh::build_background_mesh(view.nx, view.ny);
  view.masks.reserve(set.size());
  view.u_true.reserve(set.size());
  for (const Sample& s : set) {
    if (s.f.nx != view.nx || s.f.ny != view.ny)
      throw ConfigError(std::string("train: mixed grid shapes in ") + which + " split");
    view.masks.push_back(mesh::build_pixel_masks(mesh::classify_cells(bg, s.phi), bg));
    view.u_true.push_back(fem::reconstruct_u(s.phi, s.w, s.g));
  }
  return view;
}

struct ChunkTensors {
  Tensor x;       // [b, 3, nx, ny] stacked inputs
  Tensor u_true;  // [b, 1, nx, ny]
  Tensor phi, g;  // [b, 1, nx, ny], for on-tape reconstruction in w-mode
  MaskStack s0, s1;
  int b = 0;
};

ChunkTensors gather_chunk(const SetView& view, const std::vector<int>& order, int from,
                          int to) {
  ChunkTensors ck;
  ck.b = to - from;
  const int nx = view.nx, ny = view.ny;
  const size_t np = static_cast<size_t>(nx) * ny;

  std::vector<double> xs, ut, ph, gg;
  xs.reserve(ck.b * 3 * np);
  ut.reserve(ck.b * np);
  ph.reserve(ck.b * np);
  gg.reserve(ck.b * np);
  ck.s0 = MaskStack{ck.b, nx, ny, {}};
  ck.s1 = MaskStack{ck.b, nx, ny, {}};
  ck.s0.v.reserve(ck.b * np);
  ck.s1.v.reserve(ck.b * np);

  for (int k = from; k < to; ++k) {
    const Sample& s = (*view.set)[order[k]];
    xs.insert(xs.end(), s.f.v.begin(), s.f.v.end());
    xs.insert(xs.end(), s.phi.v.begin(), s.phi.v.end());
    xs.insert(xs.end(), s.g.v.begin(), s.g.v.end());
    ut.insert(ut.end(), view.u_true[order[k]].v.begin(), view.u_true[order[k]].v.end());
    ph.insert(ph.end(), s.phi.v.begin(), s.phi.v.end());
    gg.insert(gg.end(), s.g.v.begin(), s.g.v.end());
    const auto& mk = view.masks[order[k]];
    ck.s0.v.insert(ck.s0.v.end(), mk.s0.begin(), mk.s0.end());
    ck.s1.v.insert(ck.s1.v.end(), mk.s1.begin(), mk.s1.end());
  }
  ck.x = Tensor::constant(Shape::grid4(ck.b, 3, nx, ny), std::move(xs));
  ck.u_true = Tensor::constant(Shape::grid4(ck.b, 1, nx, ny), std::move(ut));
  ck.phi = Tensor::constant(Shape::grid4(ck.b, 1, nx, ny), std::move(ph));
  ck.g = Tensor::constant(Shape::grid4(ck.b, 1, nx, ny), std::move(gg));
  return ck;
}

Tensor predict_u_tensor(const fno::FnoHyperparams& h, const fno::ChannelStats& stats,
                        const fno::ParamLeaves& leaves, const ChunkTensors& ck) {
  Tensor out = fno_forward(h, stats, leaves, ck.x);
  if (h.predict_u) return out;
  return ad::add(ad::mul(out, ck.phi), ck.g);
}

void fisher_yates(std::vector<int>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = rng.index(i);
    std::swap(v[i - 1], v[j]);
  }
}

// Loss over an index list, chunked; also collects per-sample errors when
// e1 is non-null. No gradients are recorded anywhere in here.
double eval_pass(const fno::FnoParams& params, const fno::ParamLeaves& leaves,
                 const SetView& view, const std::vector<int>& order, int chunk,
                 LossMode mode, std::vector<double>* e1) {
  const double dx = 1.0 / (view.nx - 1), dy = 1.0 / (view.ny - 1);
  const size_t np = static_cast<size_t>(view.nx) * view.ny;
  double weighted = 0.0;
  for (int from = 0; from < static_cast<int>(order.size()); from += chunk) {
    int to = std::min<int>(from + chunk, order.size());
    ChunkTensors ck = gather_chunk(view, order, from, to);
    Tensor u_pred = predict_u_tensor(params.hyper, params.stats, leaves, ck);
    Tensor l = loss(ck.u_true, u_pred, ck.s0, ck.s1, mode, dx, dy);
    weighted += l.value_at(0) * ck.b;
    if (e1) {
      for (int k = from; k < to; ++k) {
        FieldGrid up(view.nx, view.ny);
        std::copy_n(u_pred.values().begin() + static_cast<size_t>(k - from) * np, np,
                    up.v.begin());
        e1->push_back(
            metric_E1(view.u_true[order[k]], up, view.masks[order[k]].s0));
      }
    }
  }
  return weighted / static_cast<double>(order.size());
}

}  // namespace

std::pair<FieldGrid, FieldGrid> fd_gradients(const FieldGrid& u, double delta) {
  if (u.nx < 3 || u.ny < 3) throw ConfigError("fd_gradients: grid too small");
  if (!(delta > 0.0)) throw ConfigError("fd_gradients: spacing must be positive");
  FieldGrid gx(u.nx, u.ny), gy(u.nx, u.ny);
  const double f = 1.0 / (2.0 * delta);
  for (int i = 1; i < u.nx - 1; ++i)
    for (int j = 0; j < u.ny; ++j) gx.at(i, j) = (u.at(i + 1, j) - u.at(i - 1, j)) * f;
  for (int i = 0; i < u.nx; ++i)
    for (int j = 1; j < u.ny - 1; ++j) gy.at(i, j) = (u.at(i, j + 1) - u.at(i, j - 1)) * f;
  return {gx, gy};
}

Tensor loss(const Tensor& u_true, const Tensor& u_pred, const MaskStack& s0,
            const MaskStack& s1, LossMode mode, double dx, double dy) {
  if (u_true.shape() != u_pred.shape() || u_true.shape().rank != 4 ||
      u_true.shape().d[1] != 1)
    throw ConfigError("loss: expects matching [b,1,x,y] stacks");
  const int b = u_true.shape().d[0];
  if (b < 1) throw ConfigError("loss: empty batch");

  Tensor d = ad::sub(u_pred, u_true);
  Tensor grads = ad::add(ad::masked_sq_norm(ad::central_diff_x(d, dx), s1),
                         ad::masked_sq_norm(ad::central_diff_y(d, dy), s1));
  Tensor per_sample =
      (mode == LossMode::full_h1) ? ad::add(ad::masked_sq_norm(d, s0), grads) : grads;
  return ad::scale(ad::sum(per_sample), 1.0 / b);
}

double metric_E1(const FieldGrid& u_true, const FieldGrid& u_pred,
                 const std::vector<uint8_t>& s0) {
  if (!u_true.same_shape(u_pred) || s0.size() != u_true.size())
    throw ConfigError("metric_E1: shape mismatch");
  double num = 0.0, den = 0.0;
  for (size_t k = 0; k < s0.size(); ++k) {
    if (!s0[k]) continue;
    double d = u_true.v[k] - u_pred.v[k];
    num += d * d;
    den += u_true.v[k] * u_true.v[k];
  }
  if (den == 0.0)
    throw NumericalError("metric_E1: reference solution vanishes on the mask");
  return std::sqrt(num / den);
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, const TrainConfig& cfg, double lr) {
  const size_t n = params.size();
  if (grads.size() != n) throw ConfigError("adam_step: gradient length mismatch");
  if (state.m.empty()) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  if (state.m.size() != n || state.v.size() != n)
    throw ConfigError("adam_step: moment length mismatch");
  for (double g : grads)
    if (!std::isfinite(g)) throw NumericalError("adam_step: non-finite gradient");

  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (size_t k = 0; k < n; ++k) {
    state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * grads[k];
    state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * grads[k] * grads[k];
    const double mhat = state.m[k] / bc1;
    const double vhat = state.v[k] / bc2;
    params[k] -= lr * mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * params[k];
  }
}

double PlateauScheduler::observe(double val_loss) {
  if (!primed_) {
    primed_ = true;
    best_ = val_loss;
    bad_ = 1;
    return lr_;
  }
  if (val_loss < best_ * (1.0 - 1e-4)) {
    best_ = val_loss;
    bad_ = 0;
  } else {
    ++bad_;
  }
  if (bad_ >= cfg_.patience) {
    lr_ = std::max(lr_ * cfg_.factor, cfg_.min_lr);
    bad_ = 0;
  }
  return lr_;
}

void save_train_state(const TrainState& st, const std::string& path) {
  nlohmann::json head;
  head["format"] = 1;
  head["epoch"] = st.epoch;
  head["t"] = st.adam.t;
  head["count"] = st.adam.m.size();
  head["lr"] = st.lr;
  head["sched_primed"] = st.sched_primed;
  head["sched_best"] = st.sched_best;
  head["sched_bad"] = st.sched_bad;
  if (std::isfinite(st.best_val)) head["best_val"] = st.best_val;
  head["best_epoch"] = st.best_epoch;
  head["subset"] = st.subset;
  head["rng_state"] = st.rng_state;

  std::vector<unsigned char> blob;
  blob.reserve((st.adam.m.size() + st.adam.v.size()) * 8);
  for (double x : st.adam.m) binio::append_f64le(blob, x);
  for (double x : st.adam.v) binio::append_f64le(blob, x);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("train state: cannot open " + path + " for writing");
  std::string header = head.dump();
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.put('\n');
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("train state: short write to " + path);
}

TrainState load_train_state(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("train state: cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw IoError("train state: missing header line");

  TrainState st;
  size_t count = 0;
  try {
    auto head = nlohmann::json::parse(header);
    if (head.at("format").get<int>() != 1)
      throw IoError("train state: unsupported format version");
    st.epoch = head.at("epoch").get<int>();
    st.adam.t = head.at("t").get<int64_t>();
    count = head.at("count").get<size_t>();
    st.lr = head.at("lr").get<double>();
    st.sched_primed = head.at("sched_primed").get<bool>();
    st.sched_best = head.at("sched_best").get<double>();
    st.sched_bad = head.at("sched_bad").get<int>();
    st.best_val = head.contains("best_val")
                      ? head["best_val"].get<double>()
                      : std::numeric_limits<double>::infinity();
    st.best_epoch = head.at("best_epoch").get<int>();
    st.subset = head.at("subset").get<std::vector<int>>();
    st.rng_state = head.at("rng_state").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("train state: bad header: ") + e.what());
  }

  std::vector<unsigned char> raw(count * 16);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    throw IoError("train state: moment blob truncated");
  if (in.peek() != std::ifstream::traits_type::eof())
    throw IoError("train state: trailing bytes");
  st.adam.m.resize(count);
  st.adam.v.resize(count);
  for (size_t k = 0; k < count; ++k) {
    st.adam.m[k] = binio::read_f64le(raw.data() + k * 8);
    st.adam.v[k] = binio::read_f64le(raw.data() + (count + k) * 8);
  }
  return st;
}

TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const fno::FnoHyperparams& hyper, const TrainConfig& cfg,
                  const EpochCallback& on_epoch, const ResumePoint* resume) {
  validate_config(cfg);
  SetView tv = view_of(train_set, "train");
  SetView vv = view_of(val_set, "validation");
  const int n = static_cast<int>(train_set.size());
  if (cfg.batch_size > n) throw ConfigError("train: batch_size exceeds the training split");

  Rng rng(cfg.seed);
  fno::FnoParams params;
  fno::FnoParams best;
  PlateauScheduler sched(cfg.scheduler, cfg.lr);
  AdamState adam;
  std::vector<int> subset;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int start_epoch = 0;

  if (resume) {
    params = resume->current;
    best = resume->best;
    const TrainState& st = resume->state;
    adam = st.adam;
    sched.restore(st.sched_primed, st.sched_best, st.sched_bad, st.lr);
    subset = st.subset;
    best_val = st.best_val;
    best_epoch = st.best_epoch;
    start_epoch = st.epoch;
    std::istringstream is(st.rng_state);
    is >> rng.engine();
    if (!is) throw IoError("train: cannot restore the random stream");
  } else {
    params = fno::init_params(hyper, rng);
    params.stats = fno::compute_channel_stats(train_set, tv.masks, hyper.predict_u);
    best = params;
    std::vector<int> all(n);
    for (int k = 0; k < n; ++k) all[k] = k;
    fisher_yates(all, rng);
    subset.assign(all.begin(), all.begin() + std::min(n, kTrainLossSubset));
  }

  TrainResult result;
  const double dx = 1.0 / (tv.nx - 1), dy = 1.0 / (tv.ny - 1);
  std::vector<int> order(n);
  for (int k = 0; k < n; ++k) order[k] = k;

  for (int epoch = start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
    const double lr_used = sched.lr();
    // shuffle a fresh identity so the permutation depends only on the RNG
    // state, which is what a resumed run restores
    for (int k = 0; k < n; ++k) order[k] = k;
    fisher_yates(order, rng);

    for (int from = 0; from < n; from += cfg.batch_size) {
      const int to = std::min(from + cfg.batch_size, n);
      Tape tape;
      fno::ParamLeaves leaves = fno::make_leaves(params, &tape);
      ChunkTensors ck = gather_chunk(tv, order, from, to);
      Tensor u_pred = predict_u_tensor(hyper, params.stats, leaves, ck);
      Tensor l = loss(ck.u_true, u_pred, ck.s0, ck.s1, cfg.loss_mode, dx, dy);
      if (cfg.l2_lambda > 0.0) {
        Tensor reg = ad::sq_sum(leaves.wp);
        auto tally = [&reg](const Tensor& t) { reg = ad::add(reg, ad::sq_sum(t)); };
        tally(leaves.bp);
        for (int layer = 0; layer < 4; ++layer) {
          tally(leaves.wc[layer]);
          tally(leaves.wb[layer]);
          tally(leaves.bb[layer]);
        }
        tally(leaves.wq1);
        tally(leaves.bq1);
        tally(leaves.wq2);
        tally(leaves.bq2);
        l = ad::add(l, ad::scale(reg, cfg.l2_lambda / (2.0 * ck.b)));
      }
      if (!std::isfinite(l.value_at(0)))
        throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) +
                             ", batch starting at index " + std::to_string(from));
      tape.backward(l);
      adam_step(params.blob, fno::gather_grads(tape, leaves), adam, cfg, lr_used);
    }

    // reporting passes, gradient-free
    fno::ParamLeaves frozen = fno::make_leaves(params, nullptr);
    double train_loss =
        eval_pass(params, frozen, tv, subset, cfg.batch_size, cfg.loss_mode, nullptr);
    std::vector<int> val_order(val_set.size());
    for (size_t k = 0; k < val_set.size(); ++k) val_order[k] = static_cast<int>(k);
    std::vector<double> val_e1;
    double val_loss =
        eval_pass(params, frozen, vv, val_order, cfg.batch_size, cfg.loss_mode, &val_e1);
    double e1_mean = 0.0;
    for (double e : val_e1) e1_mean += e;
    e1_mean /= static_cast<double>(val_e1.size());

    EpochRow row;
    row.epoch = epoch;
    row.train_loss = train_loss;
    row.val_loss = val_loss;
    row.val_e1_mean = e1_mean;
    row.lr = lr_used;
    row.is_best = val_loss < best_val;
    if (row.is_best) {
      best = params;
      best_val = val_loss;
      best_epoch = epoch;
    }
    sched.observe(val_loss);
    result.log.push_back(row);

    if (on_epoch) {
      TrainState st;
      st.epoch = epoch;
      st.adam = adam;
      st.lr = sched.lr();
      st.sched_primed = sched.primed();
      st.sched_best = sched.best();
      st.sched_bad = sched.bad();
      st.best_val = best_val;
      st.best_epoch = best_epoch;
      st.subset = subset;
      std::ostringstream os;
      os << rng.engine();
      st.rng_state = os.str();
      on_epoch(row, params, best, st);
    }
  }

  result.best = std::move(best);
  return result;
}

EvalSummary summarize(std::vector<double> e1) {
  if (e1.empty()) throw ConfigError("evaluate: empty error list");
  EvalSummary s;
  s.e1 = e1;
  double total = 0.0;
  for (double e : e1) total += e;
  s.mean = total / static_cast<double>(e1.size());

  std::sort(e1.begin(), e1.end());
  auto percentile = [&e1](double q) {
    const double pos = q * static_cast<double>(e1.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= e1.size()) return e1.back();
    return e1[lo] * (1.0 - frac) + e1[lo + 1] * frac;
  };
  s.q1 = percentile(0.25);
  s.median = percentile(0.5);
  s.q3 = percentile(0.75);
  return s;
}

EvalSummary evaluate(const fno::FnoParams& p, const std::vector<Sample>& set) {
  SetView view = view_of(set, "evaluation");
  fno::ParamLeaves frozen = fno::make_leaves(p, nullptr);
  std::vector<int> order(set.size());
  for (size_t k = 0; k < set.size(); ++k) order[k] = static_cast<int>(k);
  std::vector<double> e1;
  eval_pass(p, frozen, view, order, 32, LossMode::full_h1, &e1);
  return summarize(std::move(e1));
}

std::string epoch_csv_header() { return "epoch,train_loss,val_loss,val_E1_mean,lr,is_best"; }

std::string epoch_csv_row(const EpochRow& row) {
  char buf[192];
  std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%d", row.epoch,
                row.train_loss, row.val_loss, row.val_e1_mean, row.lr,
                row.is_best ? 1 : 0);
  return buf;
}

}  // namespace phifno::train
