#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phifno/binio.hpp"
#include "phifno/cli.hpp"
#include "phifno/dataset.hpp"
#include "phifno/errors.hpp"
#include "phifno/fno.hpp"
#include "phifno/geometry.hpp"
#include "phifno/mesh.hpp"
#include "phifno/poisson.hpp"
#include "phifno/rng.hpp"

namespace phifno::cli {

namespace {

namespace fs = std::filesystem;
namespace ds = phifno::dataset;
using nlohmann::json;

class WallTimer {
 public:
  WallTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  out << content;
  if (!out) throw IoError("cannot write " + path.string());
}

// Every command leaves the fully resolved configuration next to its
// artifacts so a run can be replayed from the output directory alone.
fs::path prepare_out_dir(const RunConfig& cfg) {
  fs::path dir(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string());
  write_text(dir / "config.json", config_snapshot(cfg));
  return dir;
}

json json_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

// Per-sample node masks and reconstructed reference solution, the fixed
// inputs of every error measurement below.
struct EvalInputs {
  std::vector<mesh::PixelMasks> masks;
  std::vector<FieldGrid> u_true;
};

EvalInputs eval_inputs(const ds::Dataset& d) {
  mesh::BackgroundMesh bg = mesh::build_background_mesh(d.nx, d.ny);
  EvalInputs in;
  in.masks.reserve(d.samples.size());
  in.u_true.reserve(d.samples.size());
  for (const Sample& s : d.samples) {
    in.masks.push_back(mesh::build_pixel_masks(mesh::classify_cells(bg, s.phi), bg));
    in.u_true.push_back(fem::reconstruct_u(s.phi, s.w, s.g));
  }
  return in;
}

FieldGrid predict_sample(const fno::FnoParams& p, const FieldGrid& f, const FieldGrid& phi,
                         const FieldGrid& g) {
  FieldGrid out = fno::fno_forward(p, f, phi, g);
  return p.hyper.predict_u ? out : fem::reconstruct_u(phi, out, g);
}

fem::PoissonCase manufactured_case(const std::string& id) {
  if (id == "affine") {
    auto u = [](double x, double y) { return 0.7 * x - 0.2 * y + 0.4; };
    return {"affine", u, [](double, double) { return 0.0; }, u};
  }
  if (id == "quadratic") {
    auto u = [](double x, double y) { return x * x + y * y; };
    return {"quadratic", u, [](double, double) { return -4.0; }, u};
  }
  auto u = [](double x, double y) { return std::sin(M_PI * x) * std::sin(M_PI * y); };
  auto f = [](double x, double y) {
    return 2.0 * M_PI * M_PI * std::sin(M_PI * x) * std::sin(M_PI * y);
  };
  return {"sine", u, f, u};
}

geometry::ScalarField study_domain(const RunConfig& cfg) {
  if (cfg.convergence.domain == "disk") {
    geometry::EllipseParams p;
    p.x0 = 0.5;
    p.y0 = 0.5;
    p.lx = 0.3;
    p.ly = 0.3;
    p.theta = 0.0;
    return geometry::ellipse_levelset_field(p);
  }
  // Seeded random ellipse whose bounding box keeps two cells of clearance
  // on the coarsest grid of the ladder.
  if (cfg.convergence.resolutions.empty())
    throw ConfigError("config: 'convergence.resolutions' must not be empty");
  int coarsest = cfg.convergence.resolutions.front();
  for (int r : cfg.convergence.resolutions) coarsest = std::min(coarsest, r);
  if (coarsest < 2) throw ConfigError("config: 'convergence.resolutions' entries must be >= 2");
  Rng rng(cfg.seed);
  // clamp below the sampler's feasibility bound for very coarse ladders
  double margin = std::min(2.0 / (coarsest - 1), 0.19);
  geometry::EllipseParams p = geometry::sample_ellipse(rng, margin);
  return geometry::ellipse_levelset_field(p);
}

std::string convergence_csv(const std::vector<fem::ConvergenceRow>& rows) {
  std::string csv = "resolution,h,error,order\n";
  for (const fem::ConvergenceRow& r : rows) {
    csv += std::to_string(r.resolution) + "," + fmt_g(r.h) + "," + fmt_g(r.error) + ",";
    if (r.order) csv += fmt_g(*r.order);
    csv += "\n";
  }
  return csv;
}

}  // namespace

void write_grid_file(const FieldGrid& grid, const std::string& path) {
  std::vector<unsigned char> blob;
  blob.reserve(16 + grid.size() * 8);
  binio::append_u64le(blob, static_cast<uint64_t>(grid.nx));
  binio::append_u64le(blob, static_cast<uint64_t>(grid.ny));
  for (double v : grid.v) binio::append_f64le(blob, v);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("cannot write grid file " + path);
}

FieldGrid read_grid_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open grid file " + path);
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (blob.size() < 16) throw IoError("grid file " + path + ": truncated header");
  uint64_t nx = binio::read_u64le(blob.data());
  uint64_t ny = binio::read_u64le(blob.data() + 8);
  if (nx < 2 || ny < 2 || nx > (1u << 20) || ny > (1u << 20))
    throw IoError("grid file " + path + ": implausible dimensions");
  size_t expected = 16 + static_cast<size_t>(nx) * ny * 8;
  if (blob.size() != expected)
    throw IoError("grid file " + path + ": size does not match header");
  FieldGrid g(static_cast<int>(nx), static_cast<int>(ny));
  const unsigned char* p = blob.data() + 16;
  for (size_t k = 0; k < g.size(); ++k, p += 8) g.v[k] = binio::read_f64le(p);
  return g;
}

int cmd_generate(const RunConfig& cfg) {
  WallTimer timer;
  ds::Dataset d =
      cfg.generate.generator == "ellipse"
          ? ds::generate_ellipse_dataset(cfg.generate.n_samples, cfg.nx, cfg.ny, cfg.seed,
                                     cfg.sigma_d, cfg.generate.margin, cfg.generate.threads)
          : ds::generate_gaussian_shape_dataset(cfg.generate.n_samples, cfg.nx, cfg.ny, cfg.seed,
                                            cfg.sigma_d, cfg.generate.threads);
  ds::write_dataset(d, cfg.out);
  prepare_out_dir(cfg);  // after write_dataset so a stale snapshot never outlives data
  double wall = cfg.deterministic ? 0.0 : timer.seconds();
  std::cout << "wrote " << d.samples.size() << " " << d.generator << " samples at " << d.nx
            << "x" << d.ny << " to " << cfg.out << "\n"
            << "failed attempts: " << d.failures.size() << "\n"
            << "wall time: " << fmt_g(wall) << " s\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  if (cfg.train.dataset.empty()) throw ConfigError("config: 'train.dataset' is required");
  WallTimer timer;
  ds::Dataset d = ds::read_dataset(cfg.train.dataset);
  ds::Splits parts = ds::split(d, ds::SplitSizes{cfg.split.train, cfg.split.val, cfg.split.test}, cfg.seed);

  fno::FnoHyperparams hyper;
  hyper.n_d = cfg.fno.n_d;
  hyper.m = cfg.fno.m;
  hyper.n_q = cfg.fno.n_q;
  hyper.pad = cfg.fno.pad;
  hyper.pad_per_layer = cfg.fno.pad_per_layer;
  hyper.predict_u = cfg.fno.predict_u;

  train::TrainConfig tc;
  tc.epochs = cfg.train.epochs;
  tc.batch_size = cfg.train.batch_size;
  tc.lr = cfg.train.lr;
  tc.beta1 = cfg.train.beta1;
  tc.beta2 = cfg.train.beta2;
  tc.eps = cfg.train.eps;
  tc.l2_lambda = cfg.train.l2_lambda;
  tc.weight_decay = cfg.train.weight_decay;
  tc.scheduler = cfg.train.scheduler;
  tc.loss_mode =
      cfg.train.loss == "semi_h1" ? train::LossMode::semi_h1 : train::LossMode::full_h1;
  tc.seed = cfg.seed;

  train::ResumePoint resume_point;
  const train::ResumePoint* resume = nullptr;
  if (!cfg.train.resume.empty()) {
    fs::path prev(cfg.train.resume);
    resume_point.current = fno::load_checkpoint((prev / "checkpoint_last.bin").string());
    resume_point.best = fno::load_checkpoint((prev / "checkpoint_best.bin").string());
    resume_point.state = train::load_train_state((prev / "state_last.bin").string());
    resume = &resume_point;
  }

  fs::path dir = prepare_out_dir(cfg);
  std::ofstream log(dir / "log.csv", std::ios::trunc);
  log << train::epoch_csv_header() << "\n";
  if (!log) throw IoError("cannot write " + (dir / "log.csv").string());

  // The callback keeps the latest state so the run is resumable from disk
  // at checkpoint_every granularity and always from its final epoch.
  fno::FnoParams last_params, best_params;
  train::TrainState last_state;
  bool seen_epoch = false;
  auto save_resume_files = [&]() {
    fno::save_checkpoint(last_params, (dir / "checkpoint_last.bin").string());
    fno::save_checkpoint(best_params, (dir / "checkpoint_best.bin").string());
    train::save_train_state(last_state, (dir / "state_last.bin").string());
  };
  auto on_epoch = [&](const train::EpochRow& row, const fno::FnoParams& current,
                      const fno::FnoParams& best, const train::TrainState& st) {
    log << train::epoch_csv_row(row) << "\n";
    log.flush();
    last_params = current;
    best_params = best;
    last_state = st;
    seen_epoch = true;
    if (cfg.train.checkpoint_every > 0 && row.epoch % cfg.train.checkpoint_every == 0) {
      fno::save_checkpoint(current,
                           (dir / ("checkpoint_epoch_" + std::to_string(row.epoch) + ".bin"))
                               .string());
      save_resume_files();
    }
  };

  train::TrainResult res =
      train::train(parts.train.samples, parts.val.samples, hyper, tc, on_epoch, resume);
  if (seen_epoch) {
    save_resume_files();
  } else {
    fno::save_checkpoint(res.best, (dir / "checkpoint_best.bin").string());
  }

  train::EvalSummary vs = train::evaluate(res.best, parts.val.samples);
  int total_epochs = seen_epoch ? last_state.epoch : (resume ? resume_point.state.epoch : 0);
  int best_epoch = seen_epoch ? last_state.best_epoch : (resume ? resume_point.state.best_epoch : 0);
  double best_val = seen_epoch
                        ? last_state.best_val
                        : (resume ? resume_point.state.best_val
                                  : std::numeric_limits<double>::infinity());
  double wall = cfg.deterministic ? 0.0 : timer.seconds();

  json summary;
  summary["epochs_run"] = res.log.size();
  summary["epoch"] = total_epochs;
  summary["best_epoch"] = best_epoch;
  summary["best_val_loss"] = json_or_null(best_val);
  summary["val_e1"] = {{"mean", vs.mean}, {"median", vs.median}, {"q1", vs.q1}, {"q3", vs.q3}};
  summary["wall_seconds"] = wall;
  write_text(dir / "summary.json", summary.dump(2) + "\n");

  std::cout << "trained " << res.log.size() << " epochs (total " << total_epochs << ") on "
            << parts.train.samples.size() << " samples\n"
            << "best val loss " << fmt_g(best_val) << " at epoch " << best_epoch << "\n"
            << "val E1 mean " << fmt_g(vs.mean) << ", median " << fmt_g(vs.median) << "\n"
            << "wall time: " << fmt_g(wall) << " s\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  if (cfg.evaluate.dataset.empty()) throw ConfigError("config: 'evaluate.dataset' is required");
  std::vector<std::string> checkpoints = cfg.evaluate.checkpoints;
  if (checkpoints.empty() && !cfg.evaluate.checkpoint.empty())
    checkpoints.push_back(cfg.evaluate.checkpoint);
  if (checkpoints.empty())
    throw ConfigError("config: 'evaluate.checkpoint' or 'evaluate.checkpoints' is required");

  WallTimer timer;
  ds::Dataset d = ds::read_dataset(cfg.evaluate.dataset);
  if (d.samples.empty()) throw ConfigError("evaluate: dataset is empty");
  EvalInputs in = eval_inputs(d);

  // Optional geometry-novelty column: distance from each evaluated boundary
  // to the nearest boundary of a reference (training) dataset.
  bool with_hausdorff = !cfg.evaluate.hausdorff_against.empty();
  std::vector<double> hausdorff_min;
  if (with_hausdorff) {
    ds::Dataset ref = ds::read_dataset(cfg.evaluate.hausdorff_against);
    if (ref.samples.empty()) throw ConfigError("evaluate: hausdorff_against dataset is empty");
    std::vector<std::vector<std::array<double, 2>>> ref_pts;
    ref_pts.reserve(ref.samples.size());
    for (const Sample& s : ref.samples) ref_pts.push_back(geometry::zero_levelset_points(s.phi));
    hausdorff_min.reserve(d.samples.size());
    for (const Sample& s : d.samples) {
      std::vector<std::array<double, 2>> pts = geometry::zero_levelset_points(s.phi);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& rp : ref_pts)
        best = std::min(best, geometry::hausdorff_distance(pts, rp));
      hausdorff_min.push_back(best);
    }
  }

  fs::path dir = prepare_out_dir(cfg);
  std::string csv = with_hausdorff ? "checkpoint,index,e1,wall_ms,hausdorff_min\n"
                                   : "checkpoint,index,e1,wall_ms\n";
  json summary = json::array();

  for (const std::string& ck_path : checkpoints) {
    fno::FnoParams p = fno::load_checkpoint(ck_path);
    std::vector<double> e1s;
    e1s.reserve(d.samples.size());
    double wall_ms_total = 0.0;
    for (size_t k = 0; k < d.samples.size(); ++k) {
      const Sample& s = d.samples[k];
      WallTimer t;
      FieldGrid u_pred = predict_sample(p, s.f, s.phi, s.g);
      double ms = cfg.deterministic ? 0.0 : t.seconds() * 1e3;
      double e1 = train::metric_E1(in.u_true[k], u_pred, in.masks[k].s0);
      e1s.push_back(e1);
      wall_ms_total += ms;
      csv += ck_path + "," + std::to_string(k) + "," + fmt_g(e1) + "," + fmt_g(ms);
      if (with_hausdorff) csv += "," + fmt_g(hausdorff_min[k]);
      csv += "\n";
    }
    train::EvalSummary es = train::summarize(e1s);
    summary.push_back({{"checkpoint", ck_path},
                       {"n", e1s.size()},
                       {"mean", es.mean},
                       {"median", es.median},
                       {"q1", es.q1},
                       {"q3", es.q3},
                       {"mean_wall_ms", wall_ms_total / static_cast<double>(e1s.size())}});
    std::cout << ck_path << ": n " << e1s.size() << ", E1 mean " << fmt_g(es.mean)
              << ", median " << fmt_g(es.median) << ", q1 " << fmt_g(es.q1) << ", q3 "
              << fmt_g(es.q3) << "\n";
  }

  write_text(dir / "per_sample.csv", csv);
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  std::cout << "wall time: " << fmt_g(cfg.deterministic ? 0.0 : timer.seconds()) << " s\n";
  return 0;
}

int cmd_convergence(const RunConfig& cfg) {
  fem::PoissonCase pc = manufactured_case(cfg.convergence.case_id);
  geometry::ScalarField domain = study_domain(cfg);
  std::vector<fem::ConvergenceRow> rows =
      fem::convergence_study(pc, domain, cfg.convergence.resolutions, cfg.sigma_d);

  fs::path dir = prepare_out_dir(cfg);
  std::string csv = convergence_csv(rows);
  write_text(dir / "convergence.csv", csv);

  std::cout << "case " << pc.name << " on " << cfg.convergence.domain << ", sigma_d "
            << fmt_g(cfg.sigma_d) << "\n"
            << csv;
  return 0;
}

int cmd_predict(const RunConfig& cfg) {
  if (cfg.predict.checkpoint.empty())
    throw ConfigError("config: 'predict.checkpoint' is required");
  bool dataset_mode = !cfg.predict.dataset.empty();
  bool raw_mode =
      !cfg.predict.f.empty() || !cfg.predict.phi.empty() || !cfg.predict.g.empty();
  if (dataset_mode == raw_mode)
    throw ConfigError(
        "config: predict needs either 'predict.dataset' + 'predict.index' or all three of "
        "'predict.f', 'predict.phi', 'predict.g'");

  fno::FnoParams p = fno::load_checkpoint(cfg.predict.checkpoint);

  FieldGrid f, phi, g;
  FieldGrid u_true;  // empty unless the dataset carries the reference solution
  json source;
  if (dataset_mode) {
    if (cfg.predict.index < 0) throw ConfigError("config: 'predict.index' is required");
    ds::Dataset d = ds::read_dataset(cfg.predict.dataset);
    if (static_cast<size_t>(cfg.predict.index) >= d.samples.size())
      throw ConfigError("config: 'predict.index' is out of range (dataset has " +
                        std::to_string(d.samples.size()) + " samples)");
    const Sample& s = d.samples[static_cast<size_t>(cfg.predict.index)];
    f = s.f;
    phi = s.phi;
    g = s.g;
    u_true = fem::reconstruct_u(s.phi, s.w, s.g);
    source = {{"dataset", cfg.predict.dataset}, {"index", cfg.predict.index}};
  } else {
    if (cfg.predict.f.empty() || cfg.predict.phi.empty() || cfg.predict.g.empty())
      throw ConfigError("config: raw-grid predict needs all of 'predict.f', 'predict.phi', "
                        "'predict.g'");
    f = read_grid_file(cfg.predict.f);
    phi = read_grid_file(cfg.predict.phi);
    g = read_grid_file(cfg.predict.g);
    if (!f.same_shape(phi) || !f.same_shape(g))
      throw ConfigError("predict: input grids disagree on shape");
    source = {{"f", cfg.predict.f}, {"phi", cfg.predict.phi}, {"g", cfg.predict.g}};
  }

  WallTimer t;
  FieldGrid out = fno::fno_forward(p, f, phi, g);
  FieldGrid u_pred = p.hyper.predict_u ? out : fem::reconstruct_u(phi, out, g);
  double ms = cfg.deterministic ? 0.0 : t.seconds() * 1e3;

  fs::path dir = prepare_out_dir(cfg);
  if (!p.hyper.predict_u) write_grid_file(out, (dir / "w_theta.f64").string());
  write_grid_file(u_pred, (dir / "u_theta.f64").string());

  json report;
  report["checkpoint"] = cfg.predict.checkpoint;
  report["output"] = p.hyper.predict_u ? "u" : "w";
  report["source"] = source;
  report["nx"] = u_pred.nx;
  report["ny"] = u_pred.ny;
  report["wall_ms"] = ms;
  if (u_true.nx > 0) {
    mesh::BackgroundMesh bg = mesh::build_background_mesh(phi.nx, phi.ny);
    mesh::PixelMasks masks = mesh::build_pixel_masks(mesh::classify_cells(bg, phi), bg);
    double e1 = train::metric_E1(u_true, u_pred, masks.s0);
    report["e1"] = e1;
    std::cout << "E1 vs stored solution: " << fmt_g(e1) << "\n";
  } else {
    std::cout << "no reference solution available; wrote prediction only\n";
  }
  write_text(dir / "report.json", report.dump(2) + "\n");
  return 0;
}

}  // namespace phifno::cli
