// Acceptance gate for the whole pipeline: each numbered criterion prints one
// PASS/FAIL verdict line (with its wall time) plus the measured quantities it
// judges, and the process exits nonzero if any criterion fails. Stated
// runtime bounds are part of the criteria and are enforced, except the
// smoke-training target which is reported only.

#include <unistd.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "support/dense_assembler.hpp"
#include "phifno/dataset.hpp"
#include "phifno/errors.hpp"
#include "phifno/fno.hpp"
#include "phifno/geometry.hpp"
#include "phifno/grid.hpp"
#include "phifno/hyperelastic.hpp"
#include "phifno/mesh.hpp"
#include "phifno/poisson.hpp"
#include "phifno/rng.hpp"
#include "phifno/tensor.hpp"
#include "phifno/training.hpp"

using namespace phifno;
using ad::MaskStack;
using ad::Shape;
using ad::Tape;
using ad::Tensor;

namespace {

int g_failed = 0;

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void note(const char* fmt, ...) {
  std::printf("       ");
  va_list args;
  va_start(args, fmt);
  std::vprintf(fmt, args);
  va_end(args);
  std::printf("\n");
}

void verdict(int id, bool ok, double secs, const char* what) {
  std::printf("[%s] %2d. %s (%.2f s)\n", ok ? "PASS" : "FAIL", id, what, secs);
  std::fflush(stdout);
  if (!ok) ++g_failed;
}

// Runs one criterion body, turning any escape into a FAIL instead of
// aborting the remaining criteria.
template <typename Fn>
void criterion(int id, const char* what, Fn body) {
  Stopwatch sw;
  bool ok = false;
  try {
    ok = body();
  } catch (const std::exception& e) {
    note("threw: %s", e.what());
    ok = false;
  }
  verdict(id, ok, sw.seconds(), what);
}

FieldGrid sample_field(const geometry::ScalarField& f, int nx, int ny) {
  FieldGrid out(nx, ny);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) out.at(i, j) = f(out.x_of(i), out.y_of(j));
  return out;
}

mesh::PixelMasks masks_of(const FieldGrid& phi) {
  const auto bg = mesh::build_background_mesh(phi.nx, phi.ny);
  return mesh::build_pixel_masks(mesh::classify_cells(bg, phi), bg);
}

geometry::ScalarField disk_domain() {
  return [](double x, double y) {
    return (x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5) - 0.3 * 0.3;
  };
}

fem::PoissonCase sine_case() {
  auto u = [](double x, double y) { return std::sin(M_PI * x) * std::sin(M_PI * y); };
  auto f = [](double x, double y) {
    return 2.0 * M_PI * M_PI * std::sin(M_PI * x) * std::sin(M_PI * y);
  };
  return {"sine", u, f, u};
}

fem::PoissonCase affine_case() {
  auto u = [](double x, double y) { return 0.7 * x - 0.2 * y + 0.4; };
  return {"affine", u, [](double, double) { return 0.0; }, u};
}

// Mean per-sample H1 loss of a checkpoint over a sample set, computed the
// same way the training loop reports it.
double mean_loss(const fno::FnoParams& p, const std::vector<Sample>& set) {
  double total = 0.0;
  for (const Sample& s : set) {
    const int nx = s.phi.nx, ny = s.phi.ny;
    mesh::PixelMasks pm = masks_of(s.phi);
    FieldGrid u_true = fem::reconstruct_u(s.phi, s.w, s.g);
    FieldGrid out = fno::fno_forward(p, s.f, s.phi, s.g);
    FieldGrid u_pred = p.hyper.predict_u ? out : fem::reconstruct_u(s.phi, out, s.g);
    MaskStack s0{1, nx, ny, pm.s0}, s1{1, nx, ny, pm.s1};
    Tensor ut = Tensor::constant(Shape::grid4(1, 1, nx, ny), u_true.v);
    Tensor up = Tensor::constant(Shape::grid4(1, 1, nx, ny), u_pred.v);
    total += train::loss(ut, up, s0, s1, train::LossMode::full_h1, 1.0 / (nx - 1),
                         1.0 / (ny - 1))
                 .value_at(0);
  }
  return total / static_cast<double>(set.size());
}

// Shared fixture: the smoke-training run of criterion 5, reused by the
// multi-resolution check of criterion 7.
constexpr uint64_t kSmokeSeed = 505;
constexpr double kSmokeMargin = 2.0 / 31.0;  // the 32x32 default, pinned for both grids
fno::FnoParams g_smoke_best;
dataset::Dataset g_smoke_data;
bool g_smoke_ready = false;

bool run_criterion_1() {
  fno::FnoHyperparams h;  // n_d=20, m=10, n_q=128, c_in=3
  int64_t count = fno::param_count(h);
  Rng rng(1);
  fno::FnoParams p = fno::init_params(h, rng);
  note("param_count = %lld, blob length = %zu", static_cast<long long>(count),
       p.blob.size());
  return count == 324577 && p.blob.size() == 324577u;
}

bool run_criterion_2(double budget) {
  Stopwatch sw;
  const std::vector<int> ladder{17, 33, 65, 129};
  Rng rng(2024);
  geometry::ScalarField ellipse =
      geometry::ellipse_levelset_field(geometry::sample_ellipse(rng, 2.0 / 16.0));

  bool ok = true;
  auto run_domain = [&](const char* name, const geometry::ScalarField& dom) {
    std::vector<fem::ConvergenceRow> rows = fem::convergence_study(sine_case(), dom, ladder);
    std::string line = std::string("sine on ") + name + ", orders:";
    for (const fem::ConvergenceRow& r : rows)
      if (r.order) {
        char buf[32];
        std::snprintf(buf, sizeof buf, " %.4f", *r.order);
        line += buf;
        ok = ok && *r.order >= 1.8 && *r.order <= 2.6;
      }
    note("%s", line.c_str());

    std::vector<fem::ConvergenceRow> flat = fem::convergence_study(affine_case(), dom, ladder);
    double worst = 0.0;
    for (const fem::ConvergenceRow& r : flat) worst = std::max(worst, r.error);
    note("affine on %s, max error: %.3e", name, worst);
    ok = ok && worst <= 1e-9;
  };
  run_domain("disk", disk_domain());
  run_domain("random ellipse", ellipse);
  return ok && sw.seconds() < budget;
}

bool run_criterion_3() {
  Stopwatch sw;
  const int n = 8;
  auto force = [](double x, double y) { return 3.0 + std::sin(5.0 * x) * y; };
  auto bc = [](double x, double y) { return 0.3 * x - 0.7 * y + 0.1; };
  mesh::BackgroundMesh msh = mesh::build_background_mesh(n, n);
  FieldGrid phi = sample_field(disk_domain(), n, n);
  FieldGrid f = sample_field(force, n, n);
  FieldGrid g = sample_field(bc, n, n);
  mesh::CellClassification cls = mesh::classify_cells(msh, phi);

  auto [sys, map] = fem::assemble(msh, cls, phi, f, g, 1.0);
  phifno_test::DenseSystem ref = phifno_test::assemble_dense(msh, cls, phi, f, g, 1.0, map);
  double dA = (Eigen::MatrixXd(sys.A) - ref.A).cwiseAbs().maxCoeff();
  double db = (sys.b - ref.b).cwiseAbs().maxCoeff();
  note("max |A - A_ref| = %.3e, max |b - b_ref| = %.3e", dA, db);
  return dA <= 1e-12 && db <= 1e-12 && sw.seconds() < 10.0;
}

bool run_criterion_4() {
  Stopwatch sw;
  const int nx = 16, ny = 16, b = 2;
  fno::FnoHyperparams h{4, 3, 16, 3, 2, false, false};

  // two synthetic solved-looking samples over offset disks
  std::vector<Sample> set;
  Rng gen(41);
  for (int k = 0; k < b; ++k) {
    Sample s{FieldGrid(nx, ny), FieldGrid(nx, ny), FieldGrid(nx, ny), FieldGrid(nx, ny)};
    double cx = 0.45 + 0.1 * k, r = 0.28 + 0.03 * k;
    s.phi = sample_field(
        [cx, r](double x, double y) {
          return (x - cx) * (x - cx) + (y - 0.5) * (y - 0.5) - r * r;
        },
        nx, ny);
    s.f = sample_field(
        [k](double x, double y) { return std::sin(2 * M_PI * x) * std::cos(2 * M_PI * y) + k; },
        nx, ny);
    s.g = sample_field([k](double x, double y) { return 0.3 * x - 0.2 * y + 0.1 * k; }, nx, ny);
    s.w = sample_field([](double x, double y) { return 1.0 + x * y; }, nx, ny);
    set.push_back(std::move(s));
  }
  std::vector<mesh::PixelMasks> pm;
  for (const Sample& s : set) pm.push_back(masks_of(s.phi));

  fno::FnoParams p = fno::init_params(h, gen);
  p.stats = fno::compute_channel_stats(set, pm, false);

  // batched constant inputs and masks
  std::vector<const Sample*> ptrs{&set[0], &set[1]};
  Tensor x0 = Tensor::constant(Shape::grid4(b, 3, nx, ny), fno::stack_inputs(ptrs));
  std::vector<double> phi_v, g_v, ut_v;
  MaskStack s0{b, nx, ny, {}}, s1{b, nx, ny, {}};
  for (const Sample& s : set) {
    phi_v.insert(phi_v.end(), s.phi.v.begin(), s.phi.v.end());
    g_v.insert(g_v.end(), s.g.v.begin(), s.g.v.end());
    FieldGrid u = fem::reconstruct_u(s.phi, s.w, s.g);
    ut_v.insert(ut_v.end(), u.v.begin(), u.v.end());
  }
  for (const mesh::PixelMasks& m : pm) {
    s0.v.insert(s0.v.end(), m.s0.begin(), m.s0.end());
    s1.v.insert(s1.v.end(), m.s1.begin(), m.s1.end());
  }
  Tensor phi_t = Tensor::constant(Shape::grid4(b, 1, nx, ny), phi_v);
  Tensor g_t = Tensor::constant(Shape::grid4(b, 1, nx, ny), g_v);
  Tensor u_true = Tensor::constant(Shape::grid4(b, 1, nx, ny), ut_v);

  // loss composed with the full forward pass, w lifted to u
  auto loss_of = [&](const fno::FnoParams& params, Tape* tape, fno::ParamLeaves* out) {
    fno::ParamLeaves lv = fno::make_leaves(params, tape);
    Tensor w = fno::fno_forward(params.hyper, params.stats, lv, x0);
    Tensor u = ad::add(ad::mul(w, phi_t), g_t);
    if (out) *out = lv;
    return train::loss(u_true, u, s0, s1, train::LossMode::full_h1, 1.0 / (nx - 1),
                       1.0 / (ny - 1));
  };

  Tape tape;
  fno::ParamLeaves leaves;
  Tensor y = loss_of(p, &tape, &leaves);
  tape.backward(y);
  std::vector<double> grad = fno::gather_grads(tape, leaves);
  if (grad.size() != p.blob.size()) {
    note("gradient length %zu != parameter count %zu", grad.size(), p.blob.size());
    return false;
  }

  const double step = 1e-5;
  double worst = 0.0;
  Rng pick(42);
  for (int t = 0; t < 50; ++t) {
    size_t k = pick.index(p.blob.size());
    fno::FnoParams plus = p, minus = p;
    plus.blob[k] += step;
    minus.blob[k] -= step;
    double fd = (loss_of(plus, nullptr, nullptr).value_at(0) -
                 loss_of(minus, nullptr, nullptr).value_at(0)) /
                (2.0 * step);
    double rel = std::abs(grad[k] - fd) / std::max({1.0, std::abs(fd), std::abs(grad[k])});
    worst = std::max(worst, rel);
  }
  note("worst relative gradient error over 50 coordinates: %.3e", worst);
  return worst <= 1e-4 && sw.seconds() < 120.0;
}

bool run_criterion_5() {
  Stopwatch sw;
  g_smoke_data = dataset::generate_ellipse_dataset(100, 32, 32, kSmokeSeed, 1.0, kSmokeMargin);
  dataset::Splits parts = dataset::split(g_smoke_data, {80, 20, 0}, kSmokeSeed);

  fno::FnoHyperparams h{8, 6, 32, 3, 8, false, false};
  train::TrainConfig tc;
  tc.epochs = 200;
  tc.batch_size = 8;
  tc.lr = 1e-3;
  tc.seed = kSmokeSeed;

  // validation loss of the untrained network, the epoch-0 reference
  train::TrainConfig tc0 = tc;
  tc0.epochs = 0;
  fno::FnoParams init =
      train::train(parts.train.samples, parts.val.samples, h, tc0).best;
  double loss0 = mean_loss(init, parts.val.samples);

  train::TrainResult res = train::train(parts.train.samples, parts.val.samples, h, tc);
  double best_val = loss0;
  for (const train::EpochRow& r : res.log) best_val = std::min(best_val, r.val_loss);
  train::EvalSummary es = train::evaluate(res.best, parts.val.samples);

  g_smoke_best = res.best;
  g_smoke_ready = true;

  note("epoch-0 val loss %.4f, best val loss %.4f (ratio %.1fx, need >= 5x)", loss0,
       best_val, loss0 / best_val);
  note("mean val E1 %.4f (need <= 0.2); wall %.0f s against the 1800 s target", es.mean,
       sw.seconds());
  return best_val <= loss0 / 5.0 && es.mean <= 0.2;
}

bool run_criterion_6() {
  Stopwatch sw;
  const int nx = 16, ny = 16;
  fno::FnoHyperparams h{4, 3, 8, 3, 3, false, false};
  Rng rng(151);
  fno::FnoParams p = fno::init_params(h, rng);

  int zeros_checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    FieldGrid f(nx, ny), phi(nx, ny), g(nx, ny);
    for (size_t k = 0; k < f.size(); ++k) {
      f.v[k] = rng.uniform(-2.0, 2.0);
      phi.v[k] = rng.uniform(-1.0, 1.0);
      g.v[k] = rng.uniform(-1.0, 1.0);
    }
    for (int k = 0; k < 12; ++k)
      phi.at(static_cast<int>(rng.index(nx)), static_cast<int>(rng.index(ny))) = 0.0;

    FieldGrid w = fno::fno_forward(p, f, phi, g);
    FieldGrid u = fem::reconstruct_u(phi, w, g);
    for (size_t k = 0; k < u.size(); ++k)
      if (phi.v[k] == 0.0) {
        ++zeros_checked;
        if (std::memcmp(&u.v[k], &g.v[k], sizeof(double)) != 0) {
          note("trial %d: u differs from g at a phi=0 node", trial);
          return false;
        }
      }
  }
  note("u matched g bitwise at %d planted zero-level nodes over 20 instances", zeros_checked);
  return zeros_checked > 0 && sw.seconds() < 10.0;
}

bool run_criterion_7() {
  Stopwatch sw;
  if (!g_smoke_ready) {
    note("smoke-training checkpoint unavailable");
    return false;
  }
  // matched dataset: same seeds and margin, finer grid
  dataset::Dataset d64 =
      dataset::generate_ellipse_dataset(100, 64, 64, kSmokeSeed, 1.0, kSmokeMargin);
  train::EvalSummary e32 = train::evaluate(g_smoke_best, g_smoke_data.samples);
  train::EvalSummary e64 = train::evaluate(g_smoke_best, d64.samples);
  bool finite = true;
  for (double v : e64.e1) finite = finite && std::isfinite(v);
  note("mean E1: %.4f at 32x32, %.4f at 64x64 (ratio %.2f, need <= 2)", e32.mean, e64.mean,
       e64.mean / e32.mean);
  return finite && e64.mean <= 2.0 * e32.mean && sw.seconds() < 300.0;
}

bool run_criterion_8() {
  Stopwatch sw;
  hyper::MaterialParams lame = hyper::lame_from_youngs(0.97, 0.3);
  double mu_err = std::abs(lame.mu - 0.3730769230769231) / 0.3730769230769231;
  double la_err = std::abs(lame.lambda - 0.5596153846153846) / 0.5596153846153846;

  hyper::MaterialParams mat{0.8, 1.3};
  double p_ref = hyper::first_piola(Eigen::Matrix2d::Identity(), mat).cwiseAbs().maxCoeff();

  Rng rng(77);
  const double step = 1e-6;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::Matrix2d F;
    do {
      F = Eigen::Matrix2d::Identity();
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) F(r, c) += rng.uniform(-0.3, 0.3);
    } while (F.determinant() <= 0.05);
    Eigen::Matrix2d P = hyper::first_piola(F, mat);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) {
        Eigen::Matrix2d hi = F, lo = F;
        hi(r, c) += step;
        lo(r, c) -= step;
        double fd =
            (hyper::neo_hookean_energy(hi, mat) - hyper::neo_hookean_energy(lo, mat)) /
            (2.0 * step);
        worst = std::max(worst, std::abs(P(r, c) - fd) /
                                    std::max({1.0, std::abs(fd), std::abs(P(r, c))}));
      }
  }
  note("|P(I)| = %.1e exactly; worst P-vs-FD relative error %.3e over 100 F", p_ref, worst);
  note("lame relative errors: mu %.1e, lambda %.1e", mu_err, la_err);
  return p_ref == 0.0 && worst <= 1e-6 && mu_err <= 5e-7 && la_err <= 5e-7 &&
         sw.seconds() < 10.0;
}

bool run_criterion_9() {
  Stopwatch sw;
  // five ADAM steps against the textbook recurrence written out by hand
  train::TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.weight_decay = 0.01;
  const std::vector<double> g{0.8, -0.2};
  std::vector<double> theta{1.0, -1.0};
  std::vector<double> ref = theta;
  double m0 = 0, m1 = 0, v0 = 0, v1 = 0;
  train::AdamState st;
  double worst = 0.0;
  for (int t = 1; t <= 5; ++t) {
    train::adam_step(theta, g, st, cfg, cfg.lr);
    m0 = cfg.beta1 * m0 + (1 - cfg.beta1) * g[0];
    m1 = cfg.beta1 * m1 + (1 - cfg.beta1) * g[1];
    v0 = cfg.beta2 * v0 + (1 - cfg.beta2) * g[0] * g[0];
    v1 = cfg.beta2 * v1 + (1 - cfg.beta2) * g[1] * g[1];
    double bc1 = 1 - std::pow(cfg.beta1, t), bc2 = 1 - std::pow(cfg.beta2, t);
    ref[0] -= cfg.lr * (m0 / bc1) / (std::sqrt(v0 / bc2) + cfg.eps) + 0.01 * ref[0];
    ref[1] -= cfg.lr * (m1 / bc1) / (std::sqrt(v1 / bc2) + cfg.eps) + 0.01 * ref[1];
    worst = std::max({worst, std::abs(theta[0] - ref[0]), std::abs(theta[1] - ref[1])});
  }
  note("worst ADAM deviation over 5 steps: %.2e", worst);
  bool adam_ok = worst <= 1e-14 && st.t == 5;

  // plateau boundaries: constant loss halves exactly every `patience` observations
  train::SchedulerConfig sc{0.5, 3, 1e-6};
  train::PlateauScheduler sched(sc, 1e-3);
  std::vector<double> want{1e-3, 1e-3, 5e-4, 5e-4, 5e-4, 2.5e-4, 2.5e-4, 2.5e-4, 1.25e-4};
  bool sched_ok = true;
  for (double expected : want) {
    sched.observe(1.0);
    sched_ok = sched_ok && sched.lr() == expected;
  }
  // strictly improving losses never trigger a cut
  train::PlateauScheduler sched2(sc, 1e-3);
  for (int k = 0; k < 50; ++k) sched2.observe(1.0 / (k + 1));
  sched_ok = sched_ok && sched2.lr() == 1e-3;
  note("plateau halvings landed on the expected boundaries: %s", sched_ok ? "yes" : "no");
  return adam_ok && sched_ok && sw.seconds() < 1.0;
}

bool run_criterion_10() {
  Stopwatch sw;
  dataset::Dataset d = dataset::generate_ellipse_dataset(10, 32, 32, 911, 1.0);

  // round-trip through the on-disk container
  std::string dir = "/tmp/acceptance_ds_" + std::to_string(::getpid());
  dataset::write_dataset(d, dir);
  dataset::Dataset back = dataset::read_dataset(dir);
  bool bitwise = back.samples.size() == d.samples.size();
  for (size_t k = 0; bitwise && k < d.samples.size(); ++k) {
    const Sample &a = d.samples[k], &b = back.samples[k];
    const std::array<std::pair<const FieldGrid*, const FieldGrid*>, 4> fields{
        {{&a.f, &b.f}, {&a.phi, &b.phi}, {&a.g, &b.g}, {&a.w, &b.w}}};
    for (const auto& pr : fields)
      bitwise = bitwise && pr.first->v.size() == pr.second->v.size() &&
                std::memcmp(pr.first->v.data(), pr.second->v.data(),
                            pr.first->v.size() * 8) == 0;
  }
  note("write/read round-trip bitwise: %s", bitwise ? "yes" : "no");

  // re-solving the stored inputs reproduces the stored solution
  double worst_e1 = 0.0;
  for (const Sample& s : d.samples) {
    FieldGrid w2 = fem::ground_truth(s.f, s.phi, s.g, d.sigma_d);
    mesh::PixelMasks pm = masks_of(s.phi);
    double e1 = train::metric_E1(fem::reconstruct_u(s.phi, s.w, s.g),
                                 fem::reconstruct_u(s.phi, w2, s.g), pm.s0);
    worst_e1 = std::max(worst_e1, e1);
  }
  note("worst regeneration E1: %.3e", worst_e1);

  // a threaded run must produce the very same bytes
  dataset::Dataset par = dataset::generate_ellipse_dataset(10, 32, 32, 911, 1.0, -1.0, 3);
  bool same = par.samples.size() == d.samples.size();
  for (size_t k = 0; same && k < d.samples.size(); ++k)
    same = std::memcmp(par.samples[k].w.v.data(), d.samples[k].w.v.data(),
                       d.samples[k].w.v.size() * 8) == 0 &&
           par.records[k].seed == d.records[k].seed &&
           par.records[k].params == d.records[k].params;
  note("parallel generation equals sequential: %s", same ? "yes" : "no");
  std::filesystem::remove_all(dir);
  return bitwise && worst_e1 <= 1e-10 && same && sw.seconds() < 120.0;
}

bool run_criterion_11() {
  Stopwatch sw;
  const int nx = 12, ny = 10;
  FieldGrid u = sample_field(
      [](double x, double y) { return std::sin(3 * x) + 0.5 * y * y + 0.25; }, nx, ny);
  MaskStack s0{1, nx, ny, std::vector<uint8_t>(nx * ny, 1)};
  MaskStack s1 = s0;
  // zero the border of the gradient mask the way the mesh masks do
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      if (i == 0 || j == 0 || i == nx - 1 || j == ny - 1) s1.v[i * ny + j] = 0;

  auto loss_val = [&](const FieldGrid& a, const FieldGrid& b, train::LossMode mode) {
    Tensor ta = Tensor::constant(Shape::grid4(1, 1, nx, ny), a.v);
    Tensor tb = Tensor::constant(Shape::grid4(1, 1, nx, ny), b.v);
    return train::loss(ta, tb, s0, s1, mode, 1.0 / (nx - 1), 1.0 / (ny - 1)).value_at(0);
  };

  double self_full = loss_val(u, u, train::LossMode::full_h1);
  double self_semi = loss_val(u, u, train::LossMode::semi_h1);

  FieldGrid zero(nx, ny), twice = u, shifted = u;
  for (size_t k = 0; k < u.size(); ++k) twice.v[k] = 2.0 * u.v[k];
  for (size_t k = 0; k < u.size(); ++k) shifted.v[k] = u.v[k] + 0.37;
  double e1_zero = train::metric_E1(u, zero, s0.v);
  double e1_twice = train::metric_E1(u, twice, s0.v);
  double shift_gap = std::abs(loss_val(u, shifted, train::LossMode::semi_h1));

  note("loss(u,u) = %.1e (full), %.1e (semi); E1(u,0) = %.17g; E1(u,2u) = %.17g", self_full,
       self_semi, e1_zero, e1_twice);
  note("semi_h1 loss under a constant shift: %.2e", shift_gap);
  return self_full == 0.0 && self_semi == 0.0 && e1_zero == 1.0 && e1_twice == 1.0 &&
         shift_gap <= 1e-12 && sw.seconds() < 1.0;
}

}  // namespace

int main() {
  criterion(1, "parameter count 324577 matches the serialized blob", run_criterion_1);
  criterion(2, "convergence orders in [1.8, 2.6] on disk and random ellipse, affine exact",
            [] { return run_criterion_2(120.0); });
  criterion(3, "sparse assembly matches the dense quadrature oracle to 1e-12", run_criterion_3);
  criterion(4, "end-to-end loss gradient matches central differences to 1e-4",
            run_criterion_4);
  criterion(5, "smoke training cuts val loss 5x and reaches mean E1 <= 0.2",
            run_criterion_5);
  criterion(6, "reconstructed u equals g bitwise wherever phi vanishes", run_criterion_6);
  criterion(7, "32x32 checkpoint transfers to 64x64 within 2x mean E1", run_criterion_7);
  criterion(8, "neo-Hookean stress: P(I) = 0, FD match 1e-6, lame values to 6 digits",
            run_criterion_8);
  criterion(9, "ADAM recurrence to 1e-14 and plateau halvings on the boundaries",
            run_criterion_9);
  criterion(10, "dataset round-trip bitwise, regeneration E1 <= 1e-10, parallel = sequential",
            run_criterion_10);
  criterion(11, "loss and metric identities hold exactly", run_criterion_11);

  if (g_failed == 0) {
    std::printf("all 11 acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d acceptance criterion(s) FAILED\n", g_failed);
  return 1;
}
