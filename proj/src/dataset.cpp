#include "phifno/dataset.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "phifno/binio.hpp"
#include "phifno/errors.hpp"
#include "phifno/geometry.hpp"
#include "phifno/mesh.hpp"
#include "phifno/poisson.hpp"
#include "phifno/rng.hpp"

namespace fs = std::filesystem;

namespace phifno::dataset {

namespace {

constexpr int kMaxAttempts = 10;
constexpr int kFormatVersion = 1;

struct GenOut {
  Sample sample;
  SampleRecord record;
  std::vector<std::string> fails;
};

std::string failure_line(int index, int attempt, uint64_t seed, const char* what) {
  std::ostringstream os;
  os << "sample " << index << " attempt " << attempt << " seed " << seed << ": " << what;
  return os.str();
}

// Runs one generator callable per index, optionally across threads. The
// per-index work owns its seed, so the schedule cannot leak into the output.
template <typename Fn>
std::vector<GenOut> run_generation(int n, int threads, const Fn& gen) {
  std::vector<std::optional<GenOut>> slots(n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) slots[i] = gen(i);
  } else {
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex err_lock;
    auto worker = [&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          slots[i] = gen(i);
        } catch (...) {
          std::lock_guard<std::mutex> hold(err_lock);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }
  std::vector<GenOut> out;
  out.reserve(n);
  for (auto& slot : slots) out.push_back(std::move(*slot));
  return out;
}

Dataset collect(std::vector<GenOut> parts, int nx, int ny, double sigma_d,
                const char* generator, uint64_t seed) {
  Dataset d;
  d.nx = nx;
  d.ny = ny;
  d.sigma_d = sigma_d;
  d.generator = generator;
  d.master_seed = seed;
  for (auto& part : parts) {
    d.samples.push_back(std::move(part.sample));
    d.records.push_back(std::move(part.record));
    for (auto& line : part.fails) d.failures.push_back(std::move(line));
  }
  return d;
}

void check_gen_args(int n, int nx, int ny, double sigma_d, int threads) {
  if (n < 1) throw ConfigError("generate: need at least one sample");
  if (nx < 2 || ny < 2) throw ConfigError("generate: grid must be at least 2x2");
  if (!(sigma_d > 0.0)) throw ConfigError("generate: sigma_d must be positive");
  if (threads < 1) throw ConfigError("generate: thread count must be >= 1");
}

nlohmann::json ranges_json(const std::string& generator) {
  nlohmann::json r;
  if (generator == "ellipse") {
    r["x0"] = {0.2, 0.8};
    r["y0"] = {0.2, 0.8};
    r["lx"] = {0.2, 0.45};
    r["ly"] = {0.2, 0.45};
    r["theta"] = {0.0, M_PI};
    r["amplitude"] = {20.0, 30.0};
    r["amplitude_sign"] = "either";
    r["mu0"] = {0.2, 0.8};
    r["mu1"] = {0.2, 0.8};
    r["mu_constraint"] = "phi(mu0, mu1) < -0.15";
    r["sigma_x"] = {0.15, 0.45};
    r["sigma_y"] = {0.15, 0.45};
    r["alpha"] = {-0.8, 0.8};
    r["beta"] = {-0.8, 0.8};
  } else {
    r["centers"] = {0.25, 0.75};
    r["widths"] = {0.01, 0.04};
    r["amplitude"] = {20.0, 30.0};
    r["amplitude_sign"] = "positive";
    r["mu0"] = {0.2, 0.8};
    r["mu1"] = {0.2, 0.8};
    r["sigma_x"] = {0.15, 0.45};
    r["sigma_y"] = {0.15, 0.45};
    r["alpha"] = {-0.8, 0.8};
    r["beta"] = {-0.8, 0.8};
    r["sampling"] = "joint latin hypercube, one stratum per sample and column";
  }
  return r;
}

// The 19 latin-hypercube columns for the gaussian-shape generator, in the
// stored parameter order.
std::vector<std::pair<double, double>> gaussian_ranges() {
  std::vector<std::pair<double, double>> r;
  for (int k = 0; k < 3; ++k) r.emplace_back(0.25, 0.75);  // cx
  for (int k = 0; k < 3; ++k) r.emplace_back(0.25, 0.75);  // cy
  for (int k = 0; k < 3; ++k) r.emplace_back(0.01, 0.04);  // sigma
  for (int k = 0; k < 3; ++k) r.emplace_back(0.01, 0.04);  // gamma
  r.emplace_back(20.0, 30.0);                              // amplitude, positive
  r.emplace_back(0.2, 0.8);                                // mu0
  r.emplace_back(0.2, 0.8);                                // mu1
  r.emplace_back(0.15, 0.45);                              // sigma_x
  r.emplace_back(0.15, 0.45);                              // sigma_y
  r.emplace_back(-0.8, 0.8);                               // alpha
  r.emplace_back(-0.8, 0.8);                               // beta
  return r;
}

Sample solve_sample(const mesh::BackgroundMesh& bg, const geometry::ScalarField& phi_fn,
                    const geometry::ForceParams& fp, const geometry::BoundaryParams& bp,
                    double sigma_d) {
  FieldGrid phi = mesh::interpolate_nodal(phi_fn, bg);
  FieldGrid f = mesh::interpolate_nodal(geometry::gaussian_force(fp), bg);
  FieldGrid g = mesh::interpolate_nodal(geometry::polynomial_cosine_bc(bp), bg);
  FieldGrid w = fem::ground_truth(f, phi, g, sigma_d);
  return Sample{std::move(f), std::move(phi), std::move(g), std::move(w)};
}

void append_grid(std::vector<unsigned char>& blob, const FieldGrid& grid) {
  for (double v : grid.v) binio::append_f64le(blob, v);
}

}  // namespace

uint64_t fnv1a64(const unsigned char* data, size_t n) {
  uint64_t h = 14695981039346656037ull;
  for (size_t k = 0; k < n; ++k) {
    h ^= data[k];
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<std::string> parameter_names(const std::string& generator) {
  if (generator == "ellipse")
    return {"x0",  "y0",  "lx",      "ly",      "theta", "amplitude",
            "mu0", "mu1", "sigma_x", "sigma_y", "alpha", "beta"};
  if (generator == "gaussian_shapes")
    return {"cx1",       "cx2", "cx3", "cy1",     "cy2",     "cy3",   "sigma1",
            "sigma2",    "sigma3", "gamma1", "gamma2", "gamma3", "amplitude",
            "mu0",       "mu1", "sigma_x", "sigma_y", "alpha",   "beta"};
  throw ConfigError("unknown generator: " + generator);
}

Dataset generate_ellipse_dataset(int n, int nx, int ny, uint64_t seed, double sigma_d,
                                 double margin, int threads) {
  check_gen_args(n, nx, ny, sigma_d, threads);
  const double use_margin = margin < 0.0 ? 2.0 / (nx - 1) : margin;
  const mesh::BackgroundMesh bg = mesh::build_background_mesh(nx, ny);

  auto one = [&](int index) -> GenOut {
    GenOut out;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      const uint64_t s = derive_seed(seed, static_cast<uint64_t>(index), attempt);
      Rng rng(s);
      try {
        geometry::EllipseParams ep = geometry::sample_ellipse(rng, use_margin);
        auto phi_fn = geometry::ellipse_levelset_field(ep);
        geometry::ForceParams fp = geometry::sample_force(rng, phi_fn);
        geometry::BoundaryParams bp = geometry::sample_bc(rng);
        out.sample = solve_sample(bg, phi_fn, fp, bp, sigma_d);
        out.record.seed = s;
        out.record.attempts = attempt + 1;
        out.record.params = {ep.x0, ep.y0,       ep.lx,      ep.ly,
                             ep.theta, fp.amplitude, fp.mu0,     fp.mu1,
                             fp.sigma_x, fp.sigma_y,   bp.alpha,   bp.beta};
        return out;
      } catch (const NumericalError& e) {
        out.fails.push_back(failure_line(index, attempt, s, e.what()));
      }
    }
    throw NumericalError("generate: sample " + std::to_string(index) + " failed " +
                         std::to_string(kMaxAttempts) + " times; giving up");
  };

  return collect(run_generation(n, threads, one), nx, ny, sigma_d, "ellipse", seed);
}

Dataset generate_gaussian_shape_dataset(int n, int nx, int ny, uint64_t seed,
                                        double sigma_d, int threads) {
  check_gen_args(n, nx, ny, sigma_d, threads);
  const mesh::BackgroundMesh bg = mesh::build_background_mesh(nx, ny);
  const auto ranges = gaussian_ranges();

  // The joint hypercube is drawn up front on the master seed; the threaded
  // part below only consumes rows.
  Rng master(seed);
  const auto matrix = geometry::latin_hypercube(n, ranges, master);

  auto one = [&](int index) -> GenOut {
    GenOut out;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      const uint64_t s = derive_seed(seed, static_cast<uint64_t>(index), attempt);
      std::vector<double> p;
      if (attempt == 0) {
        p = matrix[index];
      } else {
        // A failed solve cannot be retried verbatim (it is deterministic), so
        // later attempts leave the hypercube and redraw uniformly.
        Rng rng(s);
        p.reserve(ranges.size());
        for (const auto& [lo, hi] : ranges) p.push_back(rng.uniform(lo, hi));
      }
      try {
        geometry::GaussianSumParams gp;
        for (int k = 0; k < 3; ++k) {
          gp.cx[k] = p[k];
          gp.cy[k] = p[3 + k];
          gp.sx[k] = p[6 + k];
          gp.sy[k] = p[9 + k];
        }
        geometry::ForceParams fp;
        fp.amplitude = p[12];
        fp.mu0 = p[13];
        fp.mu1 = p[14];
        fp.sigma_x = p[15];
        fp.sigma_y = p[16];
        geometry::BoundaryParams bp{p[17], p[18]};

        auto phi_fn = geometry::gaussian_sum_levelset(gp, nx, ny);
        out.sample = solve_sample(bg, phi_fn, fp, bp, sigma_d);
        out.record.seed = s;
        out.record.attempts = attempt + 1;
        out.record.params = std::move(p);
        return out;
      } catch (const NumericalError& e) {
        out.fails.push_back(failure_line(index, attempt, s, e.what()));
      }
    }
    throw NumericalError("generate: sample " + std::to_string(index) + " failed " +
                         std::to_string(kMaxAttempts) + " times; giving up");
  };

  return collect(run_generation(n, threads, one), nx, ny, sigma_d, "gaussian_shapes",
                 seed);
}

void write_dataset(const Dataset& d, const std::string& dir) {
  if (d.samples.size() != d.records.size())
    throw ConfigError("write_dataset: sample and record counts differ");
  const size_t np = static_cast<size_t>(d.nx) * d.ny;
  for (const Sample& s : d.samples)
    if (s.f.nx != d.nx || s.f.ny != d.ny || !s.f.same_shape(s.phi) ||
        !s.f.same_shape(s.g) || !s.f.same_shape(s.w))
      throw ConfigError("write_dataset: sample grids disagree with the dataset shape");

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("write_dataset: cannot create " + dir + ": " + ec.message());

  nlohmann::json j;
  j["format"] = kFormatVersion;
  j["nx"] = d.nx;
  j["ny"] = d.ny;
  j["n_samples"] = d.samples.size();
  j["fields"] = {"f", "phi", "g", "w"};
  j["scalar"] = "f64";
  j["byte_order"] = "little";
  j["checksum"] = "fnv1a64-trailer";
  j["sigma_d"] = d.sigma_d;
  j["generator"] = d.generator;
  j["master_seed"] = d.master_seed;
  j["parameter_names"] = parameter_names(d.generator);
  j["parameter_ranges"] = ranges_json(d.generator);
  auto& rows = j["samples"] = nlohmann::json::array();
  for (const SampleRecord& r : d.records)
    rows.push_back({{"seed", r.seed}, {"attempts", r.attempts}, {"params", r.params}});

  {
    std::ofstream out(fs::path(dir) / "manifest.json", std::ios::trunc);
    if (!out) throw IoError("write_dataset: cannot open manifest.json");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write_dataset: short write to manifest.json");
  }

  std::vector<unsigned char> blob;
  blob.reserve(d.samples.size() * 4 * np * 8 + 8);
  for (const Sample& s : d.samples) {
    append_grid(blob, s.f);
    append_grid(blob, s.phi);
    append_grid(blob, s.g);
    append_grid(blob, s.w);
  }
  binio::append_u64le(blob, fnv1a64(blob.data(), blob.size()));
  {
    std::ofstream out(fs::path(dir) / "data.bin", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("write_dataset: cannot open data.bin");
    out.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("write_dataset: short write to data.bin");
  }

  const fs::path flog = fs::path(dir) / "failures.log";
  if (!d.failures.empty()) {
    std::ofstream out(flog, std::ios::trunc);
    if (!out) throw IoError("write_dataset: cannot open failures.log");
    for (const std::string& line : d.failures) out << line << '\n';
  } else {
    fs::remove(flog, ec);  // stale logs from a previous run would mislead
  }
}

Dataset read_dataset(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw IoError("read_dataset: cannot open " + dir + "/manifest.json");
  Dataset d;
  size_t n = 0;
  try {
    nlohmann::json j = nlohmann::json::parse(mf);
    if (j.at("format").get<int>() != kFormatVersion)
      throw IoError("read_dataset: unsupported format version");
    if (j.at("scalar").get<std::string>() != "f64" ||
        j.at("byte_order").get<std::string>() != "little" ||
        j.at("fields") != nlohmann::json({"f", "phi", "g", "w"}))
      throw IoError("read_dataset: unsupported layout declaration");
    d.nx = j.at("nx").get<int>();
    d.ny = j.at("ny").get<int>();
    n = j.at("n_samples").get<size_t>();
    d.sigma_d = j.at("sigma_d").get<double>();
    d.generator = j.at("generator").get<std::string>();
    d.master_seed = j.at("master_seed").get<uint64_t>();
    for (const auto& row : j.at("samples")) {
      SampleRecord r;
      r.seed = row.at("seed").get<uint64_t>();
      r.attempts = row.at("attempts").get<int>();
      r.params = row.at("params").get<std::vector<double>>();
      d.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("read_dataset: bad manifest: ") + e.what());
  }
  if (d.nx < 2 || d.ny < 2) throw IoError("read_dataset: bad grid shape in manifest");
  if (d.records.size() != n)
    throw IoError("read_dataset: per-sample log disagrees with n_samples");

  std::ifstream bf(fs::path(dir) / "data.bin", std::ios::binary);
  if (!bf) throw IoError("read_dataset: cannot open " + dir + "/data.bin");
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bf)),
                                  std::istreambuf_iterator<char>());
  const size_t np = static_cast<size_t>(d.nx) * d.ny;
  const size_t expected = n * 4 * np * 8 + 8;
  if (blob.size() < expected)
    throw IoError("read_dataset: data.bin truncated (" + std::to_string(blob.size()) +
                  " bytes, manifest implies " + std::to_string(expected) + ")");
  if (blob.size() > expected)
    throw IoError("read_dataset: data.bin has trailing bytes beyond the manifest size");
  const uint64_t stored = binio::read_u64le(blob.data() + blob.size() - 8);
  if (stored != fnv1a64(blob.data(), blob.size() - 8))
    throw IoError("read_dataset: checksum mismatch in data.bin");

  const unsigned char* p = blob.data();
  for (size_t i = 0; i < n; ++i) {
    Sample s{FieldGrid(d.nx, d.ny), FieldGrid(d.nx, d.ny), FieldGrid(d.nx, d.ny),
             FieldGrid(d.nx, d.ny)};
    for (FieldGrid* grid : {&s.f, &s.phi, &s.g, &s.w}) {
      for (size_t k = 0; k < np; ++k, p += 8) grid->v[k] = binio::read_f64le(p);
    }
    d.samples.push_back(std::move(s));
  }

  std::ifstream fl(fs::path(dir) / "failures.log");
  if (fl) {
    std::string line;
    while (std::getline(fl, line)) d.failures.push_back(line);
  }
  return d;
}

Splits split(const Dataset& d, const SplitSizes& sizes, uint64_t seed) {
  if (sizes.train < 0 || sizes.val < 0 || sizes.test < 0)
    throw ConfigError("split: sizes must be nonnegative");
  if (d.records.size() != d.samples.size())
    throw ConfigError("split: dataset is missing per-sample records");
  const size_t total =
      static_cast<size_t>(sizes.train) + sizes.val + sizes.test;
  if (total > d.samples.size())
    throw ConfigError("split: requested " + std::to_string(total) + " samples from " +
                      std::to_string(d.samples.size()));

  std::vector<size_t> perm(d.samples.size());
  for (size_t k = 0; k < perm.size(); ++k) perm[k] = k;
  Rng rng(seed);
  for (size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[rng.index(i)]);

  auto take = [&](size_t from, size_t count) {
    Dataset part;
    part.nx = d.nx;
    part.ny = d.ny;
    part.sigma_d = d.sigma_d;
    part.generator = d.generator;
    part.master_seed = d.master_seed;
    for (size_t k = from; k < from + count; ++k) {
      part.samples.push_back(d.samples[perm[k]]);
      part.records.push_back(d.records[perm[k]]);
    }
    return part;
  };
  Splits out;
  out.train = take(0, sizes.train);
  out.val = take(sizes.train, sizes.val);
  out.test = take(static_cast<size_t>(sizes.train) + sizes.val, sizes.test);
  return out;
}

}  // namespace phifno::dataset
