#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phifno/grid.hpp"
#include "phifno/sample.hpp"

namespace phifno::dataset {

// Raw parameters behind one stored sample, in the generator's documented
// column order, plus the derived seed that produced the accepted draw.
struct SampleRecord {
  uint64_t seed = 0;
  int attempts = 1;  // 1 on first success, +1 per resampled failure
  std::vector<double> params;
};

struct Dataset {
  int nx = 0, ny = 0;
  double sigma_d = 1.0;
  std::string generator;  // "ellipse" or "gaussian_shapes"
  uint64_t master_seed = 0;
  std::vector<Sample> samples;
  std::vector<SampleRecord> records;
  std::vector<std::string> failures;  // one line per failed attempt
};

// Parameter column names for the manifest, per generator.
std::vector<std::string> parameter_names(const std::string& generator);

// Random ellipse domains with Gaussian forces and polynomial-cosine boundary
// data, solved to w_h. Each sample runs on its own seed derived from
// (master seed, index, attempt), so the generation schedule cannot change
// the result. A margin < 0 means the default 2/(nx-1) one-cell halo.
Dataset generate_ellipse_dataset(int n, int nx, int ny, uint64_t seed, double sigma_d,
                                 double margin = -1.0, int threads = 1);

// Three-Gaussian level-set shapes; all shape/force/boundary parameters come
// from one joint Latin hypercube (force amplitude restricted to positive).
// Solver failures fall back to plain uniform redraws on a derived seed.
Dataset generate_gaussian_shape_dataset(int n, int nx, int ny, uint64_t seed,
                                        double sigma_d, int threads = 1);

// Directory container: manifest.json + data.bin (+ failures.log when any
// attempt failed). The blob stores f, phi, g, w per sample, row-major
// little-endian 64-bit, with a trailing FNV-1a checksum of everything
// before it.
void write_dataset(const Dataset& d, const std::string& dir);
Dataset read_dataset(const std::string& dir);

// Seed-deterministic disjoint partition into train/val/test of the given
// sizes (their sum may leave a remainder unused).
struct SplitSizes {
  int train = 1500, val = 300, test = 300;
};
struct Splits {
  Dataset train, val, test;
};
Splits split(const Dataset& d, const SplitSizes& sizes, uint64_t seed);

uint64_t fnv1a64(const unsigned char* data, size_t n);

}  // namespace phifno::dataset
