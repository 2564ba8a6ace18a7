#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace phifno {

// Seeded random source. The engine is std::mt19937_64 (its output sequence
// is pinned by the standard); the mapping from raw 64-bit words to doubles
// is done here because the std::*_distribution algorithms are
// implementation-defined and we promise bit-reproducible sampling.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  // uniform in [0, 1), 53 bits of mantissa
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  uint64_t index(uint64_t n) {
    // rejection to avoid modulo bias
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

  bool coin() { return (eng_() >> 63) != 0; }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

// splitmix64 mixing step, used to derive independent per-sample seeds
// from (master seed, stream index, attempt).
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t stream, uint64_t attempt = 0) {
  uint64_t s = master;
  uint64_t a = splitmix64(s);
  s ^= stream + 0x9e3779b97f4a7c15ULL;
  uint64_t b = splitmix64(s);
  s ^= attempt + 0xd1b54a32d192ed03ULL;
  uint64_t c = splitmix64(s);
  return a ^ (b * 0xff51afd7ed558ccdULL) ^ c;
}

}  // namespace phifno
