#include "phifno/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <mutex>
#include <utility>

#include "phifno/errors.hpp"

namespace phifno::fftk {

namespace {

// One cached FFTW plan pair per grid size, with owned aligned buffers.
// fftw_execute on shared buffers is not reentrant, so a single lock guards
// planning and execution; callers copy in and out under the lock.
struct PlanEntry {
  fftw_plan fwd = nullptr;   // r2c
  fftw_plan bwd = nullptr;   // c2r (destroys its input, hence owned buffers)
  double* real = nullptr;
  fftw_complex* cplx = nullptr;

  PlanEntry(int nx, int ny) {
    const size_t nr = static_cast<size_t>(nx) * ny;
    const size_t nc = static_cast<size_t>(nx) * (ny / 2 + 1);
    real = fftw_alloc_real(nr);
    cplx = fftw_alloc_complex(nc);
    fwd = fftw_plan_dft_r2c_2d(nx, ny, real, cplx, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_c2r_2d(nx, ny, cplx, real, FFTW_ESTIMATE);
    if (!fwd || !bwd) throw NumericalError("fft: planning failed");
  }
  ~PlanEntry() {
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
    fftw_free(real);
    fftw_free(cplx);
  }
  PlanEntry(const PlanEntry&) = delete;
  PlanEntry& operator=(const PlanEntry&) = delete;
};

std::mutex g_lock;
std::map<std::pair<int, int>, PlanEntry>& cache() {
  static std::map<std::pair<int, int>, PlanEntry> c;
  return c;
}

PlanEntry& entry_for(int nx, int ny) {
  if (nx < 2 || ny < 2) throw ConfigError("fft: dimensions must be at least 2");
  auto& c = cache();
  auto it = c.find({nx, ny});
  if (it == c.end())
    it = c.emplace(std::piecewise_construct, std::forward_as_tuple(nx, ny),
                   std::forward_as_tuple(nx, ny)).first;
  return it->second;
}

void execute_c2r(const ComplexGrid& s, double* out, double scale) {
  std::lock_guard<std::mutex> hold(g_lock);
  PlanEntry& e = entry_for(s.nx, s.ny);
  const size_t nc = static_cast<size_t>(s.nx) * s.nyc();
  std::memcpy(e.cplx, s.v.data(), nc * sizeof(fftw_complex));
  fftw_execute(e.bwd);
  const size_t nr = static_cast<size_t>(s.nx) * s.ny;
  for (size_t k = 0; k < nr; ++k) out[k] = e.real[k] * scale;
}

}  // namespace

ComplexGrid rfft2(const double* x, int nx, int ny) {
  std::lock_guard<std::mutex> hold(g_lock);
  PlanEntry& e = entry_for(nx, ny);
  const size_t nr = static_cast<size_t>(nx) * ny;
  std::memcpy(e.real, x, nr * sizeof(double));
  fftw_execute(e.fwd);
  ComplexGrid s(nx, ny);
  // std::complex<double> is array-compatible with double[2] by the standard.
  std::memcpy(reinterpret_cast<double*>(s.v.data()), e.cplx,
              s.v.size() * sizeof(fftw_complex));
  return s;
}

void irfft2(const ComplexGrid& s, double* out) {
  execute_c2r(s, out, 1.0 / (static_cast<double>(s.nx) * s.ny));
}

void c2r_unnormalized(const ComplexGrid& s, double* out) {
  execute_c2r(s, out, 1.0);
}

}  // namespace phifno::fftk
