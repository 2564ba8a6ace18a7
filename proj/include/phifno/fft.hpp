#pragma once

#include <complex>
#include <vector>

namespace phifno::fftk {

// Half-spectrum of a real nx-by-ny field: rows kx in [0,nx), columns
// ky in [0, ny/2], row-major. nx/ny are the REAL-space dimensions.
struct ComplexGrid {
  int nx = 0, ny = 0;
  std::vector<std::complex<double>> v;

  ComplexGrid() = default;
  ComplexGrid(int nx_, int ny_)
      : nx(nx_), ny(ny_), v(static_cast<size_t>(nx_) * (ny_ / 2 + 1)) {}

  int nyc() const { return ny / 2 + 1; }
  std::complex<double>& at(int kx, int ky) {
    return v[static_cast<size_t>(kx) * nyc() + ky];
  }
  std::complex<double> at(int kx, int ky) const {
    return v[static_cast<size_t>(kx) * nyc() + ky];
  }
};

// Unnormalized forward transform (plain DFT sums over the half spectrum).
ComplexGrid rfft2(const double* x, int nx, int ny);

// Inverse with the 1/(nx*ny) factor, so irfft2(rfft2(x)) = x.
void irfft2(const ComplexGrid& s, double* out);

// Backward transform without any scaling. Used by adjoint computations that
// account for normalization and Hermitian double counting themselves.
void c2r_unnormalized(const ComplexGrid& s, double* out);

}  // namespace phifno::fftk
