#pragma once

// Naive O(n^2) discrete Fourier transform over the full complex spectrum.
// Written directly from the defining sums, with no shared code or tricks,
// so it can stand as an independent check on the FFT-backed routines.

#include <complex>
#include <vector>

namespace phifno_test {

// Forward, unnormalized: S[kx*ny + ky] = sum_p x[p] e^{-2*pi*i*(kx*px/nx + ky*py/ny)}
std::vector<std::complex<double>> dft2(const std::vector<double>& x, int nx, int ny);

// Inverse with the 1/(nx*ny) factor; returns the real part.
std::vector<double> idft2(const std::vector<std::complex<double>>& s, int nx, int ny);

}  // namespace phifno_test
