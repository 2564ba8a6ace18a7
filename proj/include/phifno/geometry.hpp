#pragma once

#include <array>
#include <functional>
#include <utility>
#include <vector>

#include "phifno/grid.hpp"
#include "phifno/rng.hpp"

namespace phifno::geometry {

// Pure evaluator over the unit square.
using ScalarField = std::function<double(double, double)>;

struct EllipseParams {
  double x0 = 0.5, y0 = 0.5;  // center
  double lx = 0.3, ly = 0.2;  // semi-axes
  double theta = 0.0;         // rotation, [0, pi]
};

struct GaussianSumParams {
  std::array<double, 3> cx{}, cy{};     // centers
  std::array<double, 3> sx{}, sy{};     // widths; the exponent divides by
                                        // 2*sx and 2*sy directly (variance-like,
                                        // not squared again)
};

struct ForceParams {
  double amplitude = 20.0;
  double mu0 = 0.5, mu1 = 0.5;      // Gaussian center
  double sigma_x = 0.2, sigma_y = 0.2;
};

struct BoundaryParams {
  double alpha = 0.0, beta = 0.0;  // both in [-0.8, 0.8]
};

// phi(x,y) = -1 + (rotated axis terms)/l^2; negative inside the ellipse.
double ellipse_levelset(const EllipseParams& p, double x, double y);
ScalarField ellipse_levelset_field(const EllipseParams& p);

// phi = -psi + 0.5*M with psi the 3-Gaussian sum and M the max of psi over
// the nx-by-ny nodal grid (the downstream pipeline only consumes nodal values).
ScalarField gaussian_sum_levelset(const GaussianSumParams& p, int nx, int ny);

// f(x,y) = A * exp(-(x-mu0)^2/(2 sx^2) - (y-mu1)^2/(2 sy^2))
ScalarField gaussian_force(const ForceParams& p);

// g(x,y) = alpha * ((x-0.5)^2 - (y-0.5)^2) * cos(beta*y*pi)
ScalarField polynomial_cosine_bc(const BoundaryParams& p);

// Axis-aligned bounding half-extents of the rotated ellipse.
double ellipse_bbox_halfwidth(const EllipseParams& p);
double ellipse_bbox_halfheight(const EllipseParams& p);

inline constexpr int kSamplerBudget = 100000;

// Rejection samplers. Parameter distributions:
//   x0, y0 ~ U[0.2, 0.8]; lx, ly ~ U[0.2, 0.45]; theta ~ U[0, pi],
// accepted when the bounding box fits inside [margin, 1-margin]^2.
EllipseParams sample_ellipse(Rng& rng, double margin);

//   A uniform on [-30,-20] u [20,30] (positive half only when positive_only);
//   (mu0, mu1) uniform on [0.2,0.8]^2 restricted to {phi < -0.15};
//   sigma_x, sigma_y ~ U[0.15, 0.45].
ForceParams sample_force(Rng& rng, const ScalarField& phi, bool positive_only = false);

BoundaryParams sample_bc(Rng& rng);

// One sample per stratum per dimension, uniform within the stratum.
// Result is n rows by ranges.size() columns.
std::vector<std::vector<double>> latin_hypercube(int n,
                                                 const std::vector<std::pair<double, double>>& ranges,
                                                 Rng& rng);

// Zero-level-set sample points: linear interpolation along grid edges where
// phi_h changes sign (plus nodes where it is exactly zero).
std::vector<std::array<double, 2>> zero_levelset_points(const FieldGrid& phi);

// max(sup_a inf_b, sup_b inf_a) under Euclidean distance; errors on empty sets.
double hausdorff_distance(const std::vector<std::array<double, 2>>& a,
                          const std::vector<std::array<double, 2>>& b);

}  // namespace phifno::geometry
