#pragma once

#include <Eigen/Dense>

namespace phifno::hyper {

struct MaterialParams {
  double mu = 0.0;      // shear modulus
  double lambda = 0.0;  // first Lame parameter
};

// mu = E/(2(1+nu)), lambda = E*nu/((1+nu)(1-2nu)). Rejects nu >= 0.5, where
// lambda blows up (incompressible limit), and nu <= -1.
MaterialParams lame_from_youngs(double youngs, double poisson);

// Compressible Neo-Hookean strain energy under the plane-strain embedding:
//   W = mu/2 * (I1 - 3 - 2 ln J) + lambda/2 * (ln J)^2
// with I1 = tr(F^T F) + 1 (the unit out-of-plane stretch) and J = det F.
// The +1 keeps W(I) = 0; the stress below is unaffected by that constant.
double neo_hookean_energy(const Eigen::Matrix2d& F, const MaterialParams& mat);

// First Piola-Kirchhoff stress, the analytic derivative dW/dF:
//   P = mu*F - mu*F^{-T} + lambda*(ln J)*F^{-T}
Eigen::Matrix2d first_piola(const Eigen::Matrix2d& F, const MaterialParams& mat);

}  // namespace phifno::hyper
