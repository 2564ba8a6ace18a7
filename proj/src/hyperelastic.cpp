#include "phifno/hyperelastic.hpp"

#include <cmath>

#include "phifno/errors.hpp"

namespace phifno::hyper {

MaterialParams lame_from_youngs(double youngs, double poisson) {
  if (!(youngs > 0.0)) throw ConfigError("lame_from_youngs: E must be positive");
  if (poisson >= 0.5)
    throw ConfigError("lame_from_youngs: nu >= 0.5 is the incompressible limit");
  if (poisson <= -1.0) throw ConfigError("lame_from_youngs: nu must exceed -1");
  MaterialParams m;
  m.mu = youngs / (2.0 * (1.0 + poisson));
  m.lambda = youngs * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
  return m;
}

double neo_hookean_energy(const Eigen::Matrix2d& F, const MaterialParams& mat) {
  const double J = F.determinant();
  if (!(J > 0.0)) throw NumericalError("neo_hookean_energy: det F must be positive");
  const double I1 = (F.transpose() * F).trace() + 1.0;
  const double lnJ = std::log(J);
  return 0.5 * mat.mu * (I1 - 3.0 - 2.0 * lnJ) + 0.5 * mat.lambda * lnJ * lnJ;
}

Eigen::Matrix2d first_piola(const Eigen::Matrix2d& F, const MaterialParams& mat) {
  const double J = F.determinant();
  if (!(J > 0.0)) throw NumericalError("first_piola: det F must be positive");
  const Eigen::Matrix2d Finvt = F.inverse().transpose();
  return mat.mu * F + (mat.lambda * std::log(J) - mat.mu) * Finvt;
}

}  // namespace phifno::hyper
