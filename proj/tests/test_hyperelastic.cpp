#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "phifno/errors.hpp"
#include "phifno/hyperelastic.hpp"
#include "phifno/rng.hpp"

using namespace phifno;
using namespace phifno::hyper;
using Eigen::Matrix2d;

namespace {

// F = I + perturbation with entries bounded by `spread`, redrawn until the
// determinant is safely positive.
Matrix2d random_deformation(Rng& rng, double spread) {
  for (;;) {
    Matrix2d F = Matrix2d::Identity();
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) F(r, c) += rng.uniform(-spread, spread);
    if (F.determinant() > 0.05) return F;
  }
}

Matrix2d rotation(double angle) {
  Matrix2d R;
  R << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return R;
}

}  // namespace

TEST_CASE("lame conversion reproduces hand values") {
  MaterialParams simple = lame_from_youngs(1.0, 0.0);
  CHECK(simple.mu == 0.5);
  CHECK(simple.lambda == 0.0);

  // the values used throughout the plate experiments
  MaterialParams paper = lame_from_youngs(0.97, 0.3);
  CHECK(paper.mu == doctest::Approx(0.3730769230769231).epsilon(1e-15));
  CHECK(paper.lambda == doctest::Approx(0.5596153846153846).epsilon(1e-15));

  // homogeneity in E
  MaterialParams twice = lame_from_youngs(1.94, 0.3);
  CHECK(twice.mu == doctest::Approx(2.0 * paper.mu).epsilon(1e-15));
  CHECK(twice.lambda == doctest::Approx(2.0 * paper.lambda).epsilon(1e-15));

  CHECK_THROWS_AS(lame_from_youngs(0.0, 0.3), ConfigError);
  CHECK_THROWS_AS(lame_from_youngs(-1.0, 0.3), ConfigError);
  CHECK_THROWS_AS(lame_from_youngs(1.0, 0.5), ConfigError);
  CHECK_THROWS_AS(lame_from_youngs(1.0, 0.7), ConfigError);
  CHECK_THROWS_AS(lame_from_youngs(1.0, -1.0), ConfigError);
}

TEST_CASE("energy and stress vanish in the reference configuration") {
  const MaterialParams mat = lame_from_youngs(0.97, 0.3);
  CHECK(neo_hookean_energy(Matrix2d::Identity(), mat) == 0.0);
  CHECK(first_piola(Matrix2d::Identity(), mat).norm() == 0.0);
}

TEST_CASE("uniaxial stretch matches the closed form") {
  MaterialParams mat{1.0, 0.0};
  Matrix2d F = Matrix2d::Identity();
  F(0, 0) = 2.0;

  // W = 1/2 (tr(F^T F) + 1 - 3 - 2 ln 2) = 1/2 (3 - 2 ln 2)
  CHECK(neo_hookean_energy(F, mat) ==
        doctest::Approx(0.5 * (3.0 - 2.0 * std::log(2.0))).epsilon(1e-15));
  CHECK(neo_hookean_energy(F, mat) == doctest::Approx(0.8068528194400547).epsilon(1e-14));

  Matrix2d P = first_piola(F, mat);
  CHECK(P(0, 0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(P(1, 1) == doctest::Approx(0.0));
  CHECK(P(0, 1) == 0.0);
  CHECK(P(1, 0) == 0.0);
}

TEST_CASE("degenerate deformations are rejected") {
  const MaterialParams mat = lame_from_youngs(0.97, 0.3);
  Matrix2d flat = Matrix2d::Identity();
  flat(1, 1) = 0.0;
  CHECK_THROWS_AS(neo_hookean_energy(flat, mat), NumericalError);
  CHECK_THROWS_AS(first_piola(flat, mat), NumericalError);

  Matrix2d reflected = Matrix2d::Identity();
  reflected(1, 1) = -1.0;  // det = -1
  CHECK_THROWS_AS(neo_hookean_energy(reflected, mat), NumericalError);
  CHECK_THROWS_AS(first_piola(reflected, mat), NumericalError);
}

TEST_CASE("energy is objective under rotations") {
  const MaterialParams mat = lame_from_youngs(0.97, 0.3);
  Rng rng(404);
  for (int trial = 0; trial < 200; ++trial) {
    Matrix2d F = random_deformation(rng, 0.4);
    Matrix2d R = rotation(rng.uniform(0.0, 2.0 * M_PI));
    const double w = neo_hookean_energy(F, mat);
    const double wr = neo_hookean_energy(R * F, mat);
    CHECK(std::abs(w - wr) <= 1e-12 * std::max(1.0, std::abs(w)));
  }
}

TEST_CASE("energy stays nonnegative near the reference state") {
  const MaterialParams mat = lame_from_youngs(0.97, 0.3);
  Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    Matrix2d F = random_deformation(rng, 0.15);  // keeps ||F - I|| <= 0.3
    CHECK(neo_hookean_energy(F, mat) >= 0.0);
  }
}

TEST_CASE("stress equals the energy gradient") {
  Rng rng(2024);
  const double step = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    // alternate between a generic material and the lambda = 0 special case
    const MaterialParams mat =
        (trial % 2 == 0) ? lame_from_youngs(rng.uniform(0.5, 2.0), rng.uniform(0.0, 0.45))
                         : MaterialParams{rng.uniform(0.5, 2.0), 0.0};
    Matrix2d F = random_deformation(rng, 0.4);
    Matrix2d P = first_piola(F, mat);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) {
        Matrix2d hi = F, lo = F;
        hi(r, c) += step;
        lo(r, c) -= step;
        const double fd =
            (neo_hookean_energy(hi, mat) - neo_hookean_energy(lo, mat)) / (2.0 * step);
        const double denom = std::max({1.0, std::abs(fd), std::abs(P(r, c))});
        CHECK(std::abs(P(r, c) - fd) / denom <= 1e-6);
      }
  }
}
