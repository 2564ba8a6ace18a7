#include "phifno/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "phifno/errors.hpp"

namespace phifno::geometry {

double ellipse_levelset(const EllipseParams& p, double x, double y) {
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  const double dx = x - p.x0, dy = y - p.y0;
  const double a = dx * c + dy * s;   // coordinate along the first axis
  const double b = dx * s - dy * c;   // coordinate along the second axis
  return -1.0 + a * a / (p.lx * p.lx) + b * b / (p.ly * p.ly);
}

ScalarField ellipse_levelset_field(const EllipseParams& p) {
  return [p](double x, double y) { return ellipse_levelset(p, x, y); };
}

ScalarField gaussian_sum_levelset(const GaussianSumParams& p, int nx, int ny) {
  if (nx < 2 || ny < 2) throw ConfigError("gaussian_sum_levelset: grid must be at least 2x2");

  auto psi = [p](double x, double y) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double ex = (x - p.cx[k]) * (x - p.cx[k]) / (2.0 * p.sx[k]);
      const double ey = (y - p.cy[k]) * (y - p.cy[k]) / (2.0 * p.sy[k]);
      s += std::exp(-ex - ey);
    }
    return s;
  };

  // Nodal max stands in for the continuous max over the square.
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      m = std::max(m, psi(static_cast<double>(i) / (nx - 1), static_cast<double>(j) / (ny - 1)));

  return [psi, m](double x, double y) { return -psi(x, y) + 0.5 * m; };
}

ScalarField gaussian_force(const ForceParams& p) {
  return [p](double x, double y) {
    const double ex = (x - p.mu0) * (x - p.mu0) / (2.0 * p.sigma_x * p.sigma_x);
    const double ey = (y - p.mu1) * (y - p.mu1) / (2.0 * p.sigma_y * p.sigma_y);
    return p.amplitude * std::exp(-ex - ey);
  };
}

ScalarField polynomial_cosine_bc(const BoundaryParams& p) {
  return [p](double x, double y) {
    const double q = (x - 0.5) * (x - 0.5) - (y - 0.5) * (y - 0.5);
    return p.alpha * q * std::cos(p.beta * y * M_PI);
  };
}

double ellipse_bbox_halfwidth(const EllipseParams& p) {
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  return std::sqrt(p.lx * p.lx * c * c + p.ly * p.ly * s * s);
}

double ellipse_bbox_halfheight(const EllipseParams& p) {
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  return std::sqrt(p.lx * p.lx * s * s + p.ly * p.ly * c * c);
}

EllipseParams sample_ellipse(Rng& rng, double margin) {
  if (margin < 0.0 || margin >= 0.2)
    throw ConfigError("sample_ellipse: margin must lie in [0, 0.2)");
  for (int attempt = 0; attempt < kSamplerBudget; ++attempt) {
    EllipseParams p;
    p.x0 = rng.uniform(0.2, 0.8);
    p.y0 = rng.uniform(0.2, 0.8);
    p.lx = rng.uniform(0.2, 0.45);
    p.ly = rng.uniform(0.2, 0.45);
    p.theta = rng.uniform(0.0, M_PI);
    const double hw = ellipse_bbox_halfwidth(p);
    const double hh = ellipse_bbox_halfheight(p);
    if (p.x0 - hw >= margin && p.x0 + hw <= 1.0 - margin && p.y0 - hh >= margin &&
        p.y0 + hh <= 1.0 - margin)
      return p;
  }
  throw NumericalError("sample_ellipse: rejection budget exceeded");
}

ForceParams sample_force(Rng& rng, const ScalarField& phi, bool positive_only) {
  ForceParams p;
  const double mag = rng.uniform(20.0, 30.0);
  p.amplitude = positive_only ? mag : (rng.coin() ? mag : -mag);
  bool placed = false;
  for (int attempt = 0; attempt < kSamplerBudget; ++attempt) {
    const double mx = rng.uniform(0.2, 0.8);
    const double my = rng.uniform(0.2, 0.8);
    if (phi(mx, my) < -0.15) {
      p.mu0 = mx;
      p.mu1 = my;
      placed = true;
      break;
    }
  }
  if (!placed) throw NumericalError("sample_force: no point with phi < -0.15 found within budget");
  p.sigma_x = rng.uniform(0.15, 0.45);
  p.sigma_y = rng.uniform(0.15, 0.45);
  return p;
}

BoundaryParams sample_bc(Rng& rng) {
  BoundaryParams p;
  p.alpha = rng.uniform(-0.8, 0.8);
  p.beta = rng.uniform(-0.8, 0.8);
  return p;
}

std::vector<std::vector<double>> latin_hypercube(int n,
                                                 const std::vector<std::pair<double, double>>& ranges,
                                                 Rng& rng) {
  if (n < 1) throw ConfigError("latin_hypercube: n must be >= 1");
  for (const auto& [lo, hi] : ranges)
    if (!(lo < hi)) throw ConfigError("latin_hypercube: every range needs lo < hi");

  const size_t dims = ranges.size();
  std::vector<std::vector<double>> out(n, std::vector<double>(dims, 0.0));
  std::vector<int> perm(n);
  for (size_t d = 0; d < dims; ++d) {
    for (int i = 0; i < n; ++i) perm[i] = i;
    // Fisher-Yates with our own index draw, so the shuffle is pinned too.
    for (int i = n - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.index(static_cast<uint64_t>(i) + 1)]);
    const auto [lo, hi] = ranges[d];
    for (int i = 0; i < n; ++i) {
      const double u = (perm[i] + rng.uniform()) / n;  // stratum + offset
      out[i][d] = lo + (hi - lo) * u;
    }
  }
  return out;
}

std::vector<std::array<double, 2>> zero_levelset_points(const FieldGrid& phi) {
  std::vector<std::array<double, 2>> pts;
  auto cross = [&](double xa, double ya, double va, double xb, double yb, double vb) {
    if (va == 0.0) pts.push_back({xa, ya});
    if (va * vb < 0.0) {
      const double t = va / (va - vb);
      pts.push_back({xa + t * (xb - xa), ya + t * (yb - ya)});
    }
  };
  for (int i = 0; i < phi.nx; ++i) {
    for (int j = 0; j < phi.ny; ++j) {
      const double x = phi.x_of(i), y = phi.y_of(j), v = phi.at(i, j);
      if (i + 1 < phi.nx) cross(x, y, v, phi.x_of(i + 1), y, phi.at(i + 1, j));
      if (j + 1 < phi.ny) cross(x, y, v, x, phi.y_of(j + 1), phi.at(i, j + 1));
    }
  }
  return pts;
}

double hausdorff_distance(const std::vector<std::array<double, 2>>& a,
                          const std::vector<std::array<double, 2>>& b) {
  if (a.empty() || b.empty()) throw NumericalError("hausdorff_distance: empty point set");
  auto directed = [](const std::vector<std::array<double, 2>>& from,
                     const std::vector<std::array<double, 2>>& to) {
    double worst = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) {
        const double dx = p[0] - q[0], dy = p[1] - q[1];
        best = std::min(best, dx * dx + dy * dy);
      }
      worst = std::max(worst, best);
    }
    return std::sqrt(worst);
  };
  return std::max(directed(a, b), directed(b, a));
}

}  // namespace phifno::geometry
