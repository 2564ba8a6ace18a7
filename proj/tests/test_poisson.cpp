#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <vector>

#include "phifno/errors.hpp"
#include "phifno/geometry.hpp"
#include "phifno/mesh.hpp"
#include "phifno/poisson.hpp"
#include "support/dense_assembler.hpp"

using namespace phifno;
using geometry::ScalarField;

namespace {

FieldGrid sample_field(const ScalarField& f, int nx, int ny) {
  FieldGrid out(nx, ny);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) out.at(i, j) = f(out.x_of(i), out.y_of(j));
  return out;
}

FieldGrid constant_field(int nx, int ny, double value) {
  return FieldGrid(nx, ny, value);
}

ScalarField disk(double cx, double cy, double r) {
  return [=](double x, double y) {
    return (x - cx) * (x - cx) + (y - cy) * (y - cy) - r * r;
  };
}

struct Problem {
  mesh::BackgroundMesh msh;
  mesh::CellClassification cls;
  FieldGrid phi, f, g;
};

Problem make_problem(int n, const ScalarField& domain, const ScalarField& force,
                     const ScalarField& bc) {
  Problem p{mesh::build_background_mesh(n, n), {}, {}, {}, {}};
  p.phi = sample_field(domain, n, n);
  p.f = sample_field(force, n, n);
  p.g = sample_field(bc, n, n);
  p.cls = mesh::classify_cells(p.msh, p.phi);
  return p;
}

Eigen::MatrixXd densify(const Eigen::SparseMatrix<double, Eigen::RowMajor>& A) {
  return Eigen::MatrixXd(A);
}

}  // namespace

TEST_CASE("assembly matches the dense quadrature-loop reference") {
  auto run = [](int n, const ScalarField& dom) {
    auto p = make_problem(
        n, dom, [](double x, double y) { return 3.0 + std::sin(5 * x) * y; },
        [](double x, double y) { return 0.3 * x - 0.7 * y + 0.1; });
    auto [sys, map] = fem::assemble(p.msh, p.cls, p.phi, p.f, p.g, 1.0);
    auto ref = phifno_test::assemble_dense(p.msh, p.cls, p.phi, p.f, p.g, 1.0, map);

    Eigen::MatrixXd diff = densify(sys.A) - ref.A;
    CHECK(diff.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((sys.b - ref.b).cwiseAbs().maxCoeff() <= 1e-12);
  };

  run(8, disk(0.5, 0.5, 0.3));
  run(12, geometry::ellipse_levelset_field({0.45, 0.55, 0.33, 0.24, 0.6}));
}

TEST_CASE("without cut cells the stabilization does not enter") {
  auto p = make_problem(
      6, [](double, double) { return -1.0; },
      [](double x, double) { return x; }, [](double, double y) { return y; });
  CHECK(p.cls.cut_cells.empty());
  CHECK(p.cls.stabilized_facets.empty());

  auto [s1, m1] = fem::assemble(p.msh, p.cls, p.phi, p.f, p.g, 1.0);
  auto [s7, m7] = fem::assemble(p.msh, p.cls, p.phi, p.f, p.g, 7.0);
  CHECK(m1.n_dofs == p.msh.n_vertices());
  CHECK((densify(s1.A) - densify(s7.A)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s1.b - s7.b).cwiseAbs().maxCoeff() == 0.0);

  auto ref = phifno_test::assemble_dense(p.msh, p.cls, p.phi, p.f, p.g, 3.0, m1);
  CHECK((densify(s1.A) - ref.A).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("zero force with affine boundary data gives a zero right-hand side") {
  auto p = make_problem(
      16, disk(0.48, 0.52, 0.31), [](double, double) { return 0.0; },
      [](double x, double y) { return 2.0 * x - 0.5 * y + 0.25; });
  CHECK_FALSE(p.cls.cut_cells.empty());
  auto [sys, map] = fem::assemble(p.msh, p.cls, p.phi, p.f, p.g, 1.0);
  CHECK(sys.b.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("assembly rejects bad inputs") {
  auto p = make_problem(
      8, disk(0.5, 0.5, 0.3), [](double, double) { return 1.0; },
      [](double, double) { return 0.0; });
  CHECK_THROWS_AS(fem::assemble(p.msh, p.cls, p.phi, p.f, p.g, 0.0), ConfigError);
  FieldGrid wrong = constant_field(9, 9, 0.0);
  CHECK_THROWS_AS(fem::assemble(p.msh, p.cls, wrong, p.f, p.g, 1.0), ConfigError);
}

TEST_CASE("solve basics: zero data, zero extension, failure reporting") {
  auto p = make_problem(
      16, disk(0.5, 0.5, 0.3), [](double x, double y) { return x + y; },
      [](double, double) { return 0.1; });
  auto [sys, map] = fem::assemble(p.msh, p.cls, p.phi, p.f, p.g, 1.0);

  SUBCASE("b = 0 gives w = 0") {
    fem::SparseSystem zero{sys.A, Eigen::VectorXd::Zero(map.n_dofs)};
    FieldGrid w = fem::solve(zero, map, 16, 16);
    for (double v : w.v) CHECK(v == 0.0);
  }

  SUBCASE("unmapped vertices stay exactly zero") {
    FieldGrid w = fem::solve(sys, map, 16, 16);
    int outside = 0;
    for (int v = 0; v < p.msh.n_vertices(); ++v) {
      if (map.dof_of_vertex[v] < 0) {
        ++outside;
        CHECK(w.v[v] == 0.0);
      }
    }
    CHECK(outside > 0);
  }

  SUBCASE("a singular system is reported, not returned") {
    fem::SparseSystem bad;
    bad.A.resize(2, 2);
    bad.A.insert(0, 0) = 1.0;
    bad.A.makeCompressed();
    bad.b = Eigen::VectorXd::Ones(2);
    fem::DofMap tiny;
    tiny.dof_of_vertex = {0, 1, -1, -1};
    tiny.vertex_of_dof = {0, 1};
    tiny.n_dofs = 2;
    CHECK_THROWS_AS(fem::solve(bad, tiny, 2, 2), NumericalError);
  }
}

TEST_CASE("reconstruct_u pointwise identities") {
  FieldGrid phi = constant_field(3, 3, -1.0);
  FieldGrid w = constant_field(3, 3, 0.0);
  FieldGrid g = sample_field([](double x, double y) { return x * y + 1; }, 3, 3);

  SUBCASE("w = 0 returns the boundary extension") {
    FieldGrid u = fem::reconstruct_u(phi, w, g);
    for (size_t k = 0; k < u.v.size(); ++k) CHECK(u.v[k] == g.v[k]);
  }
  SUBCASE("phi = 0 pins the node to g regardless of w") {
    phi.at(1, 1) = 0.0;
    w.at(1, 1) = 123.0;
    FieldGrid u = fem::reconstruct_u(phi, w, g);
    CHECK(u.at(1, 1) == g.at(1, 1));
  }
  SUBCASE("phi = -1 with g = 0 negates w") {
    FieldGrid wr = sample_field([](double x, double y) { return x - 3 * y; }, 3, 3);
    FieldGrid u = fem::reconstruct_u(phi, wr, constant_field(3, 3, 0.0));
    for (size_t k = 0; k < u.v.size(); ++k) CHECK(u.v[k] == -wr.v[k]);
  }
  SUBCASE("shape mismatch is rejected") {
    CHECK_THROWS_AS(fem::reconstruct_u(phi, constant_field(4, 3, 0.0), g), ConfigError);
  }
}

TEST_CASE("affine data is reproduced exactly up to solver accuracy") {
  geometry::EllipseParams ep{0.5, 0.48, 0.34, 0.27, 0.9};
  auto dom = geometry::ellipse_levelset_field(ep);
  auto p = make_problem(
      32, dom, [](double, double) { return 0.0; },
      [](double x, double) { return x; });

  FieldGrid w = fem::ground_truth(p.f, p.phi, p.g, 1.0);
  double wmax = 0.0;
  for (double v : w.v) wmax = std::max(wmax, std::fabs(v));
  CHECK(wmax <= 1e-9);

  FieldGrid u = fem::reconstruct_u(p.phi, w, p.g);
  auto masks = mesh::build_pixel_masks(p.cls, p.msh);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j)
      if (masks.s0[size_t(i) * 32 + j])
        CHECK(std::fabs(u.at(i, j) - u.x_of(i)) <= 1e-9);
}

TEST_CASE("ground_truth rejects a grid with no interior") {
  FieldGrid phi = constant_field(8, 8, 1.0);
  FieldGrid zero = constant_field(8, 8, 0.0);
  CHECK_THROWS_AS(fem::ground_truth(zero, phi, zero, 1.0), NumericalError);
}

TEST_CASE("fixed ellipse sample solves to a finite, zero-extended field") {
  Rng rng(2024);
  auto ep = geometry::sample_ellipse(rng, 2.0 / 63.0);
  auto dom = geometry::ellipse_levelset_field(ep);
  auto p = make_problem(
      64, dom, [](double x, double y) { return 20.0 * std::exp(-(x - 0.5) * (x - 0.5) - (y - 0.5) * (y - 0.5)); },
      [](double x, double y) { return 0.2 * x + 0.3 * y; });

  FieldGrid w = fem::ground_truth(p.f, p.phi, p.g, 1.0);
  auto [sys, map] = fem::assemble(p.msh, p.cls, p.phi, p.f, p.g, 1.0);
  for (int v = 0; v < p.msh.n_vertices(); ++v) {
    CHECK(std::isfinite(w.v[v]));
    if (map.dof_of_vertex[v] < 0) CHECK(w.v[v] == 0.0);
  }
}

TEST_CASE("scaling force and boundary data scales the solution linearly") {
  auto p = make_problem(
      24, disk(0.52, 0.47, 0.33),
      [](double x, double y) { return 10 * std::cos(3 * x) + y; },
      [](double x, double y) { return x * 0.4 - y * 0.2 + 0.3; });
  FieldGrid base = fem::ground_truth(p.f, p.phi, p.g, 1.0);
  double base_max = 0.0;
  for (double v : base.v) base_max = std::max(base_max, std::fabs(v));
  CHECK(base_max > 0.0);

  for (double c : {-1.0, 2.0, 10.0}) {
    FieldGrid fc = p.f, gc = p.g;
    for (auto& v : fc.v) v *= c;
    for (auto& v : gc.v) v *= c;
    FieldGrid ws = fem::ground_truth(fc, p.phi, gc, 1.0);
    double err = 0.0;
    for (size_t k = 0; k < ws.v.size(); ++k)
      err = std::max(err, std::fabs(ws.v[k] - c * base.v[k]));
    CHECK(err <= 1e-10 * std::fabs(c) * base_max);
  }
}

TEST_CASE("assembly is deterministic down to the bit") {
  auto p = make_problem(
      20, disk(0.5, 0.5, 0.37),
      [](double x, double y) { return std::sin(7 * x * y); },
      [](double x, double y) { return x * x - y; });
  auto [s1, m1] = fem::assemble(p.msh, p.cls, p.phi, p.f, p.g, 1.0);
  auto [s2, m2] = fem::assemble(p.msh, p.cls, p.phi, p.f, p.g, 1.0);

  REQUIRE(s1.A.nonZeros() == s2.A.nonZeros());
  CHECK(std::memcmp(s1.A.valuePtr(), s2.A.valuePtr(),
                    sizeof(double) * s1.A.nonZeros()) == 0);
  CHECK(std::memcmp(s1.A.innerIndexPtr(), s2.A.innerIndexPtr(),
                    sizeof(int) * s1.A.nonZeros()) == 0);
  CHECK(std::memcmp(s1.b.data(), s2.b.data(), sizeof(double) * m1.n_dofs) == 0);
  CHECK(m1.dof_of_vertex == m2.dof_of_vertex);
}

TEST_CASE("convergence study validates its resolution ladder") {
  fem::PoissonCase pc{"affine",
                      [](double x, double) { return x; },
                      [](double, double) { return 0.0; },
                      [](double x, double) { return x; }};
  auto dom = disk(0.5, 0.5, 0.3);
  CHECK_THROWS_AS(fem::convergence_study(pc, dom, {17, 33}), ConfigError);
  CHECK_THROWS_AS(fem::convergence_study(pc, dom, {17, 33, 33}), ConfigError);
}

TEST_CASE("affine case sits at the accuracy floor with no order reported") {
  fem::PoissonCase pc{"affine",
                      [](double x, double y) { return 0.7 * x - 0.2 * y + 0.4; },
                      [](double, double) { return 0.0; },
                      [](double x, double y) { return 0.7 * x - 0.2 * y + 0.4; }};
  auto rows = fem::convergence_study(pc, disk(0.5, 0.5, 0.3), {9, 17, 33});
  for (const auto& r : rows) {
    CHECK(r.error <= 1e-9);
    CHECK_FALSE(r.order.has_value());
  }
}

TEST_CASE("smooth manufactured solutions converge at second order") {
  const double pi = std::acos(-1.0);
  fem::PoissonCase sine{
      "sine",
      [=](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); },
      [=](double x, double y) {
        return 2 * pi * pi * std::sin(pi * x) * std::sin(pi * y);
      },
      [=](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); }};
  auto dom = disk(0.5, 0.5, 0.3);
  auto rows = fem::convergence_study(sine, dom, {17, 33, 65, 129});

  REQUIRE(rows.size() == 4);
  CHECK_FALSE(rows[0].order.has_value());
  for (size_t i = 1; i < rows.size(); ++i) {
    REQUIRE(rows[i].order.has_value());
    // The nodal metric superconverges: the ansatz damps the boundary error
    // by a factor phi = O(h) near the interface, so measured orders sit at
    // 2.1-2.5 rather than the optimal 2. Band frozen from the study itself.
    CHECK(*rows[i].order >= 1.8);
    CHECK(*rows[i].order <= 2.6);
    // Refinement must not lose accuracy.
    CHECK(rows[i].error <= 1.05 * rows[i - 1].error);
  }

  fem::PoissonCase quad{"quadratic",
                        [](double x, double y) { return x * x + y * y; },
                        [](double, double) { return -4.0; },
                        [](double x, double y) { return x * x + y * y; }};
  auto qrows = fem::convergence_study(quad, dom, {17, 33, 65});
  double c0 = qrows[0].error / (qrows[0].h * qrows[0].h);
  for (const auto& r : qrows) CHECK(r.error <= 1.5 * c0 * r.h * r.h);
}
