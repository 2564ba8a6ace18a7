#pragma once

#include <Eigen/Sparse>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "phifno/geometry.hpp"
#include "phifno/grid.hpp"
#include "phifno/mesh.hpp"

namespace phifno::fem {

// Unknowns are the w-values at vertices incident to at least one active cell.
struct DofMap {
  std::vector<int> dof_of_vertex;  // -1 for vertices outside the active patch
  std::vector<int> vertex_of_dof;
  int n_dofs = 0;
};

struct SparseSystem {
  Eigen::SparseMatrix<double, Eigen::RowMajor> A;  // nonsymmetric (boundary term)
  Eigen::VectorXd b;
};

// Stabilized immersed assembly for -Laplace(u) = f, u = g on the zero level
// set, with the product ansatz u = phi*w + g and test functions v = phi*s.
// Rows are test dofs, columns trial dofs. Stabilization: facet jump penalty
// sigma_d*h on F_h^Gamma plus cell Laplacian penalty sigma_d*h^2 on cut
// cells; the matching -sigma_d*h^2 * integral(f_h * Laplacian(v)) goes to
// the right-hand side, and all g contributions are lifted to the right-hand
// side as well.
std::pair<SparseSystem, DofMap> assemble(const mesh::BackgroundMesh& mesh,
                                         const mesh::CellClassification& cls,
                                         const FieldGrid& phi_h, const FieldGrid& f_h,
                                         const FieldGrid& g_h, double sigma_d);

// Sparse LU first, BiCGSTAB fallback; accepts only if the relative residual
// |Aw - b| / max(1, |b|) reaches 1e-10. Returns w on the full grid, zero at
// unmapped vertices.
FieldGrid solve(const SparseSystem& sys, const DofMap& map, int nx, int ny);

// u = phi*w + g, pointwise at nodes.
FieldGrid reconstruct_u(const FieldGrid& phi_h, const FieldGrid& w_h, const FieldGrid& g_h);

// classify -> assemble -> solve. The ground-truth operator of the pipeline.
FieldGrid ground_truth(const FieldGrid& f_h, const FieldGrid& phi_h, const FieldGrid& g_h,
                       double sigma_d);

// A manufactured problem: f = -Laplacian(u_exact), g = u_exact analytically.
struct PoissonCase {
  std::string name;
  geometry::ScalarField u_exact;
  geometry::ScalarField f;
  geometry::ScalarField g;
};

struct ConvergenceRow {
  int resolution = 0;            // nodes per axis
  double h = 0.0;                // cell diameter
  double error = 0.0;            // relative L2 over S0 nodes
  std::optional<double> order;   // vs previous row; absent on the first row
                                 // and when errors sit at the accuracy floor
};

// Runs the solver on a ladder of resolutions and reports
//   error = sqrt( sum_{S0} (u_h - u_exact)^2 / sum_{S0} u_exact^2 )
// with observed order log(e_i/e_{i+1}) / log(h_i/h_{i+1}).
std::vector<ConvergenceRow> convergence_study(const PoissonCase& pc,
                                              const geometry::ScalarField& domain,
                                              const std::vector<int>& resolutions,
                                              double sigma_d = 1.0);

}  // namespace phifno::fem
