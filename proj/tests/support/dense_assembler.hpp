#pragma once

#include <Eigen/Dense>

#include "phifno/grid.hpp"
#include "phifno/mesh.hpp"
#include "phifno/poisson.hpp"

namespace phifno_test {

struct DenseSystem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

// Reference assembler for the stabilized immersed weak form, written as an
// independent code path: dense matrix, direct accumulation per quadrature
// point, P1 basis functions evaluated through per-triangle affine solves
// instead of precomputed local matrices. Shares only the dof numbering with
// the production assembler so entries are comparable.
DenseSystem assemble_dense(const phifno::mesh::BackgroundMesh& mesh,
                           const phifno::mesh::CellClassification& cls,
                           const phifno::FieldGrid& phi_h, const phifno::FieldGrid& f_h,
                           const phifno::FieldGrid& g_h, double sigma_d,
                           const phifno::fem::DofMap& map);

}  // namespace phifno_test
