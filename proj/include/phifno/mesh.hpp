#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "phifno/geometry.hpp"
#include "phifno/grid.hpp"

namespace phifno::mesh {

// Cartesian triangular mesh of the unit square: (nx-1)*(ny-1) squares, each
// split along its lower-left to upper-right diagonal into two triangles.
// Triangle 2*c covers the lower-right half of square c, triangle 2*c+1 the
// upper-left half; both carry the diagonal vertices.
struct BackgroundMesh {
  int nx = 0, ny = 0;
  double dx = 0.0, dy = 0.0;
  double h = 0.0;  // max cell diameter sqrt(dx^2 + dy^2), the stabilization length

  int n_vertices() const { return nx * ny; }
  int n_cells() const { return 2 * (nx - 1) * (ny - 1); }

  int vertex_id(int i, int j) const { return i * ny + j; }
  std::array<double, 2> vertex_xy(int v) const {
    const int i = v / ny, j = v % ny;
    return {static_cast<double>(i) / (nx - 1), static_cast<double>(j) / (ny - 1)};
  }

  // Counterclockwise vertex triple of triangle t.
  std::array<int, 3> cell_vertices(int t) const {
    const int c = t / 2;
    const int ci = c / (ny - 1), cj = c % (ny - 1);
    const int v00 = vertex_id(ci, cj);
    const int v10 = vertex_id(ci + 1, cj);
    const int v11 = vertex_id(ci + 1, cj + 1);
    const int v01 = vertex_id(ci, cj + 1);
    if (t % 2 == 0) return {v00, v10, v11};  // lower-right triangle
    return {v00, v11, v01};                  // upper-left triangle
  }
};

BackgroundMesh build_background_mesh(int nx, int ny);

FieldGrid interpolate_nodal(const geometry::ScalarField& field, const BackgroundMesh& mesh);

// A mesh facet (edge between vertices v0 < v1). t_in is always an active
// cell; t_out is the second active cell for internal facets and -1 on the
// boundary of the active patch.
struct Facet {
  int v0 = 0, v1 = 0;
  int t_in = -1, t_out = -1;
};

struct CellClassification {
  std::vector<int> active_cells;   // T_h, ascending triangle ids
  std::vector<int> cut_cells;      // T_h^Gamma, subset of active
  std::vector<uint8_t> is_active;  // per triangle
  std::vector<uint8_t> is_cut;
  std::vector<Facet> stabilized_facets;      // F_h^Gamma: internal facets of T_h
                                             // adjacent to at least one cut cell
  std::vector<Facet> omega_boundary_facets;  // facets with exactly one active cell
};

// A cell is active iff min vertex value of phi_h < 0 (strict); cut iff
// active and max vertex value >= 0. Errors when nothing is active.
CellClassification classify_cells(const BackgroundMesh& mesh, const FieldGrid& phi_h);

struct PixelMasks {
  int nx = 0, ny = 0;
  std::vector<uint8_t> s0;  // vertices of at least one active cell
  std::vector<uint8_t> s1;  // s0 eroded by one 8-neighborhood layer; grid
                            // border pixels never belong to s1
};

PixelMasks build_pixel_masks(const CellClassification& cls, const BackgroundMesh& mesh);

}  // namespace phifno::mesh
