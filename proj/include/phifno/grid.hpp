#pragma once

#include <cstddef>
#include <vector>

namespace phifno {

// Nodal values on the regular nx-by-ny grid over the unit square.
// Node (i,j) sits at (i/(nx-1), j/(ny-1)); flat index is i*ny + j.
struct FieldGrid {
  int nx = 0;
  int ny = 0;
  std::vector<double> v;

  FieldGrid() = default;
  FieldGrid(int nx_, int ny_, double fill = 0.0)
      : nx(nx_), ny(ny_), v(static_cast<size_t>(nx_) * ny_, fill) {}

  double& at(int i, int j) { return v[static_cast<size_t>(i) * ny + j]; }
  double at(int i, int j) const { return v[static_cast<size_t>(i) * ny + j]; }

  double x_of(int i) const { return static_cast<double>(i) / (nx - 1); }
  double y_of(int j) const { return static_cast<double>(j) / (ny - 1); }
  double dx() const { return 1.0 / (nx - 1); }
  double dy() const { return 1.0 / (ny - 1); }

  size_t size() const { return v.size(); }
  bool same_shape(const FieldGrid& o) const { return nx == o.nx && ny == o.ny; }
};

}  // namespace phifno
