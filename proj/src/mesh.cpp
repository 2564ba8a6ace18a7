#include "phifno/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "phifno/errors.hpp"

namespace phifno::mesh {

BackgroundMesh build_background_mesh(int nx, int ny) {
  if (nx < 2 || ny < 2) throw ConfigError("build_background_mesh: need nx, ny >= 2");
  BackgroundMesh m;
  m.nx = nx;
  m.ny = ny;
  m.dx = 1.0 / (nx - 1);
  m.dy = 1.0 / (ny - 1);
  m.h = std::sqrt(m.dx * m.dx + m.dy * m.dy);
  return m;
}

FieldGrid interpolate_nodal(const geometry::ScalarField& field, const BackgroundMesh& mesh) {
  FieldGrid g(mesh.nx, mesh.ny);
  for (int i = 0; i < mesh.nx; ++i) {
    for (int j = 0; j < mesh.ny; ++j) {
      const double val = field(g.x_of(i), g.y_of(j));
      if (!std::isfinite(val)) throw NumericalError("interpolate_nodal: non-finite field value");
      g.at(i, j) = val;
    }
  }
  return g;
}

CellClassification classify_cells(const BackgroundMesh& mesh, const FieldGrid& phi_h) {
  if (phi_h.nx != mesh.nx || phi_h.ny != mesh.ny)
    throw ConfigError("classify_cells: grid shape does not match mesh");
  for (double x : phi_h.v)
    if (!std::isfinite(x)) throw NumericalError("classify_cells: non-finite phi value");

  CellClassification cls;
  const int n_cells = mesh.n_cells();
  cls.is_active.assign(n_cells, 0);
  cls.is_cut.assign(n_cells, 0);

  for (int t = 0; t < n_cells; ++t) {
    const auto vs = mesh.cell_vertices(t);
    double mn = phi_h.v[vs[0]], mx = phi_h.v[vs[0]];
    for (int k = 1; k < 3; ++k) {
      mn = std::min(mn, phi_h.v[vs[k]]);
      mx = std::max(mx, phi_h.v[vs[k]]);
    }
    if (mn < 0.0) {
      cls.is_active[t] = 1;
      cls.active_cells.push_back(t);
      if (mx >= 0.0) {
        cls.is_cut[t] = 1;
        cls.cut_cells.push_back(t);
      }
    }
  }
  if (cls.active_cells.empty())
    throw NumericalError("classify_cells: domain does not intersect grid");

  // Edge adjacency over active cells only. Keys are sorted vertex pairs;
  // iteration order of std::map keeps facet lists deterministic.
  std::map<std::pair<int, int>, std::array<int, 2>> edges;
  for (int t : cls.active_cells) {
    const auto vs = mesh.cell_vertices(t);
    for (int e = 0; e < 3; ++e) {
      int a = vs[e], b = vs[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      auto [it, inserted] = edges.try_emplace({a, b}, std::array<int, 2>{t, -1});
      if (!inserted) it->second[1] = t;
    }
  }

  for (const auto& [key, adj] : edges) {
    Facet f;
    f.v0 = key.first;
    f.v1 = key.second;
    f.t_in = adj[0];
    f.t_out = adj[1];
    if (adj[1] < 0) {
      cls.omega_boundary_facets.push_back(f);
    } else if (cls.is_cut[adj[0]] || cls.is_cut[adj[1]]) {
      cls.stabilized_facets.push_back(f);
    }
  }
  return cls;
}

PixelMasks build_pixel_masks(const CellClassification& cls, const BackgroundMesh& mesh) {
  PixelMasks masks;
  masks.nx = mesh.nx;
  masks.ny = mesh.ny;
  masks.s0.assign(static_cast<size_t>(mesh.nx) * mesh.ny, 0);
  masks.s1.assign(masks.s0.size(), 0);

  for (int t : cls.active_cells)
    for (int v : mesh.cell_vertices(t)) masks.s0[v] = 1;

  for (int i = 1; i < mesh.nx - 1; ++i) {
    for (int j = 1; j < mesh.ny - 1; ++j) {
      bool full = true;
      for (int di = -1; di <= 1 && full; ++di)
        for (int dj = -1; dj <= 1 && full; ++dj)
          if (!masks.s0[mesh.vertex_id(i + di, j + dj)]) full = false;
      if (full) masks.s1[mesh.vertex_id(i, j)] = 1;
    }
  }
  return masks;
}

}  // namespace phifno::mesh
