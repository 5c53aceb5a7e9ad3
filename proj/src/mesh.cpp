#include "uhdg/mesh.hpp"

#include <cmath>
#include <stdexcept>

namespace uhdg {

CartesianMesh::CartesianMesh(Vec2 org, Vec2 ext, int nx_, int ny_, bool per_x, bool per_y)
    : origin(org), extent(ext), nx(nx_), ny(ny_), periodic_x(per_x), periodic_y(per_y) {
  if (nx < 1 || ny < 1 || !(ext.x() > 0) || !(ext.y() > 0))
    throw std::invalid_argument("mesh: bad dimensions");
  faces.resize((nx + 1) * ny + nx * (ny + 1));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      Face& f = faces[vface_id(i, j)];
      f.a = Vec2(xline(i), yline(j));
      f.b = Vec2(xline(i), yline(j + 1));
      f.normal = Vec2(1, 0);
      f.vertical = true;
      f.owner = (i > 0) ? element_id(i - 1, j) : -1;
      f.neighbor = (i < nx) ? element_id(i, j) : -1;
    }
  }
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      Face& f = faces[hface_id(i, j)];
      f.a = Vec2(xline(i), yline(j));
      f.b = Vec2(xline(i + 1), yline(j));
      f.normal = Vec2(0, 1);
      f.vertical = false;
      f.owner = (j > 0) ? element_id(i, j - 1) : -1;
      f.neighbor = (j < ny) ? element_id(i, j) : -1;
    }
  }
  if (periodic_x) {
    for (int j = 0; j < ny; ++j) {
      Face& principal = faces[vface_id(0, j)];
      Face& secondary = faces[vface_id(nx, j)];
      principal.owner = element_id(nx - 1, j);  // wraps around
      secondary.alias = vface_id(0, j);
    }
  }
  if (periodic_y) {
    for (int i = 0; i < nx; ++i) {
      Face& principal = faces[hface_id(i, 0)];
      Face& secondary = faces[hface_id(i, ny)];
      principal.owner = element_id(i, ny - 1);
      secondary.alias = hface_id(i, 0);
    }
  }
}

std::pair<Vec2, Vec2> CartesianMesh::element_box(int e) const {
  auto [i, j] = element_ij(e);
  return {Vec2(xline(i), yline(j)), Vec2(xline(i + 1), yline(j + 1))};
}

Vec2 CartesianMesh::element_center(int e) const {
  auto [lo, hi] = element_box(e);
  return 0.5 * (lo + hi);
}

int CartesianMesh::element_of(const Vec2& p) const {
  auto clamp = [](int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };
  int i = clamp(static_cast<int>(std::floor((p.x() - origin.x()) / hx())), nx);
  int j = clamp(static_cast<int>(std::floor((p.y() - origin.y()) / hy())), ny);
  return element_id(i, j);
}

int CartesianMesh::element_of_strict(const Vec2& p, double tol) const {
  if (p.x() < origin.x() - tol || p.x() > origin.x() + extent.x() + tol ||
      p.y() < origin.y() - tol || p.y() > origin.y() + extent.y() + tol)
    return -1;
  return element_of(p);
}

std::array<int, 4> CartesianMesh::faces_of(int e) const {
  auto [i, j] = element_ij(e);
  std::array<int, 4> ids{vface_id(i, j), vface_id(i + 1, j), hface_id(i, j), hface_id(i, j + 1)};
  for (int& f : ids)
    if (faces[f].alias >= 0) f = faces[f].alias;
  return ids;
}

double CartesianMesh::outward_sign(int e, int f) const {
  const Face& face = faces[f];
  if (face.owner == e) return 1.0;
  if (face.neighbor == e) return -1.0;
  throw std::logic_error("mesh: element not incident to face");
}

}  // namespace uhdg
