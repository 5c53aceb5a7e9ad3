#pragma once

#include <array>
#include <vector>

#include "uhdg/geometry.hpp"

namespace uhdg {

/* Axis-aligned Cartesian grid of nx*ny rectangular elements. Faces are
 * enumerated vertical-first (constant-x lines), then horizontal. A face's
 * normal always points along +x or +y; `owner` is the element on the minus
 * side, `neighbor` on the plus side (-1 past the domain boundary). */
struct Face {
  Vec2 a, b;        // endpoints, b - a along +y (vertical) or +x (horizontal)
  Vec2 normal;      // +x or +y
  int owner = -1;
  int neighbor = -1;
  bool vertical = false;
  int alias = -1;   // periodic faces: id of the principal face, else -1

  double length() const { return (b - a).norm(); }
  Vec2 point(double s) const { return a + 0.5 * (s + 1.0) * (b - a); }  // s in [-1,1]
};

struct CartesianMesh {
  Vec2 origin{0, 0};
  Vec2 extent{1, 1};
  int nx = 1, ny = 1;
  bool periodic_x = false, periodic_y = false;
  std::vector<Face> faces;

  CartesianMesh() = default;
  CartesianMesh(Vec2 org, Vec2 ext, int nx_, int ny_, bool per_x = false, bool per_y = false);

  double hx() const { return extent.x() / nx; }
  double hy() const { return extent.y() / ny; }
  double diameter() const { return extent.norm(); }
  int n_elements() const { return nx * ny; }
  int n_faces() const { return static_cast<int>(faces.size()); }

  int element_id(int ix, int iy) const { return iy * nx + ix; }
  std::pair<int, int> element_ij(int e) const { return {e % nx, e / nx}; }
  std::pair<Vec2, Vec2> element_box(int e) const;
  Vec2 element_center(int e) const;

  /* Element containing p, clamped to the grid. */
  int element_of(const Vec2& p) const;
  /* -1 if p lies outside the grid by more than tol. */
  int element_of_strict(const Vec2& p, double tol = 0.0) const;

  int vface_id(int i, int j) const { return j * (nx + 1) + i; }          // i in [0,nx]
  int hface_id(int i, int j) const { return ny * (nx + 1) + j * nx + i; }  // j in [0,ny]

  /* Face ids of element e in order [left, right, bottom, top], resolved
   * through periodic aliases. */
  std::array<int, 4> faces_of(int e) const;
  /* Sign of the outward normal of element e on face f (+1 if e is the owner). */
  double outward_sign(int e, int f) const;

  /* x-coordinates of vertical grid lines / y of horizontal ones. */
  double xline(int i) const { return origin.x() + i * hx(); }
  double yline(int j) const { return origin.y() + j * hy(); }
};

}  // namespace uhdg
