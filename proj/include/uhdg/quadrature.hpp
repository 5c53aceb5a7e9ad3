#pragma once

#include <Eigen/Dense>
#include <vector>

#include "uhdg/geometry.hpp"

namespace uhdg {

/* Gauss-Legendre nodes/weights on [-1,1]; weights sum to 2. */
void gauss_legendre(int n, Eigen::VectorXd& x, Eigen::VectorXd& w);
/* Gauss-Lobatto nodes on [-1,1] (endpoints included), n >= 2. */
Eigen::VectorXd gauss_lobatto(int n);

/* One-dimensional rule living on a boundary piece. Weights include the line
 * jacobian and sum to the arc length. `normal`/`div_n` point out of the
 * region being integrated against. `s` is the reference coordinate of the
 * carrying mesh face in [-1,1]; empty for rules on curves. */
struct LineRule {
  std::vector<Vec2> pts;
  std::vector<double> w;
  std::vector<Vec2> normal;
  std::vector<double> div_n;
  std::vector<double> s;

  int size() const { return static_cast<int>(pts.size()); }
  double length() const;
};

/* Rule on a straight mesh-face portion. `a`,`b` are the full face endpoints,
 * [t0,t1] in [0,1] the active sub-interval, `n` the outward normal to use. */
LineRule face_rule(const Vec2& a, const Vec2& b, double t0, double t1, const Vec2& n, int npts);

/* Rule on a NURBS curve segment; normals out of the region on `side`. */
LineRule curve_rule(const CurveSegment& seg, FluidSide side, int npts);

struct AreaRule {
  std::vector<Vec2> pts;
  std::vector<double> w;

  int size() const { return static_cast<int>(pts.size()); }
  double area() const;
  void append(const AreaRule& other);
};

/* Affine triangle via the Duffy transform, npts Gauss points per direction;
 * exact for total degree <= 2*npts - 2. */
AreaRule triangle_rule(const Vec2& v1, const Vec2& v2, const Vec2& v3, int npts);

/* Tensor Gauss rule on the rectangle [lo,hi], npts points per direction. */
AreaRule box_rule(const Vec2& lo, const Vec2& hi, int npts);

/* Curved triangle spanned by a NURBS segment and the vertex x3:
 * psi(lambda,theta) = (1-theta) C(lambda) + theta x3. Throws if the map
 * degenerates (non-uniform jacobian sign). */
AreaRule curved_triangle_rule(const CurveSegment& seg, const Vec2& x3, int npts);

/* Signed area enclosed by going v1->v2 straight vs. along the curve segment
 * (the "lens" between chord and arc); used by area oracles in tests. */
double segment_area_contribution(const CurveSegment& seg, int npts);

}  // namespace uhdg
