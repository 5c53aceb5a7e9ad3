#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace uhdg {

using Vec2 = Eigen::Vector2d;

/* Role of a curve in the problem setup. "wall" is a no-slip Dirichlet
 * boundary; it is kept distinct so reports can tell obstacles from
 * inlet/outlet data boundaries. */
enum class CurveRole { dirichlet, neumann, wall, interface_ };

/* Which side of the travel direction the active region (one-fluid problems)
 * or fluid 1 (two-fluid problems) lies on. */
enum class FluidSide { left, right };

inline FluidSide opposite(FluidSide s) {
  return s == FluidSide::left ? FluidSide::right : FluidSide::left;
}

/* Clamped rational B-spline curve on the parameter interval [0,1]. */
struct NurbsCurve {
  int degree = 1;
  std::vector<double> knots;    // clamped: degree+1 repeats at both ends
  std::vector<Vec2> ctrl;
  std::vector<double> weights;  // all > 0
  CurveRole role = CurveRole::dirichlet;
  FluidSide fluid_side = FluidSide::left;

  int n_ctrl() const { return static_cast<int>(ctrl.size()); }
  Vec2 start() const { return eval(0.0); }
  Vec2 end() const { return eval(1.0); }

  Vec2 eval(double lambda) const;
  /* Value and first/second parametric derivatives. */
  void eval2(double lambda, Vec2& c, Vec2& d1, Vec2& d2) const;
  double jacobian(double lambda) const;  // ||C'(lambda)||

  void validate() const;  // throws std::invalid_argument on malformed input
};

/* Unit normal pointing out of the region lying on `side` of the curve, and
 * the surface divergence of that normal field (= +1/R on a circle of radius R
 * when n points away from the enclosed disk). */
struct NormalCurvature {
  Vec2 n;
  double div_n;
};
NormalCurvature normal_and_curvature(const NurbsCurve& c, double lambda, FluidSide side);

/* Constructors for the primitive curves used by the benchmark cases. */
NurbsCurve make_line(const Vec2& a, const Vec2& b, CurveRole role, FluidSide side);
/* One line per consecutive point pair: a curve must be smooth inside its
 * parameter interval, so corners may only appear where two curves join. */
std::vector<NurbsCurve> make_polyline(const std::vector<Vec2>& pts, CurveRole role,
                                      FluidSide side);
/* Circular arc, |th1 - th0| <= pi/2 (+ slack); exact rational quadratic. */
NurbsCurve make_arc(const Vec2& center, double radius, double th0, double th1,
                    CurveRole role, FluidSide side);
/* Full circle as four 90-degree arcs starting at angle 0. ccw=false traverses
 * clockwise. The fluid side tag is applied to all four arcs as given. */
std::vector<NurbsCurve> make_circle(const Vec2& center, double radius, bool ccw,
                                    CurveRole role, FluidSide side);

/* A contiguous piece of one curve, used for element-boundary integrals. */
struct CurveSegment {
  const NurbsCurve* curve = nullptr;
  double lo = 0.0, hi = 1.0;

  Vec2 midpoint() const { return curve->eval(0.5 * (lo + hi)); }
};

/* Curves joined end-to-start into chains. `closed` means the last endpoint
 * matches the first start point. Open chains are legal when their endpoints
 * terminate on fitted boundary. */
struct CurveLoop {
  std::vector<int> curve_ids;  // in traversal order
  bool closed = false;
};

std::vector<CurveLoop> assemble_loops(const std::vector<NurbsCurve>& curves,
                                      double tol = 1e-10);

}  // namespace uhdg
