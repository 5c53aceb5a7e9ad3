#include "uhdg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace uhdg {

namespace {

int find_span(int n, int p, double u, const std::vector<double>& U) {
  // n = last control point index
  if (u >= U[n + 1]) return n;
  if (u <= U[p]) return p;
  int lo = p, hi = n + 1;
  while (hi - lo > 1) {
    int mid = (lo + hi) / 2;
    (u < U[mid]) ? hi = mid : lo = mid;
  }
  return lo;
}

/* Nonzero basis functions and derivatives up to order nd at u (span given).
 * ders is (nd+1) x (p+1), row k = k-th derivative of the p+1 active funcs. */
void basis_ders(int span, double u, int p, int nd, const std::vector<double>& U,
                Eigen::MatrixXd& ders) {
  Eigen::MatrixXd ndu(p + 1, p + 1);
  std::vector<double> left(p + 1), right(p + 1);
  ndu(0, 0) = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = u - U[span + 1 - j];
    right[j] = U[span + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu(j, r) = right[r + 1] + left[j - r];
      double temp = ndu(r, j - 1) / ndu(j, r);
      ndu(r, j) = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu(j, j) = saved;
  }
  ders.setZero(nd + 1, p + 1);
  for (int j = 0; j <= p; ++j) ders(0, j) = ndu(j, p);

  Eigen::MatrixXd a(2, p + 1);
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a(0, 0) = 1.0;
    for (int k = 1; k <= nd; ++k) {
      double d = 0.0;
      int rk = r - k, pk = p - k;
      if (r >= k) {
        a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
        d = a(s2, 0) * ndu(rk, pk);
      }
      int j1 = (rk >= -1) ? 1 : -rk;
      int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
        d += a(s2, j) * ndu(rk + j, pk);
      }
      if (r <= pk) {
        a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
        d += a(s2, k) * ndu(r, pk);
      }
      ders(k, r) = d;
      std::swap(s1, s2);
    }
  }
  double f = p;
  for (int k = 1; k <= nd; ++k) {
    for (int j = 0; j <= p; ++j) ders(k, j) *= f;
    f *= (p - k);
  }
}

}  // namespace

void NurbsCurve::validate() const {
  const int n = n_ctrl();
  if (degree < 1) throw std::invalid_argument("nurbs: degree must be >= 1");
  if (n < degree + 1) throw std::invalid_argument("nurbs: too few control points");
  if (static_cast<int>(weights.size()) != n)
    throw std::invalid_argument("nurbs: weight count mismatch");
  if (static_cast<int>(knots.size()) != n + degree + 1)
    throw std::invalid_argument("nurbs: knot count mismatch");
  for (double w : weights)
    if (!(w > 0.0)) throw std::invalid_argument("nurbs: weights must be positive");
  for (size_t i = 1; i < knots.size(); ++i)
    if (knots[i] < knots[i - 1]) throw std::invalid_argument("nurbs: knots must be nondecreasing");
  for (int i = 0; i <= degree; ++i) {
    if (knots[i] != knots.front() || knots[knots.size() - 1 - i] != knots.back())
      throw std::invalid_argument("nurbs: knot vector must be clamped");
  }
  if (knots.front() != 0.0 || knots.back() != 1.0)
    throw std::invalid_argument("nurbs: parameter interval must be [0,1]");
  /* quadrature and normals assume tangent continuity inside the parameter
   * interval; corners must be modeled as joints between separate curves */
  for (size_t i = degree + 1; i + degree + 1 < knots.size();) {
    size_t j = i;
    while (j + degree + 1 < knots.size() && knots[j] == knots[i]) ++j;
    if (static_cast<int>(j - i) >= degree)
      throw std::invalid_argument("nurbs: interior knot multiplicity allows a kink; "
                                  "split the curve at the corner instead");
    i = j;
  }
}

Vec2 NurbsCurve::eval(double lambda) const {
  Vec2 c, d1, d2;
  eval2(lambda, c, d1, d2);
  return c;
}

void NurbsCurve::eval2(double lambda, Vec2& c, Vec2& d1, Vec2& d2) const {
  const int p = degree;
  const int n = n_ctrl() - 1;
  const int span = find_span(n, p, lambda, knots);
  Eigen::MatrixXd ders;
  basis_ders(span, lambda, p, 2, knots, ders);

  // homogeneous curve A = (sum N_i w_i P_i, sum N_i w_i) and derivatives
  Eigen::Vector3d A[3];
  for (int k = 0; k < 3; ++k) A[k].setZero();
  for (int j = 0; j <= p; ++j) {
    const int i = span - p + j;
    Eigen::Vector3d H(weights[i] * ctrl[i].x(), weights[i] * ctrl[i].y(), weights[i]);
    for (int k = 0; k < 3; ++k) A[k] += ders(k, j) * H;
  }
  const double W = A[0][2], Wp = A[1][2], Wpp = A[2][2];
  c = A[0].head<2>() / W;
  d1 = (A[1].head<2>() - Wp * c) / W;
  d2 = (A[2].head<2>() - 2.0 * Wp * d1 - Wpp * c) / W;
}

double NurbsCurve::jacobian(double lambda) const {
  Vec2 c, d1, d2;
  eval2(lambda, c, d1, d2);
  return d1.norm();
}

NormalCurvature normal_and_curvature(const NurbsCurve& c, double lambda, FluidSide side) {
  Vec2 x, d1, d2;
  c.eval2(lambda, x, d1, d2);
  const double g = d1.norm();
  if (g < 1e-14) throw std::runtime_error("nurbs: vanishing tangent");
  const Vec2 t = d1 / g;
  const double kappa = (d1.x() * d2.y() - d1.y() * d2.x()) / (g * g * g);
  // n points out of the region on `side`; div n follows the same flip.
  if (side == FluidSide::left) return {Vec2(t.y(), -t.x()), kappa};
  return {Vec2(-t.y(), t.x()), -kappa};
}

NurbsCurve make_line(const Vec2& a, const Vec2& b, CurveRole role, FluidSide side) {
  NurbsCurve c;
  c.degree = 1;
  c.knots = {0, 0, 1, 1};
  c.ctrl = {a, b};
  c.weights = {1, 1};
  c.role = role;
  c.fluid_side = side;
  return c;
}

std::vector<NurbsCurve> make_polyline(const std::vector<Vec2>& pts, CurveRole role,
                                      FluidSide side) {
  const int nseg = static_cast<int>(pts.size()) - 1;
  if (nseg < 1) throw std::invalid_argument("polyline: need >= 2 points");
  std::vector<NurbsCurve> out;
  out.reserve(nseg);
  for (int i = 0; i < nseg; ++i) out.push_back(make_line(pts[i], pts[i + 1], role, side));
  return out;
}

NurbsCurve make_arc(const Vec2& center, double radius, double th0, double th1,
                    CurveRole role, FluidSide side) {
  const double d = th1 - th0;
  if (std::abs(d) < 1e-14 || std::abs(d) > M_PI / 2 + 1e-12)
    throw std::invalid_argument("arc: sweep must be nonzero and <= 90 degrees");
  const double w1 = std::cos(0.5 * d);
  auto on = [&](double th) { return Vec2(center.x() + radius * std::cos(th), center.y() + radius * std::sin(th)); };
  NurbsCurve c;
  c.degree = 2;
  c.knots = {0, 0, 0, 1, 1, 1};
  c.ctrl = {on(th0), center + (radius / w1) * Vec2(std::cos(0.5 * (th0 + th1)), std::sin(0.5 * (th0 + th1))), on(th1)};
  c.weights = {1.0, w1, 1.0};
  c.role = role;
  c.fluid_side = side;
  return c;
}

std::vector<NurbsCurve> make_circle(const Vec2& center, double radius, bool ccw,
                                    CurveRole role, FluidSide side) {
  std::vector<NurbsCurve> arcs;
  const double s = ccw ? 1.0 : -1.0;
  for (int q = 0; q < 4; ++q) {
    const double th0 = s * q * M_PI / 2;
    arcs.push_back(make_arc(center, radius, th0, th0 + s * M_PI / 2, role, side));
  }
  return arcs;
}

std::vector<CurveLoop> assemble_loops(const std::vector<NurbsCurve>& curves, double tol) {
  const int nc = static_cast<int>(curves.size());
  std::vector<bool> used(nc, false);
  std::vector<CurveLoop> loops;
  for (int seed = 0; seed < nc; ++seed) {
    if (used[seed]) continue;
    CurveLoop loop;
    loop.curve_ids.push_back(seed);
    used[seed] = true;
    // extend forward
    Vec2 tail = curves[seed].end();
    bool grew = true;
    while (grew) {
      grew = false;
      for (int j = 0; j < nc; ++j) {
        if (used[j]) continue;
        if ((curves[j].start() - tail).norm() <= tol) {
          loop.curve_ids.push_back(j);
          used[j] = true;
          tail = curves[j].end();
          grew = true;
          break;
        }
      }
    }
    // extend backward
    Vec2 head = curves[seed].start();
    grew = true;
    while (grew) {
      grew = false;
      for (int j = 0; j < nc; ++j) {
        if (used[j]) continue;
        if ((curves[j].end() - head).norm() <= tol) {
          loop.curve_ids.insert(loop.curve_ids.begin(), j);
          used[j] = true;
          head = curves[j].start();
          grew = true;
          break;
        }
      }
    }
    loop.closed = (tail - head).norm() <= tol;
    for (size_t i = 1; i < loop.curve_ids.size(); ++i) {
      if (curves[loop.curve_ids[i]].fluid_side != curves[loop.curve_ids[0]].fluid_side)
        throw std::invalid_argument("loop: inconsistent fluid side along a chain");
    }
    loops.push_back(std::move(loop));
  }
  return loops;
}

}  // namespace uhdg
