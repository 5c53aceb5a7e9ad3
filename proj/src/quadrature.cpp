#include "uhdg/quadrature.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace uhdg {

namespace {

/* Legendre P_n(x) and derivative by the three-term recurrence. */
void legendre(int n, double x, double& p, double& dp) {
  double p0 = 1.0, p1 = x;
  if (n == 0) { p = p0; dp = 0.0; return; }
  for (int k = 2; k <= n; ++k) {
    double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  p = p1;
  dp = n * (x * p1 - p0) / (x * x - 1.0);
}

}  // namespace

void gauss_legendre(int n, Eigen::VectorXd& x, Eigen::VectorXd& w) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n >= 1");
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double xi = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double p, dp;
    for (int it = 0; it < 100; ++it) {
      legendre(n, xi, p, dp);
      double dx = -p / dp;
      xi += dx;
      if (std::abs(dx) < 1e-15) break;
    }
    legendre(n, xi, p, dp);
    x[n - 1 - i] = xi;  // ascending
    w[n - 1 - i] = 2.0 / ((1.0 - xi * xi) * dp * dp);
  }
  if (n == 1) { x[0] = 0.0; w[0] = 2.0; }
}

Eigen::VectorXd gauss_lobatto(int n) {
  if (n < 2) throw std::invalid_argument("gauss_lobatto: n >= 2");
  Eigen::VectorXd x(n);
  x[0] = -1.0;
  x[n - 1] = 1.0;
  const int m = n - 1;  // interior nodes are roots of P'_m
  for (int i = 1; i < n - 1; ++i) {
    double xi = -std::cos(M_PI * i / m);
    for (int it = 0; it < 100; ++it) {
      double p, dp;
      legendre(m, xi, p, dp);
      double d2p = (2.0 * xi * dp - m * (m + 1) * p) / (1.0 - xi * xi);
      double dx = -dp / d2p;
      xi += dx;
      if (std::abs(dx) < 1e-15) break;
    }
    x[i] = xi;
  }
  return x;
}

double LineRule::length() const { return std::accumulate(w.begin(), w.end(), 0.0); }

LineRule face_rule(const Vec2& a, const Vec2& b, double t0, double t1, const Vec2& n, int npts) {
  Eigen::VectorXd gx, gw;
  gauss_legendre(npts, gx, gw);
  LineRule r;
  const double len = (b - a).norm() * (t1 - t0);
  for (int q = 0; q < npts; ++q) {
    const double t = t0 + 0.5 * (gx[q] + 1.0) * (t1 - t0);
    r.pts.push_back(a + t * (b - a));
    r.w.push_back(0.5 * gw[q] * len);
    r.normal.push_back(n);
    r.div_n.push_back(0.0);
    r.s.push_back(2.0 * t - 1.0);  // full-face reference coordinate
  }
  return r;
}

LineRule curve_rule(const CurveSegment& seg, FluidSide side, int npts) {
  Eigen::VectorXd gx, gw;
  gauss_legendre(npts, gx, gw);
  LineRule r;
  const double half = 0.5 * (seg.hi - seg.lo);
  for (int q = 0; q < npts; ++q) {
    const double l = seg.lo + (gx[q] + 1.0) * half;
    auto nc = normal_and_curvature(*seg.curve, l, side);
    r.pts.push_back(seg.curve->eval(l));
    r.w.push_back(gw[q] * half * seg.curve->jacobian(l));
    r.normal.push_back(nc.n);
    r.div_n.push_back(nc.div_n);
  }
  return r;
}

double AreaRule::area() const { return std::accumulate(w.begin(), w.end(), 0.0); }

void AreaRule::append(const AreaRule& other) {
  pts.insert(pts.end(), other.pts.begin(), other.pts.end());
  w.insert(w.end(), other.w.begin(), other.w.end());
}

AreaRule triangle_rule(const Vec2& v1, const Vec2& v2, const Vec2& v3, int npts) {
  Eigen::VectorXd gx, gw;
  gauss_legendre(npts, gx, gw);
  const double det = (v2 - v1).x() * (v3 - v1).y() - (v2 - v1).y() * (v3 - v1).x();
  AreaRule r;
  for (int i = 0; i < npts; ++i) {
    const double u = 0.5 * (gx[i] + 1.0);
    for (int j = 0; j < npts; ++j) {
      const double v = 0.5 * (gx[j] + 1.0);
      // Duffy: (u, v(1-u)) maps the square onto the unit triangle
      const double x = u, y = v * (1.0 - u);
      r.pts.push_back(v1 + x * (v2 - v1) + y * (v3 - v1));
      r.w.push_back(0.25 * gw[i] * gw[j] * (1.0 - u) * std::abs(det));
    }
  }
  return r;
}

AreaRule box_rule(const Vec2& lo, const Vec2& hi, int npts) {
  Eigen::VectorXd gx, gw;
  gauss_legendre(npts, gx, gw);
  const Vec2 d = hi - lo;
  AreaRule r;
  for (int i = 0; i < npts; ++i)
    for (int j = 0; j < npts; ++j) {
      r.pts.emplace_back(lo.x() + 0.5 * (gx[i] + 1.0) * d.x(),
                         lo.y() + 0.5 * (gx[j] + 1.0) * d.y());
      r.w.push_back(0.25 * gw[i] * gw[j] * d.x() * d.y());
    }
  return r;
}

AreaRule curved_triangle_rule(const CurveSegment& seg, const Vec2& x3, int npts) {
  Eigen::VectorXd gx, gw;
  gauss_legendre(npts, gx, gw);
  AreaRule r;
  const double half = 0.5 * (seg.hi - seg.lo);
  int sign = 0;
  for (int i = 0; i < npts; ++i) {
    const double l = seg.lo + (gx[i] + 1.0) * half;
    Vec2 c, d1, d2;
    seg.curve->eval2(l, c, d1, d2);
    const double cross = d1.x() * (x3 - c).y() - d1.y() * (x3 - c).x();
    if (sign == 0) sign = (cross > 0) ? 1 : -1;
    if (cross * sign <= 0.0)
      throw std::runtime_error("curved_triangle_rule: inverted map (vertex on wrong side)");
    for (int j = 0; j < npts; ++j) {
      const double th = 0.5 * (gx[j] + 1.0);
      r.pts.push_back((1.0 - th) * c + th * x3);
      r.w.push_back(gw[i] * half * 0.5 * gw[j] * (1.0 - th) * std::abs(cross));
    }
  }
  return r;
}

double segment_area_contribution(const CurveSegment& seg, int npts) {
  Eigen::VectorXd gx, gw;
  gauss_legendre(npts, gx, gw);
  const double half = 0.5 * (seg.hi - seg.lo);
  double acc = 0.0;
  for (int q = 0; q < npts; ++q) {
    const double l = seg.lo + (gx[q] + 1.0) * half;
    Vec2 c, d1, d2;
    seg.curve->eval2(l, c, d1, d2);
    acc += gw[q] * half * 0.5 * (c.x() * d1.y() - c.y() * d1.x());
  }
  return acc;
}

}  // namespace uhdg
