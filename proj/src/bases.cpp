#include "uhdg/bases.hpp"

#include <cmath>
#include <stdexcept>

#include "uhdg/quadrature.hpp"

namespace uhdg {

Basis1D Basis1D::lagrange_lobatto(int degree) {
  if (degree < 1) throw std::invalid_argument("basis: degree >= 1");
  Basis1D b;
  b.nodes = gauss_lobatto(degree + 1);
  const int n = degree + 1;
  b.bary_w.resize(n);
  for (int i = 0; i < n; ++i) {
    double w = 1.0;
    for (int j = 0; j < n; ++j)
      if (j != i) w *= (b.nodes[i] - b.nodes[j]);
    b.bary_w[i] = 1.0 / w;
  }
  b.diff.setZero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      b.diff(i, j) = (b.bary_w[j] / b.bary_w[i]) / (b.nodes[i] - b.nodes[j]);
      b.diff(i, i) -= b.diff(i, j);
    }
  }
  return b;
}

Eigen::VectorXd Basis1D::eval(double x) const {
  const int n = size();
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) {
    if (std::abs(x - nodes[i]) < 1e-14) {
      v.setZero();
      v[i] = 1.0;
      return v;
    }
  }
  double denom = 0.0;
  for (int i = 0; i < n; ++i) {
    v[i] = bary_w[i] / (x - nodes[i]);
    denom += v[i];
  }
  return v / denom;
}

void Basis1D::eval_d(double x, Eigen::VectorXd& v, Eigen::VectorXd& dv) const {
  v = eval(x);
  dv = diff.transpose() * v;  // l_j' is degree k-1, re-expanded in the basis
}

ElementBasis::ElementBasis(int degree, const Vec2& lo, const Vec2& hi)
    : k_(degree), lo_(lo), hi_(hi), b1_(Basis1D::lagrange_lobatto(degree)) {}

Vec2 ElementBasis::to_ref(const Vec2& p) const {
  return {2.0 * (p.x() - lo_.x()) / (hi_.x() - lo_.x()) - 1.0,
          2.0 * (p.y() - lo_.y()) / (hi_.y() - lo_.y()) - 1.0};
}

Eigen::MatrixXd ElementBasis::eval(const std::vector<Vec2>& pts) const {
  const int n1 = k_ + 1;
  Eigen::MatrixXd N(size(), pts.size());
  for (size_t q = 0; q < pts.size(); ++q) {
    const Vec2 r = to_ref(pts[q]);
    Eigen::VectorXd vx = b1_.eval(r.x()), vy = b1_.eval(r.y());
    for (int j = 0; j < n1; ++j)
      for (int i = 0; i < n1; ++i) N(j * n1 + i, q) = vx[i] * vy[j];
  }
  return N;
}

void ElementBasis::eval_grad(const std::vector<Vec2>& pts, Eigen::MatrixXd& N,
                             Eigen::MatrixXd& Nx, Eigen::MatrixXd& Ny) const {
  const int n1 = k_ + 1;
  const double sx = 2.0 / (hi_.x() - lo_.x()), sy = 2.0 / (hi_.y() - lo_.y());
  N.resize(size(), pts.size());
  Nx.resize(size(), pts.size());
  Ny.resize(size(), pts.size());
  Eigen::VectorXd vx, vy, dx, dy;
  for (size_t q = 0; q < pts.size(); ++q) {
    const Vec2 r = to_ref(pts[q]);
    b1_.eval_d(r.x(), vx, dx);
    b1_.eval_d(r.y(), vy, dy);
    for (int j = 0; j < n1; ++j) {
      for (int i = 0; i < n1; ++i) {
        const int a = j * n1 + i;
        N(a, q) = vx[i] * vy[j];
        Nx(a, q) = dx[i] * vy[j] * sx;
        Ny(a, q) = vx[i] * dy[j] * sy;
      }
    }
  }
}

FaceBasis::FaceBasis(Kind kind, int degree) : kind_(kind), k_(degree) {
  if (degree < 1) throw std::invalid_argument("face basis: degree >= 1");
  if (kind_ == Kind::lagrange) b1_ = Basis1D::lagrange_lobatto(degree);
}

Eigen::MatrixXd FaceBasis::eval(const std::vector<double>& s) const {
  Eigen::MatrixXd P(size(), s.size());
  if (kind_ == Kind::lagrange) {
    for (size_t q = 0; q < s.size(); ++q) P.col(q) = b1_.eval(s[q]);
    return P;
  }
  for (size_t q = 0; q < s.size(); ++q) {
    double p0 = 1.0, p1 = s[q];
    P(0, q) = p0;
    if (k_ >= 1) P(1, q) = p1;
    for (int n = 2; n <= k_; ++n) {
      const double p2 = ((2 * n - 1) * s[q] * p1 - (n - 1) * p0) / n;
      P(n, q) = p2;
      p0 = p1;
      p1 = p2;
    }
  }
  return P;
}

}  // namespace uhdg
