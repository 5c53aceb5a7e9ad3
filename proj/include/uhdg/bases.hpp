#pragma once

#include <Eigen/Dense>
#include <vector>

#include "uhdg/geometry.hpp"

namespace uhdg {

/* 1D Lagrange basis on Gauss-Lobatto nodes, evaluated barycentrically (stable
 * inside and outside [-1,1]; extension donors extrapolate past their square). */
struct Basis1D {
  Eigen::VectorXd nodes;   // ascending, k+1 of them
  Eigen::VectorXd bary_w;
  Eigen::MatrixXd diff;    // diff(i,j) = l_j'(node_i)

  static Basis1D lagrange_lobatto(int degree);
  int size() const { return static_cast<int>(nodes.size()); }
  Eigen::VectorXd eval(double x) const;
  /* values and first derivatives of all functions at x */
  void eval_d(double x, Eigen::VectorXd& v, Eigen::VectorXd& dv) const;
};

/* Tensor-product nodal basis of degree k on the rectangle [lo,hi]; function
 * a = j*(k+1)+i is l_i(xi) l_j(eta). Points are given in physical
 * coordinates; they may lie outside the rectangle (polynomial extension). */
class ElementBasis {
 public:
  ElementBasis(int degree, const Vec2& lo, const Vec2& hi);

  int degree() const { return k_; }
  int size() const { return (k_ + 1) * (k_ + 1); }
  Vec2 to_ref(const Vec2& p) const;

  /* N(a, q) = phi_a(pts[q]) */
  Eigen::MatrixXd eval(const std::vector<Vec2>& pts) const;
  /* physical-gradient variants; Nx = d phi / dx etc. */
  void eval_grad(const std::vector<Vec2>& pts, Eigen::MatrixXd& N,
                 Eigen::MatrixXd& Nx, Eigen::MatrixXd& Ny) const;

 private:
  int k_;
  Vec2 lo_, hi_;
  Basis1D b1_;
};

/* Basis for the hybrid face unknowns on the full-face coordinate s in [-1,1].
 * Cut faces keep this parametrization (no rescaling to the active portion). */
class FaceBasis {
 public:
  enum class Kind { legendre, lagrange };
  FaceBasis(Kind kind, int degree);

  int degree() const { return k_; }
  int size() const { return k_ + 1; }
  Kind kind() const { return kind_; }
  /* P(c, q) = psi_c(s[q]) */
  Eigen::MatrixXd eval(const std::vector<double>& s) const;

 private:
  Kind kind_;
  int k_;
  Basis1D b1_;  // lagrange variant only
};

}  // namespace uhdg
