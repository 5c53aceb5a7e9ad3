#pragma once

#include <Eigen/Dense>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "uhdg/bases.hpp"
#include "uhdg/cut.hpp"
#include "uhdg/mesh.hpp"
#include "uhdg/quadrature.hpp"

namespace uhdg {

/* Problem coefficients and data; function fields may be empty (zero data).
 * The traction callback receives the outward unit normal of the fluid region
 * the condition applies to. */
struct StokesCoefficients {
  double mu1 = 1.0, mu2 = 1.0;
  double gamma = 0.0;             // surface tension coefficient
  double tau_C = 3.0, ell = 1.0;  // stabilization tau = C * max(mu) / ell
  double eta = 10.0;              // Nitsche constant, applied as eta / h
  std::function<Vec2(const Vec2&, int)> source;
  std::function<Vec2(const Vec2&, int)> dirichlet;
  std::function<Vec2(const Vec2&, const Vec2&, int)> traction;

  double mu(int fluid) const { return fluid == 1 ? mu1 : mu2; }
  double tau() const { return tau_C * std::max(mu1, mu2) / ell; }
};

enum class PortionType { skeleton, dirichlet, neumann, interface_ };

/* One piece of a field's region boundary with its quadrature rule. Rule
 * normals point out of the field's region; for interface portions the rule is
 * built from the fluid-1 side, so its normals and div_n refer to n^1. */
struct BoundaryPortion {
  PortionType type = PortionType::skeleton;
  LineRule rule;
  int face = -1;         // principal mesh face (skeleton portions)
  int partner = -1;      // interface portions: index of the fluid-2 field
  bool nitsche = false;  // immersed Dirichlet pieces
};

/* One polynomial field of a patch: a fluid's (L, u, p) unknowns attached to an
 * owner element's tensor-product basis. Volume rules may extend beyond the
 * owner element (donated regions of extension patches). */
struct LocalField {
  int element = -1;
  int fluid = 1;
  ElementBasis basis;
  std::vector<AreaRule> volume;
  std::vector<BoundaryPortion> boundary;
  /* provenance of each volume rule: (element, region index), region -1 for an
   * uncut box; lets postprocessing rebuild rules at other point counts */
  std::vector<std::pair<int, int>> pieces;
  double area = 0.0;

  int n() const { return basis.size(); }
  int dofs() const { return 7 * basis.size(); }
};

/* A local problem: one element, or the union of elements merged by the
 * extension strategy. Neumann-free patches are closed by a pressure-mean row
 * and carry one mean-pressure unknown in the global problem. */
struct Patch {
  std::vector<int> elements;
  std::vector<LocalField> fields;
  bool has_neumann = false;
  double area = 0.0;

  bool bordered() const { return !has_neumann; }
  int dofs() const;
};

struct PatchSet {
  std::vector<Patch> patches;
  std::vector<int> patch_of_element;          // -1 for void or masked elements
  std::vector<int> face_degree;               // max over incident active elements
  std::set<std::pair<int, int>> erased_uhat;  // (face, fluid) pairs without unknowns
  std::vector<std::string> warnings;
};

/* Build the local problems covering the active mesh, merging extension
 * receivers into their donors' patches and erasing the shared-face hybrid
 * unknowns. `degree` is the per-element polynomial degree. */
PatchSet build_patches(const CartesianMesh& mesh, const CutTopology& topo,
                       const ExtensionPlan& plan, const std::vector<int>& degree);

/* Hybrid unknown block of one (face, fluid) pair: 2*(degree+1) coefficients,
 * x-components first. */
struct UhatBlock {
  int face = -1;
  int fluid = 1;
  int degree = 1;
  int offset = 0;  // column offset in the local B matrix

  int count() const { return 2 * (degree + 1); }
};

/* Dense local system A x + B uhat = b. When bordered, the last row/column pair
 * carries the pressure-mean constraint (int p = area * rho) and its
 * multiplier; the matching global right-hand side is area * rho. The
 * compatibility row <psi.n, 1> over the patch skeleton is assembled directly
 * alongside. */
struct LocalSystem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::VectorXd b;
  std::vector<UhatBlock> uhat;
  bool bordered = false;
  double area = 0.0;
  Eigen::VectorXd compat_row;  // over B's columns; empty unless bordered
  double compat_rhs = 0.0;

  int n_uhat() const { return static_cast<int>(B.cols()); }
};

/* offset of each field's dof slice within a patch's local vector */
inline std::vector<int> field_offsets(const Patch& patch) {
  std::vector<int> off(patch.fields.size());
  int run = 0;
  for (size_t i = 0; i < patch.fields.size(); ++i) {
    off[i] = run;
    run += patch.fields[i].dofs();
  }
  return off;
}

LocalSystem assemble_local(const Patch& patch, const StokesCoefficients& coef,
                           const std::vector<int>& face_degree, FaceBasis::Kind face_kind,
                           const CartesianMesh& mesh);

/* 2-norm condition number of the local matrix. */
double local_condition_number(const LocalSystem& sys);

}  // namespace uhdg
