#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "uhdg/global_system.hpp"
#include "uhdg/local_problem.hpp"

namespace uhdg {

/* Rebuild the volume quadrature of one recorded field piece at a chosen point
 * count (per direction). */
AreaRule piece_rule(const CartesianMesh& mesh, const CutTopology& topo,
                    std::pair<int, int> piece, int npts);

/* ---- error norms against a reference solution ---- */
struct ErrorNorms {
  double u = 0.0, p = 0.0, L = 0.0;
};

using VelocityFn = std::function<Vec2(const Vec2&, int)>;         // (x, fluid)
using PressureFn = std::function<double(const Vec2&, int)>;
using GradientFn = std::function<Eigen::Matrix2d(const Vec2&, int)>;  // (grad u)_ij = du_i/dx_j

/* Domain L2 errors of (u, p, L) with L_ref = -sqrt(mu) grad u_ref. */
ErrorNorms compute_errors(const CartesianMesh& mesh, const CutTopology& topo, const PatchSet& ps,
                          const GlobalSolution& sol, const StokesCoefficients& coef,
                          const VelocityFn& u_ref, const PressureFn& p_ref,
                          const GradientFn& grad_ref);

/* ---- superconvergent velocity postprocessing ---- */

/* One degree-(k+1) velocity polynomial per field, on the owner element's box
 * (extension fields span their whole patch support). Column c of `coef` holds
 * component c. */
struct PostField {
  ElementBasis basis;
  Eigen::MatrixXd coef;
};

/* [patch][field], mirroring the PatchSet layout. */
using PostSolution = std::vector<std::vector<PostField>>;

/* Solve the element-by-element gradient-matching problems
 * (grad w, grad u*) = -(grad w, L / sqrt(mu)) with the mean of each component
 * constrained to the mean of u over the field's support. */
PostSolution postprocess_velocity(const CartesianMesh& mesh, const CutTopology& topo,
                                  const PatchSet& ps, const GlobalSolution& sol,
                                  const StokesCoefficients& coef);

/* Domain L2 error of the postprocessed velocity. */
double postprocessed_error(const CartesianMesh& mesh, const CutTopology& topo, const PatchSet& ps,
                           const PostSolution& post, const VelocityFn& u_ref);

/* Element-wise estimate E_e = max over fluids of ||u* - u|| / ||u*|| on the
 * element's region (absolute norm when ||u*|| < 1e-10). Inactive elements
 * report zero; donated regions count toward their geometric element. */
std::vector<double> error_estimates(const CartesianMesh& mesh, const CutTopology& topo,
                                    const PatchSet& ps, const GlobalSolution& sol,
                                    const PostSolution& post);

/* ---- degree adaptivity ---- */
struct AdaptOptions {
  double eps = 1e-2;
  int k0 = 1;
  int k_min = 1, k_max = 6;
  int max_iters = 10;
  double alpha_min = 0.1;
  ExtensionWeights weights{};
  FaceBasis::Kind kind = FaceBasis::Kind::legendre;
  double p_ref = 0.0;
};

struct AdaptRecord {
  std::vector<int> degree;
  std::vector<double> estimate;
};

struct AdaptResult {
  std::vector<int> degree;        // final per-element degrees
  std::vector<double> estimate;   // E_e of the final solve
  int iterations = 0;
  bool converged = false;         // all increments zero
  PatchSet ps;                    // final patches (degrees baked in)
  GlobalSolution sol;             // final solution
  PostSolution post;
  std::vector<AdaptRecord> trace;  // one record per solve
};

/* Iteratively adapt per-element degrees by k <- k + ceil(log(eps/E_e)/log(h_e))
 * until every increment vanishes; h_e is the element diagonal over the mesh
 * diagonal. Degrees alternating by one between consecutive solves freeze at
 * the larger value. */
AdaptResult adapt_solve(const CartesianMesh& mesh, const CutTopology& topo,
                        const StokesCoefficients& coef, const AdaptOptions& opt);

/* ---- mass flux diagnostics ---- */
enum class SubsetKind { uncut, cut, extended };

struct SubsetFlux {
  std::vector<int> elements;
  SubsetKind kind = SubsetKind::uncut;
  double J = 0.0;
};

struct FluxReport {
  std::vector<SubsetFlux> subsets;  // one per patch; a partition of the active elements
  double total = 0.0;
};

/* Net mass flux through each subset contour: Dirichlet data on Dirichlet
 * portions, the recovered trace on Neumann portions, the hybrid trace on
 * skeleton portions; extended patches use their union contour. Interface
 * portions are interior to every subset and their paired contributions cancel
 * identically, so they are omitted. */
FluxReport mass_flux(const CutTopology& topo, const PatchSet& ps, const GlobalSolver& solver,
                     const GlobalSolution& sol, const StokesCoefficients& coef);

}  // namespace uhdg
