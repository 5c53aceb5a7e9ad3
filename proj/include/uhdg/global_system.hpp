#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <map>
#include <utility>
#include <vector>

#include "uhdg/local_problem.hpp"

namespace uhdg {

/* Solved global state: per-patch local vectors (including the mean-pressure
 * multiplier on bordered patches), the face traces, the per-patch mean
 * pressures, and the global pressure multiplier of pure-Dirichlet problems. */
struct GlobalSolution {
  std::vector<Eigen::VectorXd> x;  // per patch, local dof layout
  Eigen::VectorXd uhat;
  std::vector<double> rho;  // per patch; zero where a patch is not bordered
  double zeta = 0.0;
  bool has_zeta = false;
};

/* Statically condensed global problem over the face traces, the per-patch
 * mean pressures, and (when no Neumann boundary exists) one global pressure
 * multiplier enforcing the prescribed total pressure integral. The condensed
 * matrix is symmetric; assembly asserts it. */
class GlobalSolver {
 public:
  GlobalSolver(const CartesianMesh& mesh, const PatchSet& ps, const StokesCoefficients& coef,
               FaceBasis::Kind face_kind, double p_ref_integral = 0.0);

  int n_dofs() const { return n_total_; }
  int n_uhat() const { return n_uhat_; }
  bool has_zeta() const { return has_zeta_; }
  FaceBasis::Kind face_kind() const { return kind_; }
  const Eigen::SparseMatrix<double>& matrix() const { return K_; }
  const Eigen::VectorXd& rhs() const { return F_; }
  const LocalSystem& local(int patch) const { return pd_[patch].sys; }

  /* global column of a (face, fluid) trace block; -1 if absent */
  int uhat_offset(int face, int fluid) const;
  int rho_index(int patch) const { return rho_index_[patch]; }

  GlobalSolution solve() const;
  /* extreme-|eigenvalue| power/inverse-power estimate on the condensed matrix */
  double condition_estimate(int iters = 400) const;
  /* exact dense SVD condition number; intended for small systems */
  double condition_exact() const;

 private:
  struct PatchData {
    LocalSystem sys;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    Eigen::VectorXd g;  // A^-1 b
    Eigen::MatrixXd Y;  // A^-1 B
    Eigen::VectorXd z;  // pressure-kernel vector (bordered patches)
    std::vector<int> gcol;  // global offset of each local trace block
  };

  const CartesianMesh& mesh_;
  const PatchSet& ps_;
  StokesCoefficients coef_;
  FaceBasis::Kind kind_;
  std::map<std::pair<int, int>, int> block_offset_;
  std::vector<int> rho_index_;
  int n_uhat_ = 0, n_total_ = 0;
  bool has_zeta_ = false;
  int zeta_index_ = -1;
  std::vector<PatchData> pd_;
  Eigen::SparseMatrix<double> K_;
  Eigen::VectorXd F_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> klu_;
};

/* Independent oracle: assembles and solves the full uncondensed system (all
 * local unknowns, traces, mean pressures, global multiplier) with transmission
 * and compatibility rows built directly from the portion quadrature rules. */
GlobalSolution monolithic_solve(const CartesianMesh& mesh, const PatchSet& ps,
                                const StokesCoefficients& coef, FaceBasis::Kind face_kind,
                                double p_ref_integral = 0.0);

}  // namespace uhdg
