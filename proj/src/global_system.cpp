#include "uhdg/global_system.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <random>
#include <stdexcept>

namespace uhdg {
namespace {

Eigen::VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::VectorXd normal_comp(const LineRule& r, int i) {
  Eigen::VectorXd n(r.size());
  for (int q = 0; q < r.size(); ++q) n[q] = i == 0 ? r.normal[q].x() : r.normal[q].y();
  return n;
}

/* pressure-kernel vector of a bordered patch: unit pressure in every field */
Eigen::VectorXd kernel_vector(const Patch& patch, int ntot) {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(ntot);
  const auto off = field_offsets(patch);
  for (size_t f = 0; f < patch.fields.size(); ++f) {
    const int n = patch.fields[f].n();
    z.segment(off[f] + 6 * n, n).setOnes();
  }
  return z;
}

}  // namespace

GlobalSolver::GlobalSolver(const CartesianMesh& mesh, const PatchSet& ps,
                           const StokesCoefficients& coef, FaceBasis::Kind face_kind,
                           double p_ref_integral)
    : mesh_(mesh), ps_(ps), coef_(coef), kind_(face_kind) {
  const int npatch = static_cast<int>(ps.patches.size());
  pd_.resize(npatch);
  has_zeta_ = true;
  for (const Patch& patch : ps.patches)
    if (patch.has_neumann) has_zeta_ = false;

  // global trace numbering, sorted by (face, fluid)
  for (int p = 0; p < npatch; ++p) {
    pd_[p].sys = assemble_local(ps.patches[p], coef_, ps.face_degree, kind_, mesh_);
    for (const UhatBlock& ub : pd_[p].sys.uhat) block_offset_.emplace(std::pair{ub.face, ub.fluid}, 0);
  }
  for (auto& [key, o] : block_offset_) {
    o = n_uhat_;
    n_uhat_ += 2 * (ps.face_degree[key.first] + 1);
  }
  rho_index_.assign(npatch, -1);
  int run = n_uhat_;
  for (int p = 0; p < npatch; ++p)
    if (ps.patches[p].bordered()) rho_index_[p] = run++;
  if (has_zeta_) zeta_index_ = run++;
  n_total_ = run;

  F_ = Eigen::VectorXd::Zero(n_total_);
  std::vector<Eigen::Triplet<double>> trip;
  const double tau = coef_.tau();

  for (int p = 0; p < npatch; ++p) {
    PatchData& pd = pd_[p];
    const int ntot = static_cast<int>(pd.sys.A.rows());
    const int m = pd.sys.n_uhat();
    pd.lu.compute(pd.sys.A);
    pd.g = pd.lu.solve(pd.sys.b);
    if (m > 0) pd.Y = pd.lu.solve(pd.sys.B);
    if (pd.sys.bordered) pd.z = kernel_vector(ps.patches[p], ntot);

    // local trace column -> global column
    std::vector<int> gmap(m);
    pd.gcol.resize(pd.sys.uhat.size());
    for (size_t bi = 0; bi < pd.sys.uhat.size(); ++bi) {
      const UhatBlock& ub = pd.sys.uhat[bi];
      const int g0 = block_offset_.at({ub.face, ub.fluid});
      pd.gcol[bi] = g0;
      for (int c = 0; c < ub.count(); ++c) gmap[ub.offset + c] = g0 + c;
    }

    if (m > 0) {
      const Eigen::MatrixXd S = pd.sys.B.transpose() * pd.Y;
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
          if (S(a, b) != 0.0) trip.emplace_back(gmap[a], gmap[b], S(a, b));
      const Eigen::VectorXd fb = pd.sys.B.transpose() * pd.g;
      for (int a = 0; a < m; ++a) F_[gmap[a]] += fb[a];
    }
    if (pd.sys.bordered) {
      const int rc = rho_index_[p];
      for (int a = 0; a < m; ++a)
        if (pd.sys.compat_row[a] != 0.0) {
          trip.emplace_back(gmap[a], rc, pd.sys.compat_row[a]);
          trip.emplace_back(rc, gmap[a], pd.sys.compat_row[a]);
        }
      F_[rc] = pd.sys.compat_rhs;
      if (has_zeta_) {
        trip.emplace_back(rc, zeta_index_, pd.sys.area);
        trip.emplace_back(zeta_index_, rc, pd.sys.area);
      }
    }
  }
  if (has_zeta_) F_[zeta_index_] = p_ref_integral;

  // stabilization mass of the traces, summed over both sides of each face
  for (int p = 0; p < npatch; ++p)
    for (const LocalField& F : ps.patches[p].fields)
      for (const BoundaryPortion& po : F.boundary) {
        if (po.type != PortionType::skeleton) continue;
        const int g0 = block_offset_.at({po.face, F.fluid});
        const int mdeg = ps.face_degree[po.face];
        const FaceBasis fb(kind_, mdeg);
        const Eigen::MatrixXd P = fb.eval(po.rule.s);
        const Eigen::VectorXd w = to_vec(po.rule.w);
        const Eigen::MatrixXd Mf = tau * (P * w.asDiagonal() * P.transpose());
        for (int i = 0; i < 2; ++i)
          for (int a = 0; a <= mdeg; ++a)
            for (int b = 0; b <= mdeg; ++b)
              trip.emplace_back(g0 + i * (mdeg + 1) + a, g0 + i * (mdeg + 1) + b, -Mf(a, b));
      }

  K_.resize(n_total_, n_total_);
  K_.setFromTriplets(trip.begin(), trip.end());

  const Eigen::SparseMatrix<double> Kt = K_.transpose();
  const double scale = K_.coeffs().size() ? K_.coeffs().cwiseAbs().maxCoeff() : 1.0;
  const Eigen::SparseMatrix<double> D = K_ - Kt;
  const double defect = D.coeffs().size() ? D.coeffs().cwiseAbs().maxCoeff() : 0.0;
  if (defect > 1e-10 * std::max(1.0, scale))
    throw std::runtime_error("global: condensed matrix lost symmetry");

  if (n_total_ > 0) {
    klu_.compute(K_);
    if (klu_.info() != Eigen::Success)
      throw std::runtime_error("global: condensed factorization failed");
  }
}

int GlobalSolver::uhat_offset(int face, int fluid) const {
  const auto it = block_offset_.find({face, fluid});
  return it == block_offset_.end() ? -1 : it->second;
}

GlobalSolution GlobalSolver::solve() const {
  GlobalSolution sol;
  sol.has_zeta = has_zeta_;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n_total_);
  if (n_total_ > 0) {
    y = klu_.solve(F_);
    if (klu_.info() != Eigen::Success) throw std::runtime_error("global: solve failed");
  }
  sol.uhat = y.head(n_uhat_);
  sol.rho.assign(ps_.patches.size(), 0.0);
  for (size_t p = 0; p < ps_.patches.size(); ++p)
    if (rho_index_[p] >= 0) sol.rho[p] = y[rho_index_[p]];
  if (has_zeta_) sol.zeta = y[zeta_index_];

  sol.x.resize(ps_.patches.size());
  for (size_t p = 0; p < ps_.patches.size(); ++p) {
    const PatchData& pd = pd_[p];
    Eigen::VectorXd xp = pd.g;
    const int m = pd.sys.n_uhat();
    if (m > 0) {
      Eigen::VectorXd up(m);
      for (size_t bi = 0; bi < pd.sys.uhat.size(); ++bi) {
        const UhatBlock& ub = pd.sys.uhat[bi];
        up.segment(ub.offset, ub.count()) = y.segment(pd.gcol[bi], ub.count());
      }
      xp -= pd.Y * up;
    }
    if (pd.sys.bordered) xp += sol.rho[p] * pd.z;
    sol.x[p] = std::move(xp);
  }
  return sol;
}

double GlobalSolver::condition_estimate(int iters) const {
  const int n = n_total_;
  if (n <= 1) return 1.0;
  std::mt19937 rng(42);
  std::normal_distribution<double> gauss;
  auto extreme = [&](auto&& apply) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = gauss(rng);
    v.normalize();
    double rq = 0.0;
    for (int it = 0; it < iters; ++it) {
      const Eigen::VectorXd w = apply(v);
      const double r = std::abs(v.dot(w));
      const double nw = w.norm();
      if (nw == 0.0) return rq;
      v = w / nw;
      if (it > 8 && std::abs(r - rq) < 1e-10 * std::max(r, 1e-300)) return r;
      rq = r;
    }
    return rq;
  };
  const double lmax = extreme([&](const Eigen::VectorXd& v) { return (K_ * v).eval(); });
  const double linv = extreme([&](const Eigen::VectorXd& v) { return klu_.solve(v).eval(); });
  return lmax * linv;
}

double GlobalSolver::condition_exact() const {
  if (n_total_ <= 1) return 1.0;
  const Eigen::MatrixXd D(K_);
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(D);
  const auto& s = svd.singularValues();
  return s(0) / s(s.size() - 1);
}

GlobalSolution monolithic_solve(const CartesianMesh& mesh, const PatchSet& ps,
                                const StokesCoefficients& coef, FaceBasis::Kind face_kind,
                                double p_ref_integral) {
  const int npatch = static_cast<int>(ps.patches.size());
  const double tau = coef.tau();

  bool has_zeta = true;
  for (const Patch& patch : ps.patches)
    if (patch.has_neumann) has_zeta = false;

  // local systems provide the patch blocks; all coupling rows are rebuilt
  // from the portion rules below
  std::vector<LocalSystem> loc(npatch);
  std::vector<int> po(npatch);
  int run = 0;
  for (int p = 0; p < npatch; ++p) {
    loc[p] = assemble_local(ps.patches[p], coef, ps.face_degree, face_kind, mesh);
    po[p] = run;
    run += static_cast<int>(loc[p].A.rows());
  }
  std::map<std::pair<int, int>, int> block_offset;
  for (int p = 0; p < npatch; ++p)
    for (const UhatBlock& ub : loc[p].uhat) block_offset.emplace(std::pair{ub.face, ub.fluid}, 0);
  const int u0 = run;
  int n_uhat = 0;
  for (auto& [key, o] : block_offset) {
    o = u0 + n_uhat;
    n_uhat += 2 * (ps.face_degree[key.first] + 1);
  }
  run += n_uhat;
  std::vector<int> rho_index(npatch, -1);
  for (int p = 0; p < npatch; ++p)
    if (ps.patches[p].bordered()) rho_index[p] = run++;
  const int zc = has_zeta ? run++ : -1;
  const int n = run;

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd R = Eigen::VectorXd::Zero(n);

  for (int p = 0; p < npatch; ++p) {
    const Patch& patch = ps.patches[p];
    const int ntot = static_cast<int>(loc[p].A.rows());
    M.block(po[p], po[p], ntot, ntot) = loc[p].A;
    R.segment(po[p], ntot) = loc[p].b;
    if (loc[p].bordered) M(po[p] + ntot - 1, rho_index[p]) = -loc[p].area;

    const auto foff = field_offsets(patch);
    for (size_t fi = 0; fi < patch.fields.size(); ++fi) {
      const LocalField& F = patch.fields[fi];
      const int N = F.n();
      const double smu = std::sqrt(coef.mu(F.fluid));
      const int base = po[p] + foff[fi];
      auto Ls = [&](int i, int j) { return base + (2 * i + j) * N; };
      auto us = [&](int i) { return base + (4 + i) * N; };
      const int psl = base + 6 * N;

      for (const BoundaryPortion& bp : F.boundary) {
        if (bp.type != PortionType::skeleton) {
          if (bp.type == PortionType::dirichlet && loc[p].bordered) {
            // compatibility data term
            const LineRule& r = bp.rule;
            double acc = 0.0;
            for (int q = 0; q < r.size(); ++q) {
              const Vec2 ud = coef.dirichlet ? coef.dirichlet(r.pts[q], F.fluid) : Vec2(0, 0);
              acc += r.w[q] * (ud.x() * r.normal[q].x() + ud.y() * r.normal[q].y());
            }
            R[rho_index[p]] -= acc;
          }
          continue;
        }
        const LineRule& r = bp.rule;
        const Eigen::MatrixXd Nb = F.basis.eval(r.pts);
        const Eigen::VectorXd w = to_vec(r.w);
        const int deg = ps.face_degree[bp.face];
        const int m = deg + 1;
        const FaceBasis fb(face_kind, deg);
        const Eigen::MatrixXd P = fb.eval(r.s);
        const int c0 = block_offset.at({bp.face, F.fluid});
        for (int i = 0; i < 2; ++i) {
          const Eigen::VectorXd ni = normal_comp(r, i);
          const int c = c0 + i * m;
          // element equations: trace couplings
          for (int j = 0; j < 2; ++j) {
            const Eigen::VectorXd nj = normal_comp(r, j);
            M.block(Ls(i, j), c, N, m) -= smu * Nb * w.cwiseProduct(nj).asDiagonal() * P.transpose();
          }
          M.block(us(i), c, N, m) -= tau * Nb * w.asDiagonal() * P.transpose();
          M.block(psl, c, N, m) -= Nb * w.cwiseProduct(ni).asDiagonal() * P.transpose();
          // transmission: <w, (sqrt(mu) L + p I) n + tau (u - uhat)> summed over sides
          for (int j = 0; j < 2; ++j) {
            const Eigen::VectorXd nj = normal_comp(r, j);
            M.block(c, Ls(i, j), m, N) += smu * P * w.cwiseProduct(nj).asDiagonal() * Nb.transpose();
          }
          M.block(c, us(i), m, N) += tau * P * w.asDiagonal() * Nb.transpose();
          M.block(c, psl, m, N) += P * w.cwiseProduct(ni).asDiagonal() * Nb.transpose();
          M.block(c, c, m, m) -= tau * P * w.asDiagonal() * P.transpose();
          // compatibility row of the patch
          if (loc[p].bordered)
            M.block(rho_index[p], c, 1, m) += (P * w.cwiseProduct(ni)).transpose();
        }
      }
    }
    if (loc[p].bordered && has_zeta) {
      M(rho_index[p], zc) += loc[p].area;
      M(zc, rho_index[p]) += loc[p].area;
    }
  }
  if (has_zeta) R[zc] = p_ref_integral;

  const Eigen::VectorXd y = Eigen::PartialPivLU<Eigen::MatrixXd>(M).solve(R);

  GlobalSolution sol;
  sol.has_zeta = has_zeta;
  sol.uhat = y.segment(u0, n_uhat);
  sol.rho.assign(npatch, 0.0);
  sol.x.resize(npatch);
  for (int p = 0; p < npatch; ++p) {
    sol.x[p] = y.segment(po[p], loc[p].A.rows());
    if (rho_index[p] >= 0) sol.rho[p] = y[rho_index[p]];
  }
  if (has_zeta) sol.zeta = y[zc];
  return sol;
}

}  // namespace uhdg
