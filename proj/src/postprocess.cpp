#include "uhdg/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "uhdg/triangulate.hpp"

namespace uhdg {

namespace {

/* values of one scalar sub-field (n coefficients starting at `row`) at the
 * columns of a basis evaluation matrix */
Eigen::VectorXd scalar_at(const Eigen::VectorXd& x, int row, int n, const Eigen::MatrixXd& N) {
  return N.transpose() * x.segment(row, n);
}

struct FieldData {
  const LocalField* F = nullptr;
  Eigen::VectorXd x;  // this field's dof slice
  int n = 0;

  Eigen::VectorXd u(int i, const Eigen::MatrixXd& N) const { return scalar_at(x, (4 + i) * n, n, N); }
  Eigen::VectorXd p(const Eigen::MatrixXd& N) const { return scalar_at(x, 6 * n, n, N); }
  Eigen::VectorXd L(int i, int j, const Eigen::MatrixXd& N) const {
    return scalar_at(x, (2 * i + j) * n, n, N);
  }
};

/* iterate (patch, field, dof slice) triples of a solved state */
template <typename Fn>
void for_each_field(const PatchSet& ps, const GlobalSolution& sol, Fn&& fn) {
  for (size_t p = 0; p < ps.patches.size(); ++p) {
    const auto& patch = ps.patches[p];
    const auto off = field_offsets(patch);
    for (size_t f = 0; f < patch.fields.size(); ++f) {
      FieldData fd;
      fd.F = &patch.fields[f];
      fd.n = fd.F->n();
      fd.x = sol.x[p].segment(off[f], fd.F->dofs());
      fn(static_cast<int>(p), static_cast<int>(f), fd);
    }
  }
}

Eigen::VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

AreaRule piece_rule(const CartesianMesh& mesh, const CutTopology& topo,
                    std::pair<int, int> piece, int npts) {
  if (piece.second < 0) {
    auto [lo, hi] = mesh.element_box(piece.first);
    return box_rule(lo, hi, npts);
  }
  return region_rule(topo.cut_of(piece.first).regions[piece.second], npts);
}

ErrorNorms compute_errors(const CartesianMesh& mesh, const CutTopology& topo, const PatchSet& ps,
                          const GlobalSolution& sol, const StokesCoefficients& coef,
                          const VelocityFn& u_ref, const PressureFn& p_ref,
                          const GradientFn& grad_ref) {
  ErrorNorms out;
  for_each_field(ps, sol, [&](int, int, const FieldData& fd) {
    const double rmu = std::sqrt(coef.mu(fd.F->fluid));
    for (const auto& piece : fd.F->pieces) {
      const AreaRule r = piece_rule(mesh, topo, piece, fd.F->basis.degree() + 5);
      const Eigen::MatrixXd N = fd.F->basis.eval(r.pts);
      const int q = r.size();
      Eigen::VectorXd up[2] = {fd.u(0, N), fd.u(1, N)};
      Eigen::VectorXd pp = fd.p(N);
      for (int i = 0; i < q; ++i) {
        const Vec2 ue = u_ref(r.pts[i], fd.F->fluid);
        out.u += r.w[i] * ((up[0][i] - ue.x()) * (up[0][i] - ue.x()) +
                           (up[1][i] - ue.y()) * (up[1][i] - ue.y()));
        const double pe = p_ref(r.pts[i], fd.F->fluid);
        out.p += r.w[i] * (pp[i] - pe) * (pp[i] - pe);
      }
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          Eigen::VectorXd Lp = fd.L(a, b, N);
          for (int i = 0; i < q; ++i) {
            const double Le = -rmu * grad_ref(r.pts[i], fd.F->fluid)(a, b);
            out.L += r.w[i] * (Lp[i] - Le) * (Lp[i] - Le);
          }
        }
    }
  });
  out.u = std::sqrt(out.u);
  out.p = std::sqrt(out.p);
  out.L = std::sqrt(out.L);
  return out;
}

PostSolution postprocess_velocity(const CartesianMesh& mesh, const CutTopology& topo,
                                  const PatchSet& ps, const GlobalSolution& sol,
                                  const StokesCoefficients& coef) {
  PostSolution post(ps.patches.size());
  for (size_t p = 0; p < ps.patches.size(); ++p) post[p].reserve(ps.patches[p].fields.size());

  for_each_field(ps, sol, [&](int p, int, const FieldData& fd) {
    const int k = fd.F->basis.degree();
    auto [lo, hi] = mesh.element_box(fd.F->element);
    ElementBasis star(k + 1, lo, hi);
    const int ns = star.size();
    const double rmu = std::sqrt(coef.mu(fd.F->fluid));

    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(ns, ns);
    Eigen::VectorXd mean_row = Eigen::VectorXd::Zero(ns);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(ns, 2);
    Eigen::Vector2d mean_rhs = Eigen::Vector2d::Zero();

    for (const auto& piece : fd.F->pieces) {
      const AreaRule r = piece_rule(mesh, topo, piece, k + 4);
      Eigen::MatrixXd Ns, Nx, Ny;
      star.eval_grad(r.pts, Ns, Nx, Ny);
      const Eigen::MatrixXd Np = fd.F->basis.eval(r.pts);
      const Eigen::VectorXd w = to_vec(r.w);
      K += Nx * w.asDiagonal() * Nx.transpose() + Ny * w.asDiagonal() * Ny.transpose();
      mean_row += Ns * w;
      for (int i = 0; i < 2; ++i) {
        // (grad w, grad u*) = -(grad w, L / sqrt(mu)) = (grad w, grad u_h)
        rhs.col(i) -= Nx * w.cwiseProduct(fd.L(i, 0, Np)) / rmu +
                      Ny * w.cwiseProduct(fd.L(i, 1, Np)) / rmu;
        mean_rhs[i] += w.dot(fd.u(i, Np));
      }
    }

    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(ns + 1, ns + 1);
    M.topLeftCorner(ns, ns) = K;
    M.block(0, ns, ns, 1) = mean_row;
    M.block(ns, 0, 1, ns) = mean_row.transpose();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);

    PostField pf{std::move(star), Eigen::MatrixXd(ns, 2)};
    for (int i = 0; i < 2; ++i) {
      Eigen::VectorXd b(ns + 1);
      b.head(ns) = rhs.col(i);
      b[ns] = mean_rhs[i];
      pf.coef.col(i) = lu.solve(b).head(ns);
    }
    post[p].push_back(std::move(pf));
  });
  return post;
}

double postprocessed_error(const CartesianMesh& mesh, const CutTopology& topo, const PatchSet& ps,
                           const PostSolution& post, const VelocityFn& u_ref) {
  double err2 = 0.0;
  for (size_t p = 0; p < ps.patches.size(); ++p) {
    const auto& patch = ps.patches[p];
    for (size_t f = 0; f < patch.fields.size(); ++f) {
      const auto& F = patch.fields[f];
      const auto& pf = post[p][f];
      for (const auto& piece : F.pieces) {
        const AreaRule r = piece_rule(mesh, topo, piece, F.basis.degree() + 5);
        const Eigen::MatrixXd Ns = pf.basis.eval(r.pts);
        const Eigen::MatrixXd us = Ns.transpose() * pf.coef;  // q x 2
        for (int i = 0; i < r.size(); ++i) {
          const Vec2 ue = u_ref(r.pts[i], F.fluid);
          err2 += r.w[i] * ((us(i, 0) - ue.x()) * (us(i, 0) - ue.x()) +
                            (us(i, 1) - ue.y()) * (us(i, 1) - ue.y()));
        }
      }
    }
  }
  return std::sqrt(err2);
}

std::vector<double> error_estimates(const CartesianMesh& mesh, const CutTopology& topo,
                                    const PatchSet& ps, const GlobalSolution& sol,
                                    const PostSolution& post) {
  // (element, fluid) -> (||u*-u||^2, ||u*||^2) on that element's region
  std::map<std::pair<int, int>, std::pair<double, double>> acc;
  for_each_field(ps, sol, [&](int p, int f, const FieldData& fd) {
    const auto& pf = post[p][f];
    for (const auto& piece : fd.F->pieces) {
      const AreaRule r = piece_rule(mesh, topo, piece, fd.F->basis.degree() + 4);
      const Eigen::MatrixXd Ns = pf.basis.eval(r.pts);
      const Eigen::MatrixXd Np = fd.F->basis.eval(r.pts);
      const Eigen::MatrixXd us = Ns.transpose() * pf.coef;
      Eigen::VectorXd up[2] = {fd.u(0, Np), fd.u(1, Np)};
      auto& [err2, base2] = acc[{piece.first, fd.F->fluid}];
      for (int i = 0; i < r.size(); ++i) {
        const double dx = us(i, 0) - up[0][i], dy = us(i, 1) - up[1][i];
        err2 += r.w[i] * (dx * dx + dy * dy);
        base2 += r.w[i] * (us(i, 0) * us(i, 0) + us(i, 1) * us(i, 1));
      }
    }
  });
  std::vector<double> E(mesh.n_elements(), 0.0);
  for (const auto& [key, v] : acc) {
    const double err = std::sqrt(v.first), base = std::sqrt(v.second);
    E[key.first] = std::max(E[key.first], base < 1e-10 ? err : err / base);
  }
  return E;
}

AdaptResult adapt_solve(const CartesianMesh& mesh, const CutTopology& topo,
                        const StokesCoefficients& coef, const AdaptOptions& opt) {
  const int ne = mesh.n_elements();
  const double h_e = std::hypot(mesh.hx(), mesh.hy()) / mesh.diameter();
  if (h_e >= 1.0) throw std::runtime_error("adapt: element size must be below the domain size");
  const ExtensionPlan plan = plan_extensions(mesh, topo, opt.alpha_min, opt.weights);

  AdaptResult res;
  res.degree.assign(ne, opt.k0);
  std::vector<int> prev = res.degree;
  std::vector<int> floor_k(ne, opt.k_min);  // degrees at or below a failed one stay off limits
  std::vector<bool> frozen(ne, false);

  for (int it = 0; it < opt.max_iters; ++it) {
    res.ps = build_patches(mesh, topo, plan, res.degree);
    GlobalSolver solver(mesh, res.ps, coef, opt.kind, opt.p_ref);
    res.sol = solver.solve();
    res.post = postprocess_velocity(mesh, topo, res.ps, res.sol, coef);
    res.estimate = error_estimates(mesh, topo, res.ps, res.sol, res.post);
    ++res.iterations;
    res.trace.push_back({res.degree, res.estimate});

    bool done = true;
    std::vector<int> next = res.degree;
    for (int e = 0; e < ne; ++e) {
      if (res.ps.patch_of_element[e] < 0 || frozen[e]) continue;
      const int k = res.degree[e];
      int dk;
      if (res.estimate[e] <= 0.0) {
        dk = opt.k_min - k;  // exact to machine precision: drop to the floor
      } else {
        if (res.estimate[e] > opt.eps) floor_k[e] = std::max(floor_k[e], std::min(k + 1, opt.k_max));
        dk = static_cast<int>(std::ceil(std::log(opt.eps / res.estimate[e]) / std::log(h_e)));
      }
      int knew = std::clamp(k + dk, floor_k[e], opt.k_max);
      if (it >= 1 && knew == prev[e] && prev[e] != k && std::abs(knew - k) == 1) {
        knew = std::max(knew, k);  // break the two-cycle at the larger degree
        frozen[e] = true;
      }
      if (knew != k) done = false;
      next[e] = knew;
    }
    if (done) {
      res.converged = true;
      break;
    }
    prev = res.degree;
    res.degree = next;
  }
  return res;
}

FluxReport mass_flux(const CutTopology& topo, const PatchSet& ps, const GlobalSolver& solver,
                     const GlobalSolution& sol, const StokesCoefficients& coef) {
  FluxReport report;
  report.subsets.reserve(ps.patches.size());

  for_each_field(ps, sol, [&](int p, int f, const FieldData& fd) {
    if (f == 0) {
      SubsetFlux sf;
      sf.elements = ps.patches[p].elements;
      sf.kind = sf.elements.size() > 1   ? SubsetKind::extended
                : topo.is_cut(sf.elements[0]) ? SubsetKind::cut
                                              : SubsetKind::uncut;
      report.subsets.push_back(std::move(sf));
    }
    double& J = report.subsets.back().J;

    for (const auto& po : fd.F->boundary) {
      const auto& r = po.rule;
      switch (po.type) {
        case PortionType::dirichlet:
          if (coef.dirichlet)
            for (int i = 0; i < r.size(); ++i)
              J += r.w[i] * coef.dirichlet(r.pts[i], fd.F->fluid).dot(r.normal[i]);
          break;
        case PortionType::neumann: {
          const Eigen::MatrixXd N = fd.F->basis.eval(r.pts);
          Eigen::VectorXd up[2] = {fd.u(0, N), fd.u(1, N)};
          for (int i = 0; i < r.size(); ++i)
            J += r.w[i] * (up[0][i] * r.normal[i].x() + up[1][i] * r.normal[i].y());
          break;
        }
        case PortionType::skeleton: {
          const int deg = ps.face_degree[po.face];
          const int off = solver.uhat_offset(po.face, fd.F->fluid);
          if (off < 0) throw std::runtime_error("flux: skeleton portion without a trace block");
          const FaceBasis fb(solver.face_kind(), deg);
          const Eigen::MatrixXd P = fb.eval(r.s);
          const Eigen::VectorXd ux =
              P.transpose() * sol.uhat.segment(off, deg + 1);
          const Eigen::VectorXd uy =
              P.transpose() * sol.uhat.segment(off + deg + 1, deg + 1);
          for (int i = 0; i < r.size(); ++i)
            J += r.w[i] * (ux[i] * r.normal[i].x() + uy[i] * r.normal[i].y());
          break;
        }
        case PortionType::interface_:
          break;  // paired sides share the rule with opposite normals: net zero
      }
    }
  });

  for (const auto& sf : report.subsets) report.total += sf.J;
  return report;
}

}  // namespace uhdg
