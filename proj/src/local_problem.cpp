#include "uhdg/local_problem.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

#include "uhdg/triangulate.hpp"

namespace uhdg {
namespace {

int find_root(std::vector<int>& up, int x) {
  while (up[x] != x) x = up[x] = up[up[x]];
  return x;
}

int fluid_of(RegionTag t) {
  if (t == RegionTag::fluid1) return 1;
  if (t == RegionTag::fluid2) return 2;
  return 0;
}

/* side of the element box a straight piece lies on: [left,right,bottom,top] */
int side_of_piece(const BoundaryPiece& bp, const Vec2& lo, const Vec2& hi) {
  const double tol = 1e-9 * (hi - lo).norm();
  if (std::abs(bp.a.x() - lo.x()) < tol && std::abs(bp.b.x() - lo.x()) < tol) return 0;
  if (std::abs(bp.a.x() - hi.x()) < tol && std::abs(bp.b.x() - hi.x()) < tol) return 1;
  if (std::abs(bp.a.y() - lo.y()) < tol && std::abs(bp.b.y() - lo.y()) < tol) return 2;
  if (std::abs(bp.a.y() - hi.y()) < tol && std::abs(bp.b.y() - hi.y()) < tol) return 3;
  throw std::runtime_error("local: straight boundary piece off the element box");
}

Vec2 side_normal(int side) {
  switch (side) {
    case 0: return {-1.0, 0.0};
    case 1: return {1.0, 0.0};
    case 2: return {0.0, -1.0};
    default: return {0.0, 1.0};
  }
}

/* full extent of an element side, oriented along +x/+y like mesh faces */
std::pair<Vec2, Vec2> side_span(const Vec2& lo, const Vec2& hi, int side) {
  switch (side) {
    case 0: return {Vec2(lo.x(), lo.y()), Vec2(lo.x(), hi.y())};
    case 1: return {Vec2(hi.x(), lo.y()), Vec2(hi.x(), hi.y())};
    case 2: return {Vec2(lo.x(), lo.y()), Vec2(hi.x(), lo.y())};
    default: return {Vec2(lo.x(), hi.y()), Vec2(hi.x(), hi.y())};
  }
}

Eigen::VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

int Patch::dofs() const {
  int d = bordered() ? 1 : 0;
  for (const auto& f : fields) d += f.dofs();
  return d;
}

PatchSet build_patches(const CartesianMesh& mesh, const CutTopology& topo,
                       const ExtensionPlan& plan, const std::vector<int>& degree) {
  const int ne = mesh.n_elements();
  if (static_cast<int>(degree.size()) != ne)
    throw std::invalid_argument("build_patches: one degree per element required");

  std::vector<bool> active(ne, false);
  for (int e = 0; e < ne; ++e) {
    if (topo.is_cut(e)) {
      for (const auto& r : topo.cut_of(e).regions)
        if (fluid_of(r.tag)) active[e] = true;
    } else {
      active[e] = fluid_of(topo.element_tag[e]) != 0;
    }
  }

  PatchSet out;
  out.warnings = plan.warnings;
  out.face_degree.assign(mesh.n_faces(), -1);
  for (int e = 0; e < ne; ++e) {
    if (!active[e]) continue;
    for (int f : mesh.faces_of(e)) out.face_degree[f] = std::max(out.face_degree[f], degree[e]);
  }

  // merge extension receivers with their donors; donated regions change field
  std::vector<int> up(ne);
  for (int e = 0; e < ne; ++e) up[e] = e;
  std::map<std::pair<int, int>, const Extension*> donated;
  for (const auto& ex : plan.extensions) {
    up[find_root(up, ex.element)] = find_root(up, ex.donor);
    donated[{ex.element, ex.region}] = &ex;
    const auto& reg = topo.cut_of(ex.element).regions[ex.region];
    out.erased_uhat.insert({ex.shared_face, fluid_of(reg.tag)});
  }

  std::map<int, int> patch_of_root;
  out.patch_of_element.assign(ne, -1);
  for (int e = 0; e < ne; ++e) {
    if (!active[e]) continue;
    const int r = find_root(up, e);
    auto [it, fresh] = patch_of_root.emplace(r, static_cast<int>(out.patches.size()));
    if (fresh) out.patches.emplace_back();
    out.patch_of_element[e] = it->second;
    out.patches[it->second].elements.push_back(e);
  }

  for (auto& patch : out.patches) {
    std::map<std::pair<int, int>, int> field_of;  // (owner element, fluid)
    auto field_index = [&](int e, int fluid) {
      auto it = field_of.find({e, fluid});
      if (it != field_of.end()) return it->second;
      auto [lo, hi] = mesh.element_box(e);
      const int idx = static_cast<int>(patch.fields.size());
      patch.fields.push_back(LocalField{e, fluid, ElementBasis(degree[e], lo, hi), {}, {}, {}, 0.0});
      field_of.emplace(std::pair<int, int>{e, fluid}, idx);
      return idx;
    };

    struct IfacePiece {
      int field;
      const BoundaryPiece* bp;
      int fluid;
      int kfield;
    };
    std::vector<IfacePiece> ipieces;

    auto add_region = [&](int fidx, const ElementRegion& reg, int reg_element, int reg_index) {
      auto& F = patch.fields[fidx];
      const int kf = F.basis.degree();
      F.volume.push_back(region_rule(reg, kf + 3));
      F.pieces.emplace_back(reg_element, reg_index);
      F.area += reg.area;
      patch.area += reg.area;
      auto [lo, hi] = mesh.element_box(reg_element);
      auto do_piece = [&](const BoundaryPiece& bp) {
        if (!bp.curved) {
          const int side = side_of_piece(bp, lo, hi);
          const auto [fa, fb] = side_span(lo, hi, side);
          const double ta = std::min(bp.t0, bp.t1), tb = std::max(bp.t0, bp.t1);
          BoundaryPortion po;
          po.face = bp.face;
          if (topo.fitted_boundary_face[bp.face]) {
            po.type = PortionType::dirichlet;
            po.rule = face_rule(fa, fb, ta, tb, side_normal(side), kf + 3);
          } else {
            if (out.erased_uhat.count({bp.face, F.fluid})) return;
            po.type = PortionType::skeleton;
            po.rule = face_rule(fa, fb, ta, tb, side_normal(side),
                                std::max(kf, out.face_degree[bp.face]) + 3);
          }
          F.boundary.push_back(std::move(po));
          return;
        }
        if (bp.seg.curve->role == CurveRole::interface_) {
          ipieces.push_back({fidx, &bp, F.fluid, kf});
          return;
        }
        BoundaryPortion po;
        po.type = bp.seg.curve->role == CurveRole::neumann ? PortionType::neumann
                                                           : PortionType::dirichlet;
        po.nitsche = po.type == PortionType::dirichlet;
        po.rule = curve_rule(bp.seg, bp.region_side(), kf + 3);
        if (po.type == PortionType::neumann) patch.has_neumann = true;
        F.boundary.push_back(std::move(po));
      };
      for (const auto& bp : reg.loop) do_piece(bp);
      for (const auto& hole : reg.holes)
        for (const auto& bp : hole) do_piece(bp);
    };

    for (int e : patch.elements) {
      if (topo.is_cut(e)) {
        const auto& ce = topo.cut_of(e);
        for (size_t r = 0; r < ce.regions.size(); ++r) {
          const auto& reg = ce.regions[r];
          const int fl = fluid_of(reg.tag);
          if (!fl || donated.count({e, static_cast<int>(r)})) continue;
          add_region(field_index(e, fl), reg, e, static_cast<int>(r));
        }
        continue;
      }
      const int fl = fluid_of(topo.element_tag[e]);
      const int fidx = field_index(e, fl);
      auto& F = patch.fields[fidx];
      auto [lo, hi] = mesh.element_box(e);
      const int kf = F.basis.degree();
      F.volume.push_back(box_rule(lo, hi, kf + 3));
      F.pieces.emplace_back(e, -1);
      const double a = (hi - lo).x() * (hi - lo).y();
      F.area += a;
      patch.area += a;
      for (int side = 0; side < 4; ++side) {
        const int f = mesh.faces_of(e)[side];
        const auto [fa, fb] = side_span(lo, hi, side);
        BoundaryPortion po;
        po.face = f;
        if (topo.fitted_boundary_face[f]) {
          po.type = PortionType::dirichlet;
          po.rule = face_rule(fa, fb, 0.0, 1.0, side_normal(side), kf + 3);
        } else {
          if (out.erased_uhat.count({f, fl})) continue;
          po.type = PortionType::skeleton;
          po.rule = face_rule(fa, fb, 0.0, 1.0, side_normal(side),
                              std::max(kf, out.face_degree[f]) + 3);
        }
        F.boundary.push_back(std::move(po));
      }
    }

    // donated regions join their donor's field, integrated with its basis
    for (int e : patch.elements) {
      if (!topo.is_cut(e)) continue;
      const auto& ce = topo.cut_of(e);
      for (size_t r = 0; r < ce.regions.size(); ++r) {
        auto it = donated.find({e, static_cast<int>(r)});
        if (it == donated.end()) continue;
        const auto& reg = ce.regions[r];
        add_region(field_index(it->second->donor, fluid_of(reg.tag)), reg, e,
                   static_cast<int>(r));
      }
    }

    // pair the two sides of each interface piece; the rule lives on the
    // fluid-1 field so its normals are n^1
    std::map<std::tuple<const NurbsCurve*, double, double>, std::vector<int>> by_seg;
    for (int i = 0; i < static_cast<int>(ipieces.size()); ++i) {
      const auto& s = ipieces[i].bp->seg;
      by_seg[{s.curve, s.lo, s.hi}].push_back(i);
    }
    for (const auto& [key, v] : by_seg) {
      if (v.size() != 2 || ipieces[v[0]].fluid + ipieces[v[1]].fluid != 3)
        throw std::runtime_error("local: interface piece without a matching partner in patch");
      const int i1 = ipieces[v[0]].fluid == 1 ? v[0] : v[1];
      const int i2 = v[0] + v[1] - i1;
      BoundaryPortion po;
      po.type = PortionType::interface_;
      po.partner = ipieces[i2].field;
      po.rule = curve_rule(ipieces[i1].bp->seg, ipieces[i1].bp->region_side(),
                           std::max(ipieces[i1].kfield, ipieces[i2].kfield) + 3);
      patch.fields[ipieces[i1].field].boundary.push_back(std::move(po));
    }
  }
  return out;
}

LocalSystem assemble_local(const Patch& patch, const StokesCoefficients& coef,
                           const std::vector<int>& face_degree, FaceBasis::Kind face_kind,
                           const CartesianMesh& mesh) {
  LocalSystem sys;
  sys.bordered = patch.bordered();
  sys.area = patch.area;
  const int nfld = static_cast<int>(patch.fields.size());
  std::vector<int> off(nfld);
  int ntot = 0;
  for (int i = 0; i < nfld; ++i) {
    off[i] = ntot;
    ntot += patch.fields[i].dofs();
  }
  const int last = ntot;  // pressure-mean row/column when bordered
  if (sys.bordered) ++ntot;
  sys.A.setZero(ntot, ntot);
  sys.b.setZero(ntot);

  std::map<std::pair<int, int>, int> blk;  // (face, fluid) -> column offset
  for (const auto& F : patch.fields)
    for (const auto& po : F.boundary)
      if (po.type == PortionType::skeleton) blk.emplace(std::pair<int, int>{po.face, F.fluid}, 0);
  int ncols = 0;
  for (auto& [key, o] : blk) {
    UhatBlock ub{key.first, key.second, face_degree[key.first], ncols};
    o = ncols;
    ncols += ub.count();
    sys.uhat.push_back(ub);
  }
  sys.B.setZero(ntot, ncols);
  if (sys.bordered) sys.compat_row.setZero(ncols);

  const double tau = coef.tau();
  const double h = std::max(mesh.hx(), mesh.hy());

  for (int fi = 0; fi < nfld; ++fi) {
    const LocalField& F = patch.fields[fi];
    const int N = F.n();
    const double smu = std::sqrt(coef.mu(F.fluid));
    auto Ls = [&](int i, int j) { return off[fi] + (2 * i + j) * N; };
    auto us = [&](int i) { return off[fi] + (4 + i) * N; };
    const int ps = off[fi] + 6 * N;

    for (const AreaRule& vr : F.volume) {
      Eigen::MatrixXd Nv, Nx, Ny;
      F.basis.eval_grad(vr.pts, Nv, Nx, Ny);
      const Eigen::VectorXd w = to_vec(vr.w);
      const Eigen::MatrixXd NW = Nv * w.asDiagonal();
      const Eigen::MatrixXd M = NW * Nv.transpose();
      const Eigen::MatrixXd C[2] = {Nx * w.asDiagonal() * Nv.transpose(),
                                    Ny * w.asDiagonal() * Nv.transpose()};
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          sys.A.block(Ls(i, j), Ls(i, j), N, N) -= M;
          sys.A.block(Ls(i, j), us(i), N, N) += smu * C[j];
          sys.A.block(us(i), Ls(i, j), N, N) += smu * C[j].transpose();
        }
        sys.A.block(us(i), ps, N, N) += C[i].transpose();
        sys.A.block(ps, us(i), N, N) += C[i];
      }
      if (coef.source) {
        Eigen::VectorXd s0(vr.size()), s1(vr.size());
        for (int q = 0; q < vr.size(); ++q) {
          const Vec2 s = coef.source(vr.pts[q], F.fluid);
          s0[q] = s.x();
          s1[q] = s.y();
        }
        sys.b.segment(us(0), N) += NW * s0;
        sys.b.segment(us(1), N) += NW * s1;
      }
      if (sys.bordered) {
        const Eigen::VectorXd ap = NW * Eigen::VectorXd::Ones(vr.size());
        sys.A.block(last, ps, 1, N) += ap.transpose();
        sys.A.block(ps, last, N, 1) += ap;
      }
    }

    for (const BoundaryPortion& po : F.boundary) {
      const LineRule& r = po.rule;
      const int Q = r.size();
      const Eigen::MatrixXd Nb = F.basis.eval(r.pts);
      const Eigen::VectorXd w = to_vec(r.w);
      Eigen::VectorXd nx(Q), ny(Q);
      for (int q = 0; q < Q; ++q) {
        nx[q] = r.normal[q].x();
        ny[q] = r.normal[q].y();
      }
      const Eigen::VectorXd nc[2] = {nx, ny};

      switch (po.type) {
        case PortionType::skeleton: {
          const Eigen::MatrixXd Mb = Nb * w.asDiagonal() * Nb.transpose();
          const int col = blk.at({po.face, F.fluid});
          const int m = face_degree[po.face] + 1;
          const FaceBasis fb(face_kind, face_degree[po.face]);
          const Eigen::MatrixXd P = fb.eval(r.s);
          for (int i = 0; i < 2; ++i) {
            sys.A.block(us(i), us(i), N, N) += tau * Mb;
            const int c = col + i * m;
            for (int j = 0; j < 2; ++j)
              sys.B.block(Ls(i, j), c, N, m) -=
                  smu * Nb * w.cwiseProduct(nc[j]).asDiagonal() * P.transpose();
            sys.B.block(us(i), c, N, m) -= tau * Nb * w.asDiagonal() * P.transpose();
            sys.B.block(ps, c, N, m) -= Nb * w.cwiseProduct(nc[i]).asDiagonal() * P.transpose();
            if (sys.bordered) sys.compat_row.segment(c, m) += P * w.cwiseProduct(nc[i]);
          }
          break;
        }
        case PortionType::dirichlet: {
          const double pen = tau + (po.nitsche ? coef.eta / h : 0.0);
          const Eigen::MatrixXd Mb = Nb * w.asDiagonal() * Nb.transpose();
          Eigen::VectorXd d0 = Eigen::VectorXd::Zero(Q), d1 = Eigen::VectorXd::Zero(Q);
          if (coef.dirichlet)
            for (int q = 0; q < Q; ++q) {
              const Vec2 ud = coef.dirichlet(r.pts[q], F.fluid);
              d0[q] = ud.x();
              d1[q] = ud.y();
            }
          const Eigen::VectorXd dc[2] = {d0, d1};
          for (int i = 0; i < 2; ++i) {
            sys.A.block(us(i), us(i), N, N) += pen * Mb;
            for (int j = 0; j < 2; ++j)
              sys.b.segment(Ls(i, j), N) +=
                  smu * Nb * w.cwiseProduct(nc[j]).cwiseProduct(dc[i]);
            sys.b.segment(us(i), N) += pen * Nb * w.cwiseProduct(dc[i]);
          }
          const Eigen::VectorXd udn = d0.cwiseProduct(nx) + d1.cwiseProduct(ny);
          sys.b.segment(ps, N) += Nb * w.cwiseProduct(udn);
          if (sys.bordered) sys.compat_rhs -= w.dot(udn);
          break;
        }
        case PortionType::neumann: {
          for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
              const Eigen::MatrixXd Fj =
                  Nb * w.cwiseProduct(nc[j]).asDiagonal() * Nb.transpose();
              sys.A.block(Ls(i, j), us(i), N, N) -= smu * Fj;
              sys.A.block(us(i), Ls(i, j), N, N) -= smu * Fj;
            }
            const Eigen::MatrixXd Fi = Nb * w.cwiseProduct(nc[i]).asDiagonal() * Nb.transpose();
            sys.A.block(us(i), ps, N, N) -= Fi;
            sys.A.block(ps, us(i), N, N) -= Fi;
          }
          if (coef.traction) {
            Eigen::VectorXd t0(Q), t1(Q);
            for (int q = 0; q < Q; ++q) {
              const Vec2 t = coef.traction(r.pts[q], r.normal[q], F.fluid);
              t0[q] = t.x();
              t1[q] = t.y();
            }
            sys.b.segment(us(0), N) += Nb * w.cwiseProduct(t0);
            sys.b.segment(us(1), N) += Nb * w.cwiseProduct(t1);
          }
          break;
        }
        case PortionType::interface_: {
          const LocalField& G = patch.fields[po.partner];
          const int gi = po.partner;
          const Eigen::MatrixXd Ng = G.basis.eval(r.pts);
          auto Lg = [&](int i, int j) { return off[gi] + (2 * i + j) * G.n(); };
          auto ug = [&](int i) { return off[gi] + (4 + i) * G.n(); };
          const int pg = off[gi] + 6 * G.n();
          // index 0: this (fluid-1) field, rule normals are its outward n^1;
          // index 1: the partner field with n^2 = -n^1
          const Eigen::MatrixXd* Nf[2] = {&Nb, &Ng};
          const double sg[2] = {1.0, -1.0};
          const double sm[2] = {smu, std::sqrt(coef.mu(G.fluid))};
          const int nn[2] = {N, G.n()};
          auto Lrow = [&](int f, int i, int j) { return f == 0 ? Ls(i, j) : Lg(i, j); };
          auto urow = [&](int f, int i) { return f == 0 ? us(i) : ug(i); };
          auto prow = [&](int f) { return f == 0 ? ps : pg; };
          for (int T = 0; T < 2; ++T)
            for (int S = 0; S < 2; ++S) {
              for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                  // L-equation rows carry the test-side normal, momentum rows
                  // the trial-side one (jump/mean pairing)
                  const Eigen::MatrixXd FT =
                      (*Nf[T]) * (sg[T] * w.cwiseProduct(nc[j])).asDiagonal() *
                      Nf[S]->transpose();
                  sys.A.block(Lrow(T, i, j), urow(S, i), nn[T], nn[S]) -= 0.5 * sm[T] * FT;
                  const Eigen::MatrixXd FS =
                      (*Nf[T]) * (sg[S] * w.cwiseProduct(nc[j])).asDiagonal() *
                      Nf[S]->transpose();
                  sys.A.block(urow(T, i), Lrow(S, i, j), nn[T], nn[S]) -= 0.5 * sm[S] * FS;
                }
                const Eigen::MatrixXd FSi =
                    (*Nf[T]) * (sg[S] * w.cwiseProduct(nc[i])).asDiagonal() *
                    Nf[S]->transpose();
                sys.A.block(urow(T, i), prow(S), nn[T], nn[S]) -= 0.5 * FSi;
                const Eigen::MatrixXd FTi =
                    (*Nf[T]) * (sg[T] * w.cwiseProduct(nc[i])).asDiagonal() *
                    Nf[S]->transpose();
                sys.A.block(prow(T), urow(S, i), nn[T], nn[S]) -= 0.5 * FTi;
              }
            }
          if (coef.gamma != 0.0) {
            // equilibrium check: with kappa = div n^1 > 0 for a drop, the jump
            // p^1 - p^2 = gamma * kappa requires the minus sign here
            const Eigen::VectorXd dn = to_vec(r.div_n);
            for (int T = 0; T < 2; ++T)
              for (int i = 0; i < 2; ++i)
                sys.b.segment(urow(T, i), nn[T]) -=
                    0.5 * coef.gamma * (*Nf[T]) * w.cwiseProduct(dn).cwiseProduct(nc[i]);
          }
          break;
        }
      }
    }
  }
  return sys;
}

double local_condition_number(const LocalSystem& sys) {
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(sys.A);
  const auto& s = svd.singularValues();
  return s(0) / s(s.size() - 1);
}

}  // namespace uhdg
