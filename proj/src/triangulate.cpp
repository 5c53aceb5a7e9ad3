#include "uhdg/triangulate.hpp"
#ifdef UHDG_TRI_DEBUG
#include <cstdio>
#endif

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace uhdg {

namespace {

struct TriError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PEdge {
  bool curved = false;
  const NurbsCurve* curve = nullptr;
  double l0 = 0.0, l1 = 0.0;  // traversal order; l0 > l1 on reversed pieces
};

struct Poly {
  std::vector<Vec2> v;
  std::vector<PEdge> e;  // e[i]: v[i] -> v[(i+1) % size]
  size_t size() const { return v.size(); }
};

double cross3(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

/* boundary sampling density for one curved piece */
int n_subdiv(const BoundaryPiece& bp, int mult) {
  double len = 0.0, kmax = 0.0;
  Vec2 prev = bp.seg.curve->eval(bp.seg.lo);
  for (int i = 1; i <= 8; ++i) {
    const double l = bp.seg.lo + (bp.seg.hi - bp.seg.lo) * i / 8.0;
    const Vec2 p = bp.seg.curve->eval(l);
    len += (p - prev).norm();
    prev = p;
    const auto nc = normal_and_curvature(*bp.seg.curve, l - 0.0625 * (bp.seg.hi - bp.seg.lo),
                                         FluidSide::left);
    kmax = std::max(kmax, std::abs(nc.div_n));
  }
  const int n = std::max(6, static_cast<int>(std::ceil(10.0 * kmax * len)));
  return std::min(256, n * mult);
}

void append_piece(Poly& poly, const BoundaryPiece& bp, int mult) {
  if (!bp.curved) {
    poly.v.push_back(bp.a);
    poly.e.push_back({});
    return;
  }
  const int n = n_subdiv(bp, mult);
  for (int i = 0; i < n; ++i) {
    const double f0 = static_cast<double>(i) / n;
    const double f1 = static_cast<double>(i + 1) / n;
    const double l0 = bp.forward ? bp.seg.lo + f0 * (bp.seg.hi - bp.seg.lo)
                                 : bp.seg.hi - f0 * (bp.seg.hi - bp.seg.lo);
    const double l1 = bp.forward ? bp.seg.lo + f1 * (bp.seg.hi - bp.seg.lo)
                                 : bp.seg.hi - f1 * (bp.seg.hi - bp.seg.lo);
    poly.v.push_back(bp.seg.curve->eval(l0));
    PEdge pe;
    pe.curved = true;
    pe.curve = bp.seg.curve;
    pe.l0 = l0;
    pe.l1 = l1;
    poly.e.push_back(pe);
  }
}

Poly sample_loop(const std::vector<BoundaryPiece>& loop, int mult) {
  Poly p;
  for (const auto& bp : loop) append_piece(p, bp, mult);
  return p;
}

bool point_in_poly(const Poly& P, const Vec2& p) {
  bool in = false;
  const size_t n = P.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    if ((P.v[i].y() > p.y()) != (P.v[j].y() > p.y())) {
      const double xi = P.v[j].x() + (p.y() - P.v[j].y()) / (P.v[i].y() - P.v[j].y()) *
                                         (P.v[i].x() - P.v[j].x());
      if (p.x() < xi) in = !in;
    }
  }
  return in;
}

/* Does segment pq block segment ab? Touches exactly at a or b don't count;
 * anything else (proper crossing, grazing a vertex, collinear overlap) does. */
bool seg_blocks(const Vec2& a, const Vec2& b, const Vec2& p, const Vec2& q, double tol) {
  if ((p - a).norm() < tol || (p - b).norm() < tol || (q - a).norm() < tol || (q - b).norm() < tol)
    return false;  // shares an endpoint with the diagonal: radiates away, no block
  const double d1 = cross3(a, b, p), d2 = cross3(a, b, q);
  const double d3 = cross3(p, q, a), d4 = cross3(p, q, b);
  const double s1 = (b - a).norm(), s2 = (q - p).norm();
  const double e1 = tol * s1, e2 = tol * s2;
  if (((d1 > e1 && d2 < -e1) || (d1 < -e1 && d2 > e1)) &&
      ((d3 > e2 && d4 < -e2) || (d3 < -e2 && d4 > e2)))
    return true;  // proper crossing
  // near-degenerate contact: any endpoint within tol of the other segment interior
  auto near_interior = [&](const Vec2& s0, const Vec2& s1p, const Vec2& x) {
    const Vec2 d = s1p - s0;
    const double L2 = d.squaredNorm();
    if (L2 < tol * tol) return false;
    const double t = (x - s0).dot(d) / L2;
    if (t < 1e-9 || t > 1.0 - 1e-9) return false;
    return (s0 + t * d - x).norm() < tol;
  };
  if (near_interior(a, b, p) || near_interior(a, b, q)) return true;
  if (near_interior(p, q, a) || near_interior(p, q, b)) return true;
  return false;
}

bool diagonal_ok(const Poly& P, size_t i, size_t j, double tol) {
  const Vec2 a = P.v[i], b = P.v[j];
  if ((a - b).norm() < tol) return false;
  const size_t n = P.size();
  for (size_t k = 0; k < n; ++k) {
    const size_t k1 = (k + 1) % n;
    if (k == i || k == j || k1 == i || k1 == j) continue;
    if (seg_blocks(a, b, P.v[k], P.v[k1], tol)) return false;
  }
  return point_in_poly(P, 0.5 * (a + b));
}

void emit_base(AreaRule& out, const Poly& P, size_t base, const Vec2& apex, int npts) {
  const PEdge& e = P.e[base];
  const Vec2 A = P.v[base], B = P.v[(base + 1) % P.size()];
  if (e.curved) {
    CurveSegment seg{e.curve, std::min(e.l0, e.l1), std::max(e.l0, e.l1)};
    out.append(curved_triangle_rule(seg, apex, npts));
  } else {
    out.append(triangle_rule(apex, A, B, npts));
  }
}

/* centroid fan for a pure curved closed loop (no straight edge anywhere) */
void centroid_fan(AreaRule& out, const Poly& P, int npts) {
  Vec2 c = Vec2::Zero();
  double a2 = 0.0;
  const size_t n = P.size();
  for (size_t i = 0; i < n; ++i) {
    const Vec2 &p = P.v[i], &q = P.v[(i + 1) % n];
    const double w = p.x() * q.y() - q.x() * p.y();
    a2 += w;
    c += w * (p + q);
  }
  c /= 3.0 * a2;
  for (size_t i = 0; i < n; ++i) emit_base(out, P, i, c, npts);
}

/* bridge one hole into the outer chain with a doubled slit edge */
Poly bridge_hole(const Poly& outer, const Poly& hole, double tol) {
  size_t hb = 0;
  for (size_t i = 1; i < hole.size(); ++i)
    if (hole.v[i].x() > hole.v[hb].x()) hb = i;
  const Vec2 H = hole.v[hb];

  std::vector<size_t> cand(outer.size());
  for (size_t i = 0; i < cand.size(); ++i) cand[i] = i;
  std::sort(cand.begin(), cand.end(), [&](size_t a, size_t b) {
    return (outer.v[a] - H).squaredNorm() < (outer.v[b] - H).squaredNorm();
  });
  auto clear_to = [&](size_t c) {
    const Vec2 O = outer.v[c];
    for (size_t k = 0; k < outer.size(); ++k) {
      const size_t k1 = (k + 1) % outer.size();
      if (k == c || k1 == c) continue;
      if (seg_blocks(H, O, outer.v[k], outer.v[k1], tol)) return false;
    }
    for (size_t k = 0; k < hole.size(); ++k) {
      const size_t k1 = (k + 1) % hole.size();
      if (k == hb || k1 == hb) continue;
      if (seg_blocks(H, O, hole.v[k], hole.v[k1], tol)) return false;
    }
    return true;
  };
  for (size_t c : cand) {
    if ((outer.v[c] - H).norm() < tol) continue;
    if (!clear_to(c)) continue;
    Poly out;
    const size_t n = outer.size(), m = hole.size();
    for (size_t i = 0; i <= c; ++i) {
      out.v.push_back(outer.v[i]);
      if (i < c) out.e.push_back(outer.e[i]);
    }
    out.e.push_back({});  // bridge outer[c] -> H
    for (size_t i = 0; i <= m; ++i) {
      out.v.push_back(hole.v[(hb + i) % m]);
      if (i < m) out.e.push_back(hole.e[(hb + i) % m]);
    }
    out.e.push_back({});  // bridge H -> outer[c]
    for (size_t i = c; i < n; ++i) {
      out.v.push_back(outer.v[i]);
      out.e.push_back(outer.e[i]);
    }
    // last vertex duplicates outer.v[c] on purpose (slit)
    return out;
  }
  throw TriError("triangulate: no visible bridge for hole");
}

/* chain vertices from..to with their edges, closed by a straight diagonal */
Poly sub_chain(const Poly& P, size_t from, size_t to) {
  Poly R;
  for (size_t k = from;; k = (k + 1) % P.size()) {
    R.v.push_back(P.v[k]);
    if (k == to) break;
    R.e.push_back(P.e[k]);
  }
  R.e.push_back({});
  return R;
}

void fan_poly(AreaRule& out, Poly P, int npts, double tol, int depth) {
  if (depth > 96) throw TriError("triangulate: fan recursion overflow");
  const size_t n = P.size();
  if (n < 3) return;
  if (n == 3) {
    int curved = -1;
    for (int i = 0; i < 3; ++i) {
      if (P.e[i].curved) {
        if (curved >= 0) throw TriError("triangulate: 3-gon with two curved edges");
        curved = i;
      }
    }
    const size_t base = curved >= 0 ? curved : 0;
    emit_base(out, P, base, P.v[(base + 2) % 3], npts);
    return;
  }

  // candidate fan centers: vertices with straight edges on both sides,
  // widest incident edges first; then midpoint splits of straight edges
  struct Cand {
    bool split;
    size_t idx;
    double len;
  };
  std::vector<Cand> cands;
  for (size_t i = 0; i < n; ++i) {
    const size_t prev = (i + n - 1) % n;
    if (!P.e[i].curved && !P.e[prev].curved) {
      const double len = std::min((P.v[(i + 1) % n] - P.v[i]).norm(),
                                  (P.v[i] - P.v[prev]).norm());
      cands.push_back({false, i, len});
    }
  }
  for (size_t i = 0; i < n; ++i)
    if (!P.e[i].curved) cands.push_back({true, i, (P.v[(i + 1) % n] - P.v[i]).norm()});
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.split != b.split) return !a.split;
    return a.len > b.len;
  });
  if (cands.empty()) {  // pure curved closed loop
    centroid_fan(out, P, npts);
    return;
  }

  for (const Cand& cd : cands) {
    Poly Q = P;
    size_t s = cd.idx;
    if (cd.split) {
      const size_t i1 = (cd.idx + 1) % Q.size();
      const Vec2 mid = 0.5 * (Q.v[cd.idx] + Q.v[i1]);
      Q.v.insert(Q.v.begin() + cd.idx + 1, mid);
      Q.e.insert(Q.e.begin() + cd.idx + 1, PEdge{});
      s = cd.idx + 1;
    }
    const size_t qn = Q.size();
    // no other polygon vertex may lie inside or on the candidate triangle:
    // hole chains can dive into a triangle through one of its own corners
    // without ever crossing a side
    auto tri_clear = [&](size_t ia, size_t ib, size_t ic) {
      const Vec2 &A = Q.v[ia], &B = Q.v[ib], &C = Q.v[ic];
      const double perim = (B - A).norm() + (C - B).norm() + (A - C).norm();
      const double atol = tol * perim;
      for (size_t u = 0; u < qn; ++u) {
        if (u == ia || u == ib || u == ic) continue;
        const Vec2& p = Q.v[u];
        if ((p - A).norm() < tol || (p - B).norm() < tol || (p - C).norm() < tol) continue;
        if (cross3(A, B, p) > -atol && cross3(B, C, p) > -atol && cross3(C, A, p) > -atol)
          return false;
      }
      return true;
    };
    // a curved base needs the apex clear of the sub-arc's tangent sweep, or
    // the mapped rule degenerates
    auto curved_ok = [&](size_t base, const Vec2& apex) {
      const PEdge& e = Q.e[base];
      if (!e.curved) return true;
      const double lo = std::min(e.l0, e.l1), hi = std::max(e.l0, e.l1);
      double sgn = 0.0;
      for (int q = 0; q <= 8; ++q) {
        Vec2 c, d1, d2;
        e.curve->eval2(lo + (hi - lo) * q / 8.0, c, d1, d2);
        const double cr = d1.x() * (apex.y() - c.y()) - d1.y() * (apex.x() - c.x());
        if (q == 0) sgn = cr;
        if (sgn * cr <= 0.0) return false;
      }
      return true;
    };
    // emit triangles (v_s, v_j, v_j+1) over a contiguous run of base edges.
    // The run may start anywhere around the polygon, not just at e_s: a
    // center next to a tangent-grazing diagonal often cannot open the fan at
    // its own edge yet sees the far side of the chain perfectly well. Both
    // leftover chains close with a straight diagonal back to v_s.
    for (size_t off = 1; off + 1 < qn; ++off) {
      const size_t ja = (s + off) % qn;
      if (off != 1 && !diagonal_ok(Q, s, ja, tol)) continue;
      size_t j = ja;
      std::vector<size_t> bases;
      while ((j + 1) % qn != s) {
        const size_t j1 = (j + 1) % qn;
        if (cross3(Q.v[s], Q.v[j], Q.v[j1]) < tol * tol) break;  // reflex/degenerate
        if (!tri_clear(s, j, j1) || !curved_ok(j, Q.v[s])) break;
        const bool last = (j1 + 1) % qn == s;
        if (!last && !diagonal_ok(Q, s, j1, tol)) break;
        bases.push_back(j);
        j = j1;
      }
      if (bases.empty()) continue;  // slide the start forward
      for (size_t b : bases) emit_base(out, Q, b, Q.v[s], npts);
      if (off != 1) fan_poly(out, sub_chain(Q, s, ja), npts, tol, depth + 1);
      if ((j + 1) % qn != s) fan_poly(out, sub_chain(Q, j, s), npts, tol, depth + 1);
      return;
    }
  }
#ifdef UHDG_TRI_DEBUG
  std::fprintf(stderr, "fan_poly: stuck, n=%zu depth=%d\n", n, depth);
  for (size_t i = 0; i < n; ++i)
    std::fprintf(stderr, "  v[%zu]=(%.6f,%.6f) e.curved=%d\n", i, P.v[i].x(), P.v[i].y(),
                 static_cast<int>(P.e[i].curved));
#endif
  throw TriError("triangulate: no admissible fan center");
}

}  // namespace

AreaRule region_rule(const ElementRegion& region, int npts) {
  const double scale = std::sqrt(std::max(region.area, 1e-300));
  std::string last_err = "triangulate: failed";
  for (int mult = 1; mult <= 8; mult *= 2) {
    try {
      Poly outer = sample_loop(region.loop, mult);
      for (const auto& hole : region.holes)
        outer = bridge_hole(outer, sample_loop(hole, mult), 1e-12 * std::max(1.0, scale));
      AreaRule rule;
      fan_poly(rule, std::move(outer), npts, 1e-11 * std::max(1.0, scale), 0);
      const double err = std::abs(rule.area() - region.area);
      if (err > 1e-9 * std::max(1.0, region.area))
        throw TriError("triangulate: area mismatch " + std::to_string(err));
      return rule;
    } catch (const std::runtime_error& ex) {
      last_err = ex.what();  // includes inverted curved maps: resample finer
    }
  }
  throw std::runtime_error(last_err);
}

}  // namespace uhdg
