#include <cstdio>
#include "uhdg/cut.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "uhdg/quadrature.hpp"

namespace uhdg {

namespace {

/* Thrown when sampling was too coarse to produce a consistent picture;
 * triggers a resampling retry at doubled density. */
struct SpanError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Event {
  int curve = -1;
  double lambda = 0.0;
  Vec2 p;
  int axis = -1;  // 0: x-line, 1: y-line, -1: vertex termination
  int line = -1;
  bool termination = false;
  double key = 0.0;  // position along the loop
};

struct Span {
  std::vector<CurveSegment> segs;  // forward in lambda, loop order
  int owner = -1;
  int ev_from = -1, ev_to = -1;  // indices into the loop event list
  bool closed = false;           // whole loop inside one element
};

double coord(const Vec2& p, int axis) { return axis == 0 ? p.x() : p.y(); }

double line_pos(const CartesianMesh& m, int axis, int i) {
  return axis == 0 ? m.xline(i) : m.yline(i);
}

/* Bisect f(l) = C(l)[axis] - line to physical tolerance. */
double bisect(const NurbsCurve& c, int axis, double line, double la, double lb, double tol) {
  double fa = coord(c.eval(la), axis) - line;
  for (int it = 0; it < 200; ++it) {
    const double lm = 0.5 * (la + lb);
    const double fm = coord(c.eval(lm), axis) - line;
    if (fa * fm <= 0.0)
      lb = lm;
    else {
      la = lm;
      fa = fm;
    }
    if ((c.eval(la) - c.eval(lb)).norm() < tol) break;
  }
  return 0.5 * (la + lb);
}

struct LoopEvents {
  const CurveLoop* loop;
  std::vector<Event> events;  // sorted along the loop
};

class Classifier {
 public:
  Classifier(const CartesianMesh& mesh, const std::vector<NurbsCurve>& curves,
             const ClassifyOptions& opt)
      : m_(mesh), curves_(curves), opt_(opt), h_(std::min(mesh.hx(), mesh.hy())) {}

  CutTopology run() {
    loops_ = assemble_loops(curves_);
    int n = opt_.n_samples;
    for (int attempt = 0;; ++attempt) {
      try {
        build_events(n);
        build_spans();
        break;
      } catch (const SpanError&) {
        if (attempt >= opt_.max_refine) throw;
        n *= 2;
      }
    }
    build_topology();
    return std::move(topo_);
  }

 private:
  const CartesianMesh& m_;
  const std::vector<NurbsCurve>& curves_;
  ClassifyOptions opt_;
  double h_;
  std::vector<CurveLoop> loops_;
  std::vector<LoopEvents> loop_events_;
  std::vector<Span> spans_;
  CutTopology topo_;

  bool on_line(double v, int axis, int& idx) const {
    const double h = axis == 0 ? m_.hx() : m_.hy();
    const double o = axis == 0 ? m_.origin.x() : m_.origin.y();
    const int nmax = axis == 0 ? m_.nx : m_.ny;
    const double t = (v - o) / h;
    const int i = static_cast<int>(std::lround(t));
    if (i < 0 || i > nmax) return false;
    idx = i;
    return std::abs(v - (o + i * h)) < 1e-11;
  }

  void check_vertex_degeneracy(const Vec2& p) const {
    int ix, iy;
    if (on_line(p.x(), 0, ix) && on_line(p.y(), 1, iy)) {
      const double dx = std::abs(p.x() - m_.xline(ix));
      const double dy = std::abs(p.y() - m_.yline(iy));
      if (std::max(dx, dy) < 1e-12 * h_) {
        std::ostringstream os;
        os << "cut: curve passes through mesh vertex (" << m_.xline(ix) << ", " << m_.yline(iy)
           << "); nudge the grid origin or resolution";
        throw std::runtime_error(os.str());
      }
    }
  }

  void build_events(int n_samples) {
    loop_events_.clear();
    for (const auto& loop : loops_) {
      LoopEvents le;
      le.loop = &loop;
      for (size_t pos = 0; pos < loop.curve_ids.size(); ++pos) {
        const int cid = loop.curve_ids[pos];
        const NurbsCurve& c = curves_[cid];
        // samples, nudged off grid lines
        std::vector<double> ls(n_samples + 1);
        std::vector<Vec2> ps(n_samples + 1);
        for (int k = 0; k <= n_samples; ++k) {
          double l = static_cast<double>(k) / n_samples;
          if (k > 0 && k < n_samples) {
            for (int tries = 0; tries < 4; ++tries) {
              const Vec2 p = c.eval(l);
              int idx;
              const bool hit = (on_line(p.x(), 0, idx) && std::abs(p.x() - line_pos(m_, 0, idx)) < 1e-13) ||
                               (on_line(p.y(), 1, idx) && std::abs(p.y() - line_pos(m_, 1, idx)) < 1e-13);
              if (!hit) break;
              l += 3.82e-4 / n_samples;
            }
          }
          ls[k] = l;
          ps[k] = c.eval(l);
        }
        for (int k = 0; k < n_samples; ++k) {
          for (int axis = 0; axis < 2; ++axis) {
            const double a0 = coord(ps[k], axis), a1 = coord(ps[k + 1], axis);
            const double h = axis == 0 ? m_.hx() : m_.hy();
            const double o = axis == 0 ? m_.origin.x() : m_.origin.y();
            const int nmax = axis == 0 ? m_.nx : m_.ny;
            int ilo = static_cast<int>(std::floor((std::min(a0, a1) - o) / h)) + 1;
            int ihi = static_cast<int>(std::floor((std::max(a0, a1) - o) / h));
            for (int i = std::max(ilo, 0); i <= std::min(ihi, nmax); ++i) {
              const double line = o + i * h;
              if ((a0 - line) * (a1 - line) >= 0.0) continue;
              Event ev;
              ev.curve = cid;
              ev.lambda = bisect(c, axis, line, ls[k], ls[k + 1], opt_.point_tol);
              ev.p = c.eval(ev.lambda);
              ev.axis = axis;
              ev.line = i;
              ev.key = pos + ev.lambda;
              le.events.push_back(ev);
            }
          }
        }
      }
      // joint events: endpoints shared by consecutive curves that sit on a line
      const size_t nc = loop.curve_ids.size();
      const size_t njoints = loop.closed ? nc : nc - 1;
      std::vector<Vec2> joint_pts;
      for (size_t j = 0; j < njoints; ++j) {
        const NurbsCurve& prev = curves_[loop.curve_ids[j]];
        const size_t nxt_pos = (j + 1) % nc;
        const NurbsCurve& next = curves_[loop.curve_ids[nxt_pos]];
        const Vec2 E = next.start();
        for (int axis = 0; axis < 2; ++axis) {
          int idx;
          if (!on_line(coord(E, axis), axis, idx)) continue;
          const double line = line_pos(m_, axis, idx);
          double delta = 1e-6, fp = 0, fn = 0;
          for (int tries = 0; tries < 6; ++tries) {
            fp = coord(prev.eval(1.0 - delta), axis) - line;
            fn = coord(next.eval(delta), axis) - line;
            if (std::abs(fp) > 1e-12 && std::abs(fn) > 1e-12) break;
            delta *= 10;
          }
          if (std::abs(fp) <= 1e-12 || std::abs(fn) <= 1e-12)
            throw std::runtime_error("cut: degenerate joint (curve runs along a mesh line)");
          if (fp * fn < 0.0) {  // transversal crossing exactly at the joint
            Event ev;
            ev.curve = loop.curve_ids[nxt_pos];
            ev.lambda = 0.0;
            ev.p = E;
            ev.axis = axis;
            ev.line = idx;
            ev.key = static_cast<double>(nxt_pos);
            if (nxt_pos == 0 && loop.closed) ev.key = 0.0;  // wrap
            le.events.push_back(ev);
          }
        }
        joint_pts.push_back(E);
      }
      // open chains: termination events at both ends (must lie on mesh lines)
      if (!loop.closed) {
        for (int end = 0; end < 2; ++end) {
          const int cid = loop.curve_ids[end == 0 ? 0 : nc - 1];
          const NurbsCurve& c = curves_[cid];
          const Vec2 E = end == 0 ? c.start() : c.end();
          int ix = -1, iy = -1;
          const bool on_x = on_line(E.x(), 0, ix), on_y = on_line(E.y(), 1, iy);
          if (!on_x && !on_y)
            throw std::runtime_error("cut: open boundary chain must terminate on fitted boundary");
          Event ev;
          ev.curve = cid;
          ev.lambda = end == 0 ? 0.0 : 1.0;
          ev.p = E;
          ev.termination = true;
          if (on_x && on_y) {
            ev.axis = -1;  // vertex termination: splits no face interval
          } else {
            ev.axis = on_x ? 0 : 1;
            ev.line = on_x ? ix : iy;
          }
          ev.key = end == 0 ? -1.0 : static_cast<double>(nc);
          le.events.push_back(ev);
        }
      }
      // drop near-duplicate interior events hugging a joint crossing
      auto& evs = le.events;
      evs.erase(std::remove_if(evs.begin(), evs.end(),
                               [&](const Event& e) {
                                 if (e.lambda == 0.0 || e.termination) return false;
                                 for (const Vec2& J : joint_pts)
                                   if ((e.p - J).norm() < 1e-9) return true;
                                 return false;
                               }),
                evs.end());
      for (const Event& e : evs)
        if (!e.termination) check_vertex_degeneracy(e.p);
      std::sort(evs.begin(), evs.end(), [](const Event& a, const Event& b) { return a.key < b.key; });
      // merge events at identical loop position (same crossing found twice)
      for (size_t i = 1; i < evs.size();) {
        if ((evs[i].p - evs[i - 1].p).norm() < 1e-11 && std::abs(evs[i].key - evs[i - 1].key) < 1e-9)
          evs.erase(evs.begin() + i);
        else
          ++i;
      }
      loop_events_.push_back(std::move(le));
    }
  }

  int probe_owner(const CurveSegment& seg) const {
    int owner = -2;
    for (double f : {0.25, 0.5, 0.75}) {
      const Vec2 p = seg.curve->eval(seg.lo + f * (seg.hi - seg.lo));
      const int e = m_.element_of_strict(p, 0.0);
      if (e < 0) throw std::runtime_error("cut: curve leaves the background mesh");
      if (owner == -2)
        owner = e;
      else if (owner != e)
        throw SpanError("cut: span straddles elements; resampling");
    }
    return owner;
  }

  void build_spans() {
    spans_.clear();
    for (size_t il = 0; il < loop_events_.size(); ++il) {
      const auto& le = loop_events_[il];
      const auto& loop = *le.loop;
      const size_t nc = loop.curve_ids.size();
      const auto& evs = le.events;
      if (evs.empty()) {
        if (!loop.closed) throw std::runtime_error("cut: open chain without termination events");
        Span sp;
        sp.closed = true;
        for (int cid : loop.curve_ids) sp.segs.push_back({&curves_[cid], 0.0, 1.0});
        sp.owner = probe_owner(sp.segs[0]);
        for (const auto& s : sp.segs)
          if (probe_owner(s) != sp.owner) throw SpanError("cut: interior loop straddles elements");
        spans_.push_back(std::move(sp));
        continue;
      }
      const size_t ne = evs.size();
      const size_t nspans = loop.closed ? ne : ne - 1;
      for (size_t i = 0; i < nspans; ++i) {
        const Event& A = evs[i];
        const Event& B = evs[(i + 1) % ne];
        Span sp;
        sp.ev_from = static_cast<int>(i);
        sp.ev_to = static_cast<int>((i + 1) % ne);
        // positions along the loop (curve slot + lambda)
        auto slot = [&](const Event& e) {
          for (size_t s = 0; s < nc; ++s)
            if (loop.curve_ids[s] == e.curve) return static_cast<int>(s);
          return -1;
        };
        int sa = slot(A), sb = slot(B);
        double la = A.lambda, lb = B.lambda;
        if (i + 1 == ne) sb += static_cast<int>(nc);  // wrapped
        if (sa == sb && lb > la + 1e-12) {
          sp.segs.push_back({&curves_[loop.curve_ids[sa % nc]], la, lb});
        } else {
          if (1.0 - la > 1e-12)
            sp.segs.push_back({&curves_[loop.curve_ids[sa % nc]], la, 1.0});
          for (int s = sa + 1; s < sb; ++s)
            sp.segs.push_back({&curves_[loop.curve_ids[s % nc]], 0.0, 1.0});
          if (lb > 1e-12) sp.segs.push_back({&curves_[loop.curve_ids[sb % nc]], 0.0, lb});
        }
        if (sp.segs.empty()) continue;  // zero-length (coincident events)
        sp.owner = probe_owner(sp.segs[0]);
        for (const auto& s : sp.segs)
          if (probe_owner(s) != sp.owner) throw SpanError("cut: span straddles elements");
        // events must lie on faces of the owner
        auto check_ev = [&](const Event& e) {
          if (e.axis < 0) return;
          auto [ix, iy] = m_.element_ij(sp.owner);
          const int i0 = e.axis == 0 ? ix : iy;
          if (e.line != i0 && e.line != i0 + 1) throw SpanError("cut: event not on owner face");
        };
        check_ev(A);
        check_ev(B);
        spans_.push_back(std::move(sp));
      }
      // store back-references for event->face splitting later (kept in spans_)
      (void)il;
    }
  }

  /* ---------------- per-element region walk ---------------- */

  struct Node {
    Vec2 p;
    double perim = -1.0;  // [0,4) if on the perimeter
  };
  struct HalfEdge {
    int from = -1, to = -1;
    int edge = -1;      // undirected edge id
    bool forward = true;
    Vec2 probe;         // point slightly along the edge from `from`
  };
  struct EdgeRec {
    bool chord = false;
    std::vector<CurveSegment> segs;  // chord
    int n0 = -1, n1 = -1;            // straight: n0->n1 along ascending perimeter
  };

  double perim_param(int e, const Vec2& p) const {
    auto [lo, hi] = m_.element_box(e);
    const double tol = 1e-9 * h_;
    if (std::abs(p.y() - lo.y()) < tol) return (p.x() - lo.x()) / (hi.x() - lo.x());
    if (std::abs(p.x() - hi.x()) < tol) return 1.0 + (p.y() - lo.y()) / (hi.y() - lo.y());
    if (std::abs(p.y() - hi.y()) < tol) return 2.0 + (hi.x() - p.x()) / (hi.x() - lo.x());
    if (std::abs(p.x() - lo.x()) < tol) return 3.0 + (hi.y() - p.y()) / (hi.y() - lo.y());
    return -1.0;
  }

  Vec2 perim_point(int e, double t) const {
    auto [lo, hi] = m_.element_box(e);
    const double f = t - std::floor(t / 4.0) * 4.0;
    if (f < 1.0) return {lo.x() + f * (hi.x() - lo.x()), lo.y()};
    if (f < 2.0) return {hi.x(), lo.y() + (f - 1.0) * (hi.y() - lo.y())};
    if (f < 3.0) return {hi.x() - (f - 2.0) * (hi.x() - lo.x()), hi.y()};
    return {lo.x(), lo.y() + (4.0 - f) * (hi.y() - lo.y())};
  }

  /* side index in [left,right,bottom,top] order used by faces_of() */
  int side_of_param(double t) const {
    const int q = static_cast<int>(std::floor(t)) % 4;
    return std::array<int, 4>{2, 1, 3, 0}[q];  // bottom, right, top, left
  }

  void build_element_regions(int e, const std::vector<int>& span_ids, CutElement& ce) {
    auto [lo, hi] = m_.element_box(e);
    std::vector<Node> nodes;
    auto add_node = [&](const Vec2& p) {
      for (size_t i = 0; i < nodes.size(); ++i)
        if ((nodes[i].p - p).norm() < 1e-10 * std::max(1.0, h_)) return static_cast<int>(i);
      Node n;
      n.p = p;
      n.perim = perim_param(e, p);
      nodes.push_back(n);
      return static_cast<int>(nodes.size() - 1);
    };
    add_node(lo);
    add_node({hi.x(), lo.y()});
    add_node(hi);
    add_node({lo.x(), hi.y()});

    std::vector<EdgeRec> edges;
    std::vector<std::pair<int, int>> chord_nodes;  // per chord: node ids
    std::vector<int> hole_spans;
    for (int sid : span_ids) {
      const Span& sp = spans_[sid];
      if (sp.closed) {
        hole_spans.push_back(sid);
        continue;
      }
      const Vec2 pa = sp.segs.front().curve->eval(sp.segs.front().lo);
      const Vec2 pb = sp.segs.back().curve->eval(sp.segs.back().hi);
      const int na = add_node(pa), nb = add_node(pb);
      if (nodes[na].perim < 0 || nodes[nb].perim < 0)
        throw std::runtime_error("cut: chord endpoint off the element boundary");
      EdgeRec er;
      er.chord = true;
      er.segs = sp.segs;
      er.n0 = na;
      er.n1 = nb;
      edges.push_back(er);
    }
    // perimeter pieces between consecutive perimeter nodes
    std::vector<int> per;
    for (size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].perim >= 0) per.push_back(static_cast<int>(i));
    std::sort(per.begin(), per.end(),
              [&](int a, int b) { return nodes[a].perim < nodes[b].perim; });
    for (size_t i = 0; i < per.size(); ++i) {
      EdgeRec er;
      er.n0 = per[i];
      er.n1 = per[(i + 1) % per.size()];
      if (er.n0 == er.n1) continue;
      edges.push_back(er);
    }

    // half-edges with probes
    std::vector<HalfEdge> hes;
    auto chord_point = [&](const EdgeRec& er, bool from_start, double fr) {
      if (from_start) {
        const auto& s = er.segs.front();
        return s.curve->eval(s.lo + fr * (s.hi - s.lo));
      }
      const auto& s = er.segs.back();
      return s.curve->eval(s.hi - fr * (s.hi - s.lo));
    };
    for (size_t ei = 0; ei < edges.size(); ++ei) {
      const EdgeRec& er = edges[ei];
      HalfEdge h1, h2;
      h1.from = er.n0;
      h1.to = er.n1;
      h1.edge = static_cast<int>(ei);
      h1.forward = true;
      h2.from = er.n1;
      h2.to = er.n0;
      h2.edge = static_cast<int>(ei);
      h2.forward = false;
      if (er.chord) {
        h1.probe = chord_point(er, true, 1e-3);
        h2.probe = chord_point(er, false, 1e-3);
      } else {
        h1.probe = nodes[er.n0].p + 1e-4 * (nodes[er.n1].p - nodes[er.n0].p);
        h2.probe = nodes[er.n1].p + 1e-4 * (nodes[er.n0].p - nodes[er.n1].p);
      }
      hes.push_back(h1);
      hes.push_back(h2);
    }
    // angular adjacency per node (ccw sorted)
    std::vector<std::vector<int>> adj(nodes.size());
    for (size_t hi_ = 0; hi_ < hes.size(); ++hi_) adj[hes[hi_].from].push_back(static_cast<int>(hi_));
    for (size_t ni = 0; ni < nodes.size(); ++ni) {
      std::sort(adj[ni].begin(), adj[ni].end(), [&](int a, int b) {
        const Vec2 da = hes[a].probe - nodes[ni].p, db = hes[b].probe - nodes[ni].p;
        return std::atan2(da.y(), da.x()) < std::atan2(db.y(), db.x());
      });
    }
    auto twin = [](int h) { return h ^ 1; };
    auto next_he = [&](int h) {
      const int v = hes[h].to;
      const int t = twin(h);
      const auto& list = adj[v];
      for (size_t i = 0; i < list.size(); ++i)
        if (list[i] == t) return list[(i + list.size() - 1) % list.size()];
      throw std::logic_error("cut: twin not found in adjacency");
    };

    // face walks
    std::vector<bool> used(hes.size(), false);
    struct Walk {
      std::vector<int> hes;
      double area = 0.0;
    };
    std::vector<Walk> walks;
    for (size_t h0 = 0; h0 < hes.size(); ++h0) {
      if (used[h0]) continue;
      Walk wk;
      int h = static_cast<int>(h0);
      for (int guard = 0; guard < 4096; ++guard) {
        used[h] = true;
        wk.hes.push_back(h);
        h = next_he(h);
        if (h == static_cast<int>(h0)) break;
        if (guard == 4095) throw std::runtime_error("cut: non-terminating face walk");
      }
      // signed area
      for (int hh : wk.hes) {
        const EdgeRec& er = edges[hes[hh].edge];
        if (!er.chord) {
          const Vec2 a = nodes[hes[hh].from].p, b = nodes[hes[hh].to].p;
          wk.area += 0.5 * (a.x() * b.y() - a.y() * b.x());
        } else {
          double contrib = 0.0;
          for (const auto& s : er.segs) contrib += segment_area_contribution(s, 12);
          wk.area += hes[hh].forward ? contrib : -contrib;
        }
      }
      walks.push_back(std::move(wk));
    }

    int n_outer = 0;
    const double cell_area = (hi.x() - lo.x()) * (hi.y() - lo.y());
    for (const Walk& wk : walks) {
      if (wk.area < 0) {
        ++n_outer;
        continue;
      }
      ElementRegion reg;
      reg.element = e;
      for (int hh : wk.hes) {
        const HalfEdge& he = hes[hh];
        const EdgeRec& er = edges[he.edge];
        if (er.chord) {
          if (he.forward) {
            for (const auto& s : er.segs) {
              BoundaryPiece bp;
              bp.curved = true;
              bp.seg = s;
              bp.forward = true;
              bp.a = s.curve->eval(s.lo);
              bp.b = s.curve->eval(s.hi);
              reg.loop.push_back(bp);
            }
          } else {
            for (auto it = er.segs.rbegin(); it != er.segs.rend(); ++it) {
              BoundaryPiece bp;
              bp.curved = true;
              bp.seg = *it;
              bp.forward = false;
              bp.a = it->curve->eval(it->hi);
              bp.b = it->curve->eval(it->lo);
              reg.loop.push_back(bp);
            }
          }
        } else {
          BoundaryPiece bp;
          bp.a = nodes[he.from].p;
          bp.b = nodes[he.to].p;
          double tmid = 0.5 * (nodes[he.from].perim + nodes[he.to].perim);
          if (nodes[er.n1].perim < nodes[er.n0].perim)  // wrapping piece
            tmid = 0.5 * (nodes[er.n0].perim + nodes[er.n1].perim + 4.0);
          const int side = side_of_param(tmid);
          const int f = m_.faces_of(e)[side];
          bp.face = f;
          const Face& fc = m_.faces[f];
          auto tof = [&](const Vec2& p) {
            return fc.vertical ? (p.y() - fc.a.y()) / (fc.b - fc.a).norm()
                               : (p.x() - fc.a.x()) / (fc.b - fc.a).norm();
          };
          bp.t0 = tof(bp.a);
          bp.t1 = tof(bp.b);
          reg.loop.push_back(bp);
        }
      }
      reg.area = wk.area;
      ce.regions.push_back(std::move(reg));
    }
    if (n_outer != 1) {
#ifdef UHDG_CUT_DEBUG
      std::fprintf(stderr, "element %d: %zu nodes, %zu edges, %zu walks\n", e, nodes.size(),
                   edges.size(), walks.size());
      for (size_t i = 0; i < nodes.size(); ++i)
        std::fprintf(stderr, "  node %zu: (%.17g, %.17g) perim %.17g\n", i, nodes[i].p.x(),
                     nodes[i].p.y(), nodes[i].perim);
      for (size_t i = 0; i < edges.size(); ++i) {
        std::fprintf(stderr, "  edge %zu: %s n0=%d n1=%d", i, edges[i].chord ? "chord" : "perim",
                     edges[i].n0, edges[i].n1);
        for (const auto& s : edges[i].segs) std::fprintf(stderr, " seg[%g,%g]", s.lo, s.hi);
        std::fprintf(stderr, "\n");
      }
      for (const Walk& wk : walks) {
        std::fprintf(stderr, "  walk area %.3e:", wk.area);
        for (int hh : wk.hes)
          std::fprintf(stderr, " %d(%d->%d)", hes[hh].edge, hes[hh].from, hes[hh].to);
        std::fprintf(stderr, "\n");
      }
#endif
      throw std::runtime_error("cut: malformed subdivision (outer walk count " +
                               std::to_string(n_outer) + ") in element " + std::to_string(e));
    }

    // interior closed loops -> a disk region plus a hole in its container
    for (int sid : hole_spans) {
      const Span& sp = spans_[sid];
      double a_loop = 0.0;
      for (const auto& s : sp.segs) a_loop += segment_area_contribution(s, 12);
      const bool ccw = a_loop > 0;
      ElementRegion disk;
      disk.element = e;
      auto push_loop = [&](std::vector<BoundaryPiece>& out, bool fwd) {
        if (fwd) {
          for (const auto& s : sp.segs) {
            BoundaryPiece bp;
            bp.curved = true;
            bp.seg = s;
            bp.forward = true;
            bp.a = s.curve->eval(s.lo);
            bp.b = s.curve->eval(s.hi);
            out.push_back(bp);
          }
        } else {
          for (auto it = sp.segs.rbegin(); it != sp.segs.rend(); ++it) {
            BoundaryPiece bp;
            bp.curved = true;
            bp.seg = *it;
            bp.forward = false;
            bp.a = it->curve->eval(it->hi);
            bp.b = it->curve->eval(it->lo);
            out.push_back(bp);
          }
        }
      };
      push_loop(disk.loop, ccw);  // positive orientation
      disk.area = std::abs(a_loop);
      // container: smallest region containing the loop start point
      const Vec2 probe = sp.segs[0].curve->eval(sp.segs[0].lo);
      int best = -1;
      for (size_t r = 0; r < ce.regions.size(); ++r) {
        if (point_in_loop(ce.regions[r].loop, probe) &&
            (best < 0 || ce.regions[r].area < ce.regions[best].area))
          best = static_cast<int>(r);
      }
      if (best < 0) throw std::runtime_error("cut: interior loop has no containing region");
      std::vector<BoundaryPiece> hole;
      push_loop(hole, !ccw);  // negative orientation
      ce.regions[best].holes.push_back(std::move(hole));
      ce.regions[best].area -= disk.area;
      ce.regions.push_back(std::move(disk));
    }

    double total = 0.0;
    for (auto& reg : ce.regions) {
      reg.alpha = reg.area / cell_area;
      total += reg.area;
    }
    if (std::abs(total - cell_area) > 1e-8 * cell_area)
      throw std::runtime_error("cut: region areas do not tile the element");
  }

  static bool point_in_loop(const std::vector<BoundaryPiece>& loop, const Vec2& p) {
    // crossing number against a sampled polygon
    std::vector<Vec2> poly;
    for (const auto& bp : loop) {
      if (!bp.curved) {
        poly.push_back(bp.a);
      } else {
        for (int i = 0; i < 24; ++i) {
          const double f = static_cast<double>(i) / 24;
          const double l = bp.forward ? bp.seg.lo + f * (bp.seg.hi - bp.seg.lo)
                                      : bp.seg.hi - f * (bp.seg.hi - bp.seg.lo);
          poly.push_back(bp.seg.curve->eval(l));
        }
      }
    }
    bool in = false;
    for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
      if ((poly[i].y() > p.y()) != (poly[j].y() > p.y())) {
        const double xi = poly[j].x() + (p.y() - poly[j].y()) / (poly[i].y() - poly[j].y()) *
                                            (poly[i].x() - poly[j].x());
        if (p.x() < xi) in = !in;
      }
    }
    return in;
  }

  RegionTag tag_from_pieces(const ElementRegion& reg) const {
    RegionTag tag = RegionTag::undetermined;
    bool saw_void = false, saw_active = false;
    auto visit = [&](const BoundaryPiece& bp) {
      if (!bp.curved) return;
      const NurbsCurve& c = *bp.seg.curve;
      const bool on_fluid_side = bp.region_side() == c.fluid_side;
      if (c.role == CurveRole::interface_) {
        const RegionTag t = on_fluid_side ? RegionTag::fluid1 : RegionTag::fluid2;
        if (tag != RegionTag::undetermined && tag != t)
          throw std::runtime_error("cut: contradictory interface tags in one region");
        tag = t;
      } else {
        (on_fluid_side ? saw_active : saw_void) = true;
      }
    };
    for (const auto& bp : reg.loop) visit(bp);
    for (const auto& hole : reg.holes)
      for (const auto& bp : hole) visit(bp);
    if (saw_void && (saw_active || tag != RegionTag::undetermined))
      throw std::runtime_error("cut: region both inside and outside the domain");
    if (saw_void) return RegionTag::void_;
    return tag;  // fluid tag, or undetermined-active
  }

  void build_topology() {
    const int ne = m_.n_elements();
    topo_.element_tag.assign(ne, RegionTag::undetermined);
    topo_.face_intervals.assign(m_.n_faces(), {});
    topo_.fitted_boundary_face.assign(m_.n_faces(), false);

    // active box masking
    int bx0 = 0, bx1 = m_.nx, by0 = 0, by1 = m_.ny;
    if (opt_.active_box) {
      auto [blo, bhi] = *opt_.active_box;
      auto snap = [&](double v, int axis) {
        const double h = axis == 0 ? m_.hx() : m_.hy();
        const double o = axis == 0 ? m_.origin.x() : m_.origin.y();
        const double t = (v - o) / h;
        const int i = static_cast<int>(std::lround(t));
        if (std::abs(t - i) > 1e-9) throw std::invalid_argument("cut: active box off mesh lines");
        return i;
      };
      bx0 = snap(blo.x(), 0);
      bx1 = snap(bhi.x(), 0);
      by0 = snap(blo.y(), 1);
      by1 = snap(bhi.y(), 1);
      for (int e = 0; e < ne; ++e) {
        auto [ix, iy] = m_.element_ij(e);
        if (ix < bx0 || ix >= bx1 || iy < by0 || iy >= by1) topo_.element_tag[e] = RegionTag::void_;
      }
    }

    // group spans by owner element and run the region walks
    std::map<int, std::vector<int>> by_owner;
    for (size_t s = 0; s < spans_.size(); ++s) by_owner[spans_[s].owner].push_back(static_cast<int>(s));
    for (auto& [e, sids] : by_owner) {
      if (topo_.element_tag[e] == RegionTag::void_)
        throw std::runtime_error("cut: curve enters a masked (void) element");
      CutElement ce;
      ce.element = e;
      build_element_regions(e, sids, ce);
      for (auto& reg : ce.regions) reg.tag = tag_from_pieces(reg);
      topo_.cut[e] = std::move(ce);
    }

    build_face_intervals(bx0, bx1, by0, by1);
    propagate();
  }

  void build_face_intervals(int bx0, int bx1, int by0, int by1) {
    // split points per face from all loop events
    std::vector<std::vector<double>> splits(m_.n_faces());
    for (const auto& le : loop_events_) {
      for (const Event& ev : le.events) {
        if (ev.axis < 0) continue;
        int f;
        if (ev.axis == 0) {
          const int j = std::min(std::max(static_cast<int>(std::floor((ev.p.y() - m_.origin.y()) / m_.hy())), 0), m_.ny - 1);
          f = m_.vface_id(ev.line, j);
        } else {
          const int i = std::min(std::max(static_cast<int>(std::floor((ev.p.x() - m_.origin.x()) / m_.hx())), 0), m_.nx - 1);
          f = m_.hface_id(i, ev.line);
        }
        const Face& fc = m_.faces[f];
        const double t = fc.vertical ? (ev.p.y() - fc.a.y()) / (fc.b - fc.a).norm()
                                     : (ev.p.x() - fc.a.x()) / (fc.b - fc.a).norm();
        if (t > 1e-11 && t < 1.0 - 1e-11) splits[f].push_back(t);
      }
    }
    for (int f = 0; f < m_.n_faces(); ++f) {
      if (m_.faces[f].alias >= 0) continue;  // secondary periodic copies carry nothing
      auto& ts = splits[f];
      ts.push_back(0.0);
      ts.push_back(1.0);
      std::sort(ts.begin(), ts.end());
      ts.erase(std::unique(ts.begin(), ts.end(), [](double a, double b) { return b - a < 1e-11; }),
               ts.end());
      for (size_t i = 0; i + 1 < ts.size(); ++i) {
        FaceInterval iv;
        iv.t0 = ts[i];
        iv.t1 = ts[i + 1];
        topo_.face_intervals[f].push_back(iv);
      }
    }
    // mark fitted boundary faces (mesh/box boundary of the active area)
    for (int j = 0; j < m_.ny; ++j) {
      if (j >= by0 && j < by1) {
        if (!m_.periodic_x) {
          topo_.fitted_boundary_face[m_.vface_id(bx0, j)] = true;
          topo_.fitted_boundary_face[m_.vface_id(bx1, j)] = true;
        }
      }
    }
    for (int i = 0; i < m_.nx; ++i) {
      if (i >= bx0 && i < bx1) {
        if (!m_.periodic_y) {
          topo_.fitted_boundary_face[m_.hface_id(i, by0)] = true;
          topo_.fitted_boundary_face[m_.hface_id(i, by1)] = true;
        }
      }
    }
    // resolve the region adjacent to each interval on each side
    for (int f = 0; f < m_.n_faces(); ++f) {
      const Face& fc = m_.faces[f];
      for (auto& iv : topo_.face_intervals[f]) {
        const double tm = 0.5 * (iv.t0 + iv.t1);
        for (int side = 0; side < 2; ++side) {
          const int e = side == 0 ? fc.owner : fc.neighbor;
          if (e < 0) continue;
          if (!topo_.is_cut(e)) continue;
          const auto& ce = topo_.cut_of(e);
          int found = -1;
          for (size_t r = 0; r < ce.regions.size(); ++r) {
            for (const auto& bp : ce.regions[r].loop) {
              if (bp.curved || bp.face != f) continue;
              const double a = std::min(bp.t0, bp.t1), b = std::max(bp.t0, bp.t1);
              if (tm > a - 1e-11 && tm < b + 1e-11) {
                found = static_cast<int>(r);
                break;
              }
            }
            if (found >= 0) break;
          }
          if (found < 0) throw std::runtime_error("cut: face interval not covered by a region");
          iv.side_region[side] = found;
        }
      }
    }
  }

  struct PNode {
    RegionTag tag = RegionTag::undetermined;
    std::vector<int> nbrs;
  };

  void propagate() {
    // node ids: uncut element e -> e; cut region -> offset + running index
    const int ne = m_.n_elements();
    std::map<std::pair<int, int>, int> region_node;
    std::vector<PNode> nodes(ne);
    for (int e = 0; e < ne; ++e) nodes[e].tag = topo_.is_cut(e) ? RegionTag::void_ : topo_.element_tag[e];
    // cut elements: the element node is unused; regions get their own
    for (auto& [e, ce] : topo_.cut) {
      for (size_t r = 0; r < ce.regions.size(); ++r) {
        region_node[{e, static_cast<int>(r)}] = static_cast<int>(nodes.size());
        PNode pn;
        pn.tag = ce.regions[r].tag;
        nodes.push_back(pn);
      }
    }
    auto node_of = [&](int e, int r) {
      if (r < 0) return e;
      return region_node.at({e, r});
    };
    // adjacency across face intervals
    for (int f = 0; f < m_.n_faces(); ++f) {
      const Face& fc = m_.faces[f];
      if (fc.owner < 0 || fc.neighbor < 0) continue;
      if (topo_.fitted_boundary_face[f]) continue;
      for (const auto& iv : topo_.face_intervals[f]) {
        if (iv.t1 - iv.t0 < 1e-10) continue;
        const int a = node_of(fc.owner, topo_.is_cut(fc.owner) ? iv.side_region[0] : -1);
        const int b = node_of(fc.neighbor, topo_.is_cut(fc.neighbor) ? iv.side_region[1] : -1);
        nodes[a].nbrs.push_back(b);
        nodes[b].nbrs.push_back(a);
      }
    }
    // BFS from determined nodes
    std::vector<int> queue;
    for (size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].tag != RegionTag::undetermined) queue.push_back(static_cast<int>(i));
    for (size_t qi = 0; qi < queue.size(); ++qi) {
      const PNode& n = nodes[queue[qi]];
      for (int nb : n.nbrs) {
        if (nodes[nb].tag == RegionTag::undetermined) {
          nodes[nb].tag = n.tag;
          queue.push_back(nb);
        } else if (nodes[nb].tag != n.tag) {
          throw std::runtime_error("cut: fluid propagation conflict (non-watertight geometry)");
        }
      }
    }
    // leftover undetermined: legal only for one-fluid problems -> fluid 1
    bool have_interface = false;
    for (const auto& c : curves_)
      if (c.role == CurveRole::interface_) have_interface = true;
    for (auto& n : nodes) {
      if (n.tag == RegionTag::undetermined) {
        if (have_interface)
          throw std::runtime_error("cut: unresolved fluid assignment");
        n.tag = RegionTag::fluid1;
      }
    }
    // write back
    for (int e = 0; e < ne; ++e)
      if (!topo_.is_cut(e)) topo_.element_tag[e] = nodes[e].tag;
    for (auto& [e, ce] : topo_.cut) {
      RegionTag etag = RegionTag::void_;
      for (size_t r = 0; r < ce.regions.size(); ++r) {
        ce.regions[r].tag = nodes[region_node.at({e, static_cast<int>(r)})].tag;
        if (ce.regions[r].tag != RegionTag::void_) etag = ce.regions[r].tag;
      }
      topo_.element_tag[e] = etag;  // representative (any active fluid)
    }
    // face interval tags from their sides
    for (int f = 0; f < m_.n_faces(); ++f) {
      const Face& fc = m_.faces[f];
      for (auto& iv : topo_.face_intervals[f]) {
        RegionTag t[2] = {RegionTag::undetermined, RegionTag::undetermined};
        for (int side = 0; side < 2; ++side) {
          const int e = side == 0 ? fc.owner : fc.neighbor;
          if (e < 0) continue;
          t[side] = topo_.is_cut(e) ? topo_.cut_of(e).regions[iv.side_region[side]].tag
                                    : topo_.element_tag[e];
        }
        if (t[0] == RegionTag::undetermined)
          iv.tag = t[1];
        else if (t[1] == RegionTag::undetermined)
          iv.tag = t[0];
        else if (t[0] == t[1])
          iv.tag = t[0];
        else if (topo_.fitted_boundary_face[f])
          iv.tag = t[0] == RegionTag::void_ ? t[1] : t[0];
        else
          throw std::runtime_error("cut: interval fluid mismatch across a face");
        if (iv.tag == RegionTag::undetermined) iv.tag = RegionTag::void_;  // outside everything
      }
    }
  }
};

}  // namespace

double CutTopology::beta(int face, RegionTag fluid) const {
  double acc = 0.0;
  for (const auto& iv : face_intervals[face])
    if (iv.tag == fluid) acc += iv.t1 - iv.t0;
  return acc;
}

bool CutTopology::face_active(int face) const {
  for (const auto& iv : face_intervals[face])
    if (iv.tag == RegionTag::fluid1 || iv.tag == RegionTag::fluid2) return true;
  return false;
}

CutTopology classify(const CartesianMesh& mesh, const std::vector<NurbsCurve>& curves,
                     const ClassifyOptions& opt) {
  for (const auto& c : curves) c.validate();
  Classifier cl(mesh, curves, opt);
  return cl.run();
}

ExtensionPlan plan_extensions(const CartesianMesh& mesh, const CutTopology& topo,
                              double alpha_min, const ExtensionWeights& w) {
  ExtensionPlan plan;
  const double kDonorBetaMin = 0.1;
  struct Bad {
    int e, r;
    double alpha;
  };
  std::vector<Bad> bad;
  for (const auto& [e, ce] : topo.cut) {
    for (size_t r = 0; r < ce.regions.size(); ++r) {
      const auto& reg = ce.regions[r];
      if (reg.tag == RegionTag::void_) continue;
      if (reg.alpha < alpha_min) bad.push_back({e, static_cast<int>(r), reg.alpha});
    }
  }
  std::sort(bad.begin(), bad.end(), [](const Bad& a, const Bad& b) {
    return a.alpha != b.alpha ? a.alpha < b.alpha : a.e < b.e;
  });
  std::map<int, int> prior;              // donor element -> times used
  std::set<std::pair<int, int>> erased;  // (element, region) already extended away
  for (const Bad& bd : bad) {
    const auto& reg = topo.cut_of(bd.e).regions[bd.r];
    const double h = std::max(mesh.hx(), mesh.hy());
    int best_donor = -1, best_face = -1;
    double best_score = 0.0;
    for (int f : mesh.faces_of(bd.e)) {
      const Face& fc = mesh.faces[f];
      const bool we_own = fc.owner == bd.e;
      const int d = we_own ? fc.neighbor : fc.owner;
      if (d < 0) continue;
      if (topo.beta(f, reg.tag) < kDonorBetaMin) continue;
      // every same-fluid portion of the shared face must border this region on
      // our side: erasing the face's hybrid unknowns must not orphan another
      // region's transmission
      const int our_side = we_own ? 0 : 1;
      bool face_ok = true;
      for (const auto& iv : topo.face_intervals[f])
        if (iv.tag == reg.tag && iv.side_region[our_side] != bd.r) face_ok = false;
      if (!face_ok) continue;
      double donor_alpha = -1.0;
      for (const auto& iv : topo.face_intervals[f]) {
        if (iv.tag != reg.tag || iv.side_region[our_side] != bd.r) continue;
        if (!topo.is_cut(d)) {
          if (topo.element_tag[d] == reg.tag) donor_alpha = 1.0;
          continue;
        }
        const int ridx = iv.side_region[1 - our_side];
        if (ridx < 0) continue;
        const auto& dreg = topo.cut_of(d).regions[ridx];
        if (dreg.tag == reg.tag && !erased.count({d, ridx}))
          donor_alpha = std::max(donor_alpha, dreg.alpha);
      }
      if (donor_alpha < alpha_min) continue;
      const double dist = (mesh.element_center(bd.e) - mesh.element_center(d)).norm() / h;
      const double score = w.w_area * (reg.alpha + donor_alpha) - w.w_dist * dist -
                           w.w_prior * (prior.count(d) ? prior[d] : 0);
      if (best_donor < 0 || score > best_score) {
        best_donor = d;
        best_face = f;
        best_score = score;
      }
    }
    if (best_donor < 0) {
      std::ostringstream os;
      os << "extension failure: element " << bd.e << " region " << bd.r << " (alpha=" << reg.alpha
         << ") has no eligible donor; kept unextended";
      plan.warnings.push_back(os.str());
      continue;
    }
    plan.extensions.push_back({bd.e, bd.r, best_donor, best_face, best_score});
    ++prior[best_donor];
    erased.insert({bd.e, bd.r});
  }
  return plan;
}

}  // namespace uhdg
