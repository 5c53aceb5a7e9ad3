#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "uhdg/cut.hpp"
#include "uhdg/triangulate.hpp"

using namespace uhdg;

namespace {

constexpr double kPi = 3.14159265358979323846;

/* Independent cut-cell oracle: dense sampling of every curve. */
std::set<int> sampled_cut_cells(const CartesianMesh& m, const std::vector<NurbsCurve>& cs,
                                int n = 200000) {
  std::set<int> cells;
  for (const auto& c : cs)
    for (int k = 0; k <= n; ++k) cells.insert(m.element_of(c.eval(static_cast<double>(k) / n)));
  return cells;
}

std::set<int> classified_cut_cells(const CutTopology& t) {
  std::set<int> cells;
  for (const auto& [e, ce] : t.cut) cells.insert(e);
  return cells;
}

double fluid_area(const CartesianMesh& m, const CutTopology& t, RegionTag tag) {
  double a = 0.0;
  for (int e = 0; e < m.n_elements(); ++e) {
    if (t.is_cut(e)) {
      for (const auto& r : t.cut_of(e).regions)
        if (r.tag == tag) a += r.area;
    } else if (t.element_tag[e] == tag) {
      a += m.hx() * m.hy();
    }
  }
  return a;
}

/* integral of x over a fluid via region quadrature + closed forms on uncut cells */
double fluid_moment_x(const CartesianMesh& m, const CutTopology& t, RegionTag tag, int npts) {
  double acc = 0.0;
  for (int e = 0; e < m.n_elements(); ++e) {
    if (t.is_cut(e)) {
      for (const auto& r : t.cut_of(e).regions) {
        if (r.tag != tag) continue;
        const AreaRule rule = region_rule(r, npts);
        for (size_t q = 0; q < rule.pts.size(); ++q) acc += rule.w[q] * rule.pts[q].x();
      }
    } else if (t.element_tag[e] == tag) {
      acc += m.hx() * m.hy() * m.element_center(e).x();
    }
  }
  return acc;
}

}  // namespace

TEST_CASE("classify: interface circle on 8x8") {
  CartesianMesh m({0, 0}, {1, 1}, 8, 8);
  const double R = 0.3;
  auto curves = make_circle({0.5, 0.5}, R, true, CurveRole::interface_, FluidSide::left);
  const CutTopology t = classify(m, curves);

  // exact enclosed areas against the closed form
  CHECK(std::abs(fluid_area(m, t, RegionTag::fluid1) - kPi * R * R) < 1e-9);
  CHECK(std::abs(fluid_area(m, t, RegionTag::fluid2) - (1.0 - kPi * R * R)) < 1e-9);

  // nothing undetermined or void in a two-fluid interior problem
  for (int e = 0; e < m.n_elements(); ++e) {
    CHECK(t.element_tag[e] != RegionTag::undetermined);
    CHECK(t.element_tag[e] != RegionTag::void_);
  }

  // cut-cell set against the dense sampling oracle
  CHECK(classified_cut_cells(t) == sampled_cut_cells(m, curves));

  // region areas tile every cut element; exactly one region per fluid here
  for (const auto& [e, ce] : t.cut) {
    double sum = 0.0;
    for (const auto& r : ce.regions) sum += r.area;
    CHECK(std::abs(sum - m.hx() * m.hy()) < 1e-12);
    CHECK(ce.regions.size() == 2);
    CHECK(std::abs(ce.regions[0].alpha + ce.regions[1].alpha - 1.0) < 1e-12);
  }

  // face intervals partition every principal face
  for (int f = 0; f < m.n_faces(); ++f) {
    if (m.faces[f].alias >= 0) continue;
    double len = 0.0;
    for (const auto& iv : t.face_intervals[f]) {
      CHECK(iv.tag != RegionTag::undetermined);
      len += iv.t1 - iv.t0;
    }
    CHECK(std::abs(len - 1.0) < 1e-12);
  }

  // an interior face far from the circle: one full fluid2 interval
  const int f22 = m.vface_id(1, 0);
  REQUIRE(t.face_intervals[f22].size() == 1);
  CHECK(t.face_intervals[f22][0].tag == RegionTag::fluid2);
  CHECK(t.beta(f22, RegionTag::fluid2) == doctest::Approx(1.0));
  CHECK(t.face_active(f22));
}

TEST_CASE("classify: tangent joints on grid lines") {
  // circle tangent to x=0.25 and x=0.75 exactly at two of its arc joints
  CartesianMesh m({0, 0}, {1, 1}, 4, 4);
  const double R = 0.25;
  auto curves = make_circle({0.5, 0.375}, R, true, CurveRole::interface_, FluidSide::left);
  const CutTopology t = classify(m, curves);

  CHECK(std::abs(fluid_area(m, t, RegionTag::fluid1) - kPi * R * R) < 1e-9);

  // the tangent line is never crossed: the left column stays uncut fluid2
  for (int j = 0; j < 4; ++j) {
    const int e = j * 4;
    CHECK_FALSE(t.is_cut(e));
    CHECK(t.element_tag[e] == RegionTag::fluid2);
  }
  // the face touched tangentially is not split
  const int ftan = m.vface_id(1, 1);
  REQUIRE(t.face_intervals[ftan].size() == 1);
  CHECK(t.face_intervals[ftan][0].tag == RegionTag::fluid2);

  // the joints at (0.5, 0.625) and (0.5, 0.125) cross x=0.5 transversally
  const int ftop = m.vface_id(2, 2);  // x=0.5, y in (0.5, 0.75)
  REQUIRE(t.face_intervals[ftop].size() == 2);
  CHECK(t.face_intervals[ftop][0].t1 == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(t.face_intervals[ftop][0].tag == RegionTag::fluid1);
  CHECK(t.face_intervals[ftop][1].tag == RegionTag::fluid2);
  CHECK(t.beta(ftop, RegionTag::fluid1) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("classify: open chain with vertex terminations") {
  CartesianMesh m({0, 0}, {1, 1}, 4, 4);
  auto curves = make_polyline({{0.25, 1.0}, {0.5, 0.8}, {0.75, 1.0}}, CurveRole::wall,
                              FluidSide::right);
  const CutTopology t = classify(m, curves);

  CHECK(classified_cut_cells(t) == std::set<int>{13, 14});

  // void triangle above the left branch: area 0.5 * 0.25 * 0.2 exactly
  const auto& ce = t.cut_of(13);
  REQUIRE(ce.regions.size() == 2);
  double void_area = -1.0, active_area = -1.0;
  for (const auto& r : ce.regions) {
    if (r.tag == RegionTag::void_) void_area = r.area;
    if (r.tag == RegionTag::fluid1) active_area = r.area;
  }
  CHECK(std::abs(void_area - 0.025) < 1e-12);
  CHECK(std::abs(active_area - (0.0625 - 0.025)) < 1e-12);
  CHECK(std::abs(fluid_area(m, t, RegionTag::fluid1) - 0.95) < 1e-9);

  // the kink lands on the shared face of the two cut cells at t = 0.2
  const int fmid = m.vface_id(2, 3);
  REQUIRE(t.face_intervals[fmid].size() == 2);
  CHECK(t.face_intervals[fmid][0].t1 == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(t.face_intervals[fmid][0].tag == RegionTag::fluid1);
  CHECK(t.face_intervals[fmid][1].tag == RegionTag::void_);
  CHECK(t.beta(fmid, RegionTag::fluid1) == doctest::Approx(0.2).epsilon(1e-9));

  // top boundary face over cell 13 is entirely on the void side
  const int ftopb = m.hface_id(1, 4);
  CHECK(t.fitted_boundary_face[ftopb]);
  REQUIRE(t.face_intervals[ftopb].size() == 1);
  CHECK(t.face_intervals[ftopb][0].tag == RegionTag::void_);
  CHECK_FALSE(t.face_active(ftopb));
}

TEST_CASE("classify: active box masks and fitted boundary") {
  CartesianMesh m({0, 0}, {1, 1}, 4, 4);
  auto curves = make_polyline({{0.25, 1.0}, {0.5, 0.8}, {0.75, 1.0}}, CurveRole::wall,
                              FluidSide::right);
  ClassifyOptions opt;
  opt.active_box = std::make_pair(Vec2{0.25, 0.25}, Vec2{0.75, 1.0});
  const CutTopology t = classify(m, curves, opt);

  CHECK(t.element_tag[0] == RegionTag::void_);   // outside the box
  CHECK(t.element_tag[3] == RegionTag::void_);
  CHECK(t.element_tag[5] == RegionTag::fluid1);  // inside
  CHECK(t.element_tag[6] == RegionTag::fluid1);

  // box boundary faces are fitted; intervals carry the active side's tag
  const int fleft = m.vface_id(1, 1);
  CHECK(t.fitted_boundary_face[fleft]);
  REQUIRE(t.face_intervals[fleft].size() == 1);
  CHECK(t.face_intervals[fleft][0].tag == RegionTag::fluid1);
  const int fbot = m.hface_id(1, 1);
  CHECK(t.fitted_boundary_face[fbot]);
  CHECK(t.face_intervals[fbot][0].tag == RegionTag::fluid1);
  // interior box faces are not fitted
  CHECK_FALSE(t.fitted_boundary_face[m.vface_id(2, 1)]);

  // active area: box minus the two void triangles
  const double box_area = 0.5 * 0.75;
  CHECK(std::abs(fluid_area(m, t, RegionTag::fluid1) - (box_area - 0.05)) < 1e-9);
}

TEST_CASE("classify: droplet entirely inside one cell") {
  CartesianMesh m({0, 0}, {1, 1}, 4, 4);
  const double R = 0.04;
  const Vec2 c{0.59, 0.16};
  auto curves = make_circle(c, R, true, CurveRole::interface_, FluidSide::left);
  const CutTopology t = classify(m, curves);

  CHECK(classified_cut_cells(t) == std::set<int>{2});
  const auto& ce = t.cut_of(2);
  REQUIRE(ce.regions.size() == 2);
  const ElementRegion* outer = nullptr;
  const ElementRegion* disk = nullptr;
  for (const auto& r : ce.regions) (r.tag == RegionTag::fluid1 ? disk : outer) = &r;
  REQUIRE(outer != nullptr);
  REQUIRE(disk != nullptr);
  CHECK(outer->tag == RegionTag::fluid2);
  CHECK(outer->holes.size() == 1);
  CHECK(std::abs(outer->area - (0.0625 - kPi * R * R)) < 1e-10);
  CHECK(std::abs(disk->area - kPi * R * R) < 1e-10);
  CHECK(std::abs(fluid_area(m, t, RegionTag::fluid1) - kPi * R * R) < 1e-10);

  // every face of the droplet cell stays a single fluid2 interval
  for (int f : m.faces_of(2)) {
    REQUIRE(t.face_intervals[f].size() == 1);
    CHECK(t.face_intervals[f][0].tag == RegionTag::fluid2);
  }

  // quadrature on both regions: centroid of the disk is the droplet center
  const AreaRule dr = region_rule(*disk, 8);
  CHECK(std::abs(dr.area() - kPi * R * R) < 1e-10);
  double mx = 0.0;
  for (size_t q = 0; q < dr.pts.size(); ++q) mx += dr.w[q] * dr.pts[q].x();
  CHECK(std::abs(mx - kPi * R * R * c.x()) < 1e-10);

  const AreaRule orr = region_rule(*outer, 8);
  CHECK(std::abs(orr.area() - outer->area) < 1e-10);
  double ox = 0.0;
  for (size_t q = 0; q < orr.pts.size(); ++q) ox += orr.w[q] * orr.pts[q].x();
  // cell moment minus disk moment: int x over [0.5,0.75]x[0,0.25] = 0.625 * 0.0625
  CHECK(std::abs(ox - (0.625 * 0.0625 - kPi * R * R * c.x())) < 1e-10);
}

TEST_CASE("classify: two obstacle holes in one cell") {
  CartesianMesh m({0, 0}, {1, 1}, 2, 2);
  const double R = 0.07;
  auto c1 = make_circle({0.2, 0.2}, R, true, CurveRole::wall, FluidSide::right);
  auto c2 = make_circle({0.31, 0.31}, R, true, CurveRole::wall, FluidSide::right);
  std::vector<NurbsCurve> curves = c1;
  curves.insert(curves.end(), c2.begin(), c2.end());
  const CutTopology t = classify(m, curves);

  CHECK(classified_cut_cells(t) == std::set<int>{0});
  const auto& ce = t.cut_of(0);
  REQUIRE(ce.regions.size() == 3);
  const ElementRegion* outer = nullptr;
  int n_void = 0;
  for (const auto& r : ce.regions) {
    if (r.tag == RegionTag::void_) {
      ++n_void;
      CHECK(std::abs(r.area - kPi * R * R) < 1e-10);
    } else {
      outer = &r;
    }
  }
  CHECK(n_void == 2);
  REQUIRE(outer != nullptr);
  CHECK(outer->holes.size() == 2);
  CHECK(std::abs(fluid_area(m, t, RegionTag::fluid1) - (1.0 - 2 * kPi * R * R)) < 1e-9);

  // quadrature with two slit bridges: area and first moment
  const AreaRule rule = region_rule(*outer, 6);
  CHECK(std::abs(rule.area() - (0.25 - 2 * kPi * R * R)) < 1e-9);
  double mx = 0.0;
  for (size_t q = 0; q < rule.pts.size(); ++q) mx += rule.w[q] * rule.pts[q].x();
  const double oracle = 0.0625 - kPi * R * R * (0.2 + 0.31);  // int x over the cell minus disks
  CHECK(std::abs(mx - oracle) < 1e-9);
}

TEST_CASE("classify: two lens regions in one cell") {
  // two obstacle circles each overlapping one edge of cell (0,0)
  CartesianMesh m({0, 0}, {1, 1}, 2, 2);
  const double R = 0.17, d = 0.1;  // chord distance from each center to the cut line
  auto c1 = make_circle({0.6, 0.2}, R, true, CurveRole::wall, FluidSide::right);
  auto c2 = make_circle({0.2, 0.6}, R, true, CurveRole::wall, FluidSide::right);
  std::vector<NurbsCurve> curves = c1;
  curves.insert(curves.end(), c2.begin(), c2.end());
  const CutTopology t = classify(m, curves);

  const double theta = 2.0 * std::acos(d / R);
  const double seg = 0.5 * R * R * (theta - std::sin(theta));  // circular segment area

  REQUIRE(t.is_cut(0));
  const auto& ce = t.cut_of(0);
  REQUIRE(ce.regions.size() == 3);
  int n_lens = 0;
  for (const auto& r : ce.regions) {
    if (r.tag == RegionTag::void_) {
      ++n_lens;
      CHECK(std::abs(r.area - seg) < 1e-9);
      const AreaRule rule = region_rule(r, 6);
      CHECK(std::abs(rule.area() - seg) < 1e-9);
    } else {
      CHECK(r.tag == RegionTag::fluid1);
      CHECK(std::abs(r.area - (0.25 - 2 * seg)) < 1e-9);
    }
  }
  CHECK(n_lens == 2);
  CHECK(std::abs(fluid_area(m, t, RegionTag::fluid1) - (1.0 - 2 * kPi * R * R)) < 1e-9);
}

TEST_CASE("classify: degenerate and invalid inputs throw") {
  CartesianMesh m({0, 0}, {1, 1}, 4, 4);
  // passes through mesh vertices (0.25, 0.5), (0.5, 0.75), ...
  auto bad = make_circle({0.5, 0.5}, 0.25, true, CurveRole::interface_, FluidSide::left);
  CHECK_THROWS(classify(m, bad));
  // leaves the background mesh
  auto out = make_circle({0.9, 0.5}, 0.3, true, CurveRole::interface_, FluidSide::left);
  CHECK_THROWS(classify(m, out));
  // open chain ending in the middle of a cell
  auto open = make_polyline({{0.3, 0.3}, {0.6, 0.6}}, CurveRole::wall, FluidSide::left);
  CHECK_THROWS(classify(m, open));
}

TEST_CASE("classify: periodic mesh keeps intervals on principal faces") {
  CartesianMesh m({0, 0}, {1, 1}, 4, 4, true, true);
  const double R = 0.3;
  auto curves = make_circle({0.5, 0.5}, R, true, CurveRole::interface_, FluidSide::left);
  const CutTopology t = classify(m, curves);

  CHECK(std::abs(fluid_area(m, t, RegionTag::fluid1) - kPi * R * R) < 1e-9);
  for (int j = 0; j < 4; ++j) {
    const int principal = m.vface_id(0, j);
    const int secondary = m.vface_id(4, j);
    CHECK(m.faces[secondary].alias == principal);
    CHECK(t.face_intervals[secondary].empty());
    REQUIRE(t.face_intervals[principal].size() == 1);
    CHECK(t.face_intervals[principal][0].tag == RegionTag::fluid2);
    CHECK_FALSE(t.fitted_boundary_face[principal]);  // periodic: no fitted boundary
  }
}

TEST_CASE("region_rule: fluid moments over a full cut topology") {
  CartesianMesh m({0, 0}, {1, 1}, 8, 8);
  const double R = 0.3;
  auto curves = make_circle({0.5, 0.5}, R, true, CurveRole::interface_, FluidSide::left);
  const CutTopology t = classify(m, curves);

  // centroid of the disk and of its complement in the unit square
  CHECK(std::abs(fluid_moment_x(m, t, RegionTag::fluid1, 6) - 0.5 * kPi * R * R) < 1e-8);
  CHECK(std::abs(fluid_moment_x(m, t, RegionTag::fluid2, 6) - (0.5 - 0.5 * kPi * R * R)) < 1e-8);

  // every quadrature point lies inside its element's bounding box
  for (const auto& [e, ce] : t.cut) {
    const auto [lo, hi] = m.element_box(e);
    for (const auto& r : ce.regions) {
      const AreaRule rule = region_rule(r, 4);
      for (const auto& p : rule.pts) {
        CHECK(p.x() > lo.x() - 1e-9);
        CHECK(p.x() < hi.x() + 1e-9);
        CHECK(p.y() > lo.y() - 1e-9);
        CHECK(p.y() < hi.y() + 1e-9);
      }
    }
  }
}

TEST_CASE("plan_extensions: hand-scored donor choices") {
  CartesianMesh m({0, 0}, {3, 1}, 3, 1);

  auto make_topo = [&](std::vector<std::pair<int, double>> bad_cells) {
    CutTopology t;
    t.element_tag.assign(3, RegionTag::fluid1);
    t.face_intervals.assign(m.n_faces(), {});
    t.fitted_boundary_face.assign(m.n_faces(), false);
    for (auto [e, alpha] : bad_cells) {
      CutElement ce;
      ce.element = e;
      ElementRegion r;
      r.element = e;
      r.tag = RegionTag::fluid1;
      r.alpha = alpha;
      r.area = alpha;
      ce.regions.push_back(r);
      t.cut[e] = ce;
    }
    for (int i = 0; i <= 3; ++i) {
      const int f = m.vface_id(i, 0);
      const Face& fc = m.faces[f];
      FaceInterval iv;
      iv.tag = RegionTag::fluid1;
      iv.side_region[0] = fc.owner >= 0 && t.is_cut(fc.owner) ? 0 : -1;
      iv.side_region[1] = fc.neighbor >= 0 && t.is_cut(fc.neighbor) ? 0 : -1;
      t.face_intervals[f].push_back(iv);
    }
    return t;
  };

  SUBCASE("tie broken by face order: left donor wins") {
    const CutTopology t = make_topo({{1, 0.2}});
    const ExtensionPlan plan = plan_extensions(m, t, 0.3, {});
    REQUIRE(plan.extensions.size() == 1);
    CHECK(plan.warnings.empty());
    const Extension& x = plan.extensions[0];
    CHECK(x.element == 1);
    CHECK(x.donor == 0);
    CHECK(x.shared_face == m.vface_id(1, 0));
    // w_area*(0.2 + 1.0) - w_dist*1 - 0 with defaults (1, 0.5, 1)
    CHECK(x.score == doctest::Approx(0.7).epsilon(1e-12));
  }

  SUBCASE("shared donor accumulates a prior penalty") {
    const CutTopology t = make_topo({{0, 0.1}, {2, 0.2}});
    const ExtensionPlan plan = plan_extensions(m, t, 0.3, {});
    REQUIRE(plan.extensions.size() == 2);
    CHECK(plan.extensions[0].element == 0);  // worst alpha first
    CHECK(plan.extensions[0].donor == 1);
    CHECK(plan.extensions[0].score == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(plan.extensions[1].element == 2);
    CHECK(plan.extensions[1].donor == 1);
    CHECK(plan.extensions[1].score == doctest::Approx(-0.3).epsilon(1e-12));
  }

  SUBCASE("beta below threshold blocks all donors") {
    CutTopology t = make_topo({{1, 0.2}});
    for (int i : {1, 2}) {
      auto& ivs = t.face_intervals[m.vface_id(i, 0)];
      ivs.clear();
      FaceInterval lowbeta;
      lowbeta.t0 = 0.0;
      lowbeta.t1 = 0.05;
      lowbeta.tag = RegionTag::fluid1;
      lowbeta.side_region[0] = i == 2 ? 0 : -1;
      lowbeta.side_region[1] = i == 1 ? 0 : -1;
      ivs.push_back(lowbeta);
      FaceInterval rest;
      rest.t0 = 0.05;
      rest.t1 = 1.0;
      rest.tag = RegionTag::void_;
      ivs.push_back(rest);
    }
    const ExtensionPlan plan = plan_extensions(m, t, 0.3, {});
    CHECK(plan.extensions.empty());
    REQUIRE(plan.warnings.size() == 1);
  }

  SUBCASE("two-fluid weights raise the prior penalty") {
    const CutTopology t = make_topo({{0, 0.1}, {2, 0.2}});
    ExtensionWeights w;
    w.w_prior = 4.0;
    const ExtensionPlan plan = plan_extensions(m, t, 0.3, w);
    REQUIRE(plan.extensions.size() == 2);
    CHECK(plan.extensions[1].score == doctest::Approx(1.2 - 0.5 - 4.0).epsilon(1e-12));
  }
}

TEST_CASE("plan_extensions: real topology eligibility invariants") {
  CartesianMesh m({0, 0}, {1, 1}, 8, 8);
  auto curves = make_circle({0.51, 0.52}, 0.3, true, CurveRole::wall, FluidSide::right);
  const CutTopology t = classify(m, curves);
  const ExtensionPlan plan = plan_extensions(m, t, 0.3, {});

  std::set<std::pair<int, int>> erased;
  for (const Extension& x : plan.extensions) {
    const auto& reg = t.cut_of(x.element).regions[x.region];
    CHECK(reg.alpha < 0.3);
    CHECK(reg.tag == RegionTag::fluid1);
    CHECK(t.beta(x.shared_face, reg.tag) >= 0.1);
    // donor is face-adjacent and acceptably cut in the same fluid
    const Face& fc = m.faces[x.shared_face];
    CHECK(((fc.owner == x.element && fc.neighbor == x.donor) ||
           (fc.neighbor == x.element && fc.owner == x.donor)));
    double donor_alpha = 0.0;
    if (!t.is_cut(x.donor)) {
      CHECK(t.element_tag[x.donor] == reg.tag);
      donor_alpha = 1.0;
    } else {
      for (const auto& dr : t.cut_of(x.donor).regions)
        if (dr.tag == reg.tag) donor_alpha = std::max(donor_alpha, dr.alpha);
    }
    CHECK(donor_alpha >= 0.3);
    erased.insert({x.element, x.region});
  }
  // every badly cut active region is either extended or warned about
  size_t n_bad = 0;
  for (const auto& [e, ce] : t.cut)
    for (size_t r = 0; r < ce.regions.size(); ++r)
      if (ce.regions[r].tag != RegionTag::void_ && ce.regions[r].alpha < 0.3) ++n_bad;
  CHECK(plan.extensions.size() + plan.warnings.size() == n_bad);
}
