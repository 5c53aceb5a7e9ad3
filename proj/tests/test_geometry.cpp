#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "uhdg/geometry.hpp"

using namespace uhdg;

namespace {

/* Central-difference oracle for curve derivatives. */
void check_derivatives_fd(const NurbsCurve& c, double lambda, double tol) {
  const double h = 1e-6;
  Vec2 x, d1, d2, xm, xp, dm, dp, junk;
  c.eval2(lambda, x, d1, d2);
  c.eval2(lambda - h, xm, dm, junk);
  c.eval2(lambda + h, xp, dp, junk);
  Vec2 d1_fd = (xp - xm) / (2 * h);
  Vec2 d2_fd = (dp - dm) / (2 * h);
  CHECK((d1 - d1_fd).norm() < tol * (1.0 + d1.norm()));
  CHECK((d2 - d2_fd).norm() < tol * (1.0 + d2.norm()));
}

/* Brute-force arc length by dense polyline sampling. */
double polyline_length(const NurbsCurve& c, int n) {
  double len = 0.0;
  Vec2 prev = c.eval(0.0);
  for (int i = 1; i <= n; ++i) {
    Vec2 p = c.eval(static_cast<double>(i) / n);
    len += (p - prev).norm();
    prev = p;
  }
  return len;
}

NurbsCurve generic_cubic() {
  // clamped cubic with one interior knot and non-uniform weights
  NurbsCurve c;
  c.degree = 3;
  c.knots = {0, 0, 0, 0, 0.4, 1, 1, 1, 1};
  c.ctrl = {{0.0, 0.0}, {0.3, 0.5}, {0.6, -0.2}, {0.9, 0.4}, {1.2, 0.1}};
  c.weights = {1.0, 0.8, 1.3, 0.9, 1.1};
  return c;
}

}  // namespace

TEST_CASE("derivatives match finite differences") {
  auto arcs = make_circle({0.5, 0.5}, 1.0 / 3.0, true, CurveRole::interface_, FluidSide::left);
  for (double l : {0.05, 0.3, 0.5, 0.77, 0.95}) check_derivatives_fd(arcs[1], l, 2e-7);
  NurbsCurve cubic = generic_cubic();
  cubic.validate();
  for (double l : {0.1, 0.39, 0.41, 0.6, 0.9}) check_derivatives_fd(cubic, l, 2e-7);
  auto poly = make_polyline({{0, 0}, {1, 0.2}, {1.5, 1.0}}, CurveRole::dirichlet, FluidSide::left);
  REQUIRE(poly.size() == 2);
  check_derivatives_fd(poly[0], 0.2, 1e-7);
  check_derivatives_fd(poly[1], 0.8, 1e-7);
}

TEST_CASE("rational quadratic arcs are exact circles") {
  const Vec2 c{0.2, -0.1};
  const double R = 0.37;
  auto arcs = make_circle(c, R, false, CurveRole::wall, FluidSide::right);
  REQUIRE(arcs.size() == 4);
  for (const auto& a : arcs) {
    a.validate();
    for (int i = 0; i <= 20; ++i) {
      const double l = i / 20.0;
      CHECK(std::abs((a.eval(l) - c).norm() - R) < 1e-14);
    }
  }
  // endpoints chain up and close
  for (int q = 0; q < 4; ++q)
    CHECK((arcs[q].end() - arcs[(q + 1) % 4].start()).norm() < 1e-14);
  // quadrant length
  CHECK(polyline_length(arcs[0], 200000) == doctest::Approx(M_PI * R / 2).epsilon(1e-8));
}

TEST_CASE("jacobian equals tangent norm") {
  NurbsCurve cubic = generic_cubic();
  for (double l : {0.12, 0.5, 0.88}) {
    Vec2 x, d1, d2;
    cubic.eval2(l, x, d1, d2);
    CHECK(cubic.jacobian(l) == doctest::Approx(d1.norm()).epsilon(1e-14));
  }
  auto line = make_line({0, 0}, {3, 4}, CurveRole::dirichlet, FluidSide::left);
  CHECK(line.jacobian(0.3) == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("normals and curvature on circles") {
  const Vec2 c{0.5, 0.5};
  const double R = 1.0 / 3.0;
  // clockwise circle, enclosed disk on the right of travel
  auto cw = make_circle(c, R, false, CurveRole::interface_, FluidSide::right);
  for (const auto& a : cw) {
    for (double l : {0.1, 0.5, 0.9}) {
      auto nc = normal_and_curvature(a, l, FluidSide::right);
      Vec2 outward = (a.eval(l) - c).normalized();
      CHECK((nc.n - outward).norm() < 1e-13);
      CHECK(nc.div_n == doctest::Approx(1.0 / R).epsilon(1e-13));
      // flipping the side negates both
      auto flip = normal_and_curvature(a, l, FluidSide::left);
      CHECK((flip.n + nc.n).norm() < 1e-14);
      CHECK(flip.div_n == doctest::Approx(-nc.div_n).epsilon(1e-14));
    }
  }
  // counterclockwise circle, disk on the left
  auto ccw = make_circle(c, R, true, CurveRole::interface_, FluidSide::left);
  auto nc = normal_and_curvature(ccw[2], 0.4, FluidSide::left);
  Vec2 outward = (ccw[2].eval(0.4) - c).normalized();
  CHECK((nc.n - outward).norm() < 1e-13);
  CHECK(nc.div_n == doctest::Approx(1.0 / R).epsilon(1e-13));
}

TEST_CASE("straight lines have zero curvature") {
  auto line = make_line({0.1, 0.2}, {0.9, 0.7}, CurveRole::neumann, FluidSide::left);
  auto nc = normal_and_curvature(line, 0.5, FluidSide::left);
  CHECK(std::abs(nc.div_n) < 1e-14);
  Vec2 t = (Vec2{0.9, 0.7} - Vec2{0.1, 0.2}).normalized();
  CHECK(std::abs(nc.n.dot(t)) < 1e-14);
  CHECK(nc.n.norm() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("polyline interpolates its vertices") {
  std::vector<Vec2> pts{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  auto poly = make_polyline(pts, CurveRole::dirichlet, FluidSide::left);
  REQUIRE(poly.size() == 3);
  for (int i = 0; i < 3; ++i) {
    poly[i].validate();
    CHECK((poly[i].start() - pts[i]).norm() < 1e-14);
    CHECK((poly[i].end() - pts[i + 1]).norm() < 1e-14);
  }
  auto loops = assemble_loops(poly);
  REQUIRE(loops.size() == 1);
  CHECK_FALSE(loops[0].closed);
  CHECK(loops[0].curve_ids == std::vector<int>{0, 1, 2});
}

TEST_CASE("a kinked knot vector is rejected") {
  NurbsCurve c;
  c.degree = 1;
  c.knots = {0, 0, 0.5, 1, 1};
  c.ctrl = {{0, 0}, {1, 0}, {1, 1}};
  c.weights = {1, 1, 1};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("loop assembly stitches shuffled arcs") {
  auto arcs = make_circle({0.3, 0.4}, 0.2, true, CurveRole::wall, FluidSide::left);
  std::vector<NurbsCurve> shuffled{arcs[2], arcs[0], arcs[3], arcs[1]};
  auto loops = assemble_loops(shuffled);
  REQUIRE(loops.size() == 1);
  CHECK(loops[0].closed);
  REQUIRE(loops[0].curve_ids.size() == 4);
  for (size_t i = 0; i < 4; ++i) {
    const auto& a = shuffled[loops[0].curve_ids[i]];
    const auto& b = shuffled[loops[0].curve_ids[(i + 1) % 4]];
    CHECK((a.end() - b.start()).norm() < 1e-12);
  }

  // open chain: two segments meeting at a corner
  std::vector<NurbsCurve> open{make_line({0, 0}, {1, 0}, CurveRole::dirichlet, FluidSide::left),
                               make_line({1, 0}, {1, 1}, CurveRole::dirichlet, FluidSide::left)};
  auto chains = assemble_loops(open);
  REQUIRE(chains.size() == 1);
  CHECK(!chains[0].closed);
  CHECK(chains[0].curve_ids == std::vector<int>{0, 1});
}

TEST_CASE("validation rejects malformed curves") {
  auto line = make_line({0, 0}, {1, 0}, CurveRole::dirichlet, FluidSide::left);
  line.weights[0] = -1.0;
  CHECK_THROWS(line.validate());
  auto line2 = make_line({0, 0}, {1, 0}, CurveRole::dirichlet, FluidSide::left);
  line2.knots = {0, 0.5, 1, 1};  // not clamped
  CHECK_THROWS(line2.validate());
  NurbsCurve c = generic_cubic();
  c.ctrl.pop_back();
  CHECK_THROWS(c.validate());
}

TEST_CASE("inconsistent fluid side along a chain is rejected") {
  std::vector<NurbsCurve> bad{make_line({0, 0}, {1, 0}, CurveRole::dirichlet, FluidSide::left),
                              make_line({1, 0}, {1, 1}, CurveRole::dirichlet, FluidSide::right)};
  CHECK_THROWS(assemble_loops(bad));
}
