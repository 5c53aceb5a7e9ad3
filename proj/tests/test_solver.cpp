#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "uhdg/cut.hpp"
#include "uhdg/geometry.hpp"
#include "uhdg/global_system.hpp"
#include "uhdg/local_problem.hpp"
#include "uhdg/mesh.hpp"

using namespace uhdg;

namespace {

CutTopology classify_full(const CartesianMesh& mesh, const std::vector<NurbsCurve>& curves) {
  ClassifyOptions opt;
  opt.active_box = {mesh.origin, mesh.origin + mesh.extent};
  return classify(mesh, curves, opt);
}

Vec2 u_exact(const Vec2& x) { return {x.x() * x.x(), -2.0 * x.x() * x.y()}; }
double p_exact(const Vec2& x) { return x.x() + 2.0 * x.y() - 1.5; }
Eigen::Matrix2d grad_u(const Vec2& x) {
  Eigen::Matrix2d g;
  g << 2.0 * x.x(), 0.0, -2.0 * x.y(), -2.0 * x.x();
  return g;
}

StokesCoefficients poly_coef(double mu) {
  StokesCoefficients c;
  c.mu1 = c.mu2 = mu;
  c.source = [mu](const Vec2&, int) { return Vec2(-2.0 * mu + 1.0, 2.0); };
  c.dirichlet = [](const Vec2& x, int) { return u_exact(x); };
  return c;
}

/* evaluate the solved fields of the patch/field containing a point */
struct Probe {
  const PatchSet& ps;
  const GlobalSolution& sol;
  const CartesianMesh& mesh;

  std::pair<const LocalField*, Eigen::VectorXd> locate(const Vec2& pt, int fluid) const {
    const int e = mesh.element_of(pt);
    int p = ps.patch_of_element[e];
    REQUIRE(p >= 0);
    const Patch& patch = ps.patches[p];
    const auto off = field_offsets(patch);
    // a donated region's point belongs to another element's field in the patch
    for (size_t fi = 0; fi < patch.fields.size(); ++fi)
      if (patch.fields[fi].fluid == fluid) {
        const int n = patch.fields[fi].n();
        Eigen::VectorXd slice = sol.x[p].segment(off[fi], 7 * n);
        return {&patch.fields[fi], slice};
      }
    REQUIRE(false);
    return {nullptr, {}};
  }
  Vec2 u(const Vec2& pt, int fluid = 1) const {
    auto [F, x] = locate(pt, fluid);
    const Eigen::MatrixXd N = F->basis.eval({pt});
    const int n = F->n();
    return {N.col(0).dot(x.segment(4 * n, n)), N.col(0).dot(x.segment(5 * n, n))};
  }
  double p(const Vec2& pt, int fluid = 1) const {
    auto [F, x] = locate(pt, fluid);
    const Eigen::MatrixXd N = F->basis.eval({pt});
    return N.col(0).dot(x.segment(6 * F->n(), F->n()));
  }
  double L(const Vec2& pt, int i, int j, int fluid = 1) const {
    auto [F, x] = locate(pt, fluid);
    const Eigen::MatrixXd N = F->basis.eval({pt});
    const int n = F->n();
    return N.col(0).dot(x.segment((2 * i + j) * n, n));
  }
};

std::vector<Vec2> sample_box(const Vec2& lo, const Vec2& hi, int n) {
  std::vector<Vec2> pts;
  for (int i = 1; i < n; ++i)
    for (int j = 1; j < n; ++j)
      pts.push_back({lo.x() + (hi.x() - lo.x()) * i / n, lo.y() + (hi.y() - lo.y()) * j / n});
  return pts;
}

void check_poly(const Probe& pr, const std::vector<Vec2>& pts, double mu, double tol) {
  const double smu = std::sqrt(mu);
  for (const Vec2& pt : pts) {
    const Vec2 u = pr.u(pt), ue = u_exact(pt);
    CHECK(std::abs(u.x() - ue.x()) < tol);
    CHECK(std::abs(u.y() - ue.y()) < tol);
    CHECK(std::abs(pr.p(pt) - p_exact(pt)) < tol);
    const Eigen::Matrix2d g = grad_u(pt);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK(std::abs(pr.L(pt, i, j) + smu * g(i, j)) < tol);
  }
}

void compare_solutions(const GlobalSolution& a, const GlobalSolution& b, double tol) {
  REQUIRE(a.uhat.size() == b.uhat.size());
  if (a.uhat.size() > 0) CHECK((a.uhat - b.uhat).cwiseAbs().maxCoeff() < tol);
  REQUIRE(a.rho.size() == b.rho.size());
  for (size_t p = 0; p < a.rho.size(); ++p) CHECK(std::abs(a.rho[p] - b.rho[p]) < tol);
  CHECK(std::abs(a.zeta - b.zeta) < tol);
  REQUIRE(a.x.size() == b.x.size());
  for (size_t p = 0; p < a.x.size(); ++p)
    CHECK((a.x[p] - b.x[p]).cwiseAbs().maxCoeff() < tol);
}

}  // namespace

TEST_CASE("single fitted element solves through the global path") {
  const CartesianMesh mesh({0, 0}, {1, 1}, 1, 1);
  const CutTopology topo = classify_full(mesh, {});
  const PatchSet ps = build_patches(mesh, topo, plan_extensions(mesh, topo, 0.0), {2});
  const double mu = 2.0;
  const GlobalSolver gs(mesh, ps, poly_coef(mu), FaceBasis::Kind::legendre, 0.0);
  CHECK(gs.n_uhat() == 0);
  CHECK(gs.has_zeta());
  const GlobalSolution sol = gs.solve();
  CHECK(std::abs(sol.zeta) < 1e-10);
  CHECK(std::abs(sol.rho[0]) < 1e-10);  // mean of p over the unit box is 0
  const Probe pr{ps, sol, mesh};
  check_poly(pr, sample_box({0, 0}, {1, 1}, 5), mu, 1e-10);
}

TEST_CASE("fitted 2x2 mesh reproduces the quadratic solution globally") {
  const CartesianMesh mesh({0, 0}, {1, 1}, 2, 2);
  const CutTopology topo = classify_full(mesh, {});
  const PatchSet ps = build_patches(mesh, topo, plan_extensions(mesh, topo, 0.0), {2, 2, 2, 2});
  REQUIRE(ps.patches.size() == 4);
  const double mu = 2.0;
  for (const auto kind : {FaceBasis::Kind::legendre, FaceBasis::Kind::lagrange}) {
    const GlobalSolver gs(mesh, ps, poly_coef(mu), kind, 0.0);
    CHECK(gs.n_uhat() == 4 * 6);  // four interior faces, degree-2 traces
    const GlobalSolution sol = gs.solve();
    CHECK(std::abs(sol.zeta) < 1e-9);
    const Probe pr{ps, sol, mesh};
    check_poly(pr, sample_box({0, 0}, {1, 1}, 7), mu, 1e-9);
    // per-patch mean pressures
    const Vec2 centers[4] = {{0.25, 0.25}, {0.75, 0.25}, {0.25, 0.75}, {0.75, 0.75}};
    for (const Vec2& c : centers) {
      const int p = ps.patch_of_element[mesh.element_of(c)];
      CHECK(std::abs(sol.rho[p] - p_exact(c)) < 1e-9);  // mean = center value here
    }
  }
}

TEST_CASE("immersed Neumann boundary fixes the pressure level globally") {
  const CartesianMesh mesh({0, 0}, {1, 1}, 2, 1);
  const std::vector<NurbsCurve> curves = {
      make_line({0.9, 0.0}, {0.9, 1.0}, CurveRole::neumann, FluidSide::left)};
  const CutTopology topo = classify_full(mesh, curves);
  const double mu = 2.0;
  StokesCoefficients coef = poly_coef(mu);
  coef.traction = [mu](const Vec2& x, const Vec2& n, int) {
    const Eigen::Vector2d nn(n.x(), n.y());
    const Eigen::Vector2d t = mu * grad_u(x) * nn - p_exact(x) * nn;
    return Vec2(t(0), t(1));
  };
  const PatchSet ps = build_patches(mesh, topo, plan_extensions(mesh, topo, 0.0), {2, 2});
  REQUIRE(ps.patches.size() == 2);
  const GlobalSolver gs(mesh, ps, coef, FaceBasis::Kind::legendre);
  CHECK_FALSE(gs.has_zeta());
  const GlobalSolution sol = gs.solve();
  const Probe pr{ps, sol, mesh};
  check_poly(pr, sample_box({0, 0}, {0.9, 1}, 6), mu, 1e-9);
  const int p0 = ps.patch_of_element[mesh.element_of({0.25, 0.5})];
  CHECK(ps.patches[p0].bordered());
  CHECK(std::abs(sol.rho[p0] - (-0.25)) < 1e-9);  // mean of p over [0,1/2]x[0,1]
}

TEST_CASE("two-fluid interface couples through the skeleton") {
  const double mu1 = 3.0, mu2 = 1.0, x0 = 0.6, pc = 2.0;
  const CartesianMesh mesh({0, 0}, {1, 1}, 2, 1);
  const std::vector<NurbsCurve> curves = {
      make_line({x0, 0.0}, {x0, 1.0}, CurveRole::interface_, FluidSide::left)};
  const CutTopology topo = classify_full(mesh, curves);
  auto w = [&](double x, int fluid) { return fluid == 1 ? mu2 * x : mu1 * x + (mu2 - mu1) * x0; };
  StokesCoefficients coef;
  coef.mu1 = mu1;
  coef.mu2 = mu2;
  coef.source = [](const Vec2&, int) { return Vec2(0, 0); };
  coef.dirichlet = [&](const Vec2& x, int fluid) { return Vec2(0.0, w(x.x(), fluid)); };
  const PatchSet ps = build_patches(mesh, topo, plan_extensions(mesh, topo, 0.0), {2, 2});
  REQUIRE(ps.patches.size() == 2);
  const GlobalSolver gs(mesh, ps, coef, FaceBasis::Kind::legendre, pc * 1.0);
  const GlobalSolution sol = gs.solve();
  const Probe pr{ps, sol, mesh};
  for (const Vec2& pt : sample_box({0, 0}, {x0, 1}, 5)) {
    const Vec2 u = pr.u(pt, 1);
    CHECK(std::abs(u.x()) < 1e-9);
    CHECK(std::abs(u.y() - w(pt.x(), 1)) < 1e-9);
    CHECK(std::abs(pr.p(pt, 1) - pc) < 1e-9);
  }
  for (const Vec2& pt : sample_box({x0, 0}, {1, 1}, 5)) {
    const Vec2 u = pr.u(pt, 2);
    CHECK(std::abs(u.x()) < 1e-9);
    CHECK(std::abs(u.y() - w(pt.x(), 2)) < 1e-9);
    CHECK(std::abs(pr.p(pt, 2) - pc) < 1e-9);
  }
  // dual assembly routes agree (to the dense solve's conditioning)
  const GlobalSolution mono = monolithic_solve(mesh, ps, coef, FaceBasis::Kind::legendre, pc);
  compare_solutions(sol, mono, 2e-8);
}

TEST_CASE("extension patches couple through donated skeleton portions") {
  const CartesianMesh mesh({0, 0}, {1, 1}, 2, 2);
  const std::vector<NurbsCurve> curves = {
      make_line({0.48, 0.0}, {0.48, 1.0}, CurveRole::dirichlet, FluidSide::right)};
  const CutTopology topo = classify_full(mesh, curves);
  const ExtensionPlan plan = plan_extensions(mesh, topo, 0.1);
  REQUIRE(plan.extensions.size() == 2);
  const PatchSet ps = build_patches(mesh, topo, plan, {2, 2, 2, 2});
  REQUIRE(ps.patches.size() == 2);
  for (const Patch& patch : ps.patches) REQUIRE(patch.fields.size() == 1);
  const double mu = 2.0;
  const GlobalSolver gs(mesh, ps, poly_coef(mu), FaceBasis::Kind::legendre, 0.1248);
  // the donated slivers still talk through the column-0 horizontal face
  const int top_face = mesh.faces_of(mesh.element_of({0.49, 0.25}))[3];
  CHECK(gs.uhat_offset(top_face, 1) >= 0);
  const GlobalSolution sol = gs.solve();
  const Probe pr{ps, sol, mesh};
  check_poly(pr, sample_box({0.48, 0}, {1, 1}, 6), mu, 1e-8);
  const int prow0 = ps.patch_of_element[mesh.element_of({0.75, 0.25})];
  const int prow1 = ps.patch_of_element[mesh.element_of({0.75, 0.75})];
  CHECK(std::abs(sol.rho[prow0] - (-0.26)) < 1e-8);
  CHECK(std::abs(sol.rho[prow1] - 0.74) < 1e-8);
  const GlobalSolution mono = monolithic_solve(mesh, ps, poly_coef(mu), FaceBasis::Kind::legendre, 0.1248);
  compare_solutions(sol, mono, 5e-8);
}

TEST_CASE("static bubble: condensed and monolithic routes agree at equilibrium") {
  const double R = 0.3, gamma = 0.5;
  const CartesianMesh mesh({0, 0}, {1, 1}, 2, 2);
  const std::vector<NurbsCurve> curves =
      make_circle({0.5, 0.5}, R, true, CurveRole::interface_, FluidSide::left);
  const CutTopology topo = classify_full(mesh, curves);
  const PatchSet ps = build_patches(mesh, topo, plan_extensions(mesh, topo, 0.05), {2, 2, 2, 2});
  StokesCoefficients coef;
  coef.mu1 = 10.0;
  coef.mu2 = 1.0;
  coef.gamma = gamma;
  coef.source = [](const Vec2&, int) { return Vec2(0, 0); };
  coef.dirichlet = [](const Vec2&, int) { return Vec2(0, 0); };
  const GlobalSolver gs(mesh, ps, coef, FaceBasis::Kind::legendre, 0.0);
  const GlobalSolution sol = gs.solve();
  const GlobalSolution mono = monolithic_solve(mesh, ps, coef, FaceBasis::Kind::legendre, 0.0);
  compare_solutions(sol, mono, 1e-9);

  // exact equilibrium: u = 0 and a piecewise-constant pressure with jump gamma/R
  const Probe pr{ps, sol, mesh};
  const double p_in = gamma / R - M_PI * R * gamma, p_out = -M_PI * R * gamma;
  for (const Vec2& pt : {Vec2(0.45, 0.45), Vec2(0.55, 0.6), Vec2(0.4, 0.55)}) {
    CHECK(pr.u(pt, 1).norm() < 1e-9);
    CHECK(std::abs(pr.p(pt, 1) - p_in) < 1e-8);
  }
  for (const Vec2& pt : {Vec2(0.05, 0.05), Vec2(0.9, 0.2), Vec2(0.1, 0.9)}) {
    CHECK(pr.u(pt, 2).norm() < 1e-9);
    CHECK(std::abs(pr.p(pt, 2) - p_out) < 1e-8);
  }
}

TEST_CASE("periodic mesh with an immersed wall matches the monolithic route") {
  const CartesianMesh mesh({0, 0}, {1, 1}, 3, 3, true, true);
  const std::vector<NurbsCurve> curves =
      make_circle({0.5, 0.5}, 0.2, true, CurveRole::dirichlet, FluidSide::right);
  const CutTopology topo = classify(mesh, curves, {});
  StokesCoefficients coef;
  coef.mu1 = coef.mu2 = 1.0;
  coef.source = [](const Vec2&, int) { return Vec2(1, 0); };
  coef.dirichlet = [](const Vec2&, int) { return Vec2(0, 0); };
  const PatchSet ps = build_patches(mesh, topo, plan_extensions(mesh, topo, 0.1),
                                    std::vector<int>(9, 2));
  const GlobalSolver gs(mesh, ps, coef, FaceBasis::Kind::legendre, 0.0);
  CHECK(gs.has_zeta());
  const GlobalSolution sol = gs.solve();
  const GlobalSolution mono = monolithic_solve(mesh, ps, coef, FaceBasis::Kind::legendre, 0.0);
  compare_solutions(sol, mono, 1e-9);
  for (const auto& xp : sol.x) CHECK(xp.allFinite());
}

TEST_CASE("condition estimate tracks the exact condition number") {
  const CartesianMesh mesh({0, 0}, {1, 1}, 2, 2);
  const CutTopology topo = classify_full(mesh, {});
  const PatchSet ps = build_patches(mesh, topo, plan_extensions(mesh, topo, 0.0),
                                    std::vector<int>(4, 1));
  const GlobalSolver gs(mesh, ps, poly_coef(1.0), FaceBasis::Kind::legendre, 0.0);
  const double exact = gs.condition_exact();
  const double est = gs.condition_estimate();
  CHECK(est == doctest::Approx(exact).epsilon(0.05));
}
