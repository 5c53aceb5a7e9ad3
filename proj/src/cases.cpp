#include "uhdg/cases.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "uhdg/geometry_io.hpp"
#include "uhdg/triangulate.hpp"

namespace uhdg {

namespace {

constexpr double kPi = std::numbers::pi;

double sq(double v) { return v * v; }

/* f(t) = t^2 (1-t)^2 and derivatives; the stream-function factor of the
 * manufactured vortex. */
double f0(double t) { return sq(t) * sq(1.0 - t); }
double f1(double t) { return 2.0 * t - 6.0 * sq(t) + 4.0 * t * t * t; }
double f2(double t) { return 2.0 - 12.0 * t + 12.0 * sq(t); }
double f3(double t) { return -12.0 + 24.0 * t; }

}  // namespace

double CouetteFlow::A() const {
  return (omega_ext * sq(R_ext) - omega_int * sq(R_int)) / (sq(R_ext) - sq(R_int));
}

double CouetteFlow::B() const {
  return (omega_int - omega_ext) * sq(R_int) * sq(R_ext) / (sq(R_ext) - sq(R_int));
}

Vec2 CouetteFlow::velocity(const Vec2& x) const {
  const Vec2 d = x - center;
  const double c = A() + B() / d.squaredNorm();
  return {-c * d.y(), c * d.x()};
}

Eigen::Matrix2d CouetteFlow::gradient(const Vec2& x) const {
  const Vec2 d = x - center;
  const double r2 = d.squaredNorm();
  const double c = A() + B() / r2;
  const double q = 2.0 * B() / sq(r2);
  Eigen::Matrix2d g;
  g(0, 0) = q * d.x() * d.y();
  g(0, 1) = -c + q * sq(d.y());
  g(1, 0) = c - q * sq(d.x());
  g(1, 1) = -q * d.x() * d.y();
  return g;
}

Vec2 ManufacturedFlow::velocity(const Vec2& x) const {
  return {f0(x.x()) * f1(x.y()), -f0(x.y()) * f1(x.x())};
}

Eigen::Matrix2d ManufacturedFlow::gradient(const Vec2& x) const {
  Eigen::Matrix2d g;
  g(0, 0) = f1(x.x()) * f1(x.y());
  g(0, 1) = f0(x.x()) * f2(x.y());
  g(1, 0) = -f0(x.y()) * f2(x.x());
  g(1, 1) = -f1(x.y()) * f1(x.x());
  return g;
}

double ManufacturedFlow::pressure(const Vec2& x) const { return x.x() * (1.0 - x.x()); }

Vec2 ManufacturedFlow::source(const Vec2& x) const {
  return {-mu * (f2(x.x()) * f1(x.y()) + f0(x.x()) * f3(x.y())) + 1.0 - 2.0 * x.x(),
          mu * (f0(x.y()) * f3(x.x()) + f2(x.y()) * f1(x.x()))};
}

namespace {

/* ---- geometry builders ---- */

std::vector<NurbsCurve> couette_rings() {
  const CouetteFlow tc;
  std::vector<NurbsCurve> cs;
  auto outer = make_circle(tc.center, tc.R_ext, true, CurveRole::dirichlet, FluidSide::left);
  auto inner = make_circle(tc.center, tc.R_int, true, CurveRole::dirichlet, FluidSide::right);
  cs.insert(cs.end(), outer.begin(), outer.end());
  cs.insert(cs.end(), inner.begin(), inner.end());
  return cs;
}

std::vector<NurbsCurve> bubble_circle() {
  return make_circle({0.5, 0.5}, 1.0 / 3.0, true, CurveRole::interface_, FluidSide::left);
}

std::vector<NurbsCurve> m_shape_notch(double eps) {
  std::vector<NurbsCurve> cs;
  cs.push_back(make_line({0.75, 1.0}, {0.5, 0.75 + eps}, CurveRole::dirichlet, FluidSide::left));
  cs.push_back(make_line({0.5, 0.75 + eps}, {0.25, 1.0}, CurveRole::dirichlet, FluidSide::left));
  return cs;
}

std::vector<NurbsCurve> smoothed_square_outline() {
  const double R = 0.15;
  const auto role = CurveRole::dirichlet;
  const auto side = FluidSide::left;
  std::vector<NurbsCurve> cs;
  cs.push_back(make_line({0.25, 0.1}, {0.75, 0.1}, role, side));
  cs.push_back(make_arc({0.9, 0.1}, R, kPi, 0.5 * kPi, role, side));
  cs.push_back(make_line({0.9, 0.25}, {0.9, 0.75}, role, side));
  cs.push_back(make_arc({0.9, 0.9}, R, 1.5 * kPi, kPi, role, side));
  cs.push_back(make_line({0.75, 0.9}, {0.25, 0.9}, role, side));
  cs.push_back(make_arc({0.1, 0.9}, R, 0.0, -0.5 * kPi, role, side));
  cs.push_back(make_line({0.1, 0.75}, {0.1, 0.25}, role, side));
  cs.push_back(make_arc({0.1, 0.1}, R, 0.5 * kPi, 0.0, role, side));
  return cs;
}

struct Obstacles {
  static constexpr int n = 8;
  static constexpr double x[n] = {0.410, 0.460, 0.482, 0.500, 0.500, 0.545, 0.573, 0.630};
  static constexpr double y[n] = {0.438, 0.452, 0.477, 0.510, 0.560, 0.560, 0.585, 0.580};
  static constexpr double r[n] = {0.034, 0.012, 0.012, 0.020, 0.025, 0.015, 0.020, 0.030};
};

constexpr double kInletY = 0.985;

std::vector<NurbsCurve> microchannel_outline() {
  std::vector<NurbsCurve> cs;
  const std::vector<Vec2> left_wall = {{0.445, kInletY}, {0.445, 0.655}, {0.35, 0.635},
                                       {0.35, 0.365},    {0.445, 0.345}, {0.445, 0.015}};
  const std::vector<Vec2> right_wall = {{0.555, 0.015}, {0.555, 0.345}, {0.68, 0.365},
                                        {0.68, 0.635},  {0.555, 0.655}, {0.555, kInletY}};
  auto lw = make_polyline(left_wall, CurveRole::wall, FluidSide::left);
  cs.insert(cs.end(), lw.begin(), lw.end());
  cs.push_back(make_line({0.445, 0.015}, {0.555, 0.015}, CurveRole::neumann, FluidSide::left));
  auto rw = make_polyline(right_wall, CurveRole::wall, FluidSide::left);
  cs.insert(cs.end(), rw.begin(), rw.end());
  cs.push_back(make_line({0.555, kInletY}, {0.445, kInletY}, CurveRole::dirichlet,
                         FluidSide::left));
  for (int i = 0; i < Obstacles::n; ++i) {
    auto c = make_circle({Obstacles::x[i], Obstacles::y[i]}, Obstacles::r[i], true,
                         CurveRole::wall, FluidSide::right);
    cs.insert(cs.end(), c.begin(), c.end());
  }
  return cs;
}

struct Droplets {
  static constexpr int n = 28;
  static constexpr double x[n] = {0.156, 0.156, 0.844, 0.844, 0.50, 0.10, 0.50, 0.90, 0.70, 0.30,
                                  0.11,  0.11,  0.30,  0.70,  0.89, 0.89, 0.75, 0.25, 0.25, 0.75,
                                  0.59,  0.41,  0.16,  0.16,  0.41, 0.59, 0.84, 0.84};
  static constexpr double y[n] = {0.156, 0.844, 0.844, 0.156, 0.10, 0.50, 0.90, 0.50, 0.11, 0.11,
                                  0.30,  0.70,  0.89,  0.89,  0.70, 0.30, 0.25, 0.25, 0.75, 0.75,
                                  0.16,  0.16,  0.41,  0.59,  0.84, 0.84, 0.41, 0.59};
  static constexpr double r[n] = {0.030, 0.030, 0.030, 0.030, 0.026, 0.026, 0.026,
                                  0.026, 0.026, 0.026, 0.026, 0.026, 0.026, 0.026,
                                  0.026, 0.026, 0.022, 0.022, 0.022, 0.022, 0.015,
                                  0.015, 0.015, 0.015, 0.015, 0.015, 0.015, 0.015};
};

constexpr double kPoreRadius = 0.25231;

std::vector<NurbsCurve> emulsion_curves() {
  std::vector<NurbsCurve> cs;
  auto pore = make_circle({0.5, 0.5}, kPoreRadius, true, CurveRole::wall, FluidSide::right);
  cs.insert(cs.end(), pore.begin(), pore.end());
  for (int i = 0; i < Droplets::n; ++i) {
    auto c = make_circle({Droplets::x[i], Droplets::y[i]}, Droplets::r[i], true,
                         CurveRole::interface_, FluidSide::left);
    cs.insert(cs.end(), c.begin(), c.end());
  }
  return cs;
}

/* ---- case registry ---- */

struct CaseEntry {
  int nx = 8;
  int degree = 2;
  std::optional<double> adapt;
  bool periodic_x = false, periodic_y = false;
  bool two_fluid = false;
  double m_shape_eps = -1.0;  // >= 0 marks the notch family
};

const std::vector<std::pair<std::string, CaseEntry>>& registry() {
  constexpr auto none = std::nullopt;
  // {nx, degree, adapt, periodic_x, periodic_y, two_fluid, m_shape_eps}
  static const std::vector<std::pair<std::string, CaseEntry>> reg = {
      {"manufactured", {8, 2, none, false, false, false, -1.0}},
      {"taylor_couette", {16, 2, none, false, false, false, -1.0}},
      {"bubble", {8, 1, none, false, false, true, -1.0}},
      {"m_shape", {4, 4, none, false, false, false, 1.5e-1}},
      {"m_shape_beta2", {4, 4, none, false, false, false, 5e-3}},
      {"m_shape_beta20", {4, 4, none, false, false, false, 5e-2}},
      {"m_shape_beta40", {4, 4, none, false, false, false, 1e-1}},
      {"m_shape_beta60", {4, 4, none, false, false, false, 1.5e-1}},
      {"smoothed_square", {4, 4, none, false, false, false, -1.0}},
      {"microchannel", {32, 1, 1e-2, false, false, false, -1.0}},
      {"emulsion", {16, 2, none, true, true, true, -1.0}},
  };
  return reg;
}

const CaseEntry& find_case(const std::string& name) {
  for (const auto& [n, e] : registry())
    if (n == name) return e;
  std::string msg = "unknown case '" + name + "'; known cases:";
  for (const auto& [n, e] : registry()) msg += " " + n;
  throw CaseError(2, msg);
}

ReferenceSolution manufactured_reference(double mu) {
  const ManufacturedFlow mf{mu};
  ReferenceSolution ref;
  ref.has_velocity = ref.has_pressure = true;
  ref.u = [mf](const Vec2& x, int) { return mf.velocity(x); };
  ref.grad = [mf](const Vec2& x, int) { return mf.gradient(x); };
  ref.p = [mf](const Vec2& x, int) { return mf.pressure(x); };
  return ref;
}

std::function<std::pair<Vec2, int>(std::mt19937&)> box_sampler(Vec2 lo, Vec2 hi) {
  return [lo, hi](std::mt19937& rng) {
    std::uniform_real_distribution<double> ux(lo.x(), hi.x()), uy(lo.y(), hi.y());
    return std::make_pair(Vec2(ux(rng), uy(rng)), 1);
  };
}

}  // namespace

std::vector<std::string> case_names() {
  std::vector<std::string> names;
  for (const auto& [n, e] : registry()) names.push_back(n);
  return names;
}

std::vector<NurbsCurve> case_geometry(const std::string& name) {
  const CaseEntry& entry = find_case(name);
  if (name == "manufactured") return {};
  if (name == "taylor_couette") return couette_rings();
  if (name == "bubble") return bubble_circle();
  if (entry.m_shape_eps >= 0.0) return m_shape_notch(entry.m_shape_eps);
  if (name == "smoothed_square") return smoothed_square_outline();
  if (name == "microchannel") return microchannel_outline();
  return emulsion_curves();
}

CaseSetup make_case(const CaseConfig& in) {
  if (in.case_name.empty()) throw CaseError(2, "no case name given");
  const CaseEntry& entry = find_case(in.case_name);

  CaseConfig cfg = in;
  if (cfg.nx <= 0) cfg.nx = entry.nx;
  if (cfg.ny <= 0) cfg.ny = cfg.nx;
  if (!cfg.periodic) cfg.periodic = std::make_pair(entry.periodic_x, entry.periodic_y);
  if (!cfg.degree && !cfg.adapt) {
    if (entry.adapt)
      cfg.adapt = entry.adapt;
    else
      cfg.degree = entry.degree;
  }
  if (cfg.degree && (*cfg.degree < 1 || *cfg.degree > 8))
    throw CaseError(2, "degree must lie in [1, 8]");
  if (cfg.adapt && *cfg.adapt <= 0.0) throw CaseError(2, "adapt tolerance must be positive");
  if (cfg.alpha_min < 0.0 || cfg.alpha_min >= 1.0)
    throw CaseError(2, "alpha_min must lie in [0, 1)");

  CaseSetup s;
  s.config = std::move(cfg);
  s.mesh = CartesianMesh({0, 0}, {1, 1}, s.config.nx, s.config.ny, s.config.periodic->first,
                         s.config.periodic->second);
  if (!s.config.geometry_file.empty()) {
    try {
      s.curves = read_geometry_file(s.config.geometry_file);
    } catch (const std::exception& ex) {
      throw CaseError(3, "geometry file: " + std::string(ex.what()));
    }
  } else {
    s.curves = case_geometry(s.config.case_name);
  }
  if (entry.two_fluid) s.weights = ExtensionWeights{1.0, 0.5, 4.0};
  s.degree = s.config.degree ? *s.config.degree : entry.degree;
  s.adapt = s.config.adapt;

  const std::string& name = s.config.case_name;
  if (name == "manufactured") {
    s.classify_opt.active_box = {Vec2(0, 0), Vec2(1, 1)};
    s.reference = manufactured_reference(1.0);
    const ManufacturedFlow mf{1.0};
    s.coef.source = [mf](const Vec2& x, int) { return mf.source(x); };
    s.coef.dirichlet = [mf](const Vec2& x, int) { return mf.velocity(x); };
    s.sample_interior = box_sampler({0.05, 0.05}, {0.95, 0.95});
  } else if (name == "taylor_couette") {
    const CouetteFlow tc;
    s.reference.has_velocity = s.reference.has_pressure = true;
    s.reference.u = [tc](const Vec2& x, int) { return tc.velocity(x); };
    s.reference.grad = [tc](const Vec2& x, int) { return tc.gradient(x); };
    s.reference.p = [](const Vec2&, int) { return 1.0; };
    s.coef.dirichlet = [tc](const Vec2& x, int) { return tc.velocity(x); };
    s.sample_interior = [tc](std::mt19937& rng) {
      std::uniform_real_distribution<double> ur(tc.R_int + 0.025, tc.R_ext - 0.015);
      std::uniform_real_distribution<double> ut(0.0, 2.0 * kPi);
      const double r = ur(rng), t = ut(rng);
      return std::make_pair(Vec2(tc.center + r * Vec2(std::cos(t), std::sin(t))), 1);
    };
  } else if (name == "bubble") {
    const double R = 1.0 / 3.0;
    s.coef.mu1 = 10.0;
    s.coef.mu2 = 1.0;
    s.coef.gamma = 1.0;
    const double p_in = s.coef.gamma / R - kPi * R * s.coef.gamma;
    const double p_out = -kPi * R * s.coef.gamma;
    s.classify_opt.active_box = {Vec2(0, 0), Vec2(1, 1)};
    s.reference.has_velocity = s.reference.has_pressure = true;
    s.reference.u = [](const Vec2&, int) { return Vec2(0, 0); };
    s.reference.grad = [](const Vec2&, int) { return Eigen::Matrix2d::Zero().eval(); };
    s.reference.p = [p_in, p_out](const Vec2&, int fluid) { return fluid == 1 ? p_in : p_out; };
    s.sample_interior = [R](std::mt19937& rng) {
      std::uniform_real_distribution<double> u01(0.0, 1.0);
      if (u01(rng) < 0.5) {  // inside the droplet, clear of the interface
        const double r = (R - 0.05) * std::sqrt(u01(rng)), t = 2.0 * kPi * u01(rng);
        return std::make_pair(Vec2(0.5 + r * std::cos(t), 0.5 + r * std::sin(t)), 1);
      }
      for (;;) {
        const Vec2 x(0.05 + 0.9 * u01(rng), 0.05 + 0.9 * u01(rng));
        if ((x - Vec2(0.5, 0.5)).norm() > R + 0.05) return std::make_pair(x, 2);
      }
    };
  } else if (entry.m_shape_eps >= 0.0) {
    s.classify_opt.active_box = {Vec2(0.25, 0.25), Vec2(0.75, 1.0)};
    s.reference = manufactured_reference(1.0);
    const ManufacturedFlow mf{1.0};
    s.coef.source = [mf](const Vec2& x, int) { return mf.source(x); };
    s.coef.dirichlet = [mf](const Vec2& x, int) { return mf.velocity(x); };
    s.sample_interior = box_sampler({0.3, 0.3}, {0.7, 0.7});
  } else if (name == "smoothed_square") {
    s.reference = manufactured_reference(1.0);
    const ManufacturedFlow mf{1.0};
    s.coef.source = [mf](const Vec2& x, int) { return mf.source(x); };
    s.coef.dirichlet = [mf](const Vec2& x, int) { return mf.velocity(x); };
    s.sample_interior = box_sampler({0.3, 0.3}, {0.7, 0.7});
  } else if (name == "microchannel") {
    s.coef.dirichlet = [](const Vec2& x, int) {
      return std::abs(x.y() - kInletY) < 1e-9 ? Vec2(0, -1) : Vec2(0, 0);
    };
  } else {  // emulsion
    s.coef.mu1 = 40.0;
    s.coef.mu2 = 4.0;
    s.coef.gamma = 2.4e5;
    s.coef.source = [](const Vec2&, int) { return Vec2(0.0, -613.125); };
  }
  return s;
}

double reference_residual(const CaseSetup& s, int n_points, unsigned seed) {
  if (!s.reference.has_velocity || !s.reference.has_pressure || !s.sample_interior)
    throw CaseError(2, "case '" + s.config.case_name + "' has no reference solution");
  std::mt19937 rng(seed);
  const double h = 1e-3;
  double worst = 0.0;
  for (int i = 0; i < n_points; ++i) {
    const auto [x, fluid] = s.sample_interior(rng);
    const double mu = s.coef.mu(fluid);
    const auto u = [&](double dx, double dy) {
      return s.reference.u(Vec2(x.x() + dx, x.y() + dy), fluid);
    };
    const auto p = [&](double dx, double dy) {
      return s.reference.p(Vec2(x.x() + dx, x.y() + dy), fluid);
    };
    // fourth-order central stencils
    const Vec2 lap = (-u(2 * h, 0) + 16.0 * u(h, 0) - 30.0 * u(0, 0) + 16.0 * u(-h, 0) -
                      u(-2 * h, 0) - u(0, 2 * h) + 16.0 * u(0, h) - 30.0 * u(0, 0) +
                      16.0 * u(0, -h) - u(0, -2 * h)) /
                     (12.0 * h * h);
    const Vec2 grad_p =
        Vec2(-p(2 * h, 0) + 8.0 * p(h, 0) - 8.0 * p(-h, 0) + p(-2 * h, 0),
             -p(0, 2 * h) + 8.0 * p(0, h) - 8.0 * p(0, -h) + p(0, -2 * h)) /
        (12.0 * h);
    const Vec2 src = s.coef.source ? s.coef.source(x, fluid) : Vec2(0, 0);
    const Vec2 res = src + mu * lap - grad_p;
    worst = std::max(worst, res.cwiseAbs().maxCoeff());
  }
  return worst;
}

double reference_pressure_integral(const CaseSetup& s, const CutTopology& topo, int npts) {
  if (!s.reference.has_pressure) return 0.0;
  double total = 0.0;
  for (int e = 0; e < s.mesh.n_elements(); ++e) {
    if (topo.is_cut(e)) {
      for (const auto& region : topo.cut_of(e).regions) {
        if (region.tag == RegionTag::void_ || region.tag == RegionTag::undetermined) continue;
        const int fluid = region.tag == RegionTag::fluid1 ? 1 : 2;
        const AreaRule rule = region_rule(region, npts);
        for (int q = 0; q < rule.size(); ++q)
          total += rule.w[q] * s.reference.p(rule.pts[q], fluid);
      }
    } else if (topo.element_tag[e] == RegionTag::fluid1 ||
               topo.element_tag[e] == RegionTag::fluid2) {
      const int fluid = topo.element_tag[e] == RegionTag::fluid1 ? 1 : 2;
      const auto [lo, hi] = s.mesh.element_box(e);
      const AreaRule rule = box_rule(lo, hi, npts);
      for (int q = 0; q < rule.size(); ++q) total += rule.w[q] * s.reference.p(rule.pts[q], fluid);
    }
  }
  return total;
}

CaseResult run_case(const CaseConfig& config) {
  CaseResult r{make_case(config)};
  CaseSetup& s = r.setup;
  const auto t0 = std::chrono::steady_clock::now();

  try {
    r.topo = classify(s.mesh, s.curves, s.classify_opt);
  } catch (const std::exception& ex) {
    throw CaseError(3, "classification of case '" + s.config.case_name + "': " + ex.what());
  }

  bool has_neumann = false;
  for (const auto& c : s.curves) has_neumann |= c.role == CurveRole::neumann;
  if (!has_neumann) r.p_gauge = reference_pressure_integral(s, r.topo);

  const double alpha_min = s.config.extension ? s.config.alpha_min : 0.0;
  try {
    if (s.adapt) {
      AdaptOptions ao;
      ao.eps = *s.adapt;
      ao.alpha_min = alpha_min;
      ao.weights = s.weights;
      ao.kind = s.config.face_kind;
      ao.p_ref = r.p_gauge;
      AdaptResult ar = adapt_solve(s.mesh, r.topo, s.coef, ao);
      r.degree = std::move(ar.degree);
      r.estimate = std::move(ar.estimate);
      r.trace = std::move(ar.trace);
      r.iterations = ar.iterations;
      r.converged = ar.converged;
      r.ps = std::move(ar.ps);
      r.sol = std::move(ar.sol);
      r.post = std::move(ar.post);
      r.plan = plan_extensions(s.mesh, r.topo, alpha_min, s.weights);
    } else {
      r.plan = plan_extensions(s.mesh, r.topo, alpha_min, s.weights);
      r.degree.assign(s.mesh.n_elements(), s.degree);
      r.ps = build_patches(s.mesh, r.topo, r.plan, r.degree);
    }
    GlobalSolver solver(s.mesh, r.ps, s.coef, s.config.face_kind, r.p_gauge);
    if (!s.adapt) {
      r.sol = solver.solve();
      r.post = postprocess_velocity(s.mesh, r.topo, r.ps, r.sol, s.coef);
      r.estimate = error_estimates(s.mesh, r.topo, r.ps, r.sol, r.post);
    }
    r.flux = mass_flux(r.topo, r.ps, solver, r.sol, s.coef);
    r.kappa_global = solver.condition_estimate();
    for (size_t p = 0; p < r.ps.patches.size(); ++p)
      r.kappa_local_max = std::max(r.kappa_local_max, local_condition_number(solver.local(p)));
    r.n_uhat = solver.n_uhat();
    r.n_global = solver.n_dofs();
  } catch (const CaseError&) {
    throw;
  } catch (const std::exception& ex) {
    throw CaseError(4, "solving case '" + s.config.case_name + "': " + ex.what());
  }

  if (s.reference.has_velocity && s.reference.has_pressure) {
    r.has_reference = true;
    r.errors = compute_errors(s.mesh, r.topo, r.ps, r.sol, s.coef, s.reference.u, s.reference.p,
                              s.reference.grad);
    r.post_error = postprocessed_error(s.mesh, r.topo, r.ps, r.post, s.reference.u);
  }
  r.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (s.config.emit_fields || s.config.emit_plots || s.config.emit_report) emit_outputs(r);
  return r;
}

namespace {

struct FieldSlice {
  const LocalField* field = nullptr;
  Eigen::VectorXd dofs;  // the field's slice of its patch's local vector
};

FieldSlice locate_field(const CaseResult& r, const Vec2& x, int fluid) {
  const CartesianMesh& mesh = r.setup.mesh;
  const int e = mesh.element_of_strict(x, 1e-12);
  if (e < 0) throw CaseError(2, "probe point outside the mesh");
  const int p = r.ps.patch_of_element[e];
  if (p < 0) throw CaseError(2, "probe point in a void element");
  if (fluid == 0) {
    if (r.topo.is_cut(e))
      throw CaseError(2, "probe in a cut element needs an explicit fluid index");
    fluid = r.topo.element_tag[e] == RegionTag::fluid1 ? 1 : 2;
  }
  const Patch& patch = r.ps.patches[p];
  const std::vector<int> off = field_offsets(patch);
  for (size_t i = 0; i < patch.fields.size(); ++i) {
    const LocalField& f = patch.fields[i];
    if (f.fluid != fluid) continue;
    bool covers = f.element == e;
    for (const auto& piece : f.pieces) covers |= piece.first == e;
    if (!covers) continue;
    return {&f, r.sol.x[p].segment(off[i], f.dofs())};
  }
  throw CaseError(2, "no field of fluid " + std::to_string(fluid) + " covers the probe point");
}

}  // namespace

Vec2 eval_velocity(const CaseResult& r, const Vec2& x, int fluid) {
  const FieldSlice fs = locate_field(r, x, fluid);
  const Eigen::MatrixXd N = fs.field->basis.eval({x});
  const int n = fs.field->n();
  Vec2 u;
  for (int c = 0; c < 2; ++c) u[c] = N.col(0).dot(fs.dofs.segment((4 + c) * n, n));
  return u;
}

double eval_pressure(const CaseResult& r, const Vec2& x, int fluid) {
  const FieldSlice fs = locate_field(r, x, fluid);
  const Eigen::MatrixXd N = fs.field->basis.eval({x});
  return N.col(0).dot(fs.dofs.segment(6 * fs.field->n(), fs.field->n()));
}

/* ---- convergence reporting ---- */

RateFit fit_rate(const ErrorSeries& s) {
  RateFit fit{s.name, 0.0, false};
  if (s.h.size() != s.err.size() || s.h.size() < 2)
    throw CaseError(2, "rate fit needs >= 2 (h, err) pairs");
  double emax = 0.0;
  for (double e : s.err) emax = std::max(emax, e);
  if (emax < 1e-11) {
    fit.floor = true;
    return fit;
  }
  const int n = static_cast<int>(s.h.size());
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = std::log(s.h[i]);
    y(i) = std::log(s.err[i]);
  }
  fit.slope = X.colPivHouseholderQr().solve(y)(1);
  return fit;
}

std::string convergence_csv(const std::vector<ErrorSeries>& series) {
  std::ostringstream out;
  out << "field,h,error\n";
  out << std::setprecision(16);
  for (const auto& s : series)
    for (size_t i = 0; i < s.h.size(); ++i)
      out << s.name << "," << s.h[i] << "," << s.err[i] << "\n";
  out << "field,slope,floor\n";
  for (const auto& s : series) {
    const RateFit fit = fit_rate(s);
    out << s.name << ",";
    if (fit.floor)
      out << "floor,1\n";
    else
      out << fit.slope << ",0\n";
  }
  return out.str();
}

std::string convergence_plot(const std::vector<ErrorSeries>& series) {
  std::ostringstream out;
  out << std::setprecision(16);
  for (const auto& s : series) {
    const RateFit fit = fit_rate(s);
    out << "# series: " << s.name;
    if (fit.floor)
      out << " (floor)\n";
    else
      out << " (slope " << std::setprecision(4) << fit.slope << std::setprecision(16) << ")\n";
    out << "# h error\n";
    for (size_t i = 0; i < s.h.size(); ++i) out << s.h[i] << " " << s.err[i] << "\n";
    out << "\n\n";
  }
  return out.str();
}

/* ---- emission ---- */

namespace {

const char* kind_name(FaceBasis::Kind k) {
  return k == FaceBasis::Kind::legendre ? "legendre" : "lagrange";
}

const char* subset_name(SubsetKind k) {
  switch (k) {
    case SubsetKind::uncut: return "uncut";
    case SubsetKind::cut: return "cut";
    default: return "extended";
  }
}

const char* role_name(CurveRole r) {
  switch (r) {
    case CurveRole::dirichlet: return "dirichlet";
    case CurveRole::neumann: return "neumann";
    case CurveRole::wall: return "wall";
    default: return "interface";
  }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw CaseError(2, "cannot write " + path.string());
  out << text;
}

}  // namespace

std::string render_report(const CaseResult& r) {
  const CaseSetup& s = r.setup;
  std::ostringstream out;
  out << std::setprecision(12);
  out << "case: " << s.config.case_name << "\n";
  out << "mesh: " << s.config.nx << " x " << s.config.ny << " over the unit square, periodic: "
      << (s.config.periodic->first ? "x" : "") << (s.config.periodic->second ? "y" : "")
      << ((!s.config.periodic->first && !s.config.periodic->second) ? "none" : "") << "\n";
  if (s.adapt)
    out << "mode: adaptive, eps=" << *s.adapt << ", iterations=" << r.iterations
        << ", converged=" << (r.converged ? "yes" : "no") << "\n";
  else
    out << "mode: fixed degree k=" << s.degree << "\n";
  out << "face basis: " << kind_name(s.config.face_kind) << "\n";
  out << "alpha_min: " << s.config.alpha_min
      << ", extension: " << (s.config.extension ? "on" : "off") << "\n";
  out << "extension weights: w_area=" << s.weights.w_area << " w_dist=" << s.weights.w_dist
      << " w_prior=" << s.weights.w_prior << "\n";
  out << "physics: mu1=" << s.coef.mu1 << " mu2=" << s.coef.mu2 << " gamma=" << s.coef.gamma
      << " tau_C=" << s.coef.tau_C << " ell=" << s.coef.ell << " eta=" << s.coef.eta << "\n";
  out << "pressure gauge integral: " << r.p_gauge << "\n";
  out << "geometry: " << s.curves.size() << " curves"
      << (s.config.geometry_file.empty() ? "" : " from " + s.config.geometry_file) << "\n";

  int n_cut = 0, n_active = 0, n_void = 0;
  for (int e = 0; e < s.mesh.n_elements(); ++e) {
    if (r.topo.is_cut(e))
      ++n_cut;
    else if (r.topo.element_tag[e] == RegionTag::void_)
      ++n_void;
    else
      ++n_active;
  }
  out << "elements: " << s.mesh.n_elements() << " total, " << n_cut << " cut, " << n_active
      << " uncut active, " << n_void << " void\n";
  out << "patches: " << r.ps.patches.size() << " (" << r.plan.extensions.size()
      << " extensions)\n";
  int kmin = 99, kmax = 0;
  for (int e = 0; e < s.mesh.n_elements(); ++e) {
    if (r.ps.patch_of_element[e] < 0) continue;
    kmin = std::min(kmin, r.degree[e]);
    kmax = std::max(kmax, r.degree[e]);
  }
  out << "degrees: " << kmin << " .. " << kmax << "\n";
  out << "global dofs: " << r.n_global << " (uhat " << r.n_uhat << ")\n";
  out << "condition estimate (power iteration, 400 iterations, seed 42): kappa_glob="
      << r.kappa_global << "\n";
  out << "max local condition (exact SVD): kappa_loc=" << r.kappa_local_max << "\n";
  if (r.has_reference)
    out << "errors vs reference: u=" << r.errors.u << " p=" << r.errors.p << " L=" << r.errors.L
        << " ustar=" << r.post_error << "\n";
  double max_flux = 0.0;
  for (const auto& sf : r.flux.subsets) max_flux = std::max(max_flux, std::abs(sf.J));
  out << "mass flux: total=" << r.flux.total << " max|J_S|=" << max_flux << "\n";
  if (!r.estimate.empty()) {
    double emax = 0.0;
    for (double e : r.estimate) emax = std::max(emax, e);
    out << "max error estimate: " << emax << "\n";
  }
  out << "solve seconds: " << r.solve_seconds << "\n";
  for (const auto& w : r.plan.warnings) out << "warning: " << w << "\n";
  for (const auto& w : r.ps.warnings) out << "warning: " << w << "\n";
  return out.str();
}

std::vector<std::string> emit_outputs(const CaseResult& r) {
  namespace fs = std::filesystem;
  const CaseSetup& s = r.setup;
  std::vector<std::string> written;
  fs::path dir(s.config.out_dir.empty() ? "." : s.config.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CaseError(2, "cannot create output directory " + dir.string());

  const auto emit = [&](const char* name, const std::string& text) {
    write_file(dir / name, text);
    written.push_back((dir / name).string());
  };

  if (s.config.emit_report) {
    emit("report.txt", render_report(r));
    std::ostringstream flux;
    flux << std::setprecision(16) << "patch,kind,J,n_elements,elements\n";
    for (size_t i = 0; i < r.flux.subsets.size(); ++i) {
      const auto& sf = r.flux.subsets[i];
      flux << i << "," << subset_name(sf.kind) << "," << sf.J << "," << sf.elements.size() << ",";
      for (size_t j = 0; j < sf.elements.size(); ++j)
        flux << (j ? ";" : "") << sf.elements[j];
      flux << "\n";
    }
    emit("flux.csv", flux.str());
    if (!r.trace.empty()) {
      std::ostringstream tr;
      tr << "iteration,element,degree,estimate\n" << std::setprecision(16);
      for (size_t it = 0; it < r.trace.size(); ++it)
        for (size_t e = 0; e < r.trace[it].degree.size(); ++e)
          tr << it << "," << e << "," << r.trace[it].degree[e] << "," << r.trace[it].estimate[e]
             << "\n";
      emit("adapt_trace.csv", tr.str());
    }
  }

  if (s.config.emit_fields) {
    std::ostringstream cloud;
    cloud << "# x y u v p region\n" << std::setprecision(16);
    for (size_t p = 0; p < r.ps.patches.size(); ++p) {
      const Patch& patch = r.ps.patches[p];
      const std::vector<int> off = field_offsets(patch);
      for (size_t i = 0; i < patch.fields.size(); ++i) {
        const LocalField& f = patch.fields[i];
        const int n = f.n();
        const Eigen::VectorXd dofs = r.sol.x[p].segment(off[i], f.dofs());
        for (const AreaRule& rule : f.volume) {
          const Eigen::MatrixXd N = f.basis.eval(rule.pts);
          for (int q = 0; q < rule.size(); ++q) {
            const double u = N.col(q).dot(dofs.segment(4 * n, n));
            const double v = N.col(q).dot(dofs.segment(5 * n, n));
            const double pr = N.col(q).dot(dofs.segment(6 * n, n));
            cloud << rule.pts[q].x() << " " << rule.pts[q].y() << " " << u << " " << v << " "
                  << pr << " " << f.fluid << "\n";
          }
        }
      }
    }
    emit("fields.dat", cloud.str());
  }

  if (s.config.emit_plots) {
    std::ostringstream deg;
    deg << "element,i,j,x,y,degree,estimate\n" << std::setprecision(16);
    for (int e = 0; e < s.mesh.n_elements(); ++e) {
      if (r.ps.patch_of_element[e] < 0) continue;
      const auto [i, j] = s.mesh.element_ij(e);
      const Vec2 c = s.mesh.element_center(e);
      deg << e << "," << i << "," << j << "," << c.x() << "," << c.y() << "," << r.degree[e]
          << "," << (r.estimate.empty() ? 0.0 : r.estimate[e]) << "\n";
    }
    emit("degrees.csv", deg.str());

    std::ostringstream bnd;
    bnd << "curve,role,x,y\n" << std::setprecision(16);
    for (size_t c = 0; c < s.curves.size(); ++c) {
      for (int q = 0; q <= 64; ++q) {
        const Vec2 x = s.curves[c].eval(q / 64.0);
        bnd << c << "," << role_name(s.curves[c].role) << "," << x.x() << "," << x.y() << "\n";
      }
    }
    emit("boundary.csv", bnd.str());
  }
  return written;
}

}  // namespace uhdg
