#pragma once

#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "uhdg/cut.hpp"
#include "uhdg/geometry.hpp"
#include "uhdg/global_system.hpp"
#include "uhdg/local_problem.hpp"
#include "uhdg/mesh.hpp"
#include "uhdg/postprocess.hpp"

namespace uhdg {

/* Benchmark configuration. Unset fields (zero / nullopt / empty) fall back to
 * the named case's defaults; the resolved values are echoed into reports. */
struct CaseConfig {
  std::string case_name;
  int nx = 0, ny = 0;        // 0: case default; ny 0 copies nx
  std::optional<int> degree;
  std::optional<double> adapt;  // adaptivity tolerance; wins over `degree`
  FaceBasis::Kind face_kind = FaceBasis::Kind::legendre;
  double alpha_min = 0.3;
  bool extension = true;
  std::optional<std::pair<bool, bool>> periodic;  // overrides the case default
  std::string geometry_file;  // replaces the case's built-in curve set
  std::string out_dir = ".";
  bool emit_fields = false, emit_plots = false, emit_report = false;
};

/* Error raised by case plumbing; exit_code matches the CLI contract:
 * 2 configuration, 3 geometry/topology, 4 solver/postprocess. */
struct CaseError : std::runtime_error {
  int exit_code;
  CaseError(int code, const std::string& msg) : std::runtime_error(msg), exit_code(code) {}
};

/* ---- closed-form reference flows ---- */

/* Coaxial cylinder flow u_theta = A r + B / r driven by wall velocities
 * omega_int R_int and omega_ext R_ext; Stokes-exact with constant pressure. */
struct CouetteFlow {
  double R_int = 1.0 / 6.0, R_ext = 1.0 / 3.0;
  double omega_int = 0.0, omega_ext = 1.0;
  Vec2 center{0.5, 0.5};

  double A() const;
  double B() const;
  Vec2 velocity(const Vec2& x) const;
  Eigen::Matrix2d gradient(const Vec2& x) const;  // (i,j) = du_i/dx_j
};

/* Divergence-free polynomial vortex on the unit square with p = x(1-x). */
struct ManufacturedFlow {
  double mu = 1.0;

  Vec2 velocity(const Vec2& x) const;
  Eigen::Matrix2d gradient(const Vec2& x) const;
  double pressure(const Vec2& x) const;
  Vec2 source(const Vec2& x) const;  // -div(mu grad u - p I)
};

/* Analytic reference fields of a case, when available. */
struct ReferenceSolution {
  bool has_velocity = false, has_pressure = false;
  VelocityFn u;
  GradientFn grad;
  PressureFn p;
};

/* A fully resolved case: mesh, exact geometry, physics, and reference. */
struct CaseSetup {
  CaseConfig config;  // defaults applied
  CartesianMesh mesh;
  std::vector<NurbsCurve> curves;
  ClassifyOptions classify_opt;
  StokesCoefficients coef;
  ExtensionWeights weights;
  ReferenceSolution reference;
  /* fixed-degree runs resolve to this when config carries neither choice */
  int degree = 1;
  std::optional<double> adapt;
  /* random point in the PDE-smooth interior plus its fluid; set with the
   * reference, for finite-difference verification of the source term */
  std::function<std::pair<Vec2, int>(std::mt19937&)> sample_interior;
};

std::vector<std::string> case_names();
CaseSetup make_case(const CaseConfig& config);

/* Curve set of a named case (geometry only, no physics). */
std::vector<NurbsCurve> case_geometry(const std::string& name);

/* Max norm of s + div(mu grad u_ref - p_ref I) sampled with central
 * differences at n interior points; the oracle for reference consistency. */
double reference_residual(const CaseSetup& s, int n_points, unsigned seed);

/* Integral of the reference pressure over the active region (the bordered
 * pressure gauge), by region quadrature at npts points per direction. */
double reference_pressure_integral(const CaseSetup& s, const CutTopology& topo, int npts = 12);

/* ---- case execution ---- */

/* Everything a solved case produces. Move-only: `topo` holds curve pointers
 * into setup.curves, so copies could dangle while moves stay valid. */
struct CaseResult {
  explicit CaseResult(CaseSetup s) : setup(std::move(s)) {}
  CaseResult(CaseResult&&) = default;
  CaseResult& operator=(CaseResult&&) = default;
  CaseResult(const CaseResult&) = delete;
  CaseResult& operator=(const CaseResult&) = delete;

  CaseSetup setup;
  CutTopology topo;
  ExtensionPlan plan;
  PatchSet ps;
  GlobalSolution sol;
  PostSolution post;
  std::vector<int> degree;  // per element
  int iterations = 1;
  bool converged = true;
  std::vector<double> estimate;    // final E_e (adaptive runs)
  std::vector<AdaptRecord> trace;  // one record per adaptive solve
  bool has_reference = false;
  ErrorNorms errors;
  double post_error = 0.0;
  FluxReport flux;
  double p_gauge = 0.0;
  double kappa_global = 0.0;     // power/inverse-power estimate, seed 42
  double kappa_local_max = 0.0;  // max over patches, exact SVD
  int n_uhat = 0, n_global = 0;
  double solve_seconds = 0.0;
};

/* classification -> extension -> solve -> postprocess (-> adapt loop);
 * emits the requested artifacts into config.out_dir. Throws CaseError. */
CaseResult run_case(const CaseConfig& config);

/* Point probes into the computed fields. fluid 0 resolves from the element
 * tag and requires an uncut element; pass 1 or 2 inside cut elements. */
Vec2 eval_velocity(const CaseResult& r, const Vec2& x, int fluid = 0);
double eval_pressure(const CaseResult& r, const Vec2& x, int fluid = 0);

/* ---- convergence reporting ---- */
struct ErrorSeries {
  std::string name;
  std::vector<double> h, err;  // parallel, >= 2 entries for a fit
};

struct RateFit {
  std::string name;
  double slope = 0.0;
  bool floor = false;  // series at rounding floor; slope not meaningful
};

/* Least-squares slope of log err vs log h; floor when every error sits at
 * the rounding floor (< 1e-11). */
RateFit fit_rate(const ErrorSeries& s);
std::string convergence_csv(const std::vector<ErrorSeries>& series);
std::string convergence_plot(const std::vector<ErrorSeries>& series);

/* ---- emission ---- */
std::string render_report(const CaseResult& r);
/* writes the artifacts selected by the config's emit flags; returns paths */
std::vector<std::string> emit_outputs(const CaseResult& r);

}  // namespace uhdg
