#include <cstdio>
#include <exception>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uhdg/cases.hpp"

namespace {

int run(const uhdg::CaseConfig& config) {
  const uhdg::CaseResult r = uhdg::run_case(config);
  std::ostringstream out;
  out << uhdg::render_report(r);
  if (config.emit_fields || config.emit_plots || config.emit_report)
    out << "artifacts written to " << (config.out_dir.empty() ? "." : config.out_dir) << "\n";
  std::fputs(out.str().c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unfitted high-order HDG Stokes benchmark solver"};
  app.set_config("--config", "", "Read options from a key-value file");

  uhdg::CaseConfig config;
  int mesh = 0;
  int degree = 0;
  double adapt = 0.0;
  std::string face_basis = "legendre";
  std::string periodic;
  std::string emit;

  app.add_option("--case", config.case_name, "Benchmark case name")->required();
  app.add_option("--mesh", mesh, "Elements per direction (0: case default)");
  auto* deg_opt = app.add_option("--degree", degree, "Fixed polynomial degree");
  auto* adapt_opt =
      app.add_option("--adapt", adapt, "Adaptive degree with this error tolerance");
  deg_opt->excludes(adapt_opt);
  app.add_option("--face-basis", face_basis, "Face basis: legendre | lagrange")
      ->check(CLI::IsMember({"legendre", "lagrange"}));
  app.add_option("--alpha-min", config.alpha_min, "Extension threshold on the area fraction");
  app.add_flag("--no-extension", "Disable cut-cell extension");
  app.add_option("--periodic", periodic, "Periodic directions: xy | x | y")
      ->check(CLI::IsMember({"xy", "x", "y"}));
  app.add_option("--geometry", config.geometry_file, "Curve-set file replacing the built-in geometry");
  app.add_option("--out", config.out_dir, "Output directory for artifacts");
  app.add_option("--emit", emit, "Comma-separated artifacts: fields,plots,report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  config.nx = config.ny = mesh;
  if (deg_opt->count()) config.degree = degree;
  if (adapt_opt->count()) config.adapt = adapt;
  config.face_kind = face_basis == "lagrange" ? uhdg::FaceBasis::Kind::lagrange
                                              : uhdg::FaceBasis::Kind::legendre;
  config.extension = app.count("--no-extension") == 0;
  if (!periodic.empty())
    config.periodic = std::make_pair(periodic != "y", periodic != "x");

  std::stringstream tokens(emit);
  for (std::string tok; std::getline(tokens, tok, ',');) {
    if (tok == "fields")
      config.emit_fields = true;
    else if (tok == "plots")
      config.emit_plots = true;
    else if (tok == "report")
      config.emit_report = true;
    else if (!tok.empty()) {
      std::fprintf(stderr, "error: unknown --emit item '%s'\n", tok.c_str());
      return 2;
    }
  }

  try {
    return run(config);
  } catch (const uhdg::CaseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
}
