#include "uhdg/geometry_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace uhdg {

namespace {

constexpr const char* kHeader = "# nurbs-geometry v1";

const char* role_token(CurveRole r) {
  switch (r) {
    case CurveRole::dirichlet: return "dirichlet";
    case CurveRole::neumann: return "neumann";
    case CurveRole::wall: return "wall";
    default: return "interface";
  }
}

CurveRole parse_role(const std::string& tok) {
  if (tok == "dirichlet") return CurveRole::dirichlet;
  if (tok == "neumann") return CurveRole::neumann;
  if (tok == "wall") return CurveRole::wall;
  if (tok == "interface") return CurveRole::interface_;
  throw std::invalid_argument("geometry: unknown role '" + tok + "'");
}

FluidSide parse_side(const std::string& tok) {
  if (tok == "left") return FluidSide::left;
  if (tok == "right") return FluidSide::right;
  throw std::invalid_argument("geometry: unknown side '" + tok + "'");
}

/* Next content line: blank lines and comments are skipped. */
bool next_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '#') continue;
    return true;
  }
  return false;
}

}  // namespace

std::string write_geometry(const std::vector<NurbsCurve>& curves) {
  std::ostringstream out;
  out << kHeader << "\n" << std::setprecision(17);
  for (const auto& c : curves) {
    out << "curve " << c.degree << " " << c.n_ctrl() << " " << role_token(c.role) << " "
        << (c.fluid_side == FluidSide::left ? "left" : "right") << "\n";
    out << "knots";
    for (double k : c.knots) out << " " << k;
    out << "\n";
    for (int i = 0; i < c.n_ctrl(); ++i)
      out << "ctrl " << c.ctrl[i].x() << " " << c.ctrl[i].y() << " " << c.weights[i] << "\n";
  }
  return out.str();
}

std::vector<NurbsCurve> read_geometry(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.find(kHeader) != 0)
    throw std::invalid_argument(std::string("geometry: missing '") + kHeader + "' header");

  std::vector<NurbsCurve> curves;
  while (next_line(in, line)) {
    std::istringstream head(line);
    std::string tag, role, side;
    NurbsCurve c;
    int n_ctrl = 0;
    head >> tag >> c.degree >> n_ctrl >> role >> side;
    if (!head || tag != "curve")
      throw std::invalid_argument("geometry: expected 'curve <degree> <n_ctrl> <role> <side>', "
                                  "got '" + line + "'");
    if (c.degree < 1 || n_ctrl < 2)
      throw std::invalid_argument("geometry: curve needs degree >= 1 and n_ctrl >= 2");
    c.role = parse_role(role);
    c.fluid_side = parse_side(side);

    if (!next_line(in, line)) throw std::invalid_argument("geometry: missing knots line");
    std::istringstream ks(line);
    ks >> tag;
    if (tag != "knots") throw std::invalid_argument("geometry: expected 'knots', got '" + line + "'");
    double v;
    while (ks >> v) c.knots.push_back(v);
    if (static_cast<int>(c.knots.size()) != n_ctrl + c.degree + 1)
      throw std::invalid_argument("geometry: knot count must be n_ctrl + degree + 1");

    for (int i = 0; i < n_ctrl; ++i) {
      if (!next_line(in, line)) throw std::invalid_argument("geometry: missing ctrl line");
      std::istringstream cs(line);
      double x = 0, y = 0, w = 0;
      cs >> tag >> x >> y >> w;
      if (!cs || tag != "ctrl")
        throw std::invalid_argument("geometry: expected 'ctrl <x> <y> <w>', got '" + line + "'");
      c.ctrl.emplace_back(x, y);
      c.weights.push_back(w);
    }
    c.validate();
    curves.push_back(std::move(c));
  }
  if (curves.empty()) throw std::invalid_argument("geometry: no curves in file");
  return curves;
}

void write_geometry_file(const std::string& path, const std::vector<NurbsCurve>& curves) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("geometry: cannot write " + path);
  out << write_geometry(curves);
}

std::vector<NurbsCurve> read_geometry_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("geometry: cannot open " + path);
  return read_geometry(in);
}

}  // namespace uhdg
