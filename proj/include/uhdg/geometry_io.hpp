#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "uhdg/geometry.hpp"

namespace uhdg {

/* Plain-text curve-set format, one block per curve:
 *
 *   # nurbs-geometry v1
 *   curve <degree> <n_ctrl> <role> <side>
 *   knots <k_0> ... <k_{n_ctrl+degree}>
 *   ctrl <x> <y> <weight>          (n_ctrl lines)
 *
 * role: dirichlet | neumann | wall | interface;  side: left | right.
 * Blank lines and lines starting with '#' are skipped after the header. */
std::string write_geometry(const std::vector<NurbsCurve>& curves);
std::vector<NurbsCurve> read_geometry(std::istream& in);

void write_geometry_file(const std::string& path, const std::vector<NurbsCurve>& curves);
std::vector<NurbsCurve> read_geometry_file(const std::string& path);

}  // namespace uhdg
