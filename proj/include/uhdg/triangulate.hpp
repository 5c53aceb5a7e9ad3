#pragma once

#include "uhdg/cut.hpp"
#include "uhdg/quadrature.hpp"

namespace uhdg {

/* Quadrature over one cut-element region: triangles fanned against the exact
 * curved boundary pieces (mapped rules with the true NURBS segment as one
 * side), affine triangles elsewhere. Holes are bridged into the outer loop
 * with slit edges. npts = Gauss points per direction in each triangle.
 * Validates the accumulated weight against the region area and retries at
 * doubled boundary sampling before giving up. */
AreaRule region_rule(const ElementRegion& region, int npts);

}  // namespace uhdg
