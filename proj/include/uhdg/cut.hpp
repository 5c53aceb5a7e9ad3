#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uhdg/geometry.hpp"
#include "uhdg/mesh.hpp"

namespace uhdg {

enum class RegionTag { undetermined, fluid1, fluid2, void_ };

/* One piece of a region boundary loop, in traversal order (region on the
 * left). Straight pieces lie on mesh faces; curved pieces are NURBS
 * segments, possibly traversed against the curve parameter. */
struct BoundaryPiece {
  bool curved = false;
  Vec2 a, b;              // physical endpoints in traversal order
  int face = -1;          // mesh face id (straight pieces)
  double t0 = 0, t1 = 0;  // face parameters of a,b (straight; t0 > t1 legal)
  CurveSegment seg;       // curved pieces
  bool forward = true;    // curved: traversed lo -> hi?

  /* Side of the *curve* the region lies on. */
  FluidSide region_side() const { return forward ? FluidSide::left : FluidSide::right; }
};

struct ElementRegion {
  int element = -1;
  RegionTag tag = RegionTag::undetermined;
  std::vector<BoundaryPiece> loop;                // counterclockwise
  std::vector<std::vector<BoundaryPiece>> holes;  // clockwise loops strictly inside
  double area = 0.0;
  double alpha = 0.0;  // area / element area
};

/* Uncut sub-interval of a mesh face; tag resolved after propagation.
 * side_region[0/1] hold the region index within the owner/neighbor cut
 * element (-1: that element is uncut or absent). */
struct FaceInterval {
  double t0 = 0.0, t1 = 1.0;
  RegionTag tag = RegionTag::undetermined;
  int side_region[2] = {-1, -1};
};

struct CutElement {
  int element = -1;
  std::vector<ElementRegion> regions;
};

struct CutTopology {
  /* Per element: tag for uncut elements (fluid1/fluid2/void_); cut elements
   * are listed in `cut` and carry per-region tags. */
  std::vector<RegionTag> element_tag;
  std::map<int, CutElement> cut;
  /* Per face: intervals in ascending t (uncut active faces get one
   * full-range interval; fully void faces an interval tagged void_). */
  std::vector<std::vector<FaceInterval>> face_intervals;
  /* Faces where the domain boundary is fitted to the mesh (outer boundary of
   * the active box / mesh boundary of active elements, minus periodic). */
  std::vector<bool> fitted_boundary_face;

  bool is_cut(int e) const { return cut.count(e) > 0; }
  const CutElement& cut_of(int e) const { return cut.at(e); }
  double beta(int face, RegionTag fluid) const;  // active length fraction
  bool face_active(int face) const;
};

struct ClassifyOptions {
  int n_samples = 100;       // initial samples per curve
  int max_refine = 3;        // sampling density doublings before giving up
  double point_tol = 1e-12;  // physical bisection tolerance
  /* Optional fitted active sub-rectangle; elements outside are void and its
   * boundary faces are fitted boundary. Must align with mesh lines. */
  std::optional<std::pair<Vec2, Vec2>> active_box;
};

/* Classify the grid against the curves: locate intersections by sampling
 * plus bisection, split cut elements into regions, tag and propagate
 * fluids. Throws on vertex-degenerate cuts and non-watertight topology. */
CutTopology classify(const CartesianMesh& mesh, const std::vector<NurbsCurve>& curves,
                     const ClassifyOptions& opt = {});

/* ---- element extension ---- */
struct ExtensionWeights {
  double w_area = 1.0;
  double w_dist = 0.5;
  double w_prior = 1.0;  // 4.0 for two-fluid problems
};

struct Extension {
  int element = -1;      // badly cut element
  int region = -1;       // region index within it
  int donor = -1;        // donor element
  int shared_face = -1;  // face whose hybrid unknowns are erased
  double score = 0.0;
};

struct ExtensionPlan {
  std::vector<Extension> extensions;
  std::vector<std::string> warnings;  // regions left unextended
};

ExtensionPlan plan_extensions(const CartesianMesh& mesh, const CutTopology& topo,
                              double alpha_min, const ExtensionWeights& w = {});

}  // namespace uhdg
