#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "uhdg/mesh.hpp"

using namespace uhdg;

TEST_CASE("face counts and incidence") {
  CartesianMesh m({0, 0}, {1, 1}, 4, 4);
  CHECK(m.n_faces() == 40);  // 5*4 vertical + 4*5 horizontal
  CHECK(m.n_elements() == 16);

  // every interior face is listed by exactly its two incident elements
  std::vector<int> seen(m.n_faces(), 0);
  for (int e = 0; e < m.n_elements(); ++e)
    for (int f : m.faces_of(e)) ++seen[f];
  for (int f = 0; f < m.n_faces(); ++f) {
    const Face& face = m.faces[f];
    int expect = (face.owner >= 0) + (face.neighbor >= 0);
    CHECK(seen[f] == expect);
  }
}

TEST_CASE("owner/neighbor sides and outward signs") {
  CartesianMesh m({0, 0}, {2, 1}, 8, 4);
  for (int f = 0; f < m.n_faces(); ++f) {
    const Face& face = m.faces[f];
    if (face.owner >= 0) {
      // owner center is on the minus side of the face plane
      Vec2 c = m.element_center(face.owner);
      CHECK((c - face.a).dot(face.normal) < 0);
      CHECK(m.outward_sign(face.owner, f) == 1.0);
    }
    if (face.neighbor >= 0) {
      Vec2 c = m.element_center(face.neighbor);
      CHECK((c - face.a).dot(face.normal) > 0);
      CHECK(m.outward_sign(face.neighbor, f) == -1.0);
    }
  }
}

TEST_CASE("point location") {
  CartesianMesh m({0, 0}, {1, 1}, 8, 8);
  CHECK(m.element_of({0.01, 0.01}) == 0);
  CHECK(m.element_of({0.99, 0.99}) == 63);
  CHECK(m.element_of({0.3, 0.6}) == m.element_id(2, 4));
  CHECK(m.element_of_strict({1.5, 0.5}) == -1);
  CHECK(m.element_of_strict({-0.001, 0.01}, 0.01) == 0);
  auto [lo, hi] = m.element_box(m.element_id(3, 5));
  CHECK(lo.x() == doctest::Approx(0.375));
  CHECK(hi.y() == doctest::Approx(0.75));
}

TEST_CASE("periodic aliasing wraps both axes") {
  CartesianMesh m({0, 0}, {1, 1}, 4, 4, true, true);
  // right faces of the last column resolve to the left-boundary faces
  for (int j = 0; j < 4; ++j) {
    int e = m.element_id(3, j);
    auto fo = m.faces_of(e);
    CHECK(fo[1] == m.vface_id(0, j));
    CHECK(m.faces[fo[1]].owner == e);
    CHECK(m.faces[fo[1]].neighbor == m.element_id(0, j));
    CHECK(m.outward_sign(e, fo[1]) == 1.0);
    CHECK(m.outward_sign(m.element_id(0, j), fo[1]) == -1.0);
  }
  for (int i = 0; i < 4; ++i) {
    int e = m.element_id(i, 3);
    auto fo = m.faces_of(e);
    CHECK(fo[3] == m.hface_id(i, 0));
    CHECK(m.faces[fo[3]].owner == e);
  }
  // distinct dof-carrying faces: 2 * nx * ny per axis direction
  std::set<int> canon;
  for (int e = 0; e < m.n_elements(); ++e)
    for (int f : m.faces_of(e)) canon.insert(f);
  CHECK(static_cast<int>(canon.size()) == 32);  // 16 vertical + 16 horizontal
}
