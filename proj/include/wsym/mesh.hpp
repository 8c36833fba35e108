// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

namespace wsym {

enum class FaceTag { Interior = -1, Dirichlet = 0, Traction = 1 };

/// Unit-square boundary sides, used by the built-in generator's Gamma_1
/// selector. A mesh file can tag arbitrary boundary edges instead.
enum Side : unsigned { kSideLeft = 1, kSideRight = 2, kSideBottom = 4, kSideTop = 8 };

struct Face {
  int v0 = -1, v1 = -1;  // v0 < v1; the global edge parameter runs v0 -> v1
  FaceTag tag = FaceTag::Interior;
  std::array<int, 2> elems = {-1, -1};
};

/// Immutable after construction; safe to share read-only across threads.
struct Mesh {
  std::vector<Eigen::Vector2d> vertices;
  std::vector<std::array<int, 3>> triangles;           // CCW vertex triples
  std::vector<Face> faces;                             // sorted lexicographically by (v0,v1)
  std::vector<std::array<int, 3>> element_to_faces;    // per local edge (01,12,20)
  std::vector<std::array<int, 3>> element_face_sign;   // +1 if local order matches (v0,v1)
  std::vector<int> alfeld_parent;                      // macro element id, or -1

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_elements() const { return static_cast<int>(triangles.size()); }
  int n_faces() const { return static_cast<int>(faces.size()); }
  int n_boundary_faces() const;
  int n_interior_faces() const { return n_faces() - n_boundary_faces(); }
  double signed_area(int elem) const;
  double total_area() const;
  double h_max() const;
  double h_min() const;
};

struct ElementGeometry {
  Eigen::Matrix2d jac;        // x = jac * xhat + shift
  Eigen::Vector2d shift;
  Eigen::Matrix2d jac_inv;
  Eigen::Matrix2d jac_inv_t;
  double det = 0.0;           // > 0 for CCW elements
  double diameter = 0.0;      // h_K
  std::array<Eigen::Vector2d, 3> normals;   // outward unit normal per local face
  std::array<double, 3> face_lengths;       // h_F
};

ElementGeometry element_geometry(const Mesh& mesh, int elem);

/// Structured unit-square macro mesh (uniform lower-left -> upper-right
/// diagonals), Alfeld-split; boundary sides in gamma1_sides are tagged
/// Traction, the rest Dirichlet.
Mesh generate_structured_alfeld(int cells_per_side, unsigned gamma1_sides = 0);

/// Macro mesh without the Alfeld split (negative-control meshes).
Mesh generate_structured_macro(int cells_per_side, unsigned gamma1_sides = 0);

/// Split every triangle into 3 via its barycenter. Parent edges are kept
/// unsplit and keep their tags. Not idempotent: splitting an already-split
/// mesh triples the element count again.
Mesh alfeld_split(const Mesh& mesh);

Mesh read_mesh(const std::string& path);
void write_mesh(const Mesh& mesh, const std::string& path);

/// Throws std::runtime_error describing the first violated invariant.
void validate_mesh(const Mesh& mesh);

}  // namespace wsym
