// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "wsym/mesh.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace wsym {

namespace {

double tri_signed_area(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                       const Eigen::Vector2d& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) -
                (b.y() - a.y()) * (c.x() - a.x()));
}

// Rebuild faces (sorted pairs, lexicographic order), adjacency and signs from
// the triangle list; tags looked up in `tag_of` (default Interior/Dirichlet
// assignment for faces not found).
void build_connectivity(Mesh& mesh,
                        const std::map<std::pair<int, int>, FaceTag>* tag_of) {
  std::map<std::pair<int, int>, int> index_of;
  mesh.faces.clear();
  for (const auto& tri : mesh.triangles) {
    for (int lf = 0; lf < 3; ++lf) {
      const int a = tri[lf], b = tri[(lf + 1) % 3];
      const auto key = std::minmax(a, b);
      if (!index_of.count(key)) index_of.emplace(key, 0);
    }
  }
  int idx = 0;
  for (auto& [key, value] : index_of) {  // std::map iterates lexicographically
    value = idx++;
    Face f;
    f.v0 = key.first;
    f.v1 = key.second;
    mesh.faces.push_back(f);
  }
  mesh.element_to_faces.assign(mesh.triangles.size(), {-1, -1, -1});
  mesh.element_face_sign.assign(mesh.triangles.size(), {1, 1, 1});
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto& tri = mesh.triangles[e];
    for (int lf = 0; lf < 3; ++lf) {
      const int a = tri[lf], b = tri[(lf + 1) % 3];
      const int fi = index_of.at(std::minmax(a, b));
      mesh.element_to_faces[e][lf] = fi;
      mesh.element_face_sign[e][lf] = (a < b) ? 1 : -1;
      Face& f = mesh.faces[fi];
      if (f.elems[0] < 0)
        f.elems[0] = e;
      else if (f.elems[1] < 0)
        f.elems[1] = e;
      else
        throw std::runtime_error("mesh: face shared by more than two elements");
    }
  }
  for (auto& f : mesh.faces) {
    const bool boundary = f.elems[1] < 0;
    if (tag_of) {
      auto it = tag_of->find({f.v0, f.v1});
      if (it != tag_of->end()) {
        f.tag = it->second;
        if (!boundary && f.tag != FaceTag::Interior)
          throw std::runtime_error("mesh: boundary tag on interior edge");
        continue;
      }
    }
    f.tag = boundary ? FaceTag::Dirichlet : FaceTag::Interior;
  }
}

unsigned side_of_face(const Mesh& mesh, const Face& f) {
  const auto& a = mesh.vertices[f.v0];
  const auto& b = mesh.vertices[f.v1];
  const double tol = 1e-12;
  if (std::abs(a.x()) < tol && std::abs(b.x()) < tol) return kSideLeft;
  if (std::abs(a.x() - 1) < tol && std::abs(b.x() - 1) < tol) return kSideRight;
  if (std::abs(a.y()) < tol && std::abs(b.y()) < tol) return kSideBottom;
  if (std::abs(a.y() - 1) < tol && std::abs(b.y() - 1) < tol) return kSideTop;
  return 0;
}

}  // namespace

int Mesh::n_boundary_faces() const {
  int n = 0;
  for (const auto& f : faces)
    if (f.elems[1] < 0) ++n;
  return n;
}

double Mesh::signed_area(int elem) const {
  const auto& t = triangles[elem];
  return tri_signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
}

double Mesh::total_area() const {
  double a = 0;
  for (int e = 0; e < n_elements(); ++e) a += signed_area(e);
  return a;
}

double Mesh::h_max() const {
  double h = 0;
  for (int e = 0; e < n_elements(); ++e)
    h = std::max(h, element_geometry(*this, e).diameter);
  return h;
}

double Mesh::h_min() const {
  double h = std::numeric_limits<double>::max();
  for (int e = 0; e < n_elements(); ++e)
    h = std::min(h, element_geometry(*this, e).diameter);
  return h;
}

ElementGeometry element_geometry(const Mesh& mesh, int elem) {
  const auto& t = mesh.triangles[elem];
  const Eigen::Vector2d v0 = mesh.vertices[t[0]];
  const Eigen::Vector2d v1 = mesh.vertices[t[1]];
  const Eigen::Vector2d v2 = mesh.vertices[t[2]];
  ElementGeometry g;
  g.jac.col(0) = v1 - v0;
  g.jac.col(1) = v2 - v0;
  g.shift = v0;
  g.det = g.jac.determinant();
  if (g.det <= 0) throw std::runtime_error("element_geometry: non-CCW element");
  g.jac_inv = g.jac.inverse();
  g.jac_inv_t = g.jac_inv.transpose();
  const double e0 = (v1 - v0).norm(), e1 = (v2 - v1).norm(), e2 = (v0 - v2).norm();
  g.diameter = std::max({e0, e1, e2});
  g.face_lengths = {e0, e1, e2};
  const Eigen::Vector2d tang[3] = {v1 - v0, v2 - v1, v0 - v2};
  for (int lf = 0; lf < 3; ++lf) {
    Eigen::Vector2d n(tang[lf].y(), -tang[lf].x());  // outward for CCW
    g.normals[lf] = n.normalized();
  }
  return g;
}

Mesh generate_structured_macro(int cells_per_side, unsigned gamma1_sides) {
  if (cells_per_side < 1)
    throw std::invalid_argument("cells_per_side must be >= 1");
  const int n = cells_per_side;
  Mesh mesh;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      mesh.vertices.emplace_back(double(i) / n, double(j) / n);
  auto vid = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1),
                d = vid(i, j + 1);
      mesh.triangles.push_back({a, b, c});  // diagonal a-c in every cell
      mesh.triangles.push_back({a, c, d});
    }
  }
  mesh.alfeld_parent.assign(mesh.triangles.size(), -1);
  build_connectivity(mesh, nullptr);
  for (auto& f : mesh.faces) {
    if (f.elems[1] >= 0) continue;
    f.tag = (side_of_face(mesh, f) & gamma1_sides) ? FaceTag::Traction
                                                   : FaceTag::Dirichlet;
  }
  validate_mesh(mesh);
  return mesh;
}

Mesh generate_structured_alfeld(int cells_per_side, unsigned gamma1_sides) {
  return alfeld_split(generate_structured_macro(cells_per_side, gamma1_sides));
}

Mesh alfeld_split(const Mesh& mesh) {
  Mesh out;
  out.vertices = mesh.vertices;
  std::map<std::pair<int, int>, FaceTag> tags;
  for (const auto& f : mesh.faces) tags[{f.v0, f.v1}] = f.tag;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    if (mesh.signed_area(e) <= 0)
      throw std::runtime_error("alfeld_split: degenerate element " +
                               std::to_string(e));
    const auto& t = mesh.triangles[e];
    const Eigen::Vector2d bary = (mesh.vertices[t[0]] + mesh.vertices[t[1]] +
                                  mesh.vertices[t[2]]) / 3.0;
    const int m = static_cast<int>(out.vertices.size());
    out.vertices.push_back(bary);
    out.triangles.push_back({t[0], t[1], m});
    out.triangles.push_back({t[1], t[2], m});
    out.triangles.push_back({t[2], t[0], m});
    out.alfeld_parent.insert(out.alfeld_parent.end(), 3, e);
  }
  build_connectivity(out, &tags);
  validate_mesh(out);
  return out;
}

void validate_mesh(const Mesh& mesh) {
  if (mesh.vertices.empty() || mesh.triangles.empty())
    throw std::runtime_error("mesh: empty");
  std::vector<bool> used(mesh.vertices.size(), false);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    for (int v : mesh.triangles[e]) {
      if (v < 0 || v >= mesh.n_vertices())
        throw std::runtime_error("mesh: vertex index out of range in element " +
                                 std::to_string(e));
      used[v] = true;
    }
    if (mesh.signed_area(e) <= 0)
      throw std::runtime_error("mesh: non-CCW element " + std::to_string(e));
  }
  for (size_t v = 0; v < used.size(); ++v)
    if (!used[v])
      throw std::runtime_error("mesh: dangling vertex " + std::to_string(v));
  int n_dirichlet = 0;
  for (const auto& f : mesh.faces) {
    const bool boundary = f.elems[1] < 0;
    if (boundary && f.tag == FaceTag::Interior)
      throw std::runtime_error("mesh: untagged boundary face");
    if (!boundary && f.tag != FaceTag::Interior)
      throw std::runtime_error("mesh: interior face carries a boundary tag");
    if (f.tag == FaceTag::Dirichlet) ++n_dirichlet;
  }
  if (n_dirichlet == 0)
    throw std::runtime_error("mesh: Gamma_0 is empty (needs at least one face)");
}

void write_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_mesh: cannot open " + path);
  char buf[80];
  os << "wsym-mesh v1\n";
  os << "dim 2\n";
  os << "vertices " << mesh.n_vertices() << "\n";
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", v.x(), v.y());
    os << buf;
  }
  os << "triangles " << mesh.n_elements() << "\n";
  for (const auto& t : mesh.triangles)
    os << t[0] << " " << t[1] << " " << t[2] << "\n";
  int nb = 0;
  for (const auto& f : mesh.faces)
    if (f.tag != FaceTag::Interior) ++nb;
  os << "boundary " << nb << "\n";
  for (const auto& f : mesh.faces)
    if (f.tag != FaceTag::Interior)
      os << f.v0 << " " << f.v1 << " " << int(f.tag) << "\n";
}

namespace {

struct LineReader {
  std::istream& is;
  int line_no = 0;
  // next content line with comments stripped; false at EOF
  bool next(std::string& out) {
    std::string raw;
    while (std::getline(is, raw)) {
      ++line_no;
      const auto hash = raw.find('#');
      if (hash != std::string::npos) raw.erase(hash);
      std::size_t a = raw.find_first_not_of(" \t\r");
      if (a == std::string::npos) continue;
      out = raw.substr(a);
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw std::runtime_error("mesh parse error at line " +
                             std::to_string(line_no) + ": " + msg);
  }
};

}  // namespace

Mesh read_mesh(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_mesh: cannot open " + path);
  LineReader lr{is};
  std::string line;
  if (!lr.next(line) || line != "wsym-mesh v1") lr.fail("expected 'wsym-mesh v1'");
  if (!lr.next(line) || line != "dim 2") lr.fail("expected 'dim 2'");

  auto read_count = [&](const char* key) {
    if (!lr.next(line)) lr.fail(std::string("expected '") + key + " N'");
    std::istringstream ss(line);
    std::string word;
    long count = -1;
    ss >> word >> count;
    if (word != key || count < 0) lr.fail(std::string("expected '") + key + " N'");
    return count;
  };

  Mesh mesh;
  const long nv = read_count("vertices");
  for (long i = 0; i < nv; ++i) {
    if (!lr.next(line)) lr.fail("missing vertex line");
    std::istringstream ss(line);
    double x, y;
    if (!(ss >> x >> y)) lr.fail("malformed vertex line");
    mesh.vertices.emplace_back(x, y);
  }
  const long nt = read_count("triangles");
  for (long i = 0; i < nt; ++i) {
    if (!lr.next(line)) lr.fail("missing triangle line");
    std::istringstream ss(line);
    int a, b, c;
    if (!(ss >> a >> b >> c)) lr.fail("malformed triangle line");
    mesh.triangles.push_back({a, b, c});
    if (a < 0 || b < 0 || c < 0 || a >= nv || b >= nv || c >= nv)
      lr.fail("triangle vertex index out of range");
    if (tri_signed_area(mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]) <= 0)
      lr.fail("non-CCW element " + std::to_string(i));
  }
  mesh.alfeld_parent.assign(mesh.triangles.size(), -1);

  std::map<std::pair<int, int>, FaceTag> tags;
  const long nb = read_count("boundary");
  for (long i = 0; i < nb; ++i) {
    if (!lr.next(line)) lr.fail("missing boundary line");
    std::istringstream ss(line);
    int a, b, tag;
    if (!(ss >> a >> b >> tag)) lr.fail("malformed boundary line");
    if (tag != 0 && tag != 1) lr.fail("unknown boundary tag " + std::to_string(tag));
    if (a < 0 || b < 0 || a >= nv || b >= nv) lr.fail("boundary vertex out of range");
    tags[std::minmax(a, b)] = tag == 0 ? FaceTag::Dirichlet : FaceTag::Traction;
  }
  build_connectivity(mesh, &tags);
  // every tag record must refer to an actual boundary edge
  std::set<std::pair<int, int>> present;
  for (const auto& f : mesh.faces)
    if (f.elems[1] < 0) present.insert({f.v0, f.v1});
  for (const auto& [key, tag] : tags) {
    (void)tag;
    if (!present.count(key))
      throw std::runtime_error("mesh parse error: boundary record (" +
                               std::to_string(key.first) + "," +
                               std::to_string(key.second) +
                               ") does not match a boundary edge");
  }
  validate_mesh(mesh);
  return mesh;
}

}  // namespace wsym
