#pragma once

#include <array>
#include <map>
#include <set>
#include <utility>

#include "core.hpp"

namespace garm {

// Boundary edge roles on a sewing pattern contour.
enum class StitchLabel { seam_left, seam_right, waist_free, hem_free, inseam };

inline const char* stitch_label_name(StitchLabel l) {
  switch (l) {
    case StitchLabel::seam_left: return "seam_left";
    case StitchLabel::seam_right: return "seam_right";
    case StitchLabel::waist_free: return "waist_free";
    case StitchLabel::hem_free: return "hem_free";
    case StitchLabel::inseam: return "inseam";
  }
  return "unknown";
}

inline StitchLabel stitch_label_from_name(const std::string& s) {
  if (s == "seam_left") return StitchLabel::seam_left;
  if (s == "seam_right") return StitchLabel::seam_right;
  if (s == "waist_free") return StitchLabel::waist_free;
  if (s == "hem_free") return StitchLabel::hem_free;
  if (s == "inseam") return StitchLabel::inseam;
  throw std::invalid_argument("unknown stitch label: " + s);
}

// One texture-coordinate record: 2D pattern position plus the side flag
// (+1 front panel, -1 back panel).
struct UvRecord {
  Vec2 uv = Vec2::Zero();
  double side = 1.0;
};

// Indexed triangle mesh with wedge texture coordinates. A vertex welded
// across a seam owns one position but may be referenced with different uv
// records by the faces on each side, so uvs live in a table addressed per
// face corner rather than per vertex.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<UvRecord> uvs;                    // empty when untextured
  std::vector<std::array<int, 3>> face_uvs;     // parallel to faces when uvs set
  std::vector<int> face_part;                   // per-face part id, empty means 0
  std::map<std::pair<int, int>, StitchLabel> stitches;  // key: sorted vertex pair
  std::vector<Vec3> colors;                     // optional per-vertex rgb in [0,1]

  int num_vertices() const { return int(vertices.size()); }
  int num_faces() const { return int(faces.size()); }
  bool has_uvs() const { return !uvs.empty(); }

  int part_of(int f) const { return face_part.empty() ? 0 : face_part[f]; }
};

inline Vec3 face_normal(const TriMesh& m, int f) {
  const auto& t = m.faces[f];
  Vec3 n = (m.vertices[t[1]] - m.vertices[t[0]])
               .cross(m.vertices[t[2]] - m.vertices[t[0]]);
  double len = n.norm();
  return len > 0 ? Vec3(n / len) : Vec3(0, 0, 0);
}

inline double face_area(const TriMesh& m, int f) {
  const auto& t = m.faces[f];
  return 0.5 * (m.vertices[t[1]] - m.vertices[t[0]])
                   .cross(m.vertices[t[2]] - m.vertices[t[0]])
                   .norm();
}

inline double total_area(const TriMesh& m) {
  double a = 0;
  for (int f = 0; f < m.num_faces(); f++) a += face_area(m, f);
  return a;
}

// Area-weighted vertex normals.
inline std::vector<Vec3> vertex_normals(const TriMesh& m) {
  std::vector<Vec3> normals(m.vertices.size(), Vec3::Zero());
  for (int f = 0; f < m.num_faces(); f++) {
    const auto& t = m.faces[f];
    Vec3 n = (m.vertices[t[1]] - m.vertices[t[0]])
                 .cross(m.vertices[t[2]] - m.vertices[t[0]]);
    for (int k = 0; k < 3; k++) normals[t[k]] += n;
  }
  for (auto& n : normals) {
    double len = n.norm();
    if (len > 0) n /= len;
  }
  return normals;
}

// Lumped vertex mass: one third of the incident face areas times density.
inline std::vector<double> vertex_masses(const TriMesh& m, double density) {
  std::vector<double> mass(m.vertices.size(), 0.0);
  for (int f = 0; f < m.num_faces(); f++) {
    double a = face_area(m, f) / 3.0;
    for (int k = 0; k < 3; k++) mass[m.faces[f][k]] += a * density;
  }
  return mass;
}

struct EdgeInfo {
  int v0, v1;          // sorted endpoints
  int f0 = -1, f1 = -1;  // incident faces, f1 = -1 on boundary
  int opp0 = -1, opp1 = -1;  // opposite vertices in f0 / f1
};

// Unique edges with incident faces and opposite corners.
inline std::vector<EdgeInfo> mesh_edges(const TriMesh& m) {
  std::map<std::pair<int, int>, int> index;
  std::vector<EdgeInfo> edges;
  for (int f = 0; f < m.num_faces(); f++) {
    const auto& t = m.faces[f];
    for (int k = 0; k < 3; k++) {
      int a = t[k], b = t[(k + 1) % 3], c = t[(k + 2) % 3];
      auto key = std::minmax(a, b);
      auto it = index.find(key);
      if (it == index.end()) {
        index[key] = int(edges.size());
        edges.push_back({key.first, key.second, f, -1, c, -1});
      } else {
        EdgeInfo& e = edges[it->second];
        if (e.f1 != -1)
          throw std::invalid_argument(str_format(
              "mesh is not edge-manifold: edge %d-%d has >2 faces", a, b));
        e.f1 = f;
        e.opp1 = c;
      }
    }
  }
  return edges;
}

inline std::vector<EdgeInfo> boundary_edges(const TriMesh& m) {
  std::vector<EdgeInfo> out;
  for (const auto& e : mesh_edges(m))
    if (e.f1 == -1) out.push_back(e);
  return out;
}

inline std::set<int> boundary_vertices(const TriMesh& m) {
  std::set<int> out;
  for (const auto& e : boundary_edges(m)) {
    out.insert(e.v0);
    out.insert(e.v1);
  }
  return out;
}

// Uv record ids referenced by each vertex, deduplicated, in face order.
inline std::vector<std::vector<int>> vertex_uv_records(const TriMesh& m) {
  std::vector<std::vector<int>> recs(m.vertices.size());
  if (!m.has_uvs()) return recs;
  for (int f = 0; f < m.num_faces(); f++) {
    for (int k = 0; k < 3; k++) {
      int v = m.faces[f][k], u = m.face_uvs[f][k];
      auto& lst = recs[v];
      if (std::find(lst.begin(), lst.end(), u) == lst.end()) lst.push_back(u);
    }
  }
  return recs;
}

// Structural consistency checks; throws std::invalid_argument on violation.
inline void validate_mesh(const TriMesh& m) {
  int nv = m.num_vertices();
  for (const auto& v : m.vertices)
    if (!finite(v)) throw std::invalid_argument("mesh has non-finite vertex");
  for (const auto& t : m.faces)
    for (int k = 0; k < 3; k++)
      if (t[k] < 0 || t[k] >= nv)
        throw std::invalid_argument("face index out of range");
  if (m.has_uvs()) {
    if (m.face_uvs.size() != m.faces.size())
      throw std::invalid_argument("face_uvs size mismatch");
    int nu = int(m.uvs.size());
    for (const auto& t : m.face_uvs)
      for (int k = 0; k < 3; k++)
        if (t[k] < 0 || t[k] >= nu)
          throw std::invalid_argument("uv index out of range");
    for (const auto& r : m.uvs)
      if (r.side != 1.0 && r.side != -1.0)
        throw std::invalid_argument("uv side flag must be +1 or -1");
  }
  if (!m.face_part.empty() && m.face_part.size() != m.faces.size())
    throw std::invalid_argument("face_part size mismatch");
  if (!m.colors.empty() && m.colors.size() != m.vertices.size())
    throw std::invalid_argument("colors size mismatch");
  for (const auto& [key, label] : m.stitches) {
    (void)label;
    if (key.first < 0 || key.second >= nv || key.first >= key.second)
      throw std::invalid_argument("stitch edge index out of range");
  }
}

// Axis-aligned bounding box diagonal length.
inline double bbox_diagonal(const TriMesh& m) {
  if (m.vertices.empty()) return 0;
  Vec3 lo = m.vertices[0], hi = m.vertices[0];
  for (const auto& v : m.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).norm();
}

inline Vec3 mesh_centroid(const TriMesh& m) {
  Vec3 c = Vec3::Zero();
  for (const auto& v : m.vertices) c += v;
  return m.vertices.empty() ? c : Vec3(c / double(m.vertices.size()));
}

}  // namespace garm
