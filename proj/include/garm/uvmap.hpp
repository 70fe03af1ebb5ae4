#pragma once

#include "asset_io.hpp"
#include "mesh.hpp"

namespace garm {

// Positional map over the pattern domain: a rows x cols grid whose left
// half covers the front panel's [-1,1]^2 and right half the back panel's.
// Each covered cell stores a 3D surface position; uncovered cells hold the
// sentinel (-1,-1,-1) and mask 0. Row 0 corresponds to v = +1 (pattern top).
struct UVMaps {
  int rows = 32, cols = 64;
  std::vector<double> pos;    // rows*cols*3, sentinel -1
  std::vector<uint8_t> mask;  // rows*cols

  double* cell(int r, int c) { return &pos[(size_t(r) * cols + c) * 3]; }
  const double* cell(int r, int c) const { return &pos[(size_t(r) * cols + c) * 3]; }
  uint8_t& at_mask(int r, int c) { return mask[size_t(r) * cols + c]; }
  uint8_t at_mask(int r, int c) const { return mask[size_t(r) * cols + c]; }
  int half() const { return cols / 2; }
  int count_covered() const {
    int n = 0;
    for (uint8_t m : mask) n += m != 0;
    return n;
  }
};

inline UVMaps make_uv_maps(int rows = 32, int cols = 64) {
  UVMaps m;
  m.rows = rows;
  m.cols = cols;
  m.pos.assign(size_t(rows) * cols * 3, -1.0);
  m.mask.assign(size_t(rows) * cols, 0);
  return m;
}

// Pattern coordinates of a cell center. side = +1 for the left half.
inline void uvmap_cell_center(const UVMaps& m, int r, int c, Vec2& uv,
                              double& side) {
  int half = m.half();
  side = c < half ? 1.0 : -1.0;
  int ch = c % half;
  uv.x() = (ch + 0.5) / half * 2.0 - 1.0;
  uv.y() = 1.0 - (r + 0.5) / m.rows * 2.0;
}

// Continuous cell-index coordinates of a pattern point within its half:
// gx in [0, half], gy in [0, rows], cell (r,c) center at (c+0.5, r+0.5).
inline Vec2 uvmap_grid_coords(const UVMaps& m, const Vec2& uv) {
  return Vec2((uv.x() + 1.0) / 2.0 * m.half(), (1.0 - uv.y()) / 2.0 * m.rows);
}

inline void uvmap_cell_of(const UVMaps& m, const Vec2& uv, double side, int& r,
                          int& c) {
  Vec2 g = uvmap_grid_coords(m, uv);
  c = clamp(int(g.x()), 0, m.half() - 1);
  r = clamp(int(g.y()), 0, m.rows - 1);
  if (side < 0) c += m.half();
}

// Invariant check: mask=0 iff the cell is the sentinel; covered entries finite.
inline void validate_uv_maps(const UVMaps& m) {
  if (int(m.mask.size()) != m.rows * m.cols || m.pos.size() != m.mask.size() * 3)
    throw std::invalid_argument("uv map buffers inconsistent with dimensions");
  for (int r = 0; r < m.rows; r++)
    for (int c = 0; c < m.cols; c++) {
      const double* p = m.cell(r, c);
      bool sentinel = p[0] == -1.0 && p[1] == -1.0 && p[2] == -1.0;
      if (m.at_mask(r, c)) {
        for (int k = 0; k < 3; k++)
          if (!std::isfinite(p[k]))
            throw std::invalid_argument(
                str_format("uv map cell (%d,%d) covered but not finite", r, c));
      } else if (!sentinel) {
        throw std::invalid_argument(
            str_format("uv map cell (%d,%d) uncovered but not sentinel", r, c));
      }
    }
}

// Rasterize the mesh's panel triangles into the grid: a cell whose center
// lies in some triangle stores the barycentric 3D position from that face.
inline UVMaps build_uv_maps(const TriMesh& mesh, int rows = 32, int cols = 64) {
  if (!mesh.has_uvs())
    throw std::invalid_argument("build_uv_maps: mesh has no panel UVs");
  UVMaps out = make_uv_maps(rows, cols);
  int half = out.half();
  for (int f = 0; f < mesh.num_faces(); f++) {
    const auto& t = mesh.faces[f];
    const auto& u = mesh.face_uvs[f];
    double side = mesh.uvs[u[0]].side;
    Vec2 g0 = uvmap_grid_coords(out, mesh.uvs[u[0]].uv);
    Vec2 g1 = uvmap_grid_coords(out, mesh.uvs[u[1]].uv);
    Vec2 g2 = uvmap_grid_coords(out, mesh.uvs[u[2]].uv);
    double area = (g1.x() - g0.x()) * (g2.y() - g0.y()) -
                  (g2.x() - g0.x()) * (g1.y() - g0.y());
    if (std::abs(area) < 1e-12) continue;
    int c_lo = std::max(0, int(std::floor(std::min({g0.x(), g1.x(), g2.x()}) - 0.5)));
    int c_hi = std::min(half - 1, int(std::ceil(std::max({g0.x(), g1.x(), g2.x()}))));
    int r_lo = std::max(0, int(std::floor(std::min({g0.y(), g1.y(), g2.y()}) - 0.5)));
    int r_hi = std::min(rows - 1, int(std::ceil(std::max({g0.y(), g1.y(), g2.y()}))));
    for (int r = r_lo; r <= r_hi; r++)
      for (int c = c_lo; c <= c_hi; c++) {
        double px = c + 0.5, py = r + 0.5;
        double e0 = (g1.x() - px) * (g2.y() - py) - (g2.x() - px) * (g1.y() - py);
        double e1 = (g2.x() - px) * (g0.y() - py) - (g0.x() - px) * (g2.y() - py);
        double e2 = (g0.x() - px) * (g1.y() - py) - (g1.x() - px) * (g0.y() - py);
        double l0 = e0 / area, l1 = e1 / area, l2 = e2 / area;
        if (l0 < 0 || l1 < 0 || l2 < 0) continue;
        Vec3 p = l0 * mesh.vertices[t[0]] + l1 * mesh.vertices[t[1]] +
                 l2 * mesh.vertices[t[2]];
        int cc = side > 0 ? c : c + half;
        double* cell = out.cell(r, cc);
        for (int k = 0; k < 3; k++) cell[k] = p[k];
        out.at_mask(r, cc) = 1;
      }
  }
  return out;
}

namespace detail {

// Bilinear sample of the positional map at pattern point (uv, side). If the
// 4-cell stencil is not fully covered, falls back to the nearest covered
// cell in that half. Returns false if the half has no coverage at all.
inline bool sample_uv_map(const UVMaps& m, const Vec2& uv, double side, Vec3& out) {
  int half = m.half();
  int c_off = side > 0 ? 0 : half;
  Vec2 g = uvmap_grid_coords(m, uv);
  double fx = clamp(g.x() - 0.5, 0.0, double(half - 1));
  double fy = clamp(g.y() - 0.5, 0.0, double(m.rows - 1));
  int c0 = std::min(int(fx), half - 2 >= 0 ? half - 2 : 0);
  int r0 = std::min(int(fy), m.rows - 2 >= 0 ? m.rows - 2 : 0);
  double ax = fx - c0, ay = fy - r0;
  bool covered = true;
  for (int dr = 0; dr < 2 && covered; dr++)
    for (int dc = 0; dc < 2; dc++)
      if (!m.at_mask(r0 + dr, c_off + c0 + dc)) {
        covered = false;
        break;
      }
  if (covered) {
    out = Vec3::Zero();
    double w[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
    const double* p00 = m.cell(r0, c_off + c0);
    const double* p01 = m.cell(r0, c_off + c0 + 1);
    const double* p10 = m.cell(r0 + 1, c_off + c0);
    const double* p11 = m.cell(r0 + 1, c_off + c0 + 1);
    for (int k = 0; k < 3; k++)
      out[k] = w[0] * p00[k] + w[1] * p01[k] + w[2] * p10[k] + w[3] * p11[k];
    return true;
  }
  // Nearest covered cell by center distance; lowest (r,c) wins ties.
  double best = std::numeric_limits<double>::infinity();
  int br = -1, bc = -1;
  for (int r = 0; r < m.rows; r++)
    for (int c = 0; c < half; c++) {
      if (!m.at_mask(r, c_off + c)) continue;
      double d = sqr(g.x() - (c + 0.5)) + sqr(g.y() - (r + 0.5));
      if (d < best) {
        best = d;
        br = r;
        bc = c;
      }
    }
  if (br < 0) return false;
  const double* p = m.cell(br, c_off + bc);
  out = Vec3(p[0], p[1], p[2]);
  return true;
}

}  // namespace detail

// Move rest-mesh vertices onto the surface described by the map: each
// vertex takes the sampled position at its pattern coordinates, averaged
// over its uv records when a welded vertex carries several. Connectivity
// is unchanged.
inline TriMesh apply_uv_map(const TriMesh& rest, const UVMaps& maps) {
  if (!rest.has_uvs())
    throw std::invalid_argument("apply_uv_map: mesh has no panel UVs");
  if (maps.count_covered() == 0)
    throw std::invalid_argument("apply_uv_map: positional map has no coverage");
  TriMesh out = rest;
  auto records = vertex_uv_records(rest);
  for (int v = 0; v < rest.num_vertices(); v++) {
    if (records[v].empty()) continue;
    Vec3 acc = Vec3::Zero();
    int n = 0;
    for (int rec : records[v]) {
      Vec3 p;
      if (detail::sample_uv_map(maps, rest.uvs[rec].uv, rest.uvs[rec].side, p)) {
        acc += p;
        n++;
      }
    }
    if (n == 0)
      throw std::invalid_argument(
          str_format("apply_uv_map: vertex %d has no covered panel half", v));
    out.vertices[v] = acc / n;
  }
  return out;
}

// PFM persistence: positions as a 3-channel map, mask as 1-channel.
inline void write_uv_maps(const std::string& pos_path,
                          const std::string& mask_path, const UVMaps& m) {
  ChannelImage pos = make_channel_image(ChannelTag::uvcoord, m.rows, m.cols);
  ChannelImage mask = make_channel_image(ChannelTag::mask, m.rows, m.cols);
  for (int r = 0; r < m.rows; r++)
    for (int c = 0; c < m.cols; c++) {
      for (int k = 0; k < 3; k++) pos.at(r, c, k) = float(m.cell(r, c)[k]);
      mask.at(r, c) = float(m.at_mask(r, c));
    }
  write_pfm(pos_path, pos);
  write_pfm(mask_path, mask);
}

inline UVMaps read_uv_maps(const std::string& pos_path,
                           const std::string& mask_path) {
  ChannelImage pos = read_pfm(pos_path, ChannelTag::uvcoord);
  ChannelImage mask = read_pfm(mask_path, ChannelTag::mask);
  if (pos.height != mask.height || pos.width != mask.width)
    throw std::runtime_error("uv map and mask dimensions differ");
  UVMaps m = make_uv_maps(pos.height, pos.width);
  for (int r = 0; r < m.rows; r++)
    for (int c = 0; c < m.cols; c++) {
      if (mask.at(r, c) > 0.5f) {
        m.at_mask(r, c) = 1;
        for (int k = 0; k < 3; k++) m.cell(r, c)[k] = pos.at(r, c, k);
      }
    }
  validate_uv_maps(m);
  return m;
}

}  // namespace garm
