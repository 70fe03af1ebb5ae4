#pragma once

#include "body.hpp"
#include "panel.hpp"

namespace garm {

struct RestMeshOptions {
  int grid = 32;             // cells per axis over the pattern domain
  double lift_scale = 0.7;   // meters of cloth per pattern unit
  double clearance = 0.012;  // body clearance margin, meters
};

namespace detail {

// Analytic lift of a pattern point to 3D around the body. The front and
// back panels wrap opposite sides and meet at Z = 0 along seams and
// inseams, so welded boundary vertices receive identical positions.
struct PanelLift {
  PanelLatent lat;
  const BodyModel* body = nullptr;
  RestMeshOptions opt;

  double pattern_length() const {
    return lat.family == PanelFamily::skirt ? lat.z[2] : lat.z[1];
  }

  double world_y(double v) const {
    return body_waist_height(*body) + (v - pattern_length() / 2) * opt.lift_scale;
  }

  // Wrap a width profile W(v) around the torso axis as a half tube.
  Vec3 torso_wrap(const Vec2& uv, double side, double W) const {
    double y = world_y(uv.y());
    double R = std::max(2 * W * opt.lift_scale / pi,
                        body->axis_clearance(y) + opt.clearance);
    double phi = clamp(uv.x() / W, -1.2, 1.2) * pi / 2;
    return Vec3(R * std::sin(phi), y, side * R * std::cos(phi));
  }

  Vec3 skirt_point(const Vec2& uv, double side) const {
    double ww = lat.z[0], wh = lat.z[1], L = lat.z[2];
    double tau = (L / 2 - uv.y()) / L;
    double W = std::max(ww + (wh - ww) * tau, 1e-6);
    return torso_wrap(uv, side, W);
  }

  // Radius rho of two circles at centers +-a whose union keeps a front-half
  // arc length of `target`; bisection on rho*(pi - acos(a/rho)), which is
  // monotone in rho over the bracket used here.
  static double lobe_radius(double a, double target) {
    double lo = std::max(a, target / pi), hi = 2 * target / pi;
    if (lo * (pi - std::acos(clamp(a / lo, 0.0, 1.0))) >= target) return lo;
    for (int it = 0; it < 60; it++) {
      double mid = 0.5 * (lo + hi);
      double len = mid * (pi - std::acos(clamp(a / mid, 0.0, 1.0)));
      (len < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  // Trouser rise: the cross-section morphs from two tangent lobes at the
  // crotch (continuing the leg tubes exactly) to one circle at the waist,
  // holding every row's length at the crotch row's 2*pi*rc. Opening a
  // pinched figure eight at constant length concentrates curvature near the
  // crotch, so this region is not developable; real patterns compensate by
  // curving the rise edge, which this straight-edged family cannot.
  Vec3 trousers_torso_point(const Vec2& uv, double side) const {
    double ww = lat.z[0], L = lat.z[1], cd = lat.z[3];
    double s = opt.lift_scale;
    double yc = L / 2 - cd;
    double y = world_y(uv.y());
    double rc = std::max(ww * s / pi, body_leg_radius(*body) + opt.clearance);
    double mu = smoothstep(clamp((uv.y() - yc) / std::max(cd, 1e-9), 0.0, 1.0));
    double a = rc * (1 - mu);
    double rho = lobe_radius(a, pi * rc);
    double beta = std::acos(clamp(a / rho, 0.0, 1.0));
    double half = rho * (pi - beta);  // one lobe's share of the front row
    double l = clamp((ww - uv.x()) / (2 * ww), 0.0, 1.0) * 2 * half;
    double sign = 1;
    if (l > half) {
      l = 2 * half - l;
      sign = -1;
    }
    double gamma = l / rho;
    return Vec3(sign * (a + rho * std::cos(gamma)), y,
                side * rho * std::sin(gamma));
  }

  // Half tube around one trouser leg. Tubes hang plumb, anchored at the
  // crotch lobe centers so the legs join the rise continuously; the center
  // gives way toward the leg axis only when the radius is too small to
  // contain the leg otherwise.
  Vec3 trousers_leg_point(const Vec2& uv, double side) const {
    double ww = lat.z[0], L = lat.z[1], wl = lat.z[2], c = lat.z[3];
    double s = opt.lift_scale;
    double yh = -L / 2, yc = L / 2 - c;
    double xin = ww - 2 * wl;
    double drop = std::max(0.0, (yc - uv.y()) / (yc - yh));  // 0 crotch, 1 hem
    double y = world_y(uv.y());
    double u_in = xin * drop;  // inseam |x| at this height
    double W_leg = ww - u_in;
    double rc = std::max(ww * s / pi, body_leg_radius(*body) + opt.clearance);
    double r = std::max(W_leg * s / pi, body_leg_radius(*body) + opt.clearance);
    double slack = r - (body_leg_radius_at(*body, y) + opt.clearance);
    double axis = body_leg_axis_x(*body, y);
    double c_abs = clamp(rc, std::max(axis - slack, r), axis + slack);
    if (uv.x() < 0) {
      double tau = clamp((uv.x() + ww) / W_leg, 0.0, 1.0);
      return Vec3(-c_abs - r * std::cos(pi * tau), y,
                  side * r * std::sin(pi * tau));
    }
    double tau = clamp((ww - uv.x()) / W_leg, 0.0, 1.0);
    return Vec3(c_abs + r * std::cos(pi * tau), y,
                side * r * std::sin(pi * tau));
  }

  Vec3 lift(const Vec2& uv, double side) const {
    if (lat.family == PanelFamily::skirt) return skirt_point(uv, side);
    double yc = lat.z[1] / 2 - lat.z[3];
    if (uv.y() > yc) return trousers_torso_point(uv, side);
    return trousers_leg_point(uv, side);
  }
};

}  // namespace detail

// One panel's triangulation in pattern space.
struct PanelGrid {
  std::vector<Vec2> uv;
  std::vector<std::array<int, 3>> faces;
};

// Clip a regular grid over the pattern domain against the contour's s < 0
// region (marching-squares cells, convex polygons fan-triangulated).
// Boundary vertices land on the contour up to the crossing clamp. Grid
// vertices exactly on the contour count as outside: a grid line flush with
// a straight contour segment would otherwise emit degenerate crossings far
// from the true boundary.
inline PanelGrid panel_grid_mesh(const PanelShape& shape, int grid) {
  int n = grid + 1;
  double h = 2.0 / grid;
  std::vector<double> s(size_t(n) * n);
  for (int j = 0; j < n; j++)
    for (int i = 0; i < n; i++)
      s[size_t(j) * n + i] =
          panel_sdf_label(shape, Vec2(-1 + i * h, -1 + j * h)).s;

  PanelGrid out;
  std::map<std::pair<int, int>, int> grid_vert;    // (i,j) -> vertex id
  std::map<std::array<int, 4>, int> cross_vert;    // edge key -> vertex id
  auto grid_point = [&](int i, int j) {
    auto [it, inserted] = grid_vert.insert({{i, j}, int(out.uv.size())});
    if (inserted) out.uv.emplace_back(-1 + i * h, -1 + j * h);
    return it->second;
  };
  auto cross_point = [&](int i0, int j0, int i1, int j1) {
    std::array<int, 4> key{i0, j0, i1, j1};
    if (key > std::array<int, 4>{i1, j1, i0, j0}) {
      key = {i1, j1, i0, j0};
      std::swap(i0, i1);
      std::swap(j0, j1);
    }
    auto [it, inserted] = cross_vert.insert({key, int(out.uv.size())});
    if (inserted) {
      double sa = s[size_t(j0) * n + i0], sb = s[size_t(j1) * n + i1];
      double t = clamp(sa / (sa - sb), 0.05, 0.95);
      Vec2 a(-1 + i0 * h, -1 + j0 * h), b(-1 + i1 * h, -1 + j1 * h);
      out.uv.push_back(a + t * (b - a));
    }
    return it->second;
  };
  auto emit_polygon = [&](const std::vector<int>& poly) {
    for (size_t k = 1; k + 1 < poly.size(); k++)
      out.faces.push_back({poly[0], poly[int(k)], poly[int(k) + 1]});
  };

  for (int j = 0; j < grid; j++)
    for (int i = 0; i < grid; i++) {
      // Corners in CCW order: (i,j),(i+1,j),(i+1,j+1),(i,j+1).
      int ci[4] = {i, i + 1, i + 1, i};
      int cj[4] = {j, j, j + 1, j + 1};
      bool inside[4];
      int count = 0;
      for (int k = 0; k < 4; k++) {
        inside[k] = s[size_t(cj[k]) * n + ci[k]] < 0;
        count += inside[k];
      }
      if (count == 0) continue;
      bool saddle = count == 2 && inside[0] == inside[2];
      if (saddle) {
        double sc = panel_sdf_label(shape, Vec2(-1 + (i + 0.5) * h,
                                                -1 + (j + 0.5) * h)).s;
        if (sc > 0) {
          // Two opposite corner triangles.
          for (int k = 0; k < 4; k++) {
            if (!inside[k]) continue;
            int prev = (k + 3) % 4, next = (k + 1) % 4;
            std::vector<int> tri = {
                grid_point(ci[k], cj[k]),
                cross_point(ci[k], cj[k], ci[next], cj[next]),
                cross_point(ci[k], cj[k], ci[prev], cj[prev])};
            emit_polygon(tri);
          }
          continue;
        }
      }
      std::vector<int> poly;
      for (int k = 0; k < 4; k++) {
        int next = (k + 1) % 4;
        if (inside[k]) poly.push_back(grid_point(ci[k], cj[k]));
        if (inside[k] != inside[next])
          poly.push_back(cross_point(ci[k], cj[k], ci[next], cj[next]));
      }
      emit_polygon(poly);
    }
  return out;
}

// Which stitch labels weld front to back.
inline bool stitch_label_welds(StitchLabel l) {
  return l == StitchLabel::seam_left || l == StitchLabel::seam_right ||
         l == StitchLabel::inseam;
}

// Build the rest-geometry mesh from explicit pattern pieces: triangulate
// the front contour, lift both panels around the body, and weld
// seam/inseam boundary vertices front-to-back by matched arc length (the
// pieces share parameterization, so the matching is positional). Open
// boundary edges keep their contour roles in `stitches`.
inline TriMesh rest_mesh_from_panels(const PanelLatent& lat,
                                     const PanelShape& front,
                                     const PanelShape& back,
                                     const BodyProxy& body,
                                     const RestMeshOptions& opt = {}) {
  for (StitchLabel l :
       {StitchLabel::seam_left, StitchLabel::seam_right, StitchLabel::inseam}) {
    double lf = contour_length(front, l), lb = contour_length(back, l);
    double ref = std::max(lf, lb);
    if (ref > 0 && std::abs(lf - lb) > 0.05 * ref)
      throw std::runtime_error(str_format(
          "stitch error: %s length differs front/back by more than 5%% (%g vs %g)",
          stitch_label_name(l), lf, lb));
  }

  BodyModel model = build_body(body);
  detail::PanelLift lift{lat, &model, opt};
  PanelGrid panel = panel_grid_mesh(front, opt.grid);
  int vp = int(panel.uv.size());

  // Boundary edges of the panel triangulation, labeled by their midpoint.
  std::map<std::pair<int, int>, int> edge_faces;
  for (const auto& t : panel.faces)
    for (int k = 0; k < 3; k++)
      edge_faces[std::minmax(t[k], t[(k + 1) % 3])]++;
  std::vector<uint8_t> weldable(vp, 0);
  std::vector<std::pair<std::pair<int, int>, StitchLabel>> open_edges;
  for (const auto& [e, cnt] : edge_faces) {
    if (cnt != 1) continue;
    Vec2 mid = 0.5 * (panel.uv[e.first] + panel.uv[e.second]);
    StitchLabel label = panel_sdf_label(front, mid).label;
    if (stitch_label_welds(label)) {
      weldable[e.first] = 1;
      weldable[e.second] = 1;
    } else {
      open_edges.push_back({e, label});
    }
  }

  TriMesh mesh;
  mesh.vertices.reserve(2 * vp);
  // Front vertices occupy [0, vp); back vertices reuse welded front ids.
  std::vector<int> back_id(vp);
  std::vector<int> front_rec(vp), back_rec(vp);
  for (int v = 0; v < vp; v++) {
    Vec3 p = lift.lift(panel.uv[v], +1);
    // Welded vertices take the front/back midpoint so seams close exactly.
    if (weldable[v]) p = 0.5 * (p + lift.lift(panel.uv[v], -1));
    mesh.vertices.push_back(p);
    front_rec[v] = int(mesh.uvs.size());
    mesh.uvs.push_back({panel.uv[v], +1.0});
  }
  for (int v = 0; v < vp; v++) {
    back_id[v] = weldable[v] ? v : mesh.num_vertices();
    if (!weldable[v]) mesh.vertices.push_back(lift.lift(panel.uv[v], -1));
    back_rec[v] = int(mesh.uvs.size());
    mesh.uvs.push_back({panel.uv[v], -1.0});
  }
  for (const auto& t : panel.faces) {
    mesh.faces.push_back(t);
    mesh.face_uvs.push_back({front_rec[t[0]], front_rec[t[1]], front_rec[t[2]]});
    mesh.face_part.push_back(0);
  }
  for (const auto& t : panel.faces) {
    // Flip winding so back faces point outward.
    mesh.faces.push_back({back_id[t[0]], back_id[t[2]], back_id[t[1]]});
    mesh.face_uvs.push_back({back_rec[t[0]], back_rec[t[2]], back_rec[t[1]]});
    mesh.face_part.push_back(1);
  }
  for (const auto& [e, label] : open_edges) {
    mesh.stitches[std::minmax(e.first, e.second)] = StitchLabel(label);
    mesh.stitches[std::minmax(back_id[e.first], back_id[e.second])] =
        StitchLabel(label);
  }
  validate_mesh(mesh);
  return mesh;
}

inline TriMesh rest_mesh_from_latent(const PanelLatent& lat,
                                     const BodyProxy& body,
                                     const RestMeshOptions& opt = {}) {
  auto [front, back] = panel_from_latent(lat);
  return rest_mesh_from_panels(lat, front, back, body, opt);
}

// Vertices on boundary edges carrying a given role.
inline std::vector<int> stitch_role_vertices(const TriMesh& mesh, StitchLabel role) {
  std::set<int> ids;
  for (const auto& [e, label] : mesh.stitches)
    if (label == role) {
      ids.insert(e.first);
      ids.insert(e.second);
    }
  return std::vector<int>(ids.begin(), ids.end());
}

// Extract the faces of one part as a standalone mesh (uvs carried along).
inline TriMesh submesh_by_part(const TriMesh& mesh, int part) {
  TriMesh out;
  std::vector<int> vmap(mesh.num_vertices(), -1);
  std::vector<int> umap(mesh.uvs.size(), -1);
  for (int f = 0; f < mesh.num_faces(); f++) {
    if (mesh.part_of(f) != part) continue;
    std::array<int, 3> nt{}, nu{};
    for (int k = 0; k < 3; k++) {
      int v = mesh.faces[f][k];
      if (vmap[v] < 0) {
        vmap[v] = out.num_vertices();
        out.vertices.push_back(mesh.vertices[v]);
        if (!mesh.colors.empty()) out.colors.push_back(mesh.colors[v]);
      }
      nt[k] = vmap[v];
      if (mesh.has_uvs()) {
        int u = mesh.face_uvs[f][k];
        if (umap[u] < 0) {
          umap[u] = int(out.uvs.size());
          out.uvs.push_back(mesh.uvs[u]);
        }
        nu[k] = umap[u];
      }
    }
    out.faces.push_back(nt);
    if (mesh.has_uvs()) out.face_uvs.push_back(nu);
    out.face_part.push_back(part);
  }
  return out;
}

}  // namespace garm
