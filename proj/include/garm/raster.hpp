#pragma once

#include "camera.hpp"
#include "image.hpp"
#include "mesh.hpp"

namespace garm {

// One mesh instance submitted to the rasterizer. part_offset shifts the
// mesh's own part ids so several objects can share one segmentation image.
struct SceneObject {
  const TriMesh* mesh = nullptr;
  int part_offset = 0;
  const ChannelImage* texture = nullptr;  // sampled via panel uvs when set
};

struct RasterOptions {
  bool smooth_normals = false;  // interpolate vertex normals instead of flat
  double near_clip = 1e-3;
};

namespace detail {

struct RasterHit {
  double depth = std::numeric_limits<double>::infinity();
  int obj = -1, face = -1;
  double l0 = 0, l1 = 0, l2 = 0;
};

// Sample a panel-space texture. The image is split into halves: columns
// [0, w/2) cover the front panel over [-1,1]^2, columns [w/2, w) the back.
// v = +1 maps to the top row. Bilinear, clamped inside the half.
inline Vec3 sample_panel_texture(const ChannelImage& tex, double u, double v,
                                 double side) {
  double half_w = tex.width / 2.0;
  double px = (u + 1.0) / 2.0 * half_w;
  px = clamp(px, 0.5, half_w - 0.5);
  if (side < 0) px += half_w;
  double py = (1.0 - (v + 1.0) / 2.0) * tex.height;
  py = clamp(py, 0.5, tex.height - 0.5);
  Vec3 rgb;
  for (int c = 0; c < 3; c++) rgb[c] = bilinear_sample(tex, px, py, c);
  return rgb;
}

}  // namespace detail

// Z-buffer rasterization of a list of meshes into the requested channels.
// Faces are treated as two-sided: normals are flipped to face the camera.
// Normal outputs are in the camera frame. Depth interpolation is affine in
// screen space; ties at equal depth keep the earlier face, so output is
// deterministic in the input order.
inline std::vector<ChannelImage> render_channels(
    const CameraRig& cam, const std::vector<SceneObject>& objects,
    const std::vector<ChannelTag>& tags, const RasterOptions& opt = {}) {
  int w = cam.width, h = cam.height;
  std::vector<detail::RasterHit> hits(size_t(w) * h);

  for (int oi = 0; oi < int(objects.size()); oi++) {
    const TriMesh& mesh = *objects[oi].mesh;
    // Project all vertices once; flag the ones behind the near plane.
    std::vector<Vec3> screen(mesh.num_vertices());
    std::vector<uint8_t> ok(mesh.num_vertices());
    for (int i = 0; i < mesh.num_vertices(); i++) {
      Vec3 q = cam.rot * (mesh.vertices[i] - cam.eye);
      ok[i] = q.z() > opt.near_clip;
      if (ok[i])
        screen[i] = Vec3(cam.cx + cam.focal * q.x() / q.z(),
                         cam.cy + cam.focal * q.y() / q.z(), q.z());
    }
    for (int f = 0; f < mesh.num_faces(); f++) {
      const auto& t = mesh.faces[f];
      if (!ok[t[0]] || !ok[t[1]] || !ok[t[2]]) continue;
      const Vec3 &p0 = screen[t[0]], &p1 = screen[t[1]], &p2 = screen[t[2]];
      double area = (p1.x() - p0.x()) * (p2.y() - p0.y()) -
                    (p2.x() - p0.x()) * (p1.y() - p0.y());
      if (std::abs(area) < 1e-12) continue;
      int x_lo = std::max(0, int(std::floor(std::min({p0.x(), p1.x(), p2.x()}) - 0.5)));
      int x_hi = std::min(w - 1, int(std::ceil(std::max({p0.x(), p1.x(), p2.x()}))));
      int y_lo = std::max(0, int(std::floor(std::min({p0.y(), p1.y(), p2.y()}) - 0.5)));
      int y_hi = std::min(h - 1, int(std::ceil(std::max({p0.y(), p1.y(), p2.y()}))));
      for (int y = y_lo; y <= y_hi; y++)
        for (int x = x_lo; x <= x_hi; x++) {
          double px = x + 0.5, py = y + 0.5;
          double e0 = (p1.x() - px) * (p2.y() - py) - (p2.x() - px) * (p1.y() - py);
          double e1 = (p2.x() - px) * (p0.y() - py) - (p0.x() - px) * (p2.y() - py);
          double e2 = (p0.x() - px) * (p1.y() - py) - (p1.x() - px) * (p0.y() - py);
          double l0 = e0 / area, l1 = e1 / area, l2 = e2 / area;
          if (l0 < 0 || l1 < 0 || l2 < 0) continue;
          double d = l0 * p0.z() + l1 * p1.z() + l2 * p2.z();
          detail::RasterHit& hit = hits[size_t(y) * w + x];
          if (d < hit.depth) hit = {d, oi, f, l0, l1, l2};
        }
    }
  }

  // Vertex normals are only needed for smooth shading.
  std::vector<std::vector<Vec3>> vnormals(objects.size());
  if (opt.smooth_normals)
    for (int oi = 0; oi < int(objects.size()); oi++)
      vnormals[oi] = vertex_normals(*objects[oi].mesh);

  std::vector<ChannelImage> out;
  for (ChannelTag tag : tags) out.push_back(make_channel_image(tag, h, w));

  for (int y = 0; y < h; y++)
    for (int x = 0; x < w; x++) {
      const detail::RasterHit& hit = hits[size_t(y) * w + x];
      if (hit.obj < 0) continue;
      const SceneObject& obj = objects[hit.obj];
      const TriMesh& mesh = *obj.mesh;
      const auto& t = mesh.faces[hit.face];
      Vec3 pos = hit.l0 * mesh.vertices[t[0]] + hit.l1 * mesh.vertices[t[1]] +
                 hit.l2 * mesh.vertices[t[2]];
      for (size_t ci = 0; ci < tags.size(); ci++) {
        ChannelImage& img = out[ci];
        switch (tags[ci]) {
          case ChannelTag::normal: {
            Vec3 n;
            if (opt.smooth_normals) {
              n = hit.l0 * vnormals[hit.obj][t[0]] +
                  hit.l1 * vnormals[hit.obj][t[1]] +
                  hit.l2 * vnormals[hit.obj][t[2]];
              double len = n.norm();
              n = len > 0 ? Vec3(n / len) : face_normal(mesh, hit.face);
            } else {
              n = face_normal(mesh, hit.face);
            }
            if (n.dot(cam.eye - pos) < 0) n = -n;
            Vec3 nc = cam.rot * n;
            for (int c = 0; c < 3; c++) img.at(y, x, c) = float(nc[c]);
            break;
          }
          case ChannelTag::depth:
            img.at(y, x) = float(hit.depth);
            break;
          case ChannelTag::segmentation:
            img.at(y, x) = float(obj.part_offset + mesh.part_of(hit.face));
            break;
          case ChannelTag::uvcoord: {
            if (!mesh.has_uvs()) break;
            const auto& u = mesh.face_uvs[hit.face];
            Vec2 uv = hit.l0 * mesh.uvs[u[0]].uv + hit.l1 * mesh.uvs[u[1]].uv +
                      hit.l2 * mesh.uvs[u[2]].uv;
            img.at(y, x, 0) = float(uv.x());
            img.at(y, x, 1) = float(uv.y());
            img.at(y, x, 2) = float(mesh.uvs[u[0]].side);
            break;
          }
          case ChannelTag::mask:
            img.at(y, x) = 1.0f;
            break;
          case ChannelTag::texture: {
            Vec3 rgb(1, 1, 1);
            if (obj.texture && mesh.has_uvs()) {
              const auto& u = mesh.face_uvs[hit.face];
              Vec2 uv = hit.l0 * mesh.uvs[u[0]].uv +
                        hit.l1 * mesh.uvs[u[1]].uv + hit.l2 * mesh.uvs[u[2]].uv;
              rgb = detail::sample_panel_texture(*obj.texture, uv.x(), uv.y(),
                                                 mesh.uvs[u[0]].side);
            } else if (!mesh.colors.empty()) {
              rgb = hit.l0 * mesh.colors[t[0]] + hit.l1 * mesh.colors[t[1]] +
                    hit.l2 * mesh.colors[t[2]];
            }
            for (int c = 0; c < 3; c++) img.at(y, x, c) = float(rgb[c]);
            break;
          }
        }
      }
    }
  return out;
}

inline ChannelImage render_channel(const CameraRig& cam,
                                   const std::vector<SceneObject>& objects,
                                   ChannelTag tag,
                                   const RasterOptions& opt = {}) {
  return std::move(render_channels(cam, objects, {tag}, opt)[0]);
}

// Same rig with the image plane resampled by an integer factor; used for
// higher resolution silhouette comparisons.
inline CameraRig upsample_camera(const CameraRig& cam, int factor) {
  CameraRig out = cam;
  out.width = cam.width * factor;
  out.height = cam.height * factor;
  out.focal = cam.focal * factor;
  out.cx = cam.cx * factor;
  out.cy = cam.cy * factor;
  return out;
}

}  // namespace garm
