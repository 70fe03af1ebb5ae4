#pragma once

#include "core.hpp"

namespace garm {

// Pinhole camera. World-to-camera is x_cam = rot * (p - eye); the camera
// looks along its +z axis, image x runs right, image y runs down. Depth is
// the distance along the optical axis, not the ray length.
struct CameraRig {
  double focal = 96.0;
  double cx = 32.0, cy = 32.0;
  int width = 64, height = 64;
  Mat3 rot = Mat3::Identity();
  Vec3 eye = Vec3::Zero();
  Vec3 scene_center = Vec3::Zero();  // mirror axis passes through this point
};

// Project a world point to (pixel x, pixel y, depth).
inline Vec3 project(const CameraRig& cam, const Vec3& p) {
  Vec3 q = cam.rot * (p - cam.eye);
  if (!(q.z() > 0))
    throw std::domain_error(
        str_format("project: point at depth %g is not in front of camera", q.z()));
  return Vec3(cam.cx + cam.focal * q.x() / q.z(),
              cam.cy + cam.focal * q.y() / q.z(), q.z());
}

// Invert project: recover the world point from pixel coords and depth.
inline Vec3 backproject(const CameraRig& cam, double x, double y, double depth) {
  if (!(depth > 0))
    throw std::domain_error(str_format("backproject: depth %g must be > 0", depth));
  Vec3 q((x - cam.cx) / cam.focal * depth, (y - cam.cy) / cam.focal * depth, depth);
  return cam.eye + cam.rot.transpose() * q;
}

// Rotate a world direction into camera coordinates (no translation).
inline Vec3 to_camera_dir(const CameraRig& cam, const Vec3& d) {
  return cam.rot * d;
}

// Camera placed at eye looking toward center, world up (0,1,0) mapping to
// image up (so y_cam points down in world).
inline CameraRig make_lookat_camera(const Vec3& eye, const Vec3& center,
                                    double focal, int width, int height) {
  Vec3 fwd = (center - eye).normalized();
  Vec3 up(0, 1, 0);
  Vec3 right = fwd.cross(up);
  double len = right.norm();
  if (len < 1e-12)
    throw std::invalid_argument("make_lookat_camera: view direction is vertical");
  right /= len;
  Vec3 down = fwd.cross(right);
  CameraRig cam;
  cam.focal = focal;
  cam.width = width;
  cam.height = height;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.rot.row(0) = right;
  cam.rot.row(1) = down;
  cam.rot.row(2) = fwd;
  cam.eye = eye;
  cam.scene_center = center;
  return cam;
}

// Reflect the rig about the vertical axis through scene_center. The result
// views the scene from the opposite side and the operation is self-inverse:
// mirroring twice returns the original rig exactly.
inline CameraRig mirror_camera(const CameraRig& cam) {
  Mat3 S = Vec3(-1, 1, -1).asDiagonal();
  CameraRig out = cam;
  out.eye = cam.scene_center + S * (cam.eye - cam.scene_center);
  out.rot = cam.rot * S;
  return out;
}

}  // namespace garm
