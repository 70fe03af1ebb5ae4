#pragma once

#include "mesh.hpp"

namespace garm {

// Articulated capsule body. Shape β = [global scale, torso radius mult,
// arm radius mult, leg radius mult]; pose θ = 13 joint angles in radians:
// [spine_x, l_hip_x, l_hip_z, l_knee, r_hip_x, r_hip_z, r_knee,
//  l_sho_x, l_sho_z, l_elbow, r_sho_x, r_sho_z, r_elbow].
// yaw turns the whole body about the vertical axis through the pelvis.
struct BodyProxy {
  VecX beta;
  VecX theta;
  double yaw = 0;

  BodyProxy();
};

inline int body_num_pose_dofs() { return 13; }
inline int body_num_shape_dofs() { return 4; }

inline VecX body_default_beta() {
  VecX b(4);
  b << 1.0, 1.0, 1.0, 1.0;
  return b;
}

// A-pose with vertical legs: arms lowered, legs straight down. Vertical legs
// let trouser tubes hang plumb, which is what their straight pattern edges
// develop to.
inline VecX body_canonical_pose() {
  VecX t = VecX::Zero(13);
  t[8] = 0.873;  // l_sho_z
  t[11] = -0.873;  // r_sho_z
  return t;
}

inline BodyProxy::BodyProxy() : beta(body_default_beta()), theta(body_canonical_pose()) {}

inline void body_pose_bounds(VecX& lo, VecX& hi) {
  VecX c = body_canonical_pose();
  lo = VecX(13);
  hi = VecX(13);
  // Per-dof excursions around the canonical pose.
  double range[13] = {0.25, 0.45, 0.20, 0.0, 0.45, 0.20, 0.0,
                      0.40, 0.30, 0.0,  0.40, 0.30, 0.0};
  for (int i = 0; i < 13; i++) {
    lo[i] = c[i] - range[i];
    hi[i] = c[i] + range[i];
  }
  // One-sided hinges: knees and elbows.
  lo[3] = 0.0;  hi[3] = 0.9;   // l_knee
  lo[6] = 0.0;  hi[6] = 0.9;   // r_knee
  lo[9] = -0.2; hi[9] = 1.0;   // l_elbow
  lo[12] = -1.0; hi[12] = 0.2; // r_elbow
}

namespace detail {

inline Mat3 rot_x(double a) {
  Mat3 m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}
inline Mat3 rot_y(double a) {
  Mat3 m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}
inline Mat3 rot_z(double a) {
  Mat3 m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

struct JointDef {
  const char* name;
  int parent;
  Vec3 offset;     // in parent frame, canonical scale
  int dof_x, dof_z;  // indices into θ, -1 if absent
};

// radius_class: 0 torso/head, 1 arm, 2 leg.
struct CapsuleDef {
  const char* name;
  int joint;
  Vec3 a, b;  // segment in joint frame, canonical scale
  double radius;
  int radius_class;
};

inline const std::vector<JointDef>& joint_defs() {
  static const std::vector<JointDef> defs = {
      {"pelvis", -1, {0, 0.95, 0}, -1, -1},
      {"spine", 0, {0, 0.15, 0}, 0, -1},
      {"neck", 1, {0, 0.45, 0}, -1, -1},
      {"l_hip", 0, {-0.09, -0.02, 0}, 1, 2},
      {"l_knee", 3, {0, -0.42, 0}, 3, -1},
      {"l_ankle", 4, {0, -0.40, 0}, -1, -1},
      {"r_hip", 0, {0.09, -0.02, 0}, 4, 5},
      {"r_knee", 6, {0, -0.42, 0}, 6, -1},
      {"r_ankle", 7, {0, -0.40, 0}, -1, -1},
      {"l_shoulder", 1, {-0.18, 0.40, 0}, 7, 8},
      {"l_elbow", 9, {-0.26, 0, 0}, -1, 9},
      {"l_wrist", 10, {-0.24, 0, 0}, -1, -1},
      {"r_shoulder", 1, {0.18, 0.40, 0}, 10, 11},
      {"r_elbow", 12, {0.26, 0, 0}, -1, 12},
      {"r_wrist", 13, {0.24, 0, 0}, -1, -1},
  };
  return defs;
}

inline const std::vector<CapsuleDef>& capsule_defs() {
  static const std::vector<CapsuleDef> defs = {
      {"hips", 0, {-0.07, 0.02, 0}, {0.07, 0.02, 0}, 0.105, 0},
      {"torso", 1, {0, 0, 0}, {0, 0.42, 0}, 0.11, 0},
      {"head", 2, {0, 0.03, 0}, {0, 0.16, 0}, 0.085, 0},
      {"l_thigh", 3, {0, 0, 0}, {0, -0.42, 0}, 0.07, 2},
      {"l_shin", 4, {0, 0, 0}, {0, -0.40, 0}, 0.05, 2},
      {"r_thigh", 6, {0, 0, 0}, {0, -0.42, 0}, 0.07, 2},
      {"r_shin", 7, {0, 0, 0}, {0, -0.40, 0}, 0.05, 2},
      {"l_upper_arm", 9, {0, 0, 0}, {-0.26, 0, 0}, 0.042, 1},
      {"l_forearm", 10, {0, 0, 0}, {-0.24, 0, 0}, 0.035, 1},
      {"r_upper_arm", 12, {0, 0, 0}, {0.26, 0, 0}, 0.042, 1},
      {"r_forearm", 13, {0, 0, 0}, {0.24, 0, 0}, 0.035, 1},
  };
  return defs;
}

}  // namespace detail

inline int body_num_parts() { return int(detail::capsule_defs().size()); }

inline void validate_body_params(const VecX& beta, const VecX& theta) {
  if (beta.size() != 4)
    throw std::invalid_argument("body shape must have 4 coefficients");
  for (int i = 0; i < 4; i++)
    if (!(beta[i] > 0) || !std::isfinite(beta[i]))
      throw std::invalid_argument(
          str_format("body shape coefficient %d must be positive", i));
  if (theta.size() != body_num_pose_dofs())
    throw std::invalid_argument("body pose must have 13 angles");
  for (int i = 0; i < theta.size(); i++)
    if (!std::isfinite(theta[i]))
      throw std::invalid_argument("body pose has non-finite angle");
}

// Posed capsules, joints, and the union signed distance field.
struct BodyModel {
  std::vector<Vec3> cap_a, cap_b;
  std::vector<double> cap_r;
  std::vector<int> cap_class;  // 0 torso/head, 1 arm, 2 leg
  std::vector<Vec3> joints;
  double scale = 1;
  double min_radius = 0;

  // Signed distance to the capsule union; nearest capsule id in *part,
  // outward gradient in *grad when requested.
  double sdf(const Vec3& p, int* part = nullptr, Vec3* grad = nullptr) const {
    double best = std::numeric_limits<double>::infinity();
    int best_k = -1;
    Vec3 best_dir(0, 1, 0);
    for (int k = 0; k < int(cap_a.size()); k++) {
      Vec3 ab = cap_b[k] - cap_a[k];
      double len2 = ab.squaredNorm();
      double t = len2 > 1e-18 ? clamp((p - cap_a[k]).dot(ab) / len2, 0.0, 1.0) : 0.0;
      Vec3 closest = cap_a[k] + t * ab;
      Vec3 d = p - closest;
      double dist = d.norm();
      double s = dist - cap_r[k];
      if (s < best) {
        best = s;
        best_k = k;
        best_dir = dist > 1e-12 ? Vec3(d / dist) : Vec3(0, 1, 0);
      }
    }
    if (part) *part = best_k;
    if (grad) *grad = best_dir;
    return best;
  }

  // Max horizontal reach (distance from the vertical pelvis axis plus
  // capsule radius) of capsules near height y; 0 if none nearby. Arms are
  // skipped: this bounds the wrap radius of waist-anchored garments, which
  // clear the trunk and legs but not hanging hands.
  double axis_clearance(double y, double band = 0.1) const {
    double reach = 0;
    for (int k = 0; k < int(cap_a.size()); k++) {
      if (k < int(cap_class.size()) && cap_class[k] == 1) continue;
      for (int i = 0; i <= 8; i++) {
        Vec3 p = cap_a[k] + (i / 8.0) * (cap_b[k] - cap_a[k]);
        if (std::abs(p.y() - y) < band + cap_r[k])
          reach = std::max(reach, std::hypot(p.x(), p.z()) + cap_r[k]);
      }
    }
    return reach;
  }
};

// Forward kinematics over the joint tree.
inline BodyModel build_body(const BodyProxy& body) {
  validate_body_params(body.beta, body.theta);
  const auto& joints = detail::joint_defs();
  const auto& caps = detail::capsule_defs();
  double s = body.beta[0];
  double radius_mult[3] = {body.beta[1], body.beta[2], body.beta[3]};

  std::vector<Mat3> R(joints.size());
  std::vector<Vec3> pos(joints.size());
  for (size_t j = 0; j < joints.size(); j++) {
    const auto& def = joints[j];
    Mat3 local = Mat3::Identity();
    if (def.dof_x >= 0) local = detail::rot_x(body.theta[def.dof_x]) * local;
    if (def.dof_z >= 0) local = local * detail::rot_z(body.theta[def.dof_z]);
    if (def.parent < 0) {
      pos[j] = def.offset * s;
      R[j] = detail::rot_y(body.yaw) * local;
    } else {
      pos[j] = pos[def.parent] + R[def.parent] * (def.offset * s);
      R[j] = R[def.parent] * local;
    }
  }

  BodyModel model;
  model.scale = s;
  model.joints = pos;
  model.min_radius = std::numeric_limits<double>::infinity();
  for (const auto& c : caps) {
    double r = c.radius * s * radius_mult[c.radius_class];
    model.cap_a.push_back(pos[c.joint] + R[c.joint] * (c.a * s));
    model.cap_b.push_back(pos[c.joint] + R[c.joint] * (c.b * s));
    model.cap_r.push_back(r);
    model.cap_class.push_back(c.radius_class);
    model.min_radius = std::min(model.min_radius, r);
  }
  return model;
}

// Capsule tessellation: a ring-and-cap tube per capsule, part id = capsule.
inline TriMesh body_mesh(const BodyModel& model, int rings = 8, int segs = 10) {
  TriMesh mesh;
  for (int k = 0; k < int(model.cap_a.size()); k++) {
    Vec3 a = model.cap_a[k], b = model.cap_b[k];
    double r = model.cap_r[k];
    Vec3 axis = b - a;
    double len = axis.norm();
    Vec3 z = len > 1e-12 ? Vec3(axis / len) : Vec3(0, 1, 0);
    Vec3 x = std::abs(z.y()) < 0.9 ? Vec3(0, 1, 0).cross(z).normalized()
                                   : Vec3(1, 0, 0).cross(z).normalized();
    Vec3 y = z.cross(x);
    int base = mesh.num_vertices();
    // Rows sweep from the bottom pole over cap, cylinder, cap to top pole.
    std::vector<std::pair<double, double>> profile;  // (axial offset, ring radius)
    int cap_rows = rings / 2 + 1;
    for (int i = 0; i <= cap_rows; i++) {
      double ang = pi / 2 * i / cap_rows;
      profile.push_back({-r * std::cos(ang), r * std::sin(ang)});
    }
    for (int i = cap_rows; i >= 0; i--) {
      double ang = pi / 2 * i / cap_rows;
      profile.push_back({len + r * std::cos(ang), r * std::sin(ang)});
    }
    int rows = int(profile.size());
    for (int i = 0; i < rows; i++)
      for (int j = 0; j < segs; j++) {
        double ang = 2 * pi * j / segs;
        Vec3 p = a + profile[i].first * z +
                 profile[i].second * (std::cos(ang) * x + std::sin(ang) * y);
        mesh.vertices.push_back(p);
      }
    for (int i = 0; i + 1 < rows; i++)
      for (int j = 0; j < segs; j++) {
        int j1 = (j + 1) % segs;
        int v00 = base + i * segs + j, v01 = base + i * segs + j1;
        int v10 = base + (i + 1) * segs + j, v11 = base + (i + 1) * segs + j1;
        mesh.faces.push_back({v00, v01, v11});
        mesh.face_part.push_back(k);
        mesh.faces.push_back({v00, v11, v10});
        mesh.face_part.push_back(k);
      }
  }
  // Degenerate pole rings produce zero-area faces; drop them.
  std::vector<std::array<int, 3>> faces;
  std::vector<int> parts;
  for (int f = 0; f < mesh.num_faces(); f++)
    if (face_area(mesh, f) > 1e-14) {
      faces.push_back(mesh.faces[f]);
      parts.push_back(mesh.face_part[f]);
    }
  mesh.faces = std::move(faces);
  mesh.face_part = std::move(parts);
  validate_mesh(mesh);
  return mesh;
}

// Height of the garment waist line on this body.
inline double body_waist_height(const BodyModel& model) {
  return model.joints[0].y() + 0.06 * model.scale;
}

// Largest leg capsule radius, for garment clearance around a leg.
inline double body_leg_radius(const BodyModel& model) {
  // Thigh capsules are entries 3 and 5.
  return std::max(model.cap_r[3], model.cap_r[5]);
}

// Largest leg-capsule radius near height y (thigh above the knee, shin
// below); 0 outside the legs' span.
inline double body_leg_radius_at(const BodyModel& model, double y) {
  double r = 0;
  for (int k = 0; k < int(model.cap_a.size()); k++) {
    if (model.cap_class[k] != 2) continue;
    double y0 = std::min(model.cap_a[k].y(), model.cap_b[k].y());
    double y1 = std::max(model.cap_a[k].y(), model.cap_b[k].y());
    if (y >= y0 - 0.02 && y <= y1 + 0.02) r = std::max(r, model.cap_r[k]);
  }
  return r;
}

// Mean horizontal offset |x| of the leg axes at height y, following the
// thigh-shin polyline; a trouser leg tube centered here clears the leg on
// both sides with the least radius. Clamps to the nearest endpoint outside
// the leg's span.
inline double body_leg_axis_x(const BodyModel& model, double y) {
  auto leg_x = [&](int thigh, int shin) {
    const Vec3 pts[3] = {model.cap_a[thigh], model.cap_b[thigh],
                         model.cap_b[shin]};
    if (y >= pts[0].y()) return std::abs(pts[0].x());
    for (int i = 0; i < 2; i++) {
      double y0 = pts[i].y(), y1 = pts[i + 1].y();
      if (y >= y1) {
        double t = (y0 - y) / std::max(y0 - y1, 1e-12);
        return std::abs(pts[i].x() + t * (pts[i + 1].x() - pts[i].x()));
      }
    }
    return std::abs(pts[2].x());
  };
  // Thigh capsules are 3 and 5, shins 4 and 6.
  return 0.5 * (leg_x(3, 4) + leg_x(5, 6));
}

// One random-walk step in pose space, clamped to joint bounds.
inline VecX sample_pose_walk(Rng& rng, const VecX& prev, double step = 0.08,
                             double max_delta = 0.15) {
  VecX lo, hi;
  body_pose_bounds(lo, hi);
  VecX next(prev.size());
  for (int i = 0; i < prev.size(); i++) {
    double d = clamp(step * rng.normal(), -max_delta, max_delta);
    next[i] = clamp(prev[i] + d, lo[i], hi[i]);
  }
  return next;
}

// Rotate a mesh about the vertical axis through a center point.
inline TriMesh rotate_mesh_y(const TriMesh& mesh, double angle, const Vec3& center) {
  TriMesh out = mesh;
  Mat3 R = detail::rot_y(angle);
  for (auto& v : out.vertices) v = center + R * (v - center);
  return out;
}

}  // namespace garm
