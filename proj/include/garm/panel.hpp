#pragma once

#include <json.hpp>

#include "mesh.hpp"

namespace garm {

enum class PanelFamily { skirt, trousers };

inline const char* panel_family_name(PanelFamily f) {
  return f == PanelFamily::skirt ? "skirt" : "trousers";
}

inline PanelFamily panel_family_from_name(const std::string& s) {
  if (s == "skirt") return PanelFamily::skirt;
  if (s == "trousers") return PanelFamily::trousers;
  throw std::invalid_argument("unknown garment family: " + s);
}

// Pattern coefficients. Both families use 4 numbers:
//   skirt:    (waist half-width, hem half-width, length, hem bow)
//   trousers: (waist half-width, leg length, leg half-width, crotch depth)
// in panel-normalized units of the [-1,1]^2 pattern domain.
struct PanelLatent {
  PanelFamily family = PanelFamily::skirt;
  Eigen::Vector4d z = Eigen::Vector4d::Zero();
};

inline const char* const* panel_coeff_names(PanelFamily f) {
  static const char* skirt[] = {"waist half-width", "hem half-width", "length",
                                "hem bow"};
  static const char* trousers[] = {"waist half-width", "leg length",
                                   "leg half-width", "crotch depth"};
  return f == PanelFamily::skirt ? skirt : trousers;
}

inline PanelLatent panel_default_latent(PanelFamily f) {
  PanelLatent lat;
  lat.family = f;
  if (f == PanelFamily::skirt)
    lat.z << 0.48, 0.62, 1.0, 0.06;
  else
    lat.z << 0.48, 1.30, 0.20, 0.35;
  return lat;
}

namespace detail {

struct CoeffBound {
  double lo, hi;
};

inline const CoeffBound* panel_bounds(PanelFamily f) {
  static const CoeffBound skirt[4] = {{0.1, 0.9}, {0.1, 0.92}, {0.3, 1.5}, {0.0, 0.2}};
  static const CoeffBound trousers[4] = {{0.15, 0.9}, {0.4, 1.5}, {0.05, 0.45}, {0.1, 0.8}};
  return f == PanelFamily::skirt ? skirt : trousers;
}

}  // namespace detail

inline void validate_latent(const PanelLatent& lat) {
  const auto* b = detail::panel_bounds(lat.family);
  const auto* names = panel_coeff_names(lat.family);
  for (int i = 0; i < 4; i++)
    if (!(lat.z[i] >= b[i].lo && lat.z[i] <= b[i].hi))
      throw std::domain_error(str_format(
          "%s coefficient '%s' = %g outside [%g, %g]",
          panel_family_name(lat.family), names[i], lat.z[i], b[i].lo, b[i].hi));
  if (lat.family == PanelFamily::skirt) {
    if (lat.z[1] < 0.3 * lat.z[0] - 1e-12)
      throw std::domain_error(str_format(
          "skirt coefficient 'hem half-width' = %g below 0.3*waist = %g",
          lat.z[1], 0.3 * lat.z[0]));
    if (lat.z[2] / 2 + lat.z[3] > 0.93)
      throw std::domain_error(str_format(
          "skirt coefficient 'hem bow' = %g puts hem outside the pattern domain",
          lat.z[3]));
  } else {
    if (lat.z[2] < 0.15 * lat.z[0] - 1e-12)
      throw std::domain_error(str_format(
          "trousers coefficient 'leg half-width' = %g below 0.15*waist = %g",
          lat.z[2], 0.15 * lat.z[0]));
    if (2 * lat.z[2] > lat.z[0] - 0.02)
      throw std::domain_error(str_format(
          "trousers coefficient 'leg half-width' = %g leaves no leg separation",
          lat.z[2]));
    if (lat.z[3] > lat.z[1] - 0.15)
      throw std::domain_error(str_format(
          "trousers coefficient 'crotch depth' = %g too deep for leg length %g",
          lat.z[3], lat.z[1]));
  }
}

// Project coefficients into the valid set (box bounds plus the relational
// constraints, which converge in a couple of passes).
inline PanelLatent clamp_latent(const PanelLatent& lat) {
  PanelLatent out = lat;
  const auto* b = detail::panel_bounds(lat.family);
  for (int pass = 0; pass < 3; pass++) {
    for (int i = 0; i < 4; i++) out.z[i] = clamp(out.z[i], b[i].lo, b[i].hi);
    if (out.family == PanelFamily::skirt) {
      out.z[1] = std::max(out.z[1], 0.3 * out.z[0]);
      out.z[3] = std::min(out.z[3], 0.93 - out.z[2] / 2);
      out.z[3] = std::max(out.z[3], 0.0);
    } else {
      out.z[2] = std::max(out.z[2], 0.15 * out.z[0]);
      out.z[2] = std::min(out.z[2], (out.z[0] - 0.02) / 2);
      out.z[3] = std::min(out.z[3], out.z[1] - 0.15);
    }
  }
  return out;
}

// Draw a latent from the interior of the valid region.
inline PanelLatent sample_latent(PanelFamily f, Rng& rng) {
  PanelLatent lat;
  lat.family = f;
  // Lower width bounds keep the rest-surface wrap radii at or above the
  // body clearance radii, so the lift stays near-isometric.
  if (f == PanelFamily::skirt) {
    lat.z[0] = rng.uniform(0.44, 0.55);
    lat.z[1] = rng.uniform(lat.z[0], 0.78);
    lat.z[2] = rng.uniform(0.7, 1.2);
    lat.z[3] = rng.uniform(0.0, std::min(0.12, 0.93 - lat.z[2] / 2));
  } else {
    lat.z[0] = rng.uniform(0.46, 0.56);
    lat.z[1] = rng.uniform(1.0, 1.35);
    lat.z[2] = rng.uniform(0.19, (lat.z[0] - 0.04) / 2);
    lat.z[3] = rng.uniform(0.28, 0.42);
  }
  return clamp_latent(lat);
}

// Closed CCW pattern contour with per-segment stitch labels and the
// closed-form Jacobian of every point w.r.t. the 4 coefficients.
struct PanelShape {
  std::vector<Vec2> points;
  std::vector<StitchLabel> labels;  // labels[i] for segment i -> i+1 (mod n)
  double side = 1.0;
  std::vector<Eigen::Matrix<double, 2, 4>> jacobians;

  int size() const { return int(points.size()); }
};

namespace detail {

struct ContourBuilder {
  PanelShape shape;

  void add(double x, double y, StitchLabel label,
           std::initializer_list<double> jac) {
    shape.points.emplace_back(x, y);
    shape.labels.push_back(label);
    Eigen::Matrix<double, 2, 4> J;
    auto it = jac.begin();
    for (int r = 0; r < 2; r++)
      for (int c = 0; c < 4; c++) J(r, c) = *it++;
    shape.jacobians.push_back(J);
  }
};

inline PanelShape skirt_contour(const Eigen::Vector4d& z) {
  double ww = z[0], wh = z[1], L = z[2], bow = z[3];
  ContourBuilder b;
  // Hem, left to right, with a parabolic dip of depth `bow` at center.
  const int nh = 20;
  for (int i = 0; i < nh; i++) {
    double xi = -1.0 + 2.0 * i / nh;
    b.add(xi * wh, -L / 2 - bow * (1 - xi * xi), StitchLabel::hem_free,
          {0, xi, 0, 0, 0, 0, -0.5, -(1 - xi * xi)});
  }
  // Right seam, hem corner up to waist corner.
  const int ns = 14;
  for (int i = 0; i < ns; i++) {
    double t = double(i) / ns;
    b.add((1 - t) * wh + t * ww, (t - 0.5) * L, StitchLabel::seam_right,
          {t, 1 - t, 0, 0, 0, 0, t - 0.5, 0});
  }
  // Waist, right to left.
  const int nw = 16;
  for (int i = 0; i < nw; i++) {
    double t = double(i) / nw;
    b.add(ww * (1 - 2 * t), L / 2, StitchLabel::waist_free,
          {1 - 2 * t, 0, 0, 0, 0, 0, 0.5, 0});
  }
  // Left seam, waist corner down to hem corner.
  for (int i = 0; i < ns; i++) {
    double t = double(i) / ns;
    b.add(-(1 - t) * ww - t * wh, (0.5 - t) * L, StitchLabel::seam_left,
          {-(1 - t), -t, 0, 0, 0, 0, 0.5 - t, 0});
  }
  return b.shape;
}

inline PanelShape trousers_contour(const Eigen::Vector4d& z) {
  double ww = z[0], L = z[1], wl = z[2], c = z[3];
  double yh = -L / 2, yc = L / 2 - c;
  double xin = ww - 2 * wl;  // inseam foot |x| at the hem
  ContourBuilder b;
  // Left hem.
  const int nh = 8;
  for (int i = 0; i < nh; i++) {
    double t = double(i) / nh;
    b.add(-ww + t * 2 * wl, yh, StitchLabel::hem_free,
          {-1, 0, 2 * t, 0, 0, -0.5, 0, 0});
  }
  // Left inseam up to the crotch.
  const int ni = 10;
  for (int i = 0; i < ni; i++) {
    double t = double(i) / ni;
    b.add(-(1 - t) * xin, (1 - t) * yh + t * yc, StitchLabel::inseam,
          {-(1 - t), 0, 2 * (1 - t), 0, 0, t - 0.5, 0, -t});
  }
  // Right inseam down from the crotch.
  for (int i = 0; i < ni; i++) {
    double t = double(i) / ni;
    b.add(t * xin, (1 - t) * yc + t * yh, StitchLabel::inseam,
          {t, 0, -2 * t, 0, 0, 0.5 - t, 0, -(1 - t)});
  }
  // Right hem.
  for (int i = 0; i < nh; i++) {
    double t = double(i) / nh;
    b.add(xin + t * 2 * wl, yh, StitchLabel::hem_free,
          {1, 0, -2 * (1 - t), 0, 0, -0.5, 0, 0});
  }
  // Right seam up.
  const int ns = 12;
  for (int i = 0; i < ns; i++) {
    double t = double(i) / ns;
    b.add(ww, (t - 0.5) * L, StitchLabel::seam_right,
          {1, 0, 0, 0, 0, t - 0.5, 0, 0});
  }
  // Waist, right to left.
  const int nw = 14;
  for (int i = 0; i < nw; i++) {
    double t = double(i) / nw;
    b.add(ww * (1 - 2 * t), L / 2, StitchLabel::waist_free,
          {1 - 2 * t, 0, 0, 0, 0, 0.5, 0, 0});
  }
  // Left seam down.
  for (int i = 0; i < ns; i++) {
    double t = double(i) / ns;
    b.add(-ww, (0.5 - t) * L, StitchLabel::seam_left,
          {-1, 0, 0, 0, 0, 0.5 - t, 0, 0});
  }
  return b.shape;
}

}  // namespace detail

// Front and back pattern pieces for a latent. The two pieces share the
// contour geometry; seams and inseams are sewn front-to-back.
inline std::pair<PanelShape, PanelShape> panel_from_latent(const PanelLatent& lat) {
  validate_latent(lat);
  PanelShape front = lat.family == PanelFamily::skirt
                         ? detail::skirt_contour(lat.z)
                         : detail::trousers_contour(lat.z);
  front.side = 1.0;
  PanelShape back = front;
  back.side = -1.0;
  return {front, back};
}

// Signed distance from u to the contour: negative inside, positive
// outside, with the label and index of the nearest boundary segment
// (lowest index wins ties) and the segment parameter of the foot point.
struct PanelSdf {
  double s = 0;
  StitchLabel label = StitchLabel::hem_free;
  int segment = -1;
  double t = 0;
};

inline PanelSdf panel_sdf_label(const PanelShape& shape, const Vec2& u) {
  int n = shape.size();
  PanelSdf out;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; i++) {
    const Vec2& a = shape.points[i];
    const Vec2& b = shape.points[(i + 1) % n];
    Vec2 ab = b - a;
    double len2 = ab.squaredNorm();
    double t = len2 > 1e-18 ? clamp((u - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    double d = (u - (a + t * ab)).norm();
    if (d < best) {
      best = d;
      out.segment = i;
      out.t = t;
      out.label = shape.labels[i];
    }
  }
  // Even-odd ray cast along +x for the inside test.
  bool inside = false;
  for (int i = 0; i < n; i++) {
    const Vec2& a = shape.points[i];
    const Vec2& b = shape.points[(i + 1) % n];
    if ((a.y() > u.y()) != (b.y() > u.y())) {
      double x_cross = a.x() + (u.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
      if (x_cross > u.x()) inside = !inside;
    }
  }
  out.s = inside ? -best : best;
  return out;
}

// Derivative of the signed distance w.r.t. the nearest segment's endpoints
// (da, db) and, chained through the stored Jacobians, w.r.t. the latent.
inline PanelSdf panel_sdf_grad(const PanelShape& shape, const Vec2& u,
                               Vec2* da, Vec2* db,
                               Eigen::Vector4d* dz = nullptr) {
  PanelSdf res = panel_sdf_label(shape, u);
  const Vec2& a = shape.points[res.segment];
  const Vec2& b = shape.points[(res.segment + 1) % shape.size()];
  Vec2 foot = a + res.t * (b - a);
  Vec2 diff = u - foot;
  double dist = diff.norm();
  double sign = res.s < 0 ? -1.0 : 1.0;
  Vec2 dir = dist > 1e-12 ? Vec2(diff / dist) : Vec2(0, 0);
  // d(dist)/d(foot) = -dir; foot moves by (1-t)·da + t·db at fixed t, and
  // the min over t makes that exact (envelope theorem).
  Vec2 ga = sign * (-(1 - res.t)) * dir;
  Vec2 gb = sign * (-res.t) * dir;
  if (da) *da = ga;
  if (db) *db = gb;
  if (dz) {
    *dz = shape.jacobians[res.segment].transpose() * ga +
          shape.jacobians[(res.segment + 1) % shape.size()].transpose() * gb;
  }
  return res;
}

inline double contour_length(const PanelShape& shape, StitchLabel label) {
  double len = 0;
  int n = shape.size();
  for (int i = 0; i < n; i++)
    if (shape.labels[i] == label)
      len += (shape.points[(i + 1) % n] - shape.points[i]).norm();
  return len;
}

inline nlohmann::json panel_to_json(const PanelShape& shape) {
  nlohmann::json j;
  j["side"] = shape.side > 0 ? "front" : "back";
  auto& pts = j["points"] = nlohmann::json::array();
  auto& labels = j["labels"] = nlohmann::json::array();
  for (int i = 0; i < shape.size(); i++) {
    pts.push_back({shape.points[i].x(), shape.points[i].y()});
    labels.push_back(stitch_label_name(shape.labels[i]));
  }
  return j;
}

inline nlohmann::json pattern_to_json(const PanelLatent& lat,
                                      const PanelShape& front,
                                      const PanelShape& back) {
  nlohmann::json j;
  j["family"] = panel_family_name(lat.family);
  j["coefficients"] = {lat.z[0], lat.z[1], lat.z[2], lat.z[3]};
  j["front"] = panel_to_json(front);
  j["back"] = panel_to_json(back);
  return j;
}

}  // namespace garm
