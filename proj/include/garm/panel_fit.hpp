#pragma once

#include "panel.hpp"
#include "uvmap.hpp"

namespace garm {

struct FitOptions {
  int max_iterations = 200;
  double lr = 0.02;
  // Area pressure balancing the per-cell hinge; above ~5e-3 the optimum
  // concedes a multi-cell band along the contour and completion quality
  // drops below the intended mask overlap.
  double lambda_area = 2e-3;
  double lambda_z = 1e-3;
};

struct FitTrace {
  double loss = 0;
  double area = 0;  // shoelace area of the contour at this iterate
  Eigen::Vector4d z;
};

struct FitResult {
  PanelLatent latent;
  UVMaps completed;  // mask = [sdf <= 0] on the map grid for the fit latent
  std::vector<FitTrace> trace;  // accepted iterates only
  int iterations = 0;
};

// Shoelace area of the panel contour.
inline double panel_area(const PanelShape& shape) {
  double a = 0;
  int n = shape.size();
  for (int i = 0; i < n; i++) {
    const Vec2& p = shape.points[i];
    const Vec2& q = shape.points[(i + 1) % n];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return std::abs(a) / 2;
}

namespace detail {

struct FitLoss {
  double value = 0;
  Eigen::Vector4d grad = Eigen::Vector4d::Zero();
  double area = 0;
};

// Coverage objective over one map half: a hinge on covered cells pulls the
// contour outward to enclose them, a small area term pulls it inward
// everywhere, and a proximal term anchors the latent near its start.
inline FitLoss fit_loss(const PanelLatent& lat, const Eigen::Vector4d& z0,
                        const UVMaps& maps, double side,
                        const FitOptions& opt) {
  FitLoss out;
  if (!lat.z.allFinite()) {
    out.value = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  PanelShape shape = panel_from_latent(lat).first;
  int half = maps.half();
  int c0 = side > 0 ? 0 : half;
  for (int r = 0; r < maps.rows; r++)
    for (int c = c0; c < c0 + half; c++) {
      Vec2 uv;
      double cell_side;
      uvmap_cell_center(maps, r, c, uv, cell_side);
      Eigen::Vector4d dz;
      PanelSdf sd = panel_sdf_grad(shape, uv, nullptr, nullptr, &dz);
      if (maps.at_mask(r, c) && sd.s > 0) {
        out.value += sd.s;
        out.grad += dz;
      }
      out.value -= opt.lambda_area * sd.s;
      out.grad -= opt.lambda_area * dz;
    }
  Eigen::Vector4d dz0 = lat.z - z0;
  double n0 = dz0.norm();
  out.value += opt.lambda_z * n0;
  if (n0 > 1e-12) out.grad += opt.lambda_z * dz0 / n0;
  out.area = panel_area(shape);
  return out;
}

}  // namespace detail

// Fit panel latents to the covered cells of a positional map by descending
// a hinge coverage loss with Adam; steps that increase the loss are
// rejected and retried at half the rate, so accepted iterates are
// non-increasing. Non-finite losses abort with the iterate history in the
// message.
inline FitResult fit_latent(PanelFamily family, const UVMaps& maps,
                            double side, const FitOptions& opt = {}) {
  PanelLatent lat = panel_default_latent(family);
  Eigen::Vector4d z0 = lat.z;

  Eigen::Vector4d m = Eigen::Vector4d::Zero(), v = Eigen::Vector4d::Zero();
  double lr = opt.lr;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  FitResult res;
  detail::FitLoss cur = detail::fit_loss(lat, z0, maps, side, opt);
  res.trace.push_back({cur.value, cur.area, lat.z});
  auto dump_and_throw = [&](const char* what) {
    std::string msg = str_format("fit_latent: %s; iterate history:", what);
    for (const auto& t : res.trace)
      msg += str_format("\n  loss=%.6g area=%.6g z=(%.4g, %.4g, %.4g, %.4g)",
                        t.loss, t.area, t.z[0], t.z[1], t.z[2], t.z[3]);
    throw std::runtime_error(msg);
  };
  if (!std::isfinite(cur.value)) dump_and_throw("non-finite loss");

  int t_step = 0;
  for (int iter = 0; iter < opt.max_iterations && lr > 1e-8; iter++) {
    if (!cur.grad.allFinite()) dump_and_throw("non-finite gradient");
    t_step++;
    m = b1 * m + (1 - b1) * cur.grad;
    v = b2 * v + (1 - b2) * cur.grad.cwiseProduct(cur.grad);
    Eigen::Vector4d mhat = m / (1 - std::pow(b1, t_step));
    Eigen::Vector4d vhat = v / (1 - std::pow(b2, t_step));
    PanelLatent cand = lat;
    cand.z -= lr * (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
    cand = clamp_latent(cand);

    detail::FitLoss next = detail::fit_loss(cand, z0, maps, side, opt);
    if (!std::isfinite(next.value)) dump_and_throw("non-finite loss");
    if (next.value > cur.value) {
      // Stale momentum can point uphill near the optimum; restart the moments
      // so the halved retry follows the fresh gradient.
      m.setZero();
      v.setZero();
      t_step = 0;
      lr *= 0.5;
      continue;
    }
    lat = cand;
    cur = next;
    res.trace.push_back({cur.value, cur.area, lat.z});
    res.iterations = iter + 1;
    // Halved rates recover after accepted steps so a few rejections do not
    // freeze the remaining iterations.
    lr = std::min(lr * 1.25, opt.lr);
  }

  res.latent = lat;
  // Completed mask: every cell inside the fit contour, in the same half.
  res.completed = make_uv_maps(maps.rows, maps.cols);
  PanelShape shape = panel_from_latent(res.latent).first;
  int half = maps.half();
  int c0 = side > 0 ? 0 : half;
  for (int r = 0; r < maps.rows; r++)
    for (int c = c0; c < c0 + half; c++) {
      Vec2 uv;
      double cell_side;
      uvmap_cell_center(maps, r, c, uv, cell_side);
      if (panel_sdf_label(shape, uv).s <= 0) res.completed.at_mask(r, c) = 1;
    }
  return res;
}

}  // namespace garm
