#pragma once

#include <garm/cloth.hpp>

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace garm {

struct SimConfig {
  int max_iterations = 20000;
  double step = 3e-3;     // Adam rate, meters per unit normalized gradient
  double tol = 1e-3;      // stop when the free-vertex gradient inf-norm dips below
  bool warm_start = true; // dataset frames start from the previous frame's drape
  uint64_t seed = 0;
  std::vector<int> pinned;  // vertex ids held fixed
  // Creep cutoff: stop when a window of accepted steps lowers the energy by
  // less than rel_decrease of its magnitude. 0 disables.
  int plateau_window = 500;
  double plateau_rel_decrease = 1e-7;
};

struct SimResult {
  TriMesh mesh;
  int iterations = 0;
  double energy = 0;
  double grad_inf = 0;
  bool converged = false;
  std::vector<double> trace;  // accepted energies, starting state included
};

// Thrown when the energy turns non-finite; carries the last finite iterate
// so callers can inspect or dump the failing drape.
struct SolverDiverged : std::runtime_error {
  SolverDiverged(const std::string& msg, TriMesh last, double energy)
      : std::runtime_error(msg), last_mesh(std::move(last)),
        last_energy(energy) {}
  TriMesh last_mesh;
  double last_energy;
};

// Quasi-static drape: Adam descent on the cloth energy until the gradient
// inf-norm over free vertices drops below tol. Steps that raise the energy
// are rejected and retried at half rate with fresh moments, so the trace is
// non-increasing.
inline SimResult relax(const TriMesh& start, const ClothRest& rest,
                       const BodyModel* body, const ClothMaterial& mat,
                       const SimConfig& cfg = {}) {
  if (body && mat.margin >= body->min_radius)
    throw std::invalid_argument(
        str_format("collision margin %g must stay below the smallest body "
                   "capsule radius %g",
                   mat.margin, body->min_radius));
  int n = start.num_vertices();
  std::vector<char> fixed(n, 0);
  for (int id : cfg.pinned) {
    if (id < 0 || id >= n)
      throw std::invalid_argument(str_format("pinned vertex %d out of range", id));
    fixed[id] = 1;
  }

  SimResult res;
  res.mesh = start;
  auto grad_inf_free = [&](const std::vector<Vec3>& grad) {
    double g = 0;
    for (int v = 0; v < n; v++)
      if (!fixed[v]) g = std::max(g, grad[v].lpNorm<Eigen::Infinity>());
    return g;
  };

  ClothEnergy cur = phys_energy_grad(res.mesh, rest, body, mat);
  if (!std::isfinite(cur.total))
    throw SolverDiverged("relax: non-finite energy at the starting state",
                         start, 0);
  res.trace.push_back(cur.total);
  res.grad_inf = grad_inf_free(cur.grad);

  std::vector<Vec3> m(n, Vec3::Zero()), v(n, Vec3::Zero());
  double lr = cfg.step;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  int t_step = 0, rejects = 0;

  auto eval_or_throw = [&](const TriMesh& cand, int iter) {
    ClothEnergy next = phys_energy_grad(cand, rest, body, mat);
    if (!std::isfinite(next.total))
      throw SolverDiverged(
          str_format("relax: non-finite energy at iteration %d; last finite "
                     "energy %.6g",
                     iter, cur.total),
          res.mesh, cur.total);
    return next;
  };

  for (int iter = 0; iter < cfg.max_iterations; iter++) {
    if (res.grad_inf < cfg.tol) {
      res.converged = true;
      break;
    }
    t_step++;
    double c1 = 1 - std::pow(b1, t_step), c2 = 1 - std::pow(b2, t_step);
    TriMesh cand = res.mesh;
    for (int i = 0; i < n; i++) {
      if (fixed[i]) continue;
      m[i] = b1 * m[i] + (1 - b1) * cur.grad[i];
      v[i] = b2 * v[i] + (1 - b2) * cur.grad[i].cwiseProduct(cur.grad[i]);
      Vec3 mhat = m[i] / c1;
      Vec3 vhat = v[i] / c2;
      cand.vertices[i] -=
          lr * (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
    }
    ClothEnergy next = eval_or_throw(cand, iter + 1);
    bool accepted = next.total <= cur.total;

    if (!accepted && ++rejects > 25) {
      // Adam's per-coordinate normalization moves every vertex by about lr,
      // which near equilibrium buries the few vertices that actually need to
      // escape (a limb swung into the cloth). The energy is C1, so a
      // backtracked steepest-descent step always finds a decrease unless the
      // iterate is stationary.
      double gmax = grad_inf_free(cur.grad);
      double h = cfg.step / gmax;
      for (int bt = 0; bt < 48; bt++, h *= 0.5) {
        cand = res.mesh;
        for (int i = 0; i < n; i++)
          if (!fixed[i]) cand.vertices[i] -= h * cur.grad[i];
        next = eval_or_throw(cand, iter + 1);
        if (next.total < cur.total) break;
      }
      if (next.total >= cur.total) break;  // stationary to machine precision
      accepted = true;
      for (int i = 0; i < n; i++) {  // new basin, fresh moments
        m[i].setZero();
        v[i].setZero();
      }
      t_step = 0;
      lr = cfg.step;
    }

    if (!accepted) {
      // Stale momentum can point uphill; restart the moments so the halved
      // retry follows the fresh gradient.
      for (int i = 0; i < n; i++) {
        m[i].setZero();
        v[i].setZero();
      }
      t_step = 0;
      lr *= 0.5;
      continue;
    }
    rejects = 0;
    res.mesh = std::move(cand);
    cur = std::move(next);
    res.trace.push_back(cur.total);
    res.grad_inf = grad_inf_free(cur.grad);
    res.iterations = iter + 1;
    lr = std::min(lr * 1.25, cfg.step);
    if (cfg.plateau_window > 0 &&
        int(res.trace.size()) > cfg.plateau_window) {
      double before = res.trace[res.trace.size() - 1 - cfg.plateau_window];
      if (before - cur.total <
          cfg.plateau_rel_decrease * std::max(1.0, std::abs(cur.total)))
        break;
    }
  }
  if (res.grad_inf < cfg.tol) res.converged = true;
  res.energy = cur.total;
  return res;
}

inline SimResult relax(const TriMesh& start, const TriMesh& rest,
                       const BodyModel* body, const ClothMaterial& mat,
                       const SimConfig& cfg = {}) {
  if (start.num_vertices() != rest.num_vertices() || start.faces != rest.faces)
    throw std::invalid_argument(
        "relax: start and rest meshes must share connectivity");
  return relax(start, cloth_rest_state(rest, mat), body, mat, cfg);
}

}  // namespace garm
