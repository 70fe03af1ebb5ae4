#pragma once

#include <garm/body.hpp>
#include <garm/mesh.hpp>

#include <stdexcept>
#include <vector>

namespace garm {

struct ClothMaterial {
  double stretch = 60.0;     // k_s, N/m
  double bend = 2e-4;        // k_b, N*m
  double density = 0.15;     // kg/m^2
  double gravity = 9.81;     // m/s^2
  double collision = 400.0;  // k_c
  double margin = 0.004;     // eps_c, m
};

inline void validate_material(const ClothMaterial& mat) {
  // Gravity may be zeroed for free-floating checks; the stiffnesses, the
  // density and the margin must stay strictly positive.
  if (mat.stretch <= 0 || mat.bend <= 0 || mat.density <= 0 ||
      mat.gravity < 0 || mat.collision <= 0 || mat.margin <= 0)
    throw std::invalid_argument("cloth material constants must be positive");
}

// Rest quantities baked once from the rest mesh: spring lengths, hinge
// angles and lumped vertex masses.
struct ClothRest {
  struct Spring {
    int v0, v1;
    double len;
  };
  struct Hinge {
    int v0, v1, o0, o1;
    double angle;
  };
  std::vector<Spring> springs;
  std::vector<Hinge> hinges;
  std::vector<double> mass;
};

// Signed dihedral angle at the hinge (x0,x1) between opposite corners x2,
// x3; 0 when flat, positive when the corners fold toward the f0 normal.
inline double dihedral_angle(const Vec3& x0, const Vec3& x1, const Vec3& x2,
                             const Vec3& x3) {
  Vec3 e = x1 - x0;
  double m = e.norm();
  if (m < 1e-15) return 0;
  Vec3 na = e.cross(x2 - x0);
  Vec3 nb = (x3 - x0).cross(e);
  return std::atan2(na.cross(nb).dot(e) / m, na.dot(nb));
}

inline ClothRest cloth_rest_state(const TriMesh& rest,
                                  const ClothMaterial& mat) {
  validate_material(mat);
  validate_mesh(rest);
  ClothRest out;
  for (const EdgeInfo& e : mesh_edges(rest)) {
    double len = (rest.vertices[e.v1] - rest.vertices[e.v0]).norm();
    if (len < 1e-12)
      throw std::invalid_argument(
          str_format("degenerate rest edge %d-%d", e.v0, e.v1));
    out.springs.push_back({e.v0, e.v1, len});
    if (e.f1 < 0) continue;
    double ang = dihedral_angle(rest.vertices[e.v0], rest.vertices[e.v1],
                                rest.vertices[e.opp0], rest.vertices[e.opp1]);
    out.hinges.push_back({e.v0, e.v1, e.opp0, e.opp1, ang});
  }
  out.mass = vertex_masses(rest, mat.density);
  return out;
}

struct ClothEnergy {
  double total = 0, strain = 0, bend = 0, gravity = 0, collision = 0;
  std::vector<Vec3> grad;
};

// Total quasi-static energy and its analytic vertex gradient. The body is
// optional; without one the collision term is zero.
inline ClothEnergy phys_energy_grad(const TriMesh& g, const ClothRest& rest,
                                    const BodyModel* body,
                                    const ClothMaterial& mat) {
  ClothEnergy out;
  out.grad.assign(g.vertices.size(), Vec3::Zero());

  for (const auto& sp : rest.springs) {
    Vec3 d = g.vertices[sp.v0] - g.vertices[sp.v1];
    double len = d.norm();
    double strain = (len - sp.len) / sp.len;
    out.strain += 0.5 * mat.stretch * sp.len * strain * strain;
    if (len > 1e-15) {
      Vec3 f = (mat.stretch * strain / len) * d;
      out.grad[sp.v0] += f;
      out.grad[sp.v1] -= f;
    }
  }

  for (const auto& h : rest.hinges) {
    const Vec3& x0 = g.vertices[h.v0];
    const Vec3& x1 = g.vertices[h.v1];
    const Vec3& x2 = g.vertices[h.o0];
    const Vec3& x3 = g.vertices[h.o1];
    Vec3 e = x1 - x0;
    double m = e.norm();
    Vec3 na = e.cross(x2 - x0);
    Vec3 nb = (x3 - x0).cross(e);
    double na2 = na.squaredNorm(), nb2 = nb.squaredNorm();
    if (m < 1e-12 || na2 < 1e-18 || nb2 < 1e-18) continue;
    double theta = std::atan2(na.cross(nb).dot(e) / m, na.dot(nb));
    double dd = theta - h.angle;
    out.bend += mat.bend * dd * dd;
    // Opposite corners rotate about the hinge line; endpoint gradients
    // compensate, split by the corners' projections onto the edge.
    Vec3 g2 = -(m / na2) * na;
    Vec3 g3 = -(m / nb2) * nb;
    double t2 = (x2 - x0).dot(e) / (m * m);
    double t3 = (x3 - x0).dot(e) / (m * m);
    double w = 2 * mat.bend * dd;
    out.grad[h.o0] += w * g2;
    out.grad[h.o1] += w * g3;
    out.grad[h.v0] += w * (-(1 - t2) * g2 - (1 - t3) * g3);
    out.grad[h.v1] += w * (-t2 * g2 - t3 * g3);
  }

  for (size_t v = 0; v < g.vertices.size(); v++) {
    out.gravity += rest.mass[v] * mat.gravity * g.vertices[v].y();
    out.grad[v].y() += rest.mass[v] * mat.gravity;
  }

  if (body) {
    for (size_t v = 0; v < g.vertices.size(); v++) {
      Vec3 dir;
      double s = body->sdf(g.vertices[v], nullptr, &dir);
      double pen = mat.margin - s;
      if (pen <= 0) continue;
      out.collision += mat.collision * pen * pen;
      out.grad[v] -= (2 * mat.collision * pen) * dir;
    }
  }

  out.total = out.strain + out.bend + out.gravity + out.collision;
  return out;
}

inline ClothEnergy phys_energy_grad(const TriMesh& g, const TriMesh& rest,
                                    const BodyModel* body,
                                    const ClothMaterial& mat) {
  if (g.num_vertices() != rest.num_vertices() || g.faces != rest.faces)
    throw std::invalid_argument(
        "phys_energy_grad: deformed and rest meshes must share connectivity");
  return phys_energy_grad(g, cloth_rest_state(rest, mat), body, mat);
}

}  // namespace garm
