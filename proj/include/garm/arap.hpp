#pragma once

#include <Eigen/Sparse>

#include "mesh.hpp"

namespace garm {

struct ArapResult {
  std::vector<Vec2> uv;
  double energy = 0;
  std::vector<double> distortion;  // per face: max singular value deviation from 1
  std::vector<double> energy_trace;
  int iterations = 0;
};

struct ArapOptions {
  int max_iterations = 200;
  double rel_tolerance = 1e-10;
};

namespace detail {

// Isometric 2D reference frame of a 3D triangle: p0 at origin, p1 on +x.
inline void reference_triangle(const Vec3& q0, const Vec3& q1, const Vec3& q2,
                               Vec2& p1, Vec2& p2) {
  Vec3 e1 = q1 - q0, e2 = q2 - q0;
  double l1 = e1.norm();
  if (l1 < 1e-15) throw std::invalid_argument("degenerate face in arap_flatten");
  Vec3 x = e1 / l1;
  double a = e2.dot(x);
  double b = (e2 - a * x).norm();
  p1 = Vec2(l1, 0);
  p2 = Vec2(a, b);
}

// Closed-form polar rotation factor of a 2x2 matrix.
inline Eigen::Matrix2d polar_rotation(const Eigen::Matrix2d& J) {
  double a = J(0, 0), b = J(0, 1), c = J(1, 0), d = J(1, 1);
  double x = a + d, y = c - b;
  double r = std::hypot(x, y);
  Eigen::Matrix2d R;
  if (r < 1e-14) {
    R.setIdentity();
  } else {
    R << x / r, -y / r, y / r, x / r;
  }
  return R;
}

}  // namespace detail

// Verify the surface is an open disk: connected, edge-manifold, a single
// boundary loop, Euler characteristic 1.
inline void require_disk_topology(const TriMesh& mesh) {
  auto edges = mesh_edges(mesh);  // throws if an edge has >2 faces
  int V = mesh.num_vertices(), E = int(edges.size()), F = mesh.num_faces();
  int chi = V - E + F;
  // Count boundary loops by tracing boundary edges.
  std::multimap<int, int> next;
  int boundary_edges_n = 0;
  for (const auto& e : edges)
    if (e.f1 == -1) {
      next.insert({e.v0, e.v1});
      next.insert({e.v1, e.v0});
      boundary_edges_n++;
    }
  int loops = 0;
  std::set<std::pair<int, int>> used;
  for (auto& [v0, v1] : next) {
    if (used.count({v0, v1})) continue;
    loops++;
    int prev = v0, cur = v1;
    used.insert({v0, v1});
    used.insert({v1, v0});
    while (cur != v0) {
      auto range = next.equal_range(cur);
      int nxt = -1;
      for (auto it = range.first; it != range.second; ++it)
        if (it->second != prev && !used.count({cur, it->second})) {
          nxt = it->second;
          break;
        }
      if (nxt < 0) break;
      used.insert({cur, nxt});
      used.insert({nxt, cur});
      prev = cur;
      cur = nxt;
    }
  }
  if (chi != 1 || loops != 1 || boundary_edges_n == 0)
    throw std::runtime_error(
        str_format("arap_flatten: surface is not a disk (V-E+F=%d, boundary "
                   "loops=%d)",
                   chi, loops));
}

// Least-squares conformal map used as the ARAP starting point. Two far
// apart boundary vertices are pinned to fix the similarity gauge.
inline std::vector<Vec2> lscm_initialize(const TriMesh& mesh) {
  int V = mesh.num_vertices(), F = mesh.num_faces();
  auto boundary = boundary_vertices(mesh);
  int pin_a = *boundary.begin(), pin_b = pin_a;
  double best = -1;
  for (int v : boundary) {
    double d = (mesh.vertices[v] - mesh.vertices[pin_a]).norm();
    if (d > best) {
      best = d;
      pin_b = v;
    }
  }
  double pin_dist = std::max(best, 1e-9);

  // Unknown layout: [u_0..u_{V-1}, v_0..v_{V-1}].
  auto idx_u = [&](int v) { return v; };
  auto idx_v = [&](int v) { return V + v; };
  std::vector<Eigen::Triplet<double>> trips;
  int row = 0;
  for (int f = 0; f < F; f++) {
    const auto& t = mesh.faces[f];
    Vec2 p1, p2;
    detail::reference_triangle(mesh.vertices[t[0]], mesh.vertices[t[1]],
                               mesh.vertices[t[2]], p1, p2);
    double area2 = p1.x() * p2.y();  // twice the area
    if (area2 < 1e-15) continue;
    // Gradient of a linear field: grad = (1/area2) * sum_k val_k * n_k,
    // n_k = 90-degree rotation of the opposite edge vector.
    Vec2 ref[3] = {Vec2(0, 0), p1, p2};
    double w = 1.0 / std::sqrt(area2);
    Vec2 n[3];
    for (int k = 0; k < 3; k++) {
      Vec2 opp = ref[(k + 2) % 3] - ref[(k + 1) % 3];
      n[k] = Vec2(-opp.y(), opp.x());
    }
    // Conformality: grad(v) - rot90 * grad(u) = 0, two scalar rows.
    for (int k = 0; k < 3; k++) {
      // Row x: dv/dx + du/dy = 0; row y: dv/dy - du/dx = 0.
      trips.emplace_back(row, idx_v(t[k]), w * n[k].x());
      trips.emplace_back(row, idx_u(t[k]), w * n[k].y());
      trips.emplace_back(row + 1, idx_v(t[k]), w * n[k].y());
      trips.emplace_back(row + 1, idx_u(t[k]), -w * n[k].x());
    }
    row += 2;
  }
  Eigen::SparseMatrix<double> A(row, 2 * V);
  A.setFromTriplets(trips.begin(), trips.end());

  // Move pinned columns to the right-hand side.
  VecX pin_val = VecX::Zero(2 * V);
  pin_val[idx_u(pin_b)] = pin_dist;
  std::set<int> pinned = {idx_u(pin_a), idx_v(pin_a), idx_u(pin_b), idx_v(pin_b)};
  VecX b = -A * pin_val;
  // Zero pinned columns.
  for (int k = 0; k < A.outerSize(); ++k)
    if (pinned.count(k))
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
        it.valueRef() = 0;
  Eigen::SparseMatrix<double> N = Eigen::SparseMatrix<double>(A.transpose()) * A;
  for (int k : pinned) N.coeffRef(k, k) += 1.0;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(N);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("arap_flatten: conformal initial solve failed");
  VecX x = solver.solve(A.transpose() * b);
  x += pin_val;
  std::vector<Vec2> uv(V);
  for (int v = 0; v < V; v++) uv[v] = Vec2(x[idx_u(v)], x[idx_v(v)]);
  return uv;
}

// Local-global as-rigid-as-possible flattening. The local step fits a
// rotation per face in closed form; the global step solves one prefactored
// cotan system. Energy is non-increasing by construction of the alternation.
inline ArapResult arap_flatten(const TriMesh& mesh, const ArapOptions& opt = {}) {
  require_disk_topology(mesh);
  int V = mesh.num_vertices(), F = mesh.num_faces();

  // Per-face reference coordinates and cotan weights.
  std::vector<std::array<Vec2, 3>> ref(F);
  std::vector<std::array<double, 3>> cot(F);  // cot[k] for edge (k, k+1)
  for (int f = 0; f < F; f++) {
    Vec2 p1, p2;
    detail::reference_triangle(mesh.vertices[mesh.faces[f][0]],
                               mesh.vertices[mesh.faces[f][1]],
                               mesh.vertices[mesh.faces[f][2]], p1, p2);
    ref[f] = {Vec2(0, 0), p1, p2};
    for (int k = 0; k < 3; k++) {
      Vec2 a = ref[f][(k + 2) % 3] - ref[f][(k + 1) % 3];
      Vec2 b = ref[f][(k + 2) % 3] - ref[f][k];
      // Angle at vertex k+2, opposite edge (k, k+1). Note a x b keeps sign.
      double cross = std::abs(a.x() * b.y() - a.y() * b.x());
      cot[f][k] = a.dot(b) / std::max(cross, 1e-14);
    }
  }

  // Global cotan system with vertex 0 pinned.
  std::vector<Eigen::Triplet<double>> trips;
  for (int f = 0; f < F; f++)
    for (int k = 0; k < 3; k++) {
      int i = mesh.faces[f][k], j = mesh.faces[f][(k + 1) % 3];
      double w = cot[f][k];
      if (i != 0) {
        trips.emplace_back(i, i, w);
        if (j != 0) trips.emplace_back(i, j, -w);
      }
      if (j != 0) {
        trips.emplace_back(j, j, w);
        if (i != 0) trips.emplace_back(j, i, -w);
      }
    }
  trips.emplace_back(0, 0, 1.0);
  Eigen::SparseMatrix<double> L(V, V);
  L.setFromTriplets(trips.begin(), trips.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(L);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("arap_flatten: global system factorization failed");

  std::vector<Vec2> uv = lscm_initialize(mesh);
  Vec2 pin = uv[0];

  ArapResult res;
  std::vector<Eigen::Matrix2d> rot(F);
  auto energy = [&]() {
    double e = 0;
    for (int f = 0; f < F; f++)
      for (int k = 0; k < 3; k++) {
        int i = mesh.faces[f][k], j = mesh.faces[f][(k + 1) % 3];
        Vec2 d = (uv[j] - uv[i]) - rot[f] * (ref[f][(k + 1) % 3] - ref[f][k]);
        e += 0.5 * cot[f][k] * d.squaredNorm();
      }
    return e;
  };

  double prev_e = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opt.max_iterations; iter++) {
    // Local: best rotation per face.
    for (int f = 0; f < F; f++) {
      Eigen::Matrix2d S = Eigen::Matrix2d::Zero();
      for (int k = 0; k < 3; k++) {
        int i = mesh.faces[f][k], j = mesh.faces[f][(k + 1) % 3];
        Vec2 du = uv[j] - uv[i];
        Vec2 dx = ref[f][(k + 1) % 3] - ref[f][k];
        S += cot[f][k] * du * dx.transpose();
      }
      rot[f] = detail::polar_rotation(S);
    }
    // Global: solve for coordinates with the rotations fixed.
    MatX rhs = MatX::Zero(V, 2);
    for (int f = 0; f < F; f++)
      for (int k = 0; k < 3; k++) {
        int i = mesh.faces[f][k], j = mesh.faces[f][(k + 1) % 3];
        Vec2 r = rot[f] * (ref[f][(k + 1) % 3] - ref[f][k]);
        double w = cot[f][k];
        if (j != 0) rhs.row(j) += w * r.transpose();
        if (i != 0) rhs.row(i) -= w * r.transpose();
      }
    rhs.row(0) = pin.transpose();
    MatX sol(V, 2);
    sol.col(0) = solver.solve(rhs.col(0));
    sol.col(1) = solver.solve(rhs.col(1));
    for (int v = 0; v < V; v++) uv[v] = sol.row(v).transpose();

    double e = energy();
    res.energy_trace.push_back(e);
    res.iterations = iter + 1;
    if (std::isfinite(prev_e) &&
        prev_e - e <= opt.rel_tolerance * std::max(prev_e, 1e-30))
      break;
    prev_e = e;
  }

  res.uv = uv;
  res.energy = res.energy_trace.empty() ? 0 : res.energy_trace.back();
  res.distortion.resize(F);
  for (int f = 0; f < F; f++) {
    Eigen::Matrix2d X, U;
    X.col(0) = ref[f][1] - ref[f][0];
    X.col(1) = ref[f][2] - ref[f][0];
    U.col(0) = uv[mesh.faces[f][1]] - uv[mesh.faces[f][0]];
    U.col(1) = uv[mesh.faces[f][2]] - uv[mesh.faces[f][0]];
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(U * X.inverse());
    res.distortion[f] = std::max(std::abs(svd.singularValues()[0] - 1),
                                 std::abs(svd.singularValues()[1] - 1));
  }
  return res;
}

// Rigid 2D alignment (rotation + translation, optional reflection) of
// points P onto Q by least squares.
inline std::vector<Vec2> align_rigid_2d(const std::vector<Vec2>& P,
                                        const std::vector<Vec2>& Q) {
  if (P.size() != Q.size() || P.empty())
    throw std::invalid_argument("align_rigid_2d: size mismatch");
  Vec2 cp = Vec2::Zero(), cq = Vec2::Zero();
  for (size_t i = 0; i < P.size(); i++) {
    cp += P[i];
    cq += Q[i];
  }
  cp /= double(P.size());
  cq /= double(P.size());
  Eigen::Matrix2d H = Eigen::Matrix2d::Zero();
  for (size_t i = 0; i < P.size(); i++)
    H += (P[i] - cp) * (Q[i] - cq).transpose();
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix2d R = svd.matrixV() * svd.matrixU().transpose();
  if (R.determinant() < 0) {
    Eigen::Matrix2d D = Eigen::Matrix2d::Identity();
    D(1, 1) = -1;
    R = svd.matrixV() * D * svd.matrixU().transpose();
  }
  std::vector<Vec2> out(P.size());
  for (size_t i = 0; i < P.size(); i++) out[i] = R * (P[i] - cp) + cq;
  return out;
}

}  // namespace garm
