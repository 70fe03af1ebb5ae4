#include <catch2/catch_amalgamated.hpp>
#include <garm/panel.hpp>
#include <garm/panel_fit.hpp>
#include <garm/panel_mesh.hpp>
#include <garm/uvmap.hpp>

using namespace garm;
using Catch::Matchers::ContainsSubstring;

namespace {

PanelLatent make_latent(PanelFamily f, double a, double b, double c, double d) {
  PanelLatent lat;
  lat.family = f;
  lat.z << a, b, c, d;
  return lat;
}

// Independent point-to-segment distance + winding-number inside test.
double oracle_sdf(const PanelShape& shape, const Vec2& u, StitchLabel* label,
                  int* segment) {
  int n = shape.size();
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
      if (label) *label = shape.labels[i];
      if (segment) *segment = i;
    }
  }
  double winding = 0;
  for (int i = 0; i < n; i++) {
    Vec2 a = shape.points[i] - u;
    Vec2 b = shape.points[(i + 1) % n] - u;
    winding += std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b));
  }
  return std::abs(winding) > pi ? -best : best;
}

// Cells of a rows x cols/2 half grid whose center is inside the contour.
std::vector<uint8_t> contour_mask(const PanelShape& shape, const UVMaps& grid) {
  std::vector<uint8_t> out(size_t(grid.rows) * grid.half(), 0);
  for (int r = 0; r < grid.rows; r++)
    for (int c = 0; c < grid.half(); c++) {
      Vec2 uv;
      double side;
      uvmap_cell_center(grid, r, c, uv, side);
      out[size_t(r) * grid.half() + c] = panel_sdf_label(shape, uv).s <= 0;
    }
  return out;
}

double mask_vec_iou(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b) {
  REQUIRE(a.size() == b.size());
  int inter = 0, uni = 0;
  for (size_t i = 0; i < a.size(); i++) {
    inter += a[i] && b[i];
    uni += a[i] || b[i];
  }
  return uni ? double(inter) / uni : 1.0;
}

UVMaps maps_from_mask(const std::vector<uint8_t>& half_mask, int rows, int cols) {
  UVMaps m = make_uv_maps(rows, cols);
  for (int r = 0; r < rows; r++)
    for (int c = 0; c < m.half(); c++)
      if (half_mask[size_t(r) * m.half() + c]) {
        m.at_mask(r, c) = 1;
        Vec2 uv;
        double side;
        uvmap_cell_center(m, r, c, uv, side);
        double* p = m.cell(r, c);
        p[0] = uv.x();
        p[1] = uv.y();
        p[2] = 0;
      }
  return m;
}

}  // namespace

TEST_CASE("zero flare and bow degenerate the skirt to a rectangle") {
  auto [front, back] = panel_from_latent(make_latent(PanelFamily::skirt, 0.3, 0.3, 0.8, 0));
  REQUIRE(front.size() >= 64);
  REQUIRE(back.size() == front.size());
  REQUIRE(front.side == 1.0);
  REQUIRE(back.side == -1.0);
  double min_x = 1e9, max_x = -1e9, min_y = 1e9, max_y = -1e9;
  for (const Vec2& p : front.points) {
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
    min_y = std::min(min_y, p.y());
    max_y = std::max(max_y, p.y());
    // Every point lies on the rectangle boundary.
    double on_x = std::min(std::abs(p.x() - 0.3), std::abs(p.x() + 0.3));
    double on_y = std::min(std::abs(p.y() - 0.4), std::abs(p.y() + 0.4));
    REQUIRE(std::min(on_x, on_y) < 1e-12);
  }
  REQUIRE(max_x - min_x == Catch::Approx(0.6).margin(1e-12));
  REQUIRE(max_y - min_y == Catch::Approx(0.8).margin(1e-12));
  // Counter-clockwise orientation.
  double area2 = 0;
  for (int i = 0; i < front.size(); i++) {
    const Vec2& p = front.points[i];
    const Vec2& q = front.points[(i + 1) % front.size()];
    area2 += p.x() * q.y() - q.x() * p.y();
  }
  REQUIRE(area2 > 0);
  REQUIRE(panel_area(front) == Catch::Approx(0.48).margin(1e-12));
  // Side lengths per stitch label.
  REQUIRE(contour_length(front, StitchLabel::seam_left) == Catch::Approx(0.8));
  REQUIRE(contour_length(front, StitchLabel::seam_right) == Catch::Approx(0.8));
  REQUIRE(contour_length(front, StitchLabel::waist_free) == Catch::Approx(0.6));
  REQUIRE(contour_length(front, StitchLabel::hem_free) == Catch::Approx(0.6));
}

TEST_CASE("skirt flare widens the hem to the coefficient") {
  auto [front, back] = panel_from_latent(make_latent(PanelFamily::skirt, 0.3, 0.5, 0.8, 0));
  double min_x = 1e9, max_x = -1e9;
  for (const Vec2& p : front.points)
    if (std::abs(p.y() + 0.4) < 1e-12) {
      min_x = std::min(min_x, p.x());
      max_x = std::max(max_x, p.x());
    }
  REQUIRE(max_x - min_x == Catch::Approx(1.0).margin(1e-12));
  // Waist stays at the waist half-width.
  double waist_max = 0;
  for (const Vec2& p : front.points)
    if (std::abs(p.y() - 0.4) < 1e-12) waist_max = std::max(waist_max, p.x());
  REQUIRE(waist_max == Catch::Approx(0.3).margin(1e-12));
}

TEST_CASE("contour points carry exact coefficient jacobians") {
  const double delta = 1e-4;
  Rng rng(11);
  for (PanelFamily fam : {PanelFamily::skirt, PanelFamily::trousers}) {
    std::vector<PanelLatent> lats = {panel_default_latent(fam),
                                     sample_latent(fam, rng),
                                     sample_latent(fam, rng)};
    for (const PanelLatent& lat : lats) {
      PanelShape base = panel_from_latent(lat).first;
      for (int k = 0; k < 4; k++) {
        PanelLatent hi = lat, lo = lat;
        hi.z[k] += delta;
        lo.z[k] -= delta;
        PanelShape ph = fam == PanelFamily::skirt ? detail::skirt_contour(hi.z)
                                                  : detail::trousers_contour(hi.z);
        PanelShape pl = fam == PanelFamily::skirt ? detail::skirt_contour(lo.z)
                                                  : detail::trousers_contour(lo.z);
        for (int i = 0; i < base.size(); i++) {
          Vec2 forward = ph.points[i] - base.points[i];
          Vec2 predicted = base.jacobians[i].col(k) * delta;
          REQUIRE((forward - predicted).norm() < 1e-6);
          Vec2 central = (ph.points[i] - pl.points[i]) / (2 * delta);
          Vec2 jac = base.jacobians[i].col(k);
          double denom = std::max(central.norm(), 1e-8);
          REQUIRE((central - jac).norm() / denom < 1e-4);
        }
      }
    }
  }
}

TEST_CASE("out-of-bounds coefficients raise and name the offender") {
  REQUIRE_THROWS_WITH(
      panel_from_latent(make_latent(PanelFamily::skirt, 0.3, 0.5, 2.0, 0)),
      ContainsSubstring("length"));
  REQUIRE_THROWS_WITH(
      panel_from_latent(make_latent(PanelFamily::skirt, 0.5, 0.12, 0.8, 0)),
      ContainsSubstring("hem half-width"));
  REQUIRE_THROWS_WITH(
      panel_from_latent(make_latent(PanelFamily::trousers, 0.4, 1.3, 0.04, 0.3)),
      ContainsSubstring("leg half-width"));
  REQUIRE_THROWS_AS(
      panel_from_latent(make_latent(PanelFamily::trousers, 0.4, 1.3, 0.13, 1.25)),
      std::domain_error);

  // Projection always lands in the valid set.
  Rng rng(3);
  for (int i = 0; i < 200; i++) {
    PanelLatent raw;
    raw.family = i % 2 ? PanelFamily::skirt : PanelFamily::trousers;
    raw.z << rng.uniform(-1, 2), rng.uniform(-1, 2), rng.uniform(-1, 2),
        rng.uniform(-1, 2);
    REQUIRE_NOTHROW(validate_latent(clamp_latent(raw)));
  }
}

TEST_CASE("signed distance on the rectangle panel") {
  PanelShape rect =
      panel_from_latent(make_latent(PanelFamily::skirt, 0.3, 0.3, 0.8, 0)).first;
  PanelSdf center = panel_sdf_label(rect, Vec2(0, 0));
  REQUIRE(center.s == Catch::Approx(-0.3).margin(1e-12));
  REQUIRE(center.label == StitchLabel::seam_right);  // lowest-index tie win

  // Points on the contour evaluate to zero.
  REQUIRE(std::abs(panel_sdf_label(rect, Vec2(0.3, 0.1234)).s) < 1e-9);
  REQUIRE(std::abs(panel_sdf_label(rect, Vec2(0.0, -0.4)).s) < 1e-9);
  REQUIRE(std::abs(panel_sdf_label(rect, Vec2(0.3, -0.4)).s) < 1e-9);

  // Outside is positive.
  REQUIRE(panel_sdf_label(rect, Vec2(0.5, 0)).s == Catch::Approx(0.2).margin(1e-12));
  REQUIRE(panel_sdf_label(rect, Vec2(0, 0.9)).s == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("signed distance matches the brute-force winding oracle") {
  Rng rng(7);
  for (PanelFamily fam : {PanelFamily::skirt, PanelFamily::trousers}) {
    PanelShape shape = panel_from_latent(panel_default_latent(fam)).first;
    for (int i = 0; i < 1000; i++) {
      Vec2 u(rng.uniform(-1, 1), rng.uniform(-1, 1));
      StitchLabel olabel;
      int oseg;
      double os = oracle_sdf(shape, u, &olabel, &oseg);
      PanelSdf sd = panel_sdf_label(shape, u);
      REQUIRE(sd.s == os);
      REQUIRE(sd.label == olabel);
      REQUIRE(sd.segment == oseg);
    }
  }
}

TEST_CASE("signed distance is 1-Lipschitz") {
  Rng rng(13);
  PanelShape shape = panel_from_latent(panel_default_latent(PanelFamily::trousers)).first;
  for (int i = 0; i < 500; i++) {
    Vec2 a(rng.uniform(-1, 1), rng.uniform(-1, 1));
    Vec2 b(rng.uniform(-1, 1), rng.uniform(-1, 1));
    double sa = panel_sdf_label(shape, a).s;
    double sb = panel_sdf_label(shape, b).s;
    REQUIRE(std::abs(sa - sb) <= (a - b).norm() + 1e-12);
  }
}

TEST_CASE("signed distance gradient w.r.t. coefficients matches differences") {
  Rng rng(17);
  const double delta = 1e-5;
  for (PanelFamily fam : {PanelFamily::skirt, PanelFamily::trousers}) {
    PanelLatent lat = panel_default_latent(fam);
    int checked = 0;
    for (int i = 0; i < 300 && checked < 100; i++) {
      Vec2 u(rng.uniform(-1, 1), rng.uniform(-1, 1));
      PanelShape shape = panel_from_latent(lat).first;
      Eigen::Vector4d dz;
      PanelSdf sd = panel_sdf_grad(shape, u, nullptr, nullptr, &dz);
      if (std::abs(sd.s) < 1e-3) continue;  // kinks at the contour itself
      bool stable = true;
      Eigen::Vector4d fd;
      for (int k = 0; k < 4; k++) {
        PanelLatent hi = lat, lo = lat;
        hi.z[k] += delta;
        lo.z[k] -= delta;
        PanelSdf sh = panel_sdf_label(
            fam == PanelFamily::skirt ? detail::skirt_contour(hi.z)
                                      : detail::trousers_contour(hi.z), u);
        PanelSdf sl = panel_sdf_label(
            fam == PanelFamily::skirt ? detail::skirt_contour(lo.z)
                                      : detail::trousers_contour(lo.z), u);
        // Skip query points whose nearest segment flips under perturbation;
        // the distance has a subgradient there.
        if (sh.segment != sd.segment || sl.segment != sd.segment) {
          stable = false;
          break;
        }
        fd[k] = (sh.s - sl.s) / (2 * delta);
      }
      if (!stable) continue;
      checked++;
      REQUIRE((fd - dz).norm() < 1e-4 * std::max(1.0, fd.norm()));
    }
    REQUIRE(checked >= 100);
  }
}

TEST_CASE("panel contours export as labeled json polylines") {
  PanelLatent lat = panel_default_latent(PanelFamily::trousers);
  auto [front, back] = panel_from_latent(lat);
  nlohmann::json j = pattern_to_json(lat, front, back);
  REQUIRE(j["family"] == "trousers");
  REQUIRE(j["coefficients"].size() == 4);
  REQUIRE(j["front"]["points"].size() == size_t(front.size()));
  REQUIRE(j["front"]["labels"].size() == size_t(front.size()));
  REQUIRE(j["front"]["side"] == "front");
  REQUIRE(j["back"]["side"] == "back");
  std::set<std::string> seen;
  for (const auto& l : j["front"]["labels"]) seen.insert(l.get<std::string>());
  REQUIRE(seen.count("inseam") == 1);
  REQUIRE(seen.count("waist_free") == 1);
}

TEST_CASE("grid triangulation stays inside the contour band") {
  PanelShape shape = panel_from_latent(panel_default_latent(PanelFamily::trousers)).first;
  PanelGrid grid = panel_grid_mesh(shape, 32);
  REQUIRE(grid.faces.size() > 100);
  double h = 2.0 / 32;
  for (const Vec2& p : grid.uv)
    REQUIRE(panel_sdf_label(shape, p).s <= 0.3 * h);
  // Faces have positive area in pattern space (consistent orientation).
  double covered = 0;
  for (const auto& t : grid.faces) {
    Vec2 e1 = grid.uv[t[1]] - grid.uv[t[0]];
    Vec2 e2 = grid.uv[t[2]] - grid.uv[t[0]];
    double a2 = e1.x() * e2.y() - e1.y() * e2.x();
    REQUIRE(a2 > 0);
    covered += a2 / 2;
  }
  // Triangulated area matches the contour area to a one-cell boundary band.
  double perimeter = 0;
  for (int i = 0; i < shape.size(); i++)
    perimeter += (shape.points[(i + 1) % shape.size()] - shape.points[i]).norm();
  REQUIRE(std::abs(covered - panel_area(shape)) < perimeter * h);
}

TEST_CASE("rest mesh welds the rectangle skirt into a tube") {
  PanelLatent lat = make_latent(PanelFamily::skirt, 0.3, 0.3, 0.8, 0);
  BodyProxy body;
  TriMesh mesh = rest_mesh_from_latent(lat, body);
  REQUIRE(mesh.num_faces() > 0);
  REQUIRE_NOTHROW(validate_mesh(mesh));

  // Every boundary edge is an open (hem or waist) stitch; seams are interior.
  for (const auto& e : boundary_edges(mesh)) {
    auto it = mesh.stitches.find({e.v0, e.v1});
    REQUIRE(it != mesh.stitches.end());
    REQUIRE((it->second == StitchLabel::hem_free ||
             it->second == StitchLabel::waist_free));
  }

  // Welded vertices have front and back uv records and faces on both parts.
  auto records = vertex_uv_records(mesh);
  std::vector<uint8_t> part_seen(size_t(mesh.num_vertices()) * 2, 0);
  for (int f = 0; f < mesh.num_faces(); f++)
    for (int k = 0; k < 3; k++)
      part_seen[size_t(mesh.faces[f][k]) * 2 + mesh.part_of(f)] = 1;
  int welds = 0;
  for (int v = 0; v < mesh.num_vertices(); v++) {
    bool has_front = false, has_back = false;
    for (int rec : records[v]) {
      if (mesh.uvs[rec].side > 0) has_front = true;
      if (mesh.uvs[rec].side < 0) has_back = true;
    }
    if (has_front && has_back) {
      welds++;
      REQUIRE(part_seen[size_t(v) * 2 + 0] == 1);
      REQUIRE(part_seen[size_t(v) * 2 + 1] == 1);
      // The tube seams live on the +-x sides and close exactly at z = 0.
      REQUIRE(std::abs(mesh.vertices[v].z()) < 1e-15);
    }
  }
  REQUIRE(welds > 0);

  // Vertex count arithmetic: front count + back count - welds.
  int vp = int(mesh.uvs.size()) / 2;
  REQUIRE(mesh.num_vertices() == 2 * vp - welds);

  // The garment clears the body everywhere.
  BodyModel model = build_body(body);
  for (const Vec3& p : mesh.vertices) REQUIRE(model.sdf(p) > 0);
}

TEST_CASE("rest mesh vertex arithmetic holds for both families") {
  BodyProxy body;
  for (PanelFamily fam : {PanelFamily::skirt, PanelFamily::trousers}) {
    TriMesh mesh = rest_mesh_from_latent(panel_default_latent(fam), body);
    auto records = vertex_uv_records(mesh);
    int welds = 0;
    for (int v = 0; v < mesh.num_vertices(); v++) {
      bool f = false, b = false;
      for (int rec : records[v]) {
        if (mesh.uvs[rec].side > 0) f = true;
        if (mesh.uvs[rec].side < 0) b = true;
      }
      welds += f && b;
    }
    int vp = int(mesh.uvs.size()) / 2;
    REQUIRE(mesh.num_vertices() == 2 * vp - welds);
    REQUIRE(welds > 0);
    BodyModel model = build_body(body);
    for (const Vec3& p : mesh.vertices) REQUIRE(model.sdf(p) > -1e-9);
  }
}

TEST_CASE("mismatched seam lengths raise a stitch error") {
  PanelLatent lat = panel_default_latent(PanelFamily::trousers);
  PanelShape front = panel_from_latent(lat).first;
  // A back piece cut for a 10% longer leg cannot be sewn to this front.
  PanelLatent longer = lat;
  longer.z[1] = 1.43;
  PanelShape back = panel_from_latent(longer).second;
  BodyProxy body;
  REQUIRE_THROWS_WITH(rest_mesh_from_panels(lat, front, back, body),
                      ContainsSubstring("stitch error"));
}

TEST_CASE("positional maps match the analytic lift of cell centers") {
  PanelLatent lat = panel_default_latent(PanelFamily::skirt);
  BodyProxy body;
  RestMeshOptions opt;
  TriMesh mesh = rest_mesh_from_latent(lat, body, opt);
  UVMaps maps = build_uv_maps(mesh);
  REQUIRE_NOTHROW(validate_uv_maps(maps));
  REQUIRE(maps.count_covered() > 0);

  BodyModel model = build_body(body);
  detail::PanelLift lift{lat, &model, opt};
  double h = 2.0 / maps.half();
  double diag = std::sqrt(2.0) * h;
  for (int r = 0; r < maps.rows; r++)
    for (int c = 0; c < maps.cols; c++) {
      if (!maps.at_mask(r, c)) continue;
      Vec2 uv;
      double side;
      uvmap_cell_center(maps, r, c, uv, side);
      Vec3 analytic = lift.lift(uv, side);
      const double* cell = maps.cell(r, c);
      Vec3 stored(cell[0], cell[1], cell[2]);
      // Local Lipschitz bound of the lift at this cell, from differences.
      double L = 0;
      for (int k = 0; k < 2; k++) {
        Vec2 d = Vec2::Zero();
        d[k] = 1e-4;
        L = std::max(L, (lift.lift(uv + d, side) - lift.lift(uv - d, side)).norm() /
                            2e-4);
      }
      REQUIRE((stored - analytic).norm() <= 2 * L * diag + 1e-9);
    }
}

TEST_CASE("panel mask agrees with the signed distance up to one cell") {
  PanelLatent lat = panel_default_latent(PanelFamily::trousers);
  BodyProxy body;
  TriMesh mesh = rest_mesh_from_latent(lat, body);
  UVMaps maps = build_uv_maps(mesh);
  PanelShape shape = panel_from_latent(lat).first;
  double band = std::sqrt(2.0) * (2.0 / maps.half()) / 2;
  for (int r = 0; r < maps.rows; r++)
    for (int c = 0; c < maps.cols; c++) {
      Vec2 uv;
      double side;
      uvmap_cell_center(maps, r, c, uv, side);
      double s = panel_sdf_label(shape, uv).s;
      if (maps.at_mask(r, c))
        REQUIRE(s <= band + 1e-9);
      else
        REQUIRE(s >= -band - 1e-9);
    }
  // Front and back panels share the pattern, so the halves' masks agree.
  for (int r = 0; r < maps.rows; r++)
    for (int c = 0; c < maps.half(); c++)
      REQUIRE(maps.at_mask(r, c) == maps.at_mask(r, c + maps.half()));
}

TEST_CASE("translating the mesh translates covered map entries exactly") {
  BodyProxy body;
  TriMesh mesh = rest_mesh_from_latent(panel_default_latent(PanelFamily::skirt), body);
  Vec3 t(0.5, 0.25, -0.125);
  TriMesh moved = mesh;
  for (Vec3& v : moved.vertices) v += t;
  UVMaps a = build_uv_maps(mesh);
  UVMaps b = build_uv_maps(moved);
  REQUIRE(a.mask == b.mask);
  for (int r = 0; r < a.rows; r++)
    for (int c = 0; c < a.cols; c++) {
      if (!a.at_mask(r, c)) continue;
      for (int k = 0; k < 3; k++)
        REQUIRE(b.cell(r, c)[k] == Catch::Approx(a.cell(r, c)[k] + t[k]).margin(1e-12));
    }
}

TEST_CASE("uv maps round-trip through pfm files") {
  BodyProxy body;
  TriMesh mesh = rest_mesh_from_latent(panel_default_latent(PanelFamily::trousers), body);
  UVMaps maps = build_uv_maps(mesh);
  write_uv_maps("/tmp/garm_test_uv_pos.pfm", "/tmp/garm_test_uv_mask.pfm", maps);
  UVMaps loaded = read_uv_maps("/tmp/garm_test_uv_pos.pfm", "/tmp/garm_test_uv_mask.pfm");
  REQUIRE(loaded.rows == maps.rows);
  REQUIRE(loaded.cols == maps.cols);
  REQUIRE(loaded.mask == maps.mask);
  for (int r = 0; r < maps.rows; r++)
    for (int c = 0; c < maps.cols; c++)
      for (int k = 0; k < 3; k++)
        REQUIRE(loaded.cell(r, c)[k] == Catch::Approx(maps.cell(r, c)[k]).margin(1e-6));
}

TEST_CASE("applying a rest map returns the rest mesh within sampling error") {
  BodyProxy body;
  for (PanelFamily fam : {PanelFamily::skirt, PanelFamily::trousers}) {
    TriMesh rest = rest_mesh_from_latent(panel_default_latent(fam), body);
    UVMaps maps = build_uv_maps(rest);
    TriMesh out = apply_uv_map(rest, maps);
    REQUIRE(out.faces == rest.faces);
    REQUIRE(out.face_uvs == rest.face_uvs);

    // World size of one grid cell: the largest 3D-to-uv stretch over edges.
    double cell_world = 0;
    double h = 2.0 / maps.half();
    for (int f = 0; f < rest.num_faces(); f++)
      for (int k = 0; k < 3; k++) {
        int a = rest.faces[f][k], b = rest.faces[f][(k + 1) % 3];
        double du = (rest.uvs[rest.face_uvs[f][k]].uv -
                     rest.uvs[rest.face_uvs[f][(k + 1) % 3]].uv).norm();
        if (du < 1e-9) continue;
        double dw = (rest.vertices[a] - rest.vertices[b]).norm();
        cell_world = std::max(cell_world, dw / du * h);
      }
    double worst = 0;
    for (int v = 0; v < rest.num_vertices(); v++)
      worst = std::max(worst, (out.vertices[v] - rest.vertices[v]).norm());
    REQUIRE(worst < 2 * cell_world);
  }
}

TEST_CASE("shifting the positional map shifts the applied mesh") {
  BodyProxy body;
  TriMesh rest = rest_mesh_from_latent(panel_default_latent(PanelFamily::skirt), body);
  UVMaps maps = build_uv_maps(rest);
  Vec3 t(-0.3, 0.7, 0.2);
  UVMaps shifted = maps;
  for (int r = 0; r < maps.rows; r++)
    for (int c = 0; c < maps.cols; c++) {
      if (!maps.at_mask(r, c)) continue;
      for (int k = 0; k < 3; k++) shifted.cell(r, c)[k] += t[k];
    }
  TriMesh base = apply_uv_map(rest, maps);
  TriMesh moved = apply_uv_map(rest, shifted);
  for (int v = 0; v < rest.num_vertices(); v++)
    REQUIRE((moved.vertices[v] - base.vertices[v] - t).norm() < 1e-9);

  UVMaps empty = make_uv_maps(maps.rows, maps.cols);
  REQUIRE_THROWS_AS(apply_uv_map(rest, empty), std::invalid_argument);
}

TEST_CASE("latent fitting recovers a full observed mask") {
  for (PanelFamily fam : {PanelFamily::skirt, PanelFamily::trousers}) {
    PanelLatent gt = fam == PanelFamily::skirt
                         ? make_latent(fam, 0.30, 0.50, 0.90, 0.04)
                         : make_latent(fam, 0.40, 1.20, 0.12, 0.30);
    PanelShape shape = panel_from_latent(gt).first;
    UVMaps grid = make_uv_maps();
    std::vector<uint8_t> gt_mask = contour_mask(shape, grid);
    UVMaps observed = maps_from_mask(gt_mask, grid.rows, grid.cols);

    FitResult fit = fit_latent(fam, observed, +1);
    for (size_t i = 1; i < fit.trace.size(); i++)
      REQUIRE(fit.trace[i].loss <= fit.trace[i - 1].loss + 1e-12);

    std::vector<uint8_t> fit_mask =
        contour_mask(panel_from_latent(fit.latent).first, grid);
    double iou = mask_vec_iou(fit_mask, gt_mask);
    INFO("family " << panel_family_name(fam) << " iou " << iou);
    REQUIRE(iou > 0.97);
  }
}

TEST_CASE("latent fitting completes a subsampled mask") {
  PanelLatent gt = make_latent(PanelFamily::skirt, 0.32, 0.52, 0.95, 0.05);
  PanelShape shape = panel_from_latent(gt).first;
  UVMaps grid = make_uv_maps();
  std::vector<uint8_t> gt_mask = contour_mask(shape, grid);
  Rng rng(23);
  std::vector<uint8_t> sub = gt_mask;
  for (auto& m : sub)
    if (m && rng.uniform() > 0.6) m = 0;
  UVMaps observed = maps_from_mask(sub, grid.rows, grid.cols);

  FitResult fit = fit_latent(PanelFamily::skirt, observed, +1);
  std::vector<uint8_t> completed =
      contour_mask(panel_from_latent(fit.latent).first, grid);
  double iou = mask_vec_iou(completed, gt_mask);
  INFO("subsampled iou " << iou);
  REQUIRE(iou > 0.9);
}

TEST_CASE("area and hinge terms behave as specified") {
  UVMaps grid = make_uv_maps();
  std::vector<uint8_t> blob(size_t(grid.rows) * grid.half(), 0);
  for (int r = 15; r <= 16; r++)
    for (int c = 15; c <= 16; c++) blob[size_t(r) * grid.half() + c] = 1;
  UVMaps observed = maps_from_mask(blob, grid.rows, grid.cols);

  // Without the area term any panel containing the cell has zero data loss.
  FitOptions no_area;
  no_area.lambda_area = 0;
  no_area.lambda_z = 0;
  FitResult flat = fit_latent(PanelFamily::skirt, observed, +1, no_area);
  REQUIRE(flat.trace.front().loss == 0.0);
  REQUIRE(flat.trace.back().loss == 0.0);

  // With it, the contour area strictly shrinks across accepted iterates.
  FitOptions with_area;
  with_area.lambda_z = 0;
  FitResult shrink = fit_latent(PanelFamily::skirt, observed, +1, with_area);
  REQUIRE(shrink.trace.size() > 3);
  for (size_t i = 1; i < shrink.trace.size(); i++) {
    if ((shrink.trace[i].z - shrink.trace[i - 1].z).norm() == 0) continue;
    REQUIRE(shrink.trace[i].area < shrink.trace[i - 1].area);
  }
  REQUIRE(shrink.trace.back().area < 0.7 * shrink.trace.front().area);
}

TEST_CASE("diverging fits abort with an iterate dump") {
  UVMaps grid = make_uv_maps();
  std::vector<uint8_t> blob(size_t(grid.rows) * grid.half(), 0);
  blob[15 * grid.half() + 15] = 1;
  UVMaps observed = maps_from_mask(blob, grid.rows, grid.cols);
  FitOptions opt;
  opt.lambda_z = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_WITH(fit_latent(PanelFamily::skirt, observed, +1, opt),
                      ContainsSubstring("iterate history"));
}
