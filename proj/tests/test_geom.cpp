#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>

#include "garm/asset_io.hpp"
#include "garm/camera.hpp"
#include "garm/image.hpp"
#include "garm/mesh.hpp"
#include "garm/raster.hpp"

using namespace garm;

namespace {

CameraRig identity_camera() {
  CameraRig cam;
  cam.focal = 100;
  cam.cx = 32;
  cam.cy = 32;
  cam.width = 64;
  cam.height = 64;
  return cam;  // rot = I, eye = origin, looking along +z
}

// Two-triangle square of half side s in the z = depth plane, uvs spanning
// the front panel domain.
TriMesh square_mesh(double s, double depth, double side_flag = 1.0) {
  TriMesh m;
  m.vertices = {{-s, -s, depth}, {s, -s, depth}, {s, s, depth}, {-s, s, depth}};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  m.uvs = {{{-1, -1}, side_flag},
           {{1, -1}, side_flag},
           {{1, 1}, side_flag},
           {{-1, 1}, side_flag}};
  m.face_uvs = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("rng is deterministic and well scaled") {
  Rng a(7), b(7);
  for (int i = 0; i < 100; i++) REQUIRE(a.uniform() == b.uniform());
  for (int i = 0; i < 100; i++) REQUIRE(a.normal() == b.normal());
  Rng r(123);
  double mean = 0, var = 0;
  const int n = 100000;
  for (int i = 0; i < n; i++) {
    double x = r.normal();
    mean += x;
    var += x * x;
  }
  mean /= n;
  var = var / n - mean * mean;
  REQUIRE(std::abs(mean) < 0.02);
  REQUIRE(std::abs(var - 1.0) < 0.03);
  Rng u(5);
  for (int i = 0; i < 1000; i++) {
    double x = u.uniform();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
    int k = u.uniform_int(2, 5);
    REQUIRE(k >= 2);
    REQUIRE(k <= 5);
  }
}

TEST_CASE("pinhole projection matches worked examples") {
  CameraRig cam = identity_camera();
  Vec3 a = project(cam, Vec3(0, 0, 2));
  REQUIRE(a.x() == Catch::Approx(32.0));
  REQUIRE(a.y() == Catch::Approx(32.0));
  REQUIRE(a.z() == Catch::Approx(2.0));
  Vec3 b = project(cam, Vec3(0.1, 0, 2));
  REQUIRE(b.x() == Catch::Approx(37.0));
  REQUIRE(b.y() == Catch::Approx(32.0));
  REQUIRE(b.z() == Catch::Approx(2.0));
  REQUIRE_THROWS_AS(project(cam, Vec3(0, 0, -1)), std::domain_error);
  REQUIRE_THROWS_AS(backproject(cam, 32, 32, 0.0), std::domain_error);
}

TEST_CASE("backproject inverts project") {
  CameraRig cam = make_lookat_camera(Vec3(0.2, 0.9, 2.4), Vec3(0, 0.85, 0), 96, 64, 64);
  Rng rng(42);
  for (int i = 0; i < 200; i++) {
    Vec3 p(rng.uniform(-0.5, 0.5), rng.uniform(0.2, 1.6), rng.uniform(-0.5, 0.5));
    Vec3 s = project(cam, p);
    Vec3 q = backproject(cam, s.x(), s.y(), s.z());
    REQUIRE((q - p).norm() < 1e-12);
  }
}

TEST_CASE("lookat camera maps world up to image up") {
  CameraRig cam = make_lookat_camera(Vec3(0, 0.85, 2.4), Vec3(0, 0.85, 0), 96, 64, 64);
  Vec3 high = project(cam, Vec3(0, 1.3, 0));
  Vec3 low = project(cam, Vec3(0, 0.4, 0));
  REQUIRE(high.y() < low.y());  // image y grows downward
  Vec3 right = project(cam, Vec3(0.3, 0.85, 0));
  REQUIRE(right.x() > cam.cx);
}

TEST_CASE("mirror camera views the scene from behind and is an involution") {
  CameraRig cam = make_lookat_camera(Vec3(0, 0.85, 2.4), Vec3(0, 0.85, 0), 96, 64, 64);
  CameraRig back = mirror_camera(cam);
  REQUIRE((back.eye - Vec3(0, 0.85, -2.4)).norm() < 1e-12);
  // A point on the subject's right appears on opposite image sides.
  Vec3 p(0.3, 0.85, 0);
  Vec3 f = project(cam, p), g = project(back, p);
  REQUIRE(f.x() > cam.cx);
  REQUIRE(g.x() < back.cx);
  REQUIRE(f.z() == Catch::Approx(g.z()));
  // Round trip through the mirrored rig.
  Vec3 q = backproject(back, g.x(), g.y(), g.z());
  REQUIRE((q - p).norm() < 1e-12);
  CameraRig twice = mirror_camera(back);
  REQUIRE((twice.eye - cam.eye).norm() == 0.0);
  REQUIRE((twice.rot - cam.rot).norm() == 0.0);
}

TEST_CASE("rasterizer fills a known square exactly") {
  CameraRig cam = identity_camera();
  TriMesh sq = square_mesh(0.5, 2.0);
  auto imgs = render_channels(cam, {{&sq}}, {ChannelTag::mask, ChannelTag::depth,
                                             ChannelTag::uvcoord, ChannelTag::normal});
  const ChannelImage& mask = imgs[0];
  const ChannelImage& depth = imgs[1];
  const ChannelImage& uv = imgs[2];
  const ChannelImage& nrm = imgs[3];
  // Screen extent is [7,57] in both axes, so 50x50 pixel centers inside.
  REQUIRE(count_foreground(mask) == 2500);
  int fg = 0;
  for (int y = 0; y < 64; y++)
    for (int x = 0; x < 64; x++) {
      if (!is_foreground(mask, y, x)) {
        REQUIRE(depth.at(y, x) == 0.0f);
        continue;
      }
      fg++;
      REQUIRE(depth.at(y, x) == Catch::Approx(2.0));
      // Camera-facing normals have negative z in the camera frame.
      REQUIRE(nrm.at(y, x, 2) < 0.0f);
      REQUIRE(uv.at(y, x, 2) == 1.0f);
    }
  REQUIRE(fg == 2500);
  // uv at the image center is the panel origin.
  REQUIRE(uv.at(32, 32, 0) == Catch::Approx(0.0).margin(0.05));
  REQUIRE(uv.at(32, 32, 1) == Catch::Approx(0.0).margin(0.05));
}

TEST_CASE("rasterizer foreground is consistent across channels") {
  CameraRig cam = make_lookat_camera(Vec3(0.1, 0.2, 2.2), Vec3(0, 0, 0), 90, 48, 40);
  TriMesh sq = square_mesh(0.4, 0.0);
  // Tilt it so depth varies.
  for (auto& v : sq.vertices) v.z() = 0.3 * v.x() + 0.1 * v.y();
  auto imgs = render_channels(cam, {{&sq}},
                              {ChannelTag::mask, ChannelTag::depth,
                               ChannelTag::segmentation, ChannelTag::uvcoord});
  for (int y = 0; y < cam.height; y++)
    for (int x = 0; x < cam.width; x++) {
      bool f0 = is_foreground(imgs[0], y, x);
      for (int c = 1; c < 4; c++) REQUIRE(is_foreground(imgs[c], y, x) == f0);
    }
  REQUIRE(count_foreground(imgs[0]) > 0);
}

TEST_CASE("rasterizer depth test keeps the nearer surface") {
  CameraRig cam = identity_camera();
  TriMesh far_sq = square_mesh(0.5, 2.0);
  TriMesh near_sq = square_mesh(0.1, 1.5);
  far_sq.face_part = {0, 0};
  near_sq.face_part = {0, 0};
  auto seg = render_channels(cam, {{&far_sq, 1}, {&near_sq, 2}},
                             {ChannelTag::segmentation, ChannelTag::depth});
  REQUIRE(seg[0].at(32, 32) == 2.0f);
  REQUIRE(seg[1].at(32, 32) == Catch::Approx(1.5));
  REQUIRE(seg[0].at(12, 32) == 1.0f);
  REQUIRE(seg[1].at(12, 32) == Catch::Approx(2.0));
  // Same scene renders identically twice.
  auto seg2 = render_channels(cam, {{&far_sq, 1}, {&near_sq, 2}},
                              {ChannelTag::segmentation, ChannelTag::depth});
  REQUIRE(seg2[0].data == seg[0].data);
  REQUIRE(seg2[1].data == seg[1].data);
}

TEST_CASE("obj round trip preserves geometry, uvs, parts, stitches, colors") {
  TriMesh m = square_mesh(0.731, 1.25, -1.0);
  m.face_part = {0, 1};
  m.stitches[{0, 1}] = StitchLabel::hem_free;
  m.stitches[{2, 3}] = StitchLabel::waist_free;
  m.colors = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0.25, 0.5, 0.75}};
  m.vertices[2] = Vec3(1.0 / 3.0, 0.1234567890123456789, -2e-7);
  std::string path = temp_path("garm_roundtrip.obj");
  write_obj(path, m);
  TriMesh r = read_obj(path);
  REQUIRE(r.num_vertices() == m.num_vertices());
  REQUIRE(r.num_faces() == m.num_faces());
  for (int i = 0; i < m.num_vertices(); i++) {
    REQUIRE((r.vertices[i] - m.vertices[i]).norm() == 0.0);
    REQUIRE((r.colors[i] - m.colors[i]).norm() == 0.0);
  }
  for (int f = 0; f < m.num_faces(); f++) {
    REQUIRE(r.faces[f] == m.faces[f]);
    REQUIRE(r.face_uvs[f] == m.face_uvs[f]);
    REQUIRE(r.part_of(f) == m.part_of(f));
  }
  for (size_t i = 0; i < m.uvs.size(); i++) {
    REQUIRE((r.uvs[i].uv - m.uvs[i].uv).norm() == 0.0);
    REQUIRE(r.uvs[i].side == m.uvs[i].side);
  }
  REQUIRE(r.stitches == m.stitches);
  std::remove(path.c_str());
}

TEST_CASE("obj parser reports malformed input with line numbers") {
  REQUIRE_THROWS_WITH(read_obj_string("v 1 2\n", "bad.obj"),
                      Catch::Matchers::ContainsSubstring("bad.obj:1"));
  REQUIRE_THROWS_WITH(read_obj_string("v 0 0 0\nf 1 1\n", "bad.obj"),
                      Catch::Matchers::ContainsSubstring("bad.obj:2"));
  REQUIRE_THROWS_AS(read_obj_string("v 0 0 0\nf 1 2 3\n"), std::invalid_argument);
}

TEST_CASE("pfm round trip is bit exact") {
  Rng rng(9);
  for (ChannelTag tag : {ChannelTag::depth, ChannelTag::uvcoord}) {
    ChannelImage img = make_channel_image(tag, 13, 21);
    for (auto& v : img.data) v = float(rng.normal());
    std::string path = temp_path("garm_roundtrip.pfm");
    write_pfm(path, img);
    ChannelImage r = read_pfm(path, tag);
    REQUIRE(r.height == img.height);
    REQUIRE(r.width == img.width);
    REQUIRE(r.data == img.data);
    std::remove(path.c_str());
  }
}

TEST_CASE("ppm round trip preserves 8-bit colors") {
  ChannelImage img = make_channel_image(ChannelTag::texture, 5, 7);
  Rng rng(4);
  for (auto& v : img.data) v = float(rng.uniform_int(0, 255) / 255.0);
  std::string path = temp_path("garm_roundtrip.ppm");
  write_ppm(path, img);
  ChannelImage r = read_ppm(path);
  REQUIRE(r.data == img.data);
  std::remove(path.c_str());
}

TEST_CASE("distance transform matches brute force") {
  Rng rng(31);
  for (int trial = 0; trial < 5; trial++) {
    ChannelImage mask = make_channel_image(ChannelTag::mask, 16, 16);
    int n_fg = trial == 0 ? 1 : rng.uniform_int(2, 30);
    for (int i = 0; i < n_fg; i++)
      mask.at(rng.uniform_int(0, 15), rng.uniform_int(0, 15)) = 1.0f;
    ChannelImage dt = distance_transform(mask);
    for (int y = 0; y < 16; y++)
      for (int x = 0; x < 16; x++) {
        double best = 1e18;
        for (int yy = 0; yy < 16; yy++)
          for (int xx = 0; xx < 16; xx++)
            if (is_foreground(mask, yy, xx))
              best = std::min(best, std::sqrt(sqr(double(x - xx)) + sqr(double(y - yy))));
        REQUIRE(dt.at(y, x) == Catch::Approx(best).margin(1e-6));
      }
  }
}

TEST_CASE("bilinear sampling gradient matches finite differences") {
  ChannelImage img = make_channel_image(ChannelTag::depth, 8, 8);
  Rng rng(11);
  for (auto& v : img.data) v = float(rng.normal());
  for (int i = 0; i < 50; i++) {
    double px = rng.uniform(1.2, 6.8), py = rng.uniform(1.2, 6.8);
    double dx, dy;
    bilinear_sample_grad(img, px, py, 0, dx, dy);
    double h = 1e-5;
    double fdx = (bilinear_sample(img, px + h, py, 0) - bilinear_sample(img, px - h, py, 0)) / (2 * h);
    double fdy = (bilinear_sample(img, px, py + h, 0) - bilinear_sample(img, px, py - h, 0)) / (2 * h);
    // Skip probes that straddle a cell boundary where the kink lives.
    if (std::abs(px - 0.5 - std::round(px - 0.5)) < 2 * h) continue;
    if (std::abs(py - 0.5 - std::round(py - 0.5)) < 2 * h) continue;
    REQUIRE(dx == Catch::Approx(fdx).margin(1e-6));
    REQUIRE(dy == Catch::Approx(fdy).margin(1e-6));
  }
}

TEST_CASE("mask iou on known overlap") {
  ChannelImage a = make_channel_image(ChannelTag::mask, 4, 4);
  ChannelImage b = make_channel_image(ChannelTag::mask, 4, 4);
  for (int y = 0; y < 2; y++)
    for (int x = 0; x < 4; x++) a.at(y, x) = 1;
  for (int y = 1; y < 3; y++)
    for (int x = 0; x < 4; x++) b.at(y, x) = 1;
  REQUIRE(mask_iou(a, b) == Catch::Approx(4.0 / 12.0));
  REQUIRE(mask_iou(a, a) == 1.0);
}
