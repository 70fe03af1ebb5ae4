#pragma once

#include <garm/asset_io.hpp>
#include <garm/panel_mesh.hpp>
#include <garm/raster.hpp>
#include <garm/relax.hpp>
#include <garm/uvmap.hpp>

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace garm {

using json = nlohmann::ordered_json;

// Front camera framing the canonical body; the back view is its mirror
// about the vertical axis through the scene center.
inline CameraRig default_front_camera(int size = 64, double focal = 96.0) {
  return make_lookat_camera(Vec3(0, 0.85, 2.4), Vec3(0, 0.85, 0), focal, size,
                            size);
}

struct DatasetConfig {
  int n_garments = 33;  // per family; the tail of each family is the test split
  int n_frames = 4;
  uint64_t seed = 1;
  std::string out_dir;
  std::vector<PanelFamily> families = {PanelFamily::skirt,
                                       PanelFamily::trousers};
  int image_size = 64;
  double focal = 96.0;
  int map_rows = 32, map_cols = 64;
  double pose_step = 0.08;
  // Per-frame pose changes are applied in substeps with a relax each, so a
  // swinging limb pushes the cloth along instead of tunneling through it
  // (collision is vertex-only; a discrete jump can cross an edge).
  int pose_substeps = 4;
  RestMeshOptions rest;
  ClothMaterial material;
  SimConfig sim;
};

// One dataset frame in world coordinates, ready to render.
struct FrameScene {
  TriMesh garment;
  TriMesh body_surface;
  BodyModel body;
  BodyProxy proxy;
  CameraRig camera;
};

// The twelve per-frame channel images: garment-only renders from both
// views plus body-only segmentation and depth (the ordering loss needs the
// body depth unoccluded by cloth).
struct FrameChannels {
  ChannelImage normal_front, normal_back;      // garment normals, camera frame
  ChannelImage uv_front, uv_back;              // (u, v, side) per garment pixel
  ChannelImage mask_front, mask_back;          // garment coverage
  ChannelImage depth_g_front, depth_g_back;    // garment depth
  ChannelImage seg_front, seg_back;            // body part ids
  ChannelImage depth_b_front, depth_b_back;    // body depth
};

inline FrameChannels render_frame_channels(const FrameScene& scene) {
  CameraRig front = scene.camera;
  CameraRig back = mirror_camera(front);
  std::vector<SceneObject> garment = {{&scene.garment}};
  std::vector<SceneObject> body = {{&scene.body_surface}};
  const std::vector<ChannelTag> gtags = {ChannelTag::normal, ChannelTag::uvcoord,
                                         ChannelTag::mask, ChannelTag::depth};
  const std::vector<ChannelTag> btags = {ChannelTag::segmentation,
                                         ChannelTag::depth};
  FrameChannels ch;
  auto gf = render_channels(front, garment, gtags);
  ch.normal_front = std::move(gf[0]);
  ch.uv_front = std::move(gf[1]);
  ch.mask_front = std::move(gf[2]);
  ch.depth_g_front = std::move(gf[3]);
  auto gb = render_channels(back, garment, gtags);
  ch.normal_back = std::move(gb[0]);
  ch.uv_back = std::move(gb[1]);
  ch.mask_back = std::move(gb[2]);
  ch.depth_g_back = std::move(gb[3]);
  auto bf = render_channels(front, body, btags);
  ch.seg_front = std::move(bf[0]);
  ch.depth_b_front = std::move(bf[1]);
  auto bb = render_channels(back, body, btags);
  ch.seg_back = std::move(bb[0]);
  ch.depth_b_back = std::move(bb[1]);
  return ch;
}

namespace detail {

struct NamedChannel {
  const char* name;
  ChannelTag tag;
  ChannelImage FrameChannels::*member;
};

inline const std::vector<NamedChannel>& frame_channel_files() {
  static const std::vector<NamedChannel> files = {
      {"front_normal", ChannelTag::normal, &FrameChannels::normal_front},
      {"back_normal", ChannelTag::normal, &FrameChannels::normal_back},
      {"front_uv", ChannelTag::uvcoord, &FrameChannels::uv_front},
      {"back_uv", ChannelTag::uvcoord, &FrameChannels::uv_back},
      {"front_mask", ChannelTag::mask, &FrameChannels::mask_front},
      {"back_mask", ChannelTag::mask, &FrameChannels::mask_back},
      {"front_depth_garment", ChannelTag::depth, &FrameChannels::depth_g_front},
      {"back_depth_garment", ChannelTag::depth, &FrameChannels::depth_g_back},
      {"front_seg", ChannelTag::segmentation, &FrameChannels::seg_front},
      {"back_seg", ChannelTag::segmentation, &FrameChannels::seg_back},
      {"front_depth_body", ChannelTag::depth, &FrameChannels::depth_b_front},
      {"back_depth_body", ChannelTag::depth, &FrameChannels::depth_b_back},
  };
  return files;
}

}  // namespace detail

inline void save_frame_channels(const std::string& dir,
                                const FrameChannels& ch) {
  for (const auto& f : detail::frame_channel_files())
    write_pfm(dir + "/" + f.name + ".pfm", ch.*(f.member));
}

inline FrameChannels load_frame_channels(const std::string& dir) {
  FrameChannels ch;
  for (const auto& f : detail::frame_channel_files())
    ch.*(f.member) = read_pfm(dir + "/" + f.name + ".pfm", f.tag);
  return ch;
}

inline json camera_to_json(const CameraRig& cam) {
  return json{{"eye", {cam.eye.x(), cam.eye.y(), cam.eye.z()}},
              {"center", {cam.scene_center.x(), cam.scene_center.y(),
                          cam.scene_center.z()}},
              {"focal", cam.focal},
              {"width", cam.width},
              {"height", cam.height}};
}

inline CameraRig camera_from_json(const json& j) {
  Vec3 eye(j["eye"][0], j["eye"][1], j["eye"][2]);
  Vec3 center(j["center"][0], j["center"][1], j["center"][2]);
  return make_lookat_camera(eye, center, j["focal"], j["width"], j["height"]);
}

struct DatasetSummary {
  std::string manifest_path;
  int frames_ok = 0;
  int frames_diverged = 0;
};

// Sample garments, drape them over pose walks and write the frame corpus:
// OBJ meshes, channel PFMs, positional maps and a manifest carrying every
// sampled parameter. A diverged frame keeps its manifest entry (status
// "diverged") and writes no files.
inline DatasetSummary generate_dataset(const DatasetConfig& cfg) {
  namespace fs = std::filesystem;
  if (cfg.out_dir.empty())
    throw std::invalid_argument("generate_dataset: output directory not set");
  if (cfg.n_garments < 1 || cfg.n_frames < 1)
    throw std::invalid_argument(
        "generate_dataset: need at least one garment and one frame");
  fs::create_directories(cfg.out_dir);

  CameraRig camera = default_front_camera(cfg.image_size, cfg.focal);
  // Train/test split mirrors the 30/3 default at other corpus sizes.
  int n_test = cfg.n_garments >= 2
                   ? std::max(1, int(std::lround(cfg.n_garments * 3.0 / 33.0)))
                   : 0;

  json manifest;
  manifest["image_size"] = cfg.image_size;
  manifest["map_rows"] = cfg.map_rows;
  manifest["map_cols"] = cfg.map_cols;
  manifest["camera"] = camera_to_json(camera);
  manifest["material"] = {{"stretch", cfg.material.stretch},
                          {"bend", cfg.material.bend},
                          {"density", cfg.material.density},
                          {"gravity", cfg.material.gravity},
                          {"collision", cfg.material.collision},
                          {"margin", cfg.material.margin}};
  manifest["seed"] = cfg.seed;
  manifest["garments"] = json::array();

  DatasetSummary summary;
  int garment_id = 0;
  for (size_t fi = 0; fi < cfg.families.size(); fi++) {
    PanelFamily family = cfg.families[fi];
    for (int g = 0; g < cfg.n_garments; g++, garment_id++) {
      Rng rng(cfg.seed * 1000003 + fi * 1009 + g);
      PanelLatent lat = sample_latent(family, rng);
      BodyProxy canonical;
      TriMesh rest = rest_mesh_from_latent(lat, canonical, cfg.rest);

      std::string gdir = str_format("garment_%04d", garment_id);
      fs::create_directories(fs::path(cfg.out_dir) / gdir);
      write_obj(cfg.out_dir + "/" + gdir + "/rest.obj", rest);

      SimConfig sim = cfg.sim;
      sim.pinned = stitch_role_vertices(rest, StitchLabel::waist_free);

      json jg;
      jg["id"] = garment_id;
      jg["family"] = panel_family_name(family);
      jg["dir"] = gdir;
      jg["split"] = g >= cfg.n_garments - n_test ? "test" : "train";
      jg["latent"] = {lat.z[0], lat.z[1], lat.z[2], lat.z[3]};
      jg["frames"] = json::array();

      BodyModel canonical_body = build_body(canonical);
      ClothRest rest_state = cloth_rest_state(rest, cfg.material);
      SimResult drape =
          relax(rest, rest_state, &canonical_body, cfg.material, sim);
      jg["drape"] = {{"iterations", drape.iterations},
                     {"energy", drape.energy},
                     {"converged", drape.converged}};

      TriMesh prev = drape.mesh;
      VecX theta = canonical.theta;
      for (int f = 0; f < cfg.n_frames; f++) {
        VecX theta_prev = theta;
        theta = sample_pose_walk(rng, theta, cfg.pose_step);
        double yaw = rng.uniform(-pi, pi);
        BodyProxy posed = canonical;
        posed.theta = theta;

        json jf;
        jf["id"] = f;
        jf["theta"] = std::vector<double>(theta.data(),
                                          theta.data() + theta.size());
        jf["yaw"] = yaw;
        SimResult res;
        try {
          int steps = std::max(1, cfg.pose_substeps);
          for (int s = 1; s <= steps; s++) {
            BodyProxy sub = canonical;
            sub.theta = theta_prev + (double(s) / steps) * (theta - theta_prev);
            BodyModel sub_body = build_body(sub);
            SimConfig sub_sim = sim;
            if (s < steps) sub_sim.max_iterations = sim.max_iterations / steps;
            res = relax(prev, rest_state, &sub_body, cfg.material, sub_sim);
            prev = res.mesh;
          }
        } catch (const SolverDiverged& e) {
          jf["status"] = "diverged";
          jf["error"] = e.what();
          jg["frames"].push_back(jf);
          summary.frames_diverged++;
          continue;  // next frame warm-starts from the last good substep
        }

        FrameScene scene;
        scene.proxy = posed;
        scene.proxy.yaw = yaw;
        scene.body = build_body(scene.proxy);
        scene.body_surface = body_mesh(scene.body);
        scene.garment = rotate_mesh_y(res.mesh, yaw, Vec3::Zero());
        scene.camera = camera;

        std::string fdir = gdir + "/" + str_format("frame_%04d", f);
        fs::create_directories(fs::path(cfg.out_dir) / fdir);
        std::string fpath = cfg.out_dir + "/" + fdir;
        write_obj(fpath + "/garment.obj", scene.garment);
        write_obj(fpath + "/body.obj", scene.body_surface);
        save_frame_channels(fpath, render_frame_channels(scene));
        UVMaps maps =
            build_uv_maps(scene.garment, cfg.map_rows, cfg.map_cols);
        write_uv_maps(fpath + "/uv_pos.pfm", fpath + "/uv_mask.pfm", maps);

        double min_sdf = std::numeric_limits<double>::infinity();
        for (const auto& v : scene.garment.vertices)
          min_sdf = std::min(min_sdf, scene.body.sdf(v));
        jf["status"] = "ok";
        jf["dir"] = fdir;
        jf["iterations"] = res.iterations;
        jf["energy"] = res.energy;
        jf["converged"] = res.converged;
        jf["min_sdf"] = min_sdf;
        jg["frames"].push_back(jf);
        summary.frames_ok++;
      }
      manifest["garments"].push_back(jg);
    }
  }

  summary.manifest_path = cfg.out_dir + "/manifest.json";
  write_text_file(summary.manifest_path, manifest.dump(2) + "\n");
  return summary;
}

inline DatasetSummary generate_dataset(int n_garments, int n_frames,
                                       uint64_t seed,
                                       const std::string& out_dir) {
  DatasetConfig cfg;
  cfg.n_garments = n_garments;
  cfg.n_frames = n_frames;
  cfg.seed = seed;
  cfg.out_dir = out_dir;
  return generate_dataset(cfg);
}

}  // namespace garm
