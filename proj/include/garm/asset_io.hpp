#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "image.hpp"
#include "mesh.hpp"

namespace garm {

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- OBJ ---------------------------------------------------------------
//
// Standard v/vt/f records. Extensions used by this project:
//  - "v x y z r g b"      per-vertex color (common extension)
//  - "vt u v w"           w stores the panel side flag (+1 front, -1 back)
//  - "usemtl part_<k>"    faces that follow carry part id k
//  - "# stitch a b label" boundary edge role, 0-based vertex indices

inline std::string write_obj_string(const TriMesh& mesh,
                                    const std::string& mtl_name = "") {
  std::ostringstream out;
  out << "# triangle mesh, " << mesh.num_vertices() << " vertices, "
      << mesh.num_faces() << " faces\n";
  if (!mtl_name.empty()) out << "mtllib " << mtl_name << "\n";
  bool colored = !mesh.colors.empty();
  for (int i = 0; i < mesh.num_vertices(); i++) {
    const Vec3& v = mesh.vertices[i];
    if (colored) {
      const Vec3& c = mesh.colors[i];
      out << str_format("v %.17g %.17g %.17g %.17g %.17g %.17g\n", v.x(), v.y(),
                        v.z(), c.x(), c.y(), c.z());
    } else {
      out << str_format("v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    }
  }
  for (const auto& r : mesh.uvs)
    out << str_format("vt %.17g %.17g %.17g\n", r.uv.x(), r.uv.y(), r.side);
  int cur_part = std::numeric_limits<int>::min();
  for (int f = 0; f < mesh.num_faces(); f++) {
    int part = mesh.part_of(f);
    if (part != cur_part) {
      out << "usemtl part_" << part << "\n";
      cur_part = part;
    }
    const auto& t = mesh.faces[f];
    if (mesh.has_uvs()) {
      const auto& u = mesh.face_uvs[f];
      out << "f " << t[0] + 1 << "/" << u[0] + 1 << " " << t[1] + 1 << "/"
          << u[1] + 1 << " " << t[2] + 1 << "/" << u[2] + 1 << "\n";
    } else {
      out << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
    }
  }
  for (const auto& [key, label] : mesh.stitches)
    out << "# stitch " << key.first << " " << key.second << " "
        << stitch_label_name(label) << "\n";
  return out.str();
}

inline void write_obj(const std::string& path, const TriMesh& mesh,
                      const std::string& mtl_name = "") {
  write_text_file(path, write_obj_string(mesh, mtl_name));
}

inline TriMesh read_obj_string(const std::string& text,
                               const std::string& name = "<string>") {
  TriMesh mesh;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  int cur_part = 0;
  bool any_part = false;
  bool any_color = false;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error(str_format("%s:%d: %s", name.c_str(), lineno,
                                        msg.c_str()));
  };
  while (std::getline(in, line)) {
    lineno++;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok == "#") {
      std::string kind;
      if (ls >> kind && kind == "stitch") {
        int a, b;
        std::string label;
        if (!(ls >> a >> b >> label)) fail("malformed stitch comment");
        mesh.stitches[std::minmax(a, b)] = stitch_label_from_name(label);
      }
    } else if (tok == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) fail("malformed vertex");
      mesh.vertices.emplace_back(x, y, z);
      double r, g, bb;
      if (ls >> r >> g >> bb) {
        mesh.colors.resize(mesh.vertices.size(), Vec3(1, 1, 1));
        mesh.colors.back() = Vec3(r, g, bb);
        any_color = true;
      } else if (any_color) {
        fail("vertex color missing after colored vertices");
      }
    } else if (tok == "vt") {
      double u, v, w = 1.0;
      if (!(ls >> u >> v)) fail("malformed texture coordinate");
      ls >> w;
      mesh.uvs.push_back({Vec2(u, v), w});
    } else if (tok == "f") {
      std::array<int, 3> vi{}, ui{};
      bool has_uv = false;
      for (int k = 0; k < 3; k++) {
        std::string ref;
        if (!(ls >> ref)) fail("face needs 3 vertices");
        size_t slash = ref.find('/');
        vi[k] = std::stoi(ref.substr(0, slash)) - 1;
        if (slash != std::string::npos && slash + 1 < ref.size() &&
            ref[slash + 1] != '/') {
          ui[k] = std::stoi(ref.substr(slash + 1)) - 1;
          has_uv = true;
        }
      }
      std::string extra;
      if (ls >> extra) fail("only triangle faces are supported");
      mesh.faces.push_back(vi);
      if (has_uv)
        mesh.face_uvs.push_back(ui);
      else if (!mesh.face_uvs.empty())
        fail("mixed textured and untextured faces");
      mesh.face_part.push_back(cur_part);
      if (cur_part != 0) any_part = true;
    } else if (tok == "usemtl") {
      std::string mat;
      ls >> mat;
      if (mat.rfind("part_", 0) == 0)
        cur_part = std::stoi(mat.substr(5));
      else
        cur_part = 0;
    }
    // g, o, s, mtllib and other records are ignored.
  }
  if (!any_part) mesh.face_part.clear();
  if (any_color && mesh.colors.size() != mesh.vertices.size())
    mesh.colors.resize(mesh.vertices.size(), Vec3(1, 1, 1));
  validate_mesh(mesh);
  return mesh;
}

inline TriMesh read_obj(const std::string& path) {
  return read_obj_string(read_text_file(path), path);
}

// --- PFM ---------------------------------------------------------------
//
// "PF" = 3 channel, "Pf" = 1 channel, scale -1 = little endian, rows are
// stored bottom to top.

inline void write_pfm(const std::string& path, const ChannelImage& img) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument(
        str_format("write_pfm: %d channels unsupported", img.channels));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << (img.channels == 3 ? "PF" : "Pf") << "\n"
      << img.width << " " << img.height << "\n"
      << "-1.0\n";
  for (int y = img.height - 1; y >= 0; y--)
    out.write(reinterpret_cast<const char*>(&img.data[size_t(y) * img.width *
                                                      img.channels]),
              std::streamsize(sizeof(float)) * img.width * img.channels);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline ChannelImage read_pfm(const std::string& path, ChannelTag tag) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0;
  in >> magic >> w >> h >> scale;
  if (magic != "PF" && magic != "Pf")
    throw std::runtime_error(path + ": not a PFM file");
  if (w <= 0 || h <= 0) throw std::runtime_error(path + ": bad PFM size");
  if (scale >= 0)
    throw std::runtime_error(path + ": big-endian PFM unsupported");
  in.get();  // single whitespace after the scale line
  int channels = magic == "PF" ? 3 : 1;
  if (channels != channel_tag_arity(tag))
    throw std::runtime_error(
        str_format("%s: %d channels but tag %s expects %d", path.c_str(),
                   channels, channel_tag_name(tag), channel_tag_arity(tag)));
  ChannelImage img = make_channel_image(tag, h, w);
  for (int y = h - 1; y >= 0; y--) {
    in.read(reinterpret_cast<char*>(&img.data[size_t(y) * w * channels]),
            std::streamsize(sizeof(float)) * w * channels);
    if (!in) throw std::runtime_error(path + ": truncated PFM data");
  }
  return img;
}

// --- PPM ---------------------------------------------------------------

// 8-bit P6 preview of a 3-channel image; values clamped from [0,1].
inline void write_ppm(const std::string& path, const ChannelImage& img) {
  if (img.channels != 3)
    throw std::invalid_argument("write_ppm: 3-channel image required");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  for (int y = 0; y < img.height; y++)
    for (int x = 0; x < img.width; x++)
      for (int c = 0; c < 3; c++) {
        double v = clamp(img.at(y, x, c), 0.0, 1.0);
        out.put(char(int(v * 255.0 + 0.5)));
      }
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline ChannelImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || maxval != 255)
    throw std::runtime_error(path + ": expected 8-bit P6 PPM");
  in.get();
  ChannelImage img = make_channel_image(ChannelTag::texture, h, w);
  std::vector<unsigned char> row(size_t(w) * 3);
  for (int y = 0; y < h; y++) {
    in.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size()));
    if (!in) throw std::runtime_error(path + ": truncated PPM data");
    for (int x = 0; x < w; x++)
      for (int c = 0; c < 3; c++) img.at(y, x, c) = float(row[x * 3 + c] / 255.0);
  }
  return img;
}

// Minimal MTL companion for textured OBJ export.
inline void write_mtl(const std::string& path, const std::string& material,
                      const std::string& texture_file) {
  std::ostringstream out;
  out << "newmtl " << material << "\n"
      << "Kd 1 1 1\n";
  if (!texture_file.empty()) out << "map_Kd " << texture_file << "\n";
  write_text_file(path, out.str());
}

}  // namespace garm
