#pragma once

#include "core.hpp"

namespace garm {

// Rendered channel kinds. Each tag fixes the channel count and the
// background sentinel written where no geometry covers the pixel.
enum class ChannelTag { normal, depth, segmentation, uvcoord, mask, texture };

inline const char* channel_tag_name(ChannelTag t) {
  switch (t) {
    case ChannelTag::normal: return "normal";
    case ChannelTag::depth: return "depth";
    case ChannelTag::segmentation: return "segmentation";
    case ChannelTag::uvcoord: return "uvcoord";
    case ChannelTag::mask: return "mask";
    case ChannelTag::texture: return "texture";
  }
  return "unknown";
}

inline int channel_tag_arity(ChannelTag t) {
  switch (t) {
    case ChannelTag::normal: return 3;
    case ChannelTag::depth: return 1;
    case ChannelTag::segmentation: return 1;
    case ChannelTag::uvcoord: return 3;  // (u, v, side)
    case ChannelTag::mask: return 1;
    case ChannelTag::texture: return 3;
  }
  return 0;
}

// Background value per channel index.
inline float channel_tag_background(ChannelTag t, int c) {
  switch (t) {
    case ChannelTag::normal: return 0.0f;
    case ChannelTag::depth: return 0.0f;
    case ChannelTag::segmentation: return -1.0f;
    case ChannelTag::uvcoord: return c < 2 ? -1.0f : 0.0f;  // side 0 = invalid
    case ChannelTag::mask: return 0.0f;
    case ChannelTag::texture: return 0.0f;
  }
  return 0.0f;
}

// Dense float image, row 0 at the top, row-major interleaved channels.
struct ChannelImage {
  int height = 0, width = 0, channels = 0;
  ChannelTag tag = ChannelTag::mask;
  std::vector<float> data;

  float& at(int y, int x, int c = 0) {
    return data[(size_t(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c = 0) const {
    return data[(size_t(y) * width + x) * channels + c];
  }
  bool in_bounds(int y, int x) const {
    return y >= 0 && y < height && x >= 0 && x < width;
  }
};

inline ChannelImage make_channel_image(ChannelTag tag, int height, int width) {
  ChannelImage img;
  img.height = height;
  img.width = width;
  img.channels = channel_tag_arity(tag);
  img.tag = tag;
  img.data.resize(size_t(height) * width * img.channels);
  for (int y = 0; y < height; y++)
    for (int x = 0; x < width; x++)
      for (int c = 0; c < img.channels; c++)
        img.at(y, x, c) = channel_tag_background(tag, c);
  return img;
}

// Whether a pixel holds rendered content rather than background. Decided
// from the stored values, so it survives a round trip through files.
inline bool is_foreground(const ChannelImage& img, int y, int x) {
  switch (img.tag) {
    case ChannelTag::normal: {
      double s = 0;
      for (int c = 0; c < 3; c++) s += sqr(img.at(y, x, c));
      return s > 1e-12;
    }
    case ChannelTag::depth: return img.at(y, x) > 0;
    case ChannelTag::segmentation: return img.at(y, x) >= 0;
    case ChannelTag::uvcoord: return img.at(y, x, 2) != 0;
    case ChannelTag::mask: return img.at(y, x) > 0.5f;
    case ChannelTag::texture: return true;
  }
  return false;
}

inline int count_foreground(const ChannelImage& img) {
  int n = 0;
  for (int y = 0; y < img.height; y++)
    for (int x = 0; x < img.width; x++)
      if (is_foreground(img, y, x)) n++;
  return n;
}

// Bilinear sample of one channel at continuous pixel coords (px along x,
// py along y, pixel centers at integer + 0.5). Clamps to the border.
inline double bilinear_sample(const ChannelImage& img, double px, double py,
                              int c) {
  double fx = clamp(px - 0.5, 0.0, double(img.width - 1));
  double fy = clamp(py - 0.5, 0.0, double(img.height - 1));
  int x0 = int(fx), y0 = int(fy);
  int x1 = std::min(x0 + 1, img.width - 1);
  int y1 = std::min(y0 + 1, img.height - 1);
  double ax = fx - x0, ay = fy - y0;
  return (1 - ay) * ((1 - ax) * img.at(y0, x0, c) + ax * img.at(y0, x1, c)) +
         ay * ((1 - ax) * img.at(y1, x0, c) + ax * img.at(y1, x1, c));
}

// Same as bilinear_sample but also returns d(value)/d(px), d(value)/d(py).
inline double bilinear_sample_grad(const ChannelImage& img, double px,
                                   double py, int c, double& dx, double& dy) {
  double fx = clamp(px - 0.5, 0.0, double(img.width - 1));
  double fy = clamp(py - 0.5, 0.0, double(img.height - 1));
  int x0 = int(fx), y0 = int(fy);
  int x1 = std::min(x0 + 1, img.width - 1);
  int y1 = std::min(y0 + 1, img.height - 1);
  double ax = fx - x0, ay = fy - y0;
  double v00 = img.at(y0, x0, c), v01 = img.at(y0, x1, c);
  double v10 = img.at(y1, x0, c), v11 = img.at(y1, x1, c);
  bool inside_x = px - 0.5 > 0 && px - 0.5 < img.width - 1;
  bool inside_y = py - 0.5 > 0 && py - 0.5 < img.height - 1;
  dx = inside_x ? (1 - ay) * (v01 - v00) + ay * (v11 - v10) : 0.0;
  dy = inside_y ? (1 - ax) * (v10 - v00) + ax * (v11 - v01) : 0.0;
  return (1 - ay) * ((1 - ax) * v00 + ax * v01) + ay * ((1 - ax) * v10 + ax * v11);
}

// Intersection over union of the foreground supports of two same-size
// images (any tags).
inline double mask_iou(const ChannelImage& a, const ChannelImage& b) {
  if (a.height != b.height || a.width != b.width)
    throw std::invalid_argument("mask_iou: image sizes differ");
  int inter = 0, uni = 0;
  for (int y = 0; y < a.height; y++)
    for (int x = 0; x < a.width; x++) {
      bool fa = is_foreground(a, y, x), fb = is_foreground(b, y, x);
      inter += fa && fb;
      uni += fa || fb;
    }
  return uni == 0 ? 1.0 : double(inter) / uni;
}

// Exact euclidean distance transform of the foreground support: for every
// pixel, distance in pixels to the nearest foreground pixel center
// (0 inside). Brute force per row band using the standard two-pass
// Felzenszwalb squared-distance scheme.
inline ChannelImage distance_transform(const ChannelImage& src) {
  int h = src.height, w = src.width;
  ChannelImage out = make_channel_image(ChannelTag::depth, h, w);
  const double inf = 1e18;
  std::vector<double> g(size_t(h) * w);
  // Column pass: 1d squared distance along each column.
  for (int x = 0; x < w; x++) {
    double d = inf;
    for (int y = 0; y < h; y++) {
      d = is_foreground(src, y, x) ? 0 : (d >= inf ? inf : d + 1);
      g[size_t(y) * w + x] = d >= inf ? inf : d * d;
    }
    d = inf;
    for (int y = h - 1; y >= 0; y--) {
      d = is_foreground(src, y, x) ? 0 : (d >= inf ? inf : d + 1);
      double dd = d >= inf ? inf : d * d;
      g[size_t(y) * w + x] = std::min(g[size_t(y) * w + x], dd);
    }
  }
  // Row pass: lower envelope of parabolas.
  std::vector<double> f(w), dt(w);
  std::vector<int> v(w);
  std::vector<double> z(w + 1);
  for (int y = 0; y < h; y++) {
    for (int x = 0; x < w; x++) f[x] = g[size_t(y) * w + x];
    int k = 0;
    v[0] = 0;
    z[0] = -inf;
    z[1] = inf;
    for (int q = 1; q < w; q++) {
      if (f[q] >= inf && f[v[k]] >= inf) {
        // Both unbounded: keep the earlier site.
        continue;
      }
      double s;
      while (true) {
        s = ((f[q] + sqr(double(q))) - (f[v[k]] + sqr(double(v[k])))) /
            (2.0 * q - 2.0 * v[k]);
        if (s <= z[k] && k > 0)
          k--;
        else
          break;
      }
      k++;
      v[k] = q;
      z[k] = s;
      z[k + 1] = inf;
    }
    k = 0;
    for (int q = 0; q < w; q++) {
      while (z[k + 1] < q) k++;
      dt[q] = sqr(double(q - v[k])) + f[v[k]];
    }
    for (int x = 0; x < w; x++)
      out.at(y, x) = float(dt[x] >= inf ? std::sqrt(inf) : std::sqrt(dt[x]));
  }
  return out;
}

}  // namespace garm
