#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace garm {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

constexpr double pi = 3.14159265358979323846;

// Deterministic random stream. All draws go through these helpers so that
// sequences are reproducible across platforms; std:: distributions are not
// portable and must not be used on this engine.
struct Rng {
  std::mt19937_64 gen;

  explicit Rng(uint64_t seed = 0) : gen(seed) {}

  // Uniform in [0,1) with 53-bit resolution.
  double uniform() { return double(gen() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [lo,hi] inclusive.
  int uniform_int(int lo, int hi) {
    return lo + int(gen() % uint64_t(hi - lo + 1));
  }

  // Standard normal via Box-Muller; draws two uniforms per pair.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Vec3 normal3() {
    double x = normal(), y = normal(), z = normal();
    return Vec3(x, y, z);
  }

  VecX normal_vec(int n) {
    VecX v(n);
    for (int i = 0; i < n; i++) v[i] = normal();
    return v;
  }

 private:
  double spare_ = 0;
  bool has_spare_ = false;
};

// Clamp helper that keeps the argument types symmetric.
inline double clamp(double x, double lo, double hi) {
  return std::min(std::max(x, lo), hi);
}

inline double sqr(double x) { return x * x; }

// Smoothstep on [0,1] after clamping.
inline double smoothstep(double x) {
  x = clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

inline bool finite(const Vec3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

// Format helper used by error messages and file writers.
inline std::string str_format(const char* fmt, ...);

}  // namespace garm

#include <cstdarg>
#include <cstdio>

namespace garm {

inline std::string str_format(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  char buf[1024];
  vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return std::string(buf);
}

}  // namespace garm
