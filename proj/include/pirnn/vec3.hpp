#pragma once

#include <array>
#include <cmath>

namespace pirnn {

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 scaled(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
inline Vec3 normalized(const Vec3& a) { return scaled(a, 1.0 / norm(a)); }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double sq_dist(const Vec3& a, const Vec3& b) {
  const double x = a[0] - b[0], y = a[1] - b[1], z = a[2] - b[2];
  return x * x + y * y + z * z;
}

// Rotates v about the unit axis by `angle` radians (Rodrigues).
inline Vec3 rotate(const Vec3& v, const Vec3& axis, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  const Vec3 kxv = cross(axis, v);
  const double kv = dot(axis, v) * (1.0 - c);
  return {v[0] * c + kxv[0] * s + axis[0] * kv, v[1] * c + kxv[1] * s + axis[1] * kv,
          v[2] * c + kxv[2] * s + axis[2] * kv};
}

}  // namespace pirnn
