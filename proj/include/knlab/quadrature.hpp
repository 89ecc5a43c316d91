#pragma once

#include <array>
#include <cmath>
#include <vector>

namespace knlab {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double k, const Vec3& a) { return {k * a[0], k * a[1], k * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

/// Right-handed orthonormal frame whose third axis is `axis` (normalized).
struct Frame {
  Vec3 e1, e2, e3;
};
Frame frame_from_axis(const Vec3& axis);

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1], ascending
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1].
GaussRule gauss_legendre(int n);

/// Node/weight pair mapped onto [a, b].
struct MappedNode {
  double x;
  double w;
};
std::vector<MappedNode> map_rule(const GaussRule& rule, double a, double b);

/// Settings shared by the retarded-field quadrature and the source measure sampling.
struct QuadratureConfig {
  int radial_nodes = 8;
  int angular_nodes = 16;  // polar direction; azimuth uses twice as many
  double rel_tol = 1e-10;
  int max_refinements = 4;

  void validate() const;
};

}  // namespace knlab
