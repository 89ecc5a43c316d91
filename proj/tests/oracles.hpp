#pragma once

// Closed forms and raw constants used as test oracles. Nothing here calls the library.

#include <cmath>
#include <numbers>

namespace oracle {

inline constexpr double pi = std::numbers::pi;

// CODATA 2018, CGS-Gaussian
inline constexpr double G = 6.67430e-8;
inline constexpr double hbar = 1.054571817e-27;
inline constexpr double c = 2.99792458e10;
inline constexpr double e = 4.803204712570263e-10;
inline constexpr double m_e = 9.1093837015e-28;
inline constexpr double m_p = 1.67262192369e-24;
inline constexpr double m_pi = 2.488068194125488e-25;

inline double alpha() { return e * e / (hbar * c); }

inline double ball_volume(double R) { return 4.0 / 3.0 * pi * R * R * R; }

// h00 = 4 * integral rho / |x - x'| of a uniform ball of mass m, radius R
inline double ball_h00(double m, double R, double r) {
  if (r >= R) return 4.0 * m / r;
  return 2.0 * m * (3.0 * R * R - r * r) / (R * R * R);
}

inline double shell_h00(double m, double R, double r) { return 4.0 * m / std::max(r, R); }

// on the symmetry axis, distance z from the ring plane
inline double ring_axis_h00(double m, double R, double z) { return 4.0 * m / std::sqrt(R * R + z * z); }

// retarded h00 outside a uniform ball whose density oscillates as cos(w t + phase):
// 4 pi eps / r * cos(w (t - r) + phase) * 4 (sin wR - wR cos wR) / w^3
inline double harmonic_ball_h00(double m, double R, double w, double phase, double t, double r) {
  const double eps = m / ball_volume(R);
  const double x = w * R;
  const double form = 4.0 * (std::sin(x) - x * std::cos(x)) / (w * w * w);
  return 4.0 * pi * eps / r * std::cos(w * (t - r) + phase) * form;
}

// h_{0y} on the +x axis outside a rigidly rotating uniform ball (exact dipole)
inline double rotating_ball_h0y(double m, double R, double omega, double r) {
  return -4.0 * omega * m * R * R / (5.0 * r * r);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace oracle
