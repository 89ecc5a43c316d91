#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "knlab/quadrature.hpp"
#include "knlab/sources.hpp"
#include "knlab/units.hpp"

namespace knlab {

/// h(r) ~ a_minus1 / r + a_0 + a_1 r near a harmonic source.
struct ExpansionCoeffs {
  double a_minus1 = 0.0;
  double a_0 = 0.0;
  double a_1 = 0.0;
  double t = 0.0;
  int order = 2;
  int mu = 0;
  int nu = 0;

  double operator()(double r) const { return a_minus1 / r + a_0 + a_1 * r; }
};

/// Second-order retardation series of h_{mu nu} outside a harmonic ball.
///
/// Expands T(t - s) = T(t) - s dT/dt + (s^2/2) d2T/dt2 under the integral:
///   a_minus1 = 4 M(t) + (2/5) R^2 d2M/dt2   (the second term is the finite-size part of the r term)
///   a_0      = -4 dM/dt
///   a_1      =  2 d2M/dt2
/// with M(t) the integral of T_{mu nu}(t). Lower `order` truncates the series.
ExpansionCoeffs retardation_series(const HarmonicBall& ball, double t, int order = 2, int mu = 0, int nu = 0);

struct SeriesComparison {
  std::vector<double> radii;
  std::vector<double> series;
  std::vector<double> direct;
  std::vector<double> deviation;  // relative
  double max_deviation = 0.0;
  std::vector<std::string> warnings;
};

/// Compares the series against the retarded integral at (t, center + r e_x).
SeriesComparison series_vs_direct(const HarmonicBall& ball, UnitSystem system, const std::vector<double>& radii,
                                  double t, const QuadratureConfig& cfg = {});

/// Least-squares slope of log(deviation) against log(omega r).
double convergence_exponent(const SeriesComparison& cmp, double omega);

struct CornellFit {
  double alpha = 0.0;
  double beta = 0.0;
  double residual = 0.0;  // RMS over the window, in normalized units
  double r_min = 0.0;
  double r_max = 0.0;
  double normalization_mass = 1.0;  // V was divided by this before fitting
  std::size_t samples = 0;

  double operator()(double r) const { return -alpha / r + beta * r; }
};

/// Fits V(r) = -alpha / r + beta r to the samples inside `window` (all when
/// absent), after dividing V by `normalize_by` when given.
CornellFit cornell_fit(const std::vector<std::pair<double, double>>& samples,
                       std::optional<std::pair<double, double>> window = std::nullopt,
                       std::optional<double> normalize_by = std::nullopt);

struct EnergyScale {
  double value = 0.0;  // -alpha m + beta / m
  double ratio = 0.0;  // |value| / m
  bool degenerate = false;
  bool pass = false;
};

/// Evaluates the fitted potential at r = 1/m. Exact cancellation between
/// the two terms is flagged as degenerate and does not pass.
EnergyScale energy_scale_check(const CornellFit& fit, double m);

struct CornellRun {
  HarmonicBall source;
  double m = 1.0;
  std::vector<std::pair<double, double>> samples;  // (r, -h00) from the retarded integral
  CornellFit fit;
  EnergyScale energy;
  ExpansionCoeffs series;
  CornellFit series_fit;
};

/// Harmonic ball of mass m, radius 0.1/m and frequency m in natural units,
/// sampled at t = 0 on `count` radii spanning [0.5, 2]/m and fitted with the
/// 1/m normalization.
CornellRun cornell_pipeline(double m, const QuadratureConfig& cfg = {}, int count = 16, int workers = 1);

}  // namespace knlab
