#include "knlab/nearfield.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "knlab/error.hpp"
#include "knlab/fields.hpp"

namespace knlab {

namespace {

constexpr double kSeriesRegime = 0.3;

double ball_volume(double R) { return 4.0 / 3.0 * std::numbers::pi * R * R * R; }

// T_{mu nu} of the isotropic harmonic profile relative to the energy density.
double component_weight(int mu, int nu) {
  if (mu < 0 || mu > 3 || nu < 0 || nu > 3) throw std::invalid_argument("component indices must be in 0..3");
  if (mu != nu) return 0.0;
  return mu == 0 ? 1.0 : 1.0 / 3.0;
}

}  // namespace

ExpansionCoeffs retardation_series(const HarmonicBall& ball, double t, int order, int mu, int nu) {
  if (order < 0) throw std::invalid_argument("series order must be non-negative");
  if (order > 2) throw std::invalid_argument("retardation series beyond second order is unsupported");
  validate_part(ball);

  const double w = ball.frequency;
  const double M0 = ball.energy_density * ball_volume(ball.radius) * component_weight(mu, nu);
  const double phase = w * t + ball.phase;
  const double M = M0 * std::cos(phase);
  const double dM = -w * M0 * std::sin(phase);
  const double d2M = -w * w * M;

  ExpansionCoeffs c;
  c.t = t;
  c.order = order;
  c.mu = mu;
  c.nu = nu;
  c.a_minus1 = 4.0 * M;
  // "+ 0.0" folds -0 into +0 so printed coefficients stay stable
  if (order >= 1) c.a_0 = -4.0 * dM + 0.0;
  if (order >= 2) {
    // integral of |x - x'| over a uniform ball is V (r + R^2 / (5 r)) outside it
    c.a_minus1 += 0.4 * ball.radius * ball.radius * d2M;
    c.a_1 = 2.0 * d2M + 0.0;
  }
  return c;
}

SeriesComparison series_vs_direct(const HarmonicBall& ball, UnitSystem system, const std::vector<double>& radii,
                                  double t, const QuadratureConfig& cfg) {
  const SourceSpec source(ball, system);
  const ExpansionCoeffs c = retardation_series(ball, t);
  SeriesComparison out;
  for (double r : radii) {
    if (!(r > ball.radius)) throw std::invalid_argument("series comparison radii must lie outside the ball");
    if (std::abs(ball.frequency) * r > kSeriesRegime) {
      std::ostringstream os;
      os << "omega r = " << std::abs(ball.frequency) * r << " at r = " << r << " is outside the series regime (<= "
         << kSeriesRegime << ")";
      out.warnings.push_back(os.str());
    }
    const double direct = retarded_h(source, t, ball.center + Vec3{r, 0.0, 0.0}, 0, 0, cfg).value.value();
    const double series = c(r);
    const double dev = direct == 0.0 ? std::abs(series) : std::abs(series - direct) / std::abs(direct);
    out.radii.push_back(r);
    out.series.push_back(series);
    out.direct.push_back(direct);
    out.deviation.push_back(dev);
    out.max_deviation = std::max(out.max_deviation, dev);
  }
  return out;
}

double convergence_exponent(const SeriesComparison& cmp, double omega) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < cmp.radii.size(); ++i) {
    if (!(cmp.deviation[i] > 0.0)) continue;
    const double x = std::log(std::abs(omega) * cmp.radii[i]);
    const double y = std::log(cmp.deviation[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) throw std::invalid_argument("convergence exponent needs two nonzero deviations");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

CornellFit cornell_fit(const std::vector<std::pair<double, double>>& samples,
                       std::optional<std::pair<double, double>> window, std::optional<double> normalize_by) {
  const double norm_m = normalize_by.value_or(1.0);
  if (!(norm_m > 0.0) || !std::isfinite(norm_m)) throw std::invalid_argument("normalization mass must be positive");

  std::vector<std::pair<double, double>> used;
  for (auto [r, V] : samples) {
    if (!(r > 0.0) || !std::isfinite(r) || !std::isfinite(V)) {
      throw std::invalid_argument("Cornell fit needs finite samples with positive r");
    }
    if (window && (r < window->first || r > window->second)) continue;
    used.emplace_back(r, V / norm_m);
  }
  if (used.size() < 3) throw std::invalid_argument("Cornell fit needs at least 3 samples in the window");

  Eigen::MatrixXd A(used.size(), 2);
  Eigen::VectorXd b(used.size());
  for (std::size_t i = 0; i < used.size(); ++i) {
    A(i, 0) = 1.0 / used[i].first;
    A(i, 1) = used[i].first;
    b(i) = used[i].second;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < 2) throw std::invalid_argument("Cornell fit design matrix is degenerate (distinct radii needed)");
  const Eigen::Vector2d c = qr.solve(b);

  CornellFit fit;
  fit.alpha = -c(0);
  fit.beta = c(1);
  fit.residual = std::sqrt((A * c - b).squaredNorm() / static_cast<double>(used.size()));
  fit.r_min = used.front().first;
  fit.r_max = used.front().first;
  for (const auto& s : used) {
    fit.r_min = std::min(fit.r_min, s.first);
    fit.r_max = std::max(fit.r_max, s.first);
  }
  if (window) {
    fit.r_min = window->first;
    fit.r_max = window->second;
  }
  fit.normalization_mass = norm_m;
  fit.samples = used.size();
  return fit;
}

EnergyScale energy_scale_check(const CornellFit& fit, double m) {
  if (!(m > 0.0)) throw std::invalid_argument("energy scale check needs m > 0");
  EnergyScale e;
  const double coulomb = -fit.alpha * m;
  const double linear = fit.beta / m;
  e.value = coulomb + linear;
  e.ratio = std::abs(e.value) / m;
  e.degenerate = std::abs(e.value) <= 1e-9 * (std::abs(coulomb) + std::abs(linear));
  e.pass = !e.degenerate && e.ratio >= 0.1 && e.ratio <= 10.0;
  return e;
}

CornellRun cornell_pipeline(double m, const QuadratureConfig& cfg, int count, int workers) {
  if (!(m > 0.0)) throw std::invalid_argument("Cornell pipeline needs m > 0");
  if (count < 3) throw std::invalid_argument("Cornell pipeline needs at least 3 radii");
  CornellRun run;
  run.m = m;
  const double R = 0.1 / m;
  run.source = HarmonicBall{m / ball_volume(R), R, m, 0.0, {}};
  const SourceSpec source(run.source, UnitSystem::natural);

  const double lo = 0.5 / m, hi = 2.0 / m;
  std::vector<SpacetimePoint> points;
  for (int i = 0; i < count; ++i) {
    const double r = lo + (hi - lo) * i / (count - 1);
    points.push_back({0.0, {r, 0.0, 0.0}});
  }
  const auto batch = retarded_h_batch(source, points, 0, 0, cfg, workers);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!batch[i].ok) {
      throw ConvergenceError("Cornell pipeline sample failed: " + batch[i].error, batch[i].sample.value.value(),
                             batch[i].sample.quadrature_error);
    }
    run.samples.emplace_back(points[i].x[0], -batch[i].sample.value.value());
  }
  const std::pair<double, double> window{lo, hi};
  run.fit = cornell_fit(run.samples, window, m);
  run.energy = energy_scale_check(run.fit, m);

  run.series = retardation_series(run.source, 0.0);
  std::vector<std::pair<double, double>> series_samples;
  for (const auto& p : points) series_samples.emplace_back(p.x[0], -run.series(p.x[0]));
  run.series_fit = cornell_fit(series_samples, window, m);
  return run;
}

}  // namespace knlab
