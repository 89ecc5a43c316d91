#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "knlab/quadrature.hpp"
#include "knlab/sources.hpp"
#include "knlab/units.hpp"

namespace knlab {

/// One field value at a spacetime point. `nu` is -1 for vector components.
struct FieldSample {
  double t = 0.0;
  Vec3 x{};
  int mu = 0;
  int nu = 0;
  DimQuantity value;
  double quadrature_error = 0.0;
  long node_count = 0;
};

/// All sixteen components of a retarded field with per-component error estimates.
struct RetardedField {
  std::array<double, 16> h{};
  std::array<double, 16> error{};
  long node_count = 0;

  double operator()(int mu, int nu) const { return h[4 * mu + nu]; }
};

/// Linearized metric perturbation
///     h_{mu nu}(t, x) = 4 * integral T_{mu nu}(t - |x - x'|, x') / |x - x'| d^3x'
/// in G = c = 1 units, with the retarded time evaluated exactly at every node.
///
/// Ball families are integrated in spherical coordinates centred on the field
/// point (the 1/|x - x'| kernel cancels against the Jacobian), shells in the
/// distance variable, rings with a periodic trapezoid rule and grids with the
/// midpoint rule. Each analytic part is refined by doubling its node counts
/// until successive estimates agree to `cfg.rel_tol`; failure throws
/// ConvergenceError carrying the best estimate. Grids are treated as static
/// snapshots and report a Richardson-style error against a 2h coarsening.
///
/// `components` selects which entries must converge (all when empty).
RetardedField retarded_field(const SourceSpec& source, double t, const Vec3& x, const QuadratureConfig& cfg = {},
                             std::span<const std::pair<int, int>> components = {});

FieldSample retarded_h(const SourceSpec& source, double t, const Vec3& x, int mu, int nu,
                       const QuadratureConfig& cfg = {});

/// g_{mu nu} = eta_{mu nu} + h_{mu nu} with signature (+,-,-,-).
struct MetricSample {
  std::array<double, 16> g{};
  std::array<double, 16> error{};

  double operator()(int mu, int nu) const { return g[4 * mu + nu]; }
};
MetricSample metric(const SourceSpec& source, double t, const Vec3& x, const QuadratureConfig& cfg = {});

/// Gauge potential A_mu = hbar d/dx^mu log sqrt|det g| (covariant gradient).
struct GaugePotential {
  std::array<DimQuantity, 4> A;
  std::array<double, 4> error{};  // Richardson estimate from halving the step
  double step = 0.0;
};

/// Central differences of log sqrt|det g| with `step` (default 1e-3 of the
/// largest support radius). Refuses with SingularityError when any stencil
/// point violates the weak-field guard |h_{mu nu}| < 0.5 or det g changes sign.
GaugePotential gauge_potential(const SourceSpec& source, double t, const Vec3& x, std::optional<double> step,
                               const QuadratureConfig& cfg, const ConstantsRegistry& registry);

struct SpacetimePoint {
  double t = 0.0;
  Vec3 x{};
};

struct BatchEntry {
  FieldSample sample;
  bool ok = true;
  std::string error;
};

/// retarded_h over many points on `workers` threads. Each point is evaluated
/// independently, so results do not depend on the worker count. Points that
/// fail keep their best estimate and carry the error message.
std::vector<BatchEntry> retarded_h_batch(const SourceSpec& source, std::span<const SpacetimePoint> points, int mu,
                                         int nu, const QuadratureConfig& cfg, int workers = 1);

/// Integral of 1/|u| over the unit cube centred on the origin.
inline constexpr double kUnitCubeInversePotential = 2.380077363979554;

}  // namespace knlab
