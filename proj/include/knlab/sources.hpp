#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "knlab/quadrature.hpp"
#include "knlab/units.hpp"

namespace knlab {

/// What a stress-energy density is "per": unit volume, unit area or unit length.
enum class Measure { volume, surface, line };

std::string_view to_string(Measure m);

/// Contravariant stress-energy components T^{mu nu}, mu,nu in 0..3, c = 1.
///
/// Values are energy densities in the owning source's unit system (per unit
/// volume, area or length according to `measure`).
struct StressTensor {
  std::array<double, 16> c{};
  Measure measure = Measure::volume;

  double operator()(int mu, int nu) const { return c[4 * mu + nu]; }
  double& operator()(int mu, int nu) { return c[4 * mu + nu]; }

  /// Covariant components T_{mu nu} for signature (+,-,-,-).
  StressTensor lowered() const;
  bool is_zero() const;
  StressTensor& operator+=(const StressTensor& o);
};

/// Signature (+,-,-,-) sign of eta_{mu mu}.
constexpr double eta(int mu) { return mu == 0 ? 1.0 : -1.0; }

struct PressureModel {
  bool isotropic = true;
  std::array<double, 3> diagonal{};  // p1, p2, p3 when not isotropic

  static PressureModel isotropic_model() { return {}; }
  static PressureModel diagonal_model(double p1, double p2, double p3) { return {false, {p1, p2, p3}}; }
};

// Analytic families. Rotation is rigid and about the +z axis through `center`;
// speeds are in units of c and may be negative (clockwise).

struct StaticBall {
  double energy_density = 0.0;
  double radius = 1.0;
  PressureModel pressure;
  Vec3 center{};
};

struct RotatingBall {
  double energy_density = 0.0;
  double radius = 1.0;
  double angular_speed = 0.0;
  Vec3 center{};
};

struct RotatingShell {
  double surface_density = 0.0;
  double radius = 1.0;
  double angular_speed = 0.0;
  Vec3 center{};
};

/// Thin ring in the plane z = center.z.
struct Ring {
  double line_density = 0.0;
  double radius = 1.0;
  double speed = 0.0;  // tangential
  Vec3 center{};
};

/// Uniform isotropic ball, T(t) = T_profile * cos(frequency * t + phase).
struct HarmonicBall {
  double energy_density = 0.0;  // profile amplitude
  double radius = 1.0;
  double frequency = 0.0;
  double phase = 0.0;
  Vec3 center{};
};

/// Cell-centred lattice of T^{mu nu} samples (16 components per cell, x fastest).
struct GridSource {
  double spacing = 1.0;
  Vec3 origin{};  // lower corner of the box
  std::array<int, 3> cells{0, 0, 0};
  std::vector<double> data;

  std::size_t cell_count() const {
    return static_cast<std::size_t>(cells[0]) * cells[1] * cells[2];
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * cells[1] + j) * cells[0] + i;
  }
  Vec3 cell_center(int i, int j, int k) const {
    return {origin[0] + (i + 0.5) * spacing, origin[1] + (j + 0.5) * spacing,
            origin[2] + (k + 0.5) * spacing};
  }
  Vec3 upper() const {
    return {origin[0] + cells[0] * spacing, origin[1] + cells[1] * spacing,
            origin[2] + cells[2] * spacing};
  }
  double at(std::size_t cell, int mu, int nu) const { return data[16 * cell + 4 * mu + nu]; }
};

using SourcePart = std::variant<StaticBall, RotatingBall, RotatingShell, Ring, HarmonicBall, GridSource>;

/// Bounding sphere of a part's support.
struct SupportBall {
  Vec3 center;
  double radius;
};

/// A stress-energy source: a superposition of analytic families and sampled grids.
///
/// Parameters are in the code units of `system()` (geometrized or natural;
/// both have c = 1). An empty source is the zero source.
class SourceSpec {
 public:
  SourceSpec() = default;
  explicit SourceSpec(SourcePart part, UnitSystem system = UnitSystem::geometrized);

  /// Superposition; all sources must share a unit system.
  static SourceSpec superpose(const std::vector<SourceSpec>& sources);

  const std::vector<SourcePart>& parts() const { return parts_; }
  UnitSystem system() const { return system_; }
  bool empty() const { return parts_.empty(); }

  /// T^{mu nu}(t, x); zero outside the support. Points on a ring or shell
  /// return the line/surface density tagged with that measure.
  StressTensor evaluate(double t, const Vec3& x) const;

  bool is_static() const;
  bool has_offdiagonal_stress() const;
  std::vector<SupportBall> support() const;
  /// Largest distance from `about` to any point of the support.
  double extent_from(const Vec3& about) const;

 private:
  std::vector<SourcePart> parts_;
  UnitSystem system_ = UnitSystem::geometrized;
};

SupportBall support_of(const SourcePart& part);
bool part_is_static(const SourcePart& part);
Measure measure_of(const SourcePart& part);
StressTensor evaluate_part(const SourcePart& part, double t, const Vec3& x);

/// density * (1, v) (1, v) tagged with measure `m`.
StressTensor dust_tensor(double density, const Vec3& v, Measure m);
/// Tensor of a ball family (static, rotating or harmonic) at x, ignoring the
/// support boundary. Throws std::logic_error for other families.
StressTensor ball_interior(const SourcePart& part, double t, const Vec3& x);
bool is_ball_family(const SourcePart& part);

/// Throws std::invalid_argument if the parameters violate the family invariants
/// (negative densities, speeds above c, non-positive radii, asymmetric grids).
void validate_part(const SourcePart& part);

// Convenience constructors.
Ring ring_with_mass(double mass, double radius, double speed, Vec3 center = {});
StaticBall ball_with_mass(double mass, double radius, PressureModel p = {}, Vec3 center = {});
/// Harmonic ball with total profile mass `mass`; when `frequency` is absent the
/// Compton frequency m c^2 / hbar of that mass is used.
HarmonicBall harmonic_ball(double mass, double radius, std::optional<double> frequency, double phase,
                           UnitSystem system, const ConstantsRegistry& registry, Vec3 center = {});

/// Weighted sample of the source measure: sum_i w_i f(x_i, T_i) approximates
/// the integral of f against T over the support.
struct MeasureNode {
  Vec3 x;
  double w;
  StressTensor T;
};
std::vector<MeasureNode> sample_measure(const SourceSpec& source, double t,
                                        const QuadratureConfig& cfg = {});

struct Box {
  Vec3 lo;
  Vec3 hi;
};

/// Samples `source` at time t onto a cell-centred lattice covering `box`.
///
/// Cells cut by a ball surface are weighted by the volume fraction of the cell
/// on the inside of the surface's tangent plane. Ring and shell measures are
/// deposited into the containing cell. Throws std::invalid_argument when the
/// box clips part of the support.
GridSource discretize(const SourceSpec& source, double spacing, const Box& box, double t = 0.0);

/// Fraction of the cube [-1/2,1/2]^3 on the side n.u <= d of a plane (n unit).
double cube_fraction_below_plane(const Vec3& n, double d);

struct ConservationReport {
  double spacing = 0.0;
  std::array<double, 4> max_residual{};       // over all lattice points, per nu
  std::array<double, 4> interior_residual{};  // points whose stencil avoids sharp boundaries
  std::array<double, 4> coarse_max_residual{};
  double coarse_spacing = 0.0;
  /// log2 ratio of residuals between the two spacings; NaN where both vanish.
  std::array<double, 4> order{};
  /// Order of the continuity (nu = 0) residual.
  double order_estimate = 0.0;
};

/// Central-difference residual of d_mu T^{mu nu} at t = 0 on a lattice of the
/// given spacing, plus the same at a second spacing for the order estimate.
/// Rings and shells are evaluated through a Gaussian-smoothed profile of
/// width radius/8. Grid sources use their own spacing and its double.
ConservationReport conservation_residual(const SourceSpec& source, double spacing);

}  // namespace knlab
