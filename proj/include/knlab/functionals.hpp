#pragma once

#include <array>
#include <optional>

#include "knlab/quadrature.hpp"
#include "knlab/sources.hpp"
#include "knlab/units.hpp"

namespace knlab {

/// Calibration applied to -(1/2) h^{00} so that a point mass gives -m/r.
inline constexpr double kPhiCalibration = 0.5;

struct MassResult {
  DimQuantity value;  // in the source's unit system
  DimQuantity cgs;
};

/// m = integral of T^{00} over space at t = 0.
MassResult mass(const SourceSpec& source, const ConstantsRegistry& registry, const QuadratureConfig& cfg = {});

struct SpinResult {
  std::array<DimQuantity, 3> S;
  std::array<DimQuantity, 3> cgs;
  Vec3 centroid{};
};

/// S_k = integral of eps_klm (x - c)^l T^{m0} at t = 0, about the energy centroid c.
SpinResult spin(const SourceSpec& source, const ConstantsRegistry& registry, const QuadratureConfig& cfg = {});

/// Energy-weighted centroid at t = 0 (origin for a source with zero energy).
Vec3 centroid(const SourceSpec& source, const QuadratureConfig& cfg = {});

struct PotentialResult {
  DimQuantity phi;
  DimQuantity newtonian;  // -m / r
  double r = 0.0;         // distance from the centroid
  double remainder_coefficient = 0.0;  // |phi + m/r| r^3
  double quadrature_error = 0.0;
  double calibration = kPhiCalibration;
};

/// Phi = -(1/2) h^{00} * kPhiCalibration at (t = 0, x), with h^{00} = h_{00}
/// (indices raised with eta). Throws std::invalid_argument when x lies inside
/// the support.
PotentialResult grav_potential(const SourceSpec& source, const Vec3& x, const ConstantsRegistry& registry,
                               const QuadratureConfig& cfg = {});

/// Spatial trace convention for eta^{ij} T_{ij}: `magnitude` sums +T_ii,
/// `signed` keeps the (-,-,-) signs.
enum class TraceConvention { magnitude, signed_eta };

/// A_0 = 2 m * integral (trace) / r, r the distance from the centroid.
/// Sources with off-diagonal stress are not supported.
DimQuantity em_potential(const SourceSpec& source, const Vec3& x, const QuadratureConfig& cfg = {},
                         TraceConvention convention = TraceConvention::magnitude);

struct ChargeResult {
  int retained_dimensions = 3;
  double fraction = 1.0;
  DimQuantity reference_charge;  // fraction * e in the source's system
};

/// Share of the pressure integral carried by the first d spatial directions.
ChargeResult charge_fraction(const SourceSpec& source, int d, const ConstantsRegistry& registry,
                             const QuadratureConfig& cfg = {});

/// Integrals of T^{ii} over space at t = 0.
std::array<double, 3> pressure_integrals(const SourceSpec& source, const QuadratureConfig& cfg = {});

/// Electron model: equatorial ring of mass m_e, radius hbar / (2 m_e c) and
/// tangential speed c, so that its spin is hbar / 2.
SourceSpec electron_preset(const ConstantsRegistry& registry, UnitSystem system = UnitSystem::geometrized);

}  // namespace knlab
