#include "knlab/functionals.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "knlab/fields.hpp"

namespace knlab {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw std::domain_error(std::string(what) + " diverges or is not finite for this source");
  }
}

void require_outside(const SourceSpec& source, const Vec3& x, const char* what) {
  for (const auto& sb : source.support()) {
    if (norm(x - sb.center) <= sb.radius) {
      std::ostringstream os;
      os << what << ": point lies inside the source support (bounding radius " << sb.radius
         << "); use 'field eval' for interior values";
      throw std::invalid_argument(os.str());
    }
  }
}

void require_diagonal(const SourceSpec& source, const char* what) {
  if (source.has_offdiagonal_stress()) {
    throw std::invalid_argument(std::string(what) + " is unsupported for sources with off-diagonal stress");
  }
}

}  // namespace

MassResult mass(const SourceSpec& source, const ConstantsRegistry& registry, const QuadratureConfig& cfg) {
  double m = 0.0;
  for (const auto& n : sample_measure(source, 0.0, cfg)) m += n.w * n.T(0, 0);
  require_finite(m, "mass integral");
  const DimQuantity q(m, dims::mass(), source.system());
  return {q, convert(q, UnitSystem::cgs, registry)};
}

Vec3 centroid(const SourceSpec& source, const QuadratureConfig& cfg) {
  double m = 0.0;
  Vec3 first{};
  for (const auto& n : sample_measure(source, 0.0, cfg)) {
    m += n.w * n.T(0, 0);
    first = first + (n.w * n.T(0, 0)) * n.x;
  }
  if (m == 0.0) return {};
  return (1.0 / m) * first;
}

SpinResult spin(const SourceSpec& source, const ConstantsRegistry& registry, const QuadratureConfig& cfg) {
  const auto nodes = sample_measure(source, 0.0, cfg);
  double m = 0.0;
  Vec3 first{};
  for (const auto& n : nodes) {
    m += n.w * n.T(0, 0);
    first = first + (n.w * n.T(0, 0)) * n.x;
  }
  const Vec3 c = m == 0.0 ? Vec3{} : (1.0 / m) * first;

  Vec3 S{};
  for (const auto& n : nodes) {
    const Vec3 p{n.T(1, 0), n.T(2, 0), n.T(3, 0)};
    S = S + n.w * cross(n.x - c, p);
  }
  SpinResult out;
  out.centroid = c;
  for (int k = 0; k < 3; ++k) {
    require_finite(S[k], "spin integral");
    out.S[k] = DimQuantity(S[k], dims::angular_momentum(), source.system());
    out.cgs[k] = convert(out.S[k], UnitSystem::cgs, registry);
  }
  return out;
}

PotentialResult grav_potential(const SourceSpec& source, const Vec3& x, const ConstantsRegistry& registry,
                               const QuadratureConfig& cfg) {
  require_outside(source, x, "grav_potential");
  const double m = mass(source, registry, cfg).value.value();
  const Vec3 c = centroid(source, cfg);
  const double r = norm(x - c);

  const FieldSample h = retarded_h(source, 0.0, x, 0, 0, cfg);
  // h^{00} = eta^{0a} eta^{0b} h_{ab} = h_{00}
  const double phi = -0.5 * h.value.value() * kPhiCalibration;

  PotentialResult out;
  out.phi = DimQuantity(phi, dims::mass_per_length(), source.system());
  out.newtonian = DimQuantity(-m / r, dims::mass_per_length(), source.system());
  out.r = r;
  out.remainder_coefficient = std::abs(phi + m / r) * r * r * r;
  out.quadrature_error = 0.5 * kPhiCalibration * h.quadrature_error;
  return out;
}

std::array<double, 3> pressure_integrals(const SourceSpec& source, const QuadratureConfig& cfg) {
  std::array<double, 3> p{};
  for (const auto& n : sample_measure(source, 0.0, cfg))
    for (int i = 0; i < 3; ++i) p[i] += n.w * n.T(i + 1, i + 1);
  return p;
}

DimQuantity em_potential(const SourceSpec& source, const Vec3& x, const QuadratureConfig& cfg,
                         TraceConvention convention) {
  require_diagonal(source, "em_potential");
  require_outside(source, x, "em_potential");
  double m = 0.0;
  for (const auto& n : sample_measure(source, 0.0, cfg)) m += n.w * n.T(0, 0);
  const auto p = pressure_integrals(source, cfg);
  double trace = p[0] + p[1] + p[2];
  if (convention == TraceConvention::signed_eta) trace = -trace;
  const double r = norm(x - centroid(source, cfg));
  return DimQuantity(2.0 * m * trace / r, {2, -1, 0, 0}, source.system());
}

ChargeResult charge_fraction(const SourceSpec& source, int d, const ConstantsRegistry& registry,
                             const QuadratureConfig& cfg) {
  if (d < 1 || d > 3) throw std::invalid_argument("retained dimensions must be 1, 2 or 3");
  require_diagonal(source, "charge_fraction");
  const auto p = pressure_integrals(source, cfg);
  // numerator and denominator accumulate in the same order so that d = 3 gives exactly 1
  double num = 0.0;
  double den = 0.0;
  for (int i = 0; i < 3; ++i) {
    den += p[i];
    if (i < d) num += p[i];
  }
  if (den == 0.0 || !std::isfinite(den)) {
    throw std::domain_error("charge fraction undefined: total pressure integral is zero");
  }
  ChargeResult out;
  out.retained_dimensions = d;
  out.fraction = num / den;
  out.reference_charge = out.fraction * convert(registry.get("e"), source.system(), registry);
  return out;
}

SourceSpec electron_preset(const ConstantsRegistry& registry, UnitSystem system) {
  const double m = convert(registry.get("m_e"), system, registry).value();
  const double hbar = convert(registry.get("hbar"), system, registry).value();
  return SourceSpec(ring_with_mass(m, hbar / (2.0 * m), 1.0), system);
}

}  // namespace knlab
