#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace knlab {

/// Exact rational number used for dimension exponents.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  bool is_zero() const { return num_ == 0; }

  friend Rational operator+(Rational a, Rational b);
  friend Rational operator-(Rational a, Rational b);
  friend Rational operator*(Rational a, Rational b);
  friend Rational operator/(Rational a, Rational b);
  Rational operator-() const { return Rational(-num_, den_); }
  Rational& operator+=(Rational o) { return *this = *this + o; }
  Rational& operator-=(Rational o) { return *this = *this - o; }
  friend bool operator==(const Rational&, const Rational&) = default;

  std::string to_string() const;

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

/// Exponents of the four base dimensions (mass, length, time, charge).
struct DimVec {
  Rational mass;
  Rational length;
  Rational time;
  Rational charge;

  bool is_dimensionless() const {
    return mass.is_zero() && length.is_zero() && time.is_zero() && charge.is_zero();
  }

  friend DimVec operator+(const DimVec& a, const DimVec& b) {
    return {a.mass + b.mass, a.length + b.length, a.time + b.time, a.charge + b.charge};
  }
  friend DimVec operator-(const DimVec& a, const DimVec& b) {
    return {a.mass - b.mass, a.length - b.length, a.time - b.time, a.charge - b.charge};
  }
  friend DimVec operator*(const DimVec& a, Rational k) {
    return {a.mass * k, a.length * k, a.time * k, a.charge * k};
  }
  friend bool operator==(const DimVec&, const DimVec&) = default;

  /// Rewrites the charge exponent in mechanical units (esu = g^1/2 cm^3/2 s^-1).
  DimVec gaussian_expanded() const;

  /// Human-readable form such as "g^1 cm^2 s^-1"; "1" when dimensionless.
  std::string to_string() const;
};

namespace dims {
inline DimVec dimensionless() { return {}; }
inline DimVec mass() { return {1, 0, 0, 0}; }
inline DimVec length() { return {0, 1, 0, 0}; }
inline DimVec time() { return {0, 0, 1, 0}; }
inline DimVec charge() { return {0, 0, 0, 1}; }
inline DimVec energy() { return {1, 2, -2, 0}; }
inline DimVec energy_density() { return {1, -1, -2, 0}; }
inline DimVec angular_momentum() { return {1, 2, -1, 0}; }
inline DimVec momentum() { return {1, 1, -1, 0}; }
// c = 1 field potentials such as integral T / r
inline DimVec mass_per_length() { return {1, -1, 0, 0}; }
}  // namespace dims

enum class UnitSystem { cgs, natural, geometrized };

std::string_view to_string(UnitSystem s);
UnitSystem parse_unit_system(std::string_view name);

class ConstantsRegistry;

struct ConversionOptions {
  /// Allow charge to be folded into mass/length/time via the Gaussian convention.
  bool gaussian_charge = true;
};

/// A value with a physical dimension, tagged with the unit system it is expressed in.
///
/// `physical_dims()` is the CGS-Gaussian dimension the quantity measures and is
/// preserved across conversions, so conversions are invertible. `dims()` is the
/// dimension vector as seen inside the tagged system: in natural units every
/// dimension collapses to a power of mass, in geometrized units to a power of
/// length.
class DimQuantity {
 public:
  DimQuantity() = default;
  DimQuantity(double value, DimVec physical, UnitSystem system = UnitSystem::cgs);

  double value() const { return value_; }
  UnitSystem system() const { return system_; }
  const DimVec& physical_dims() const { return physical_; }
  DimVec dims() const;

  DimQuantity pow(Rational p) const;
  DimQuantity sqrt() const { return pow(Rational(1, 2)); }

  friend DimQuantity operator*(const DimQuantity& a, const DimQuantity& b);
  friend DimQuantity operator/(const DimQuantity& a, const DimQuantity& b);
  friend DimQuantity operator+(const DimQuantity& a, const DimQuantity& b);
  friend DimQuantity operator-(const DimQuantity& a, const DimQuantity& b);
  friend DimQuantity operator*(double k, const DimQuantity& a);
  friend DimQuantity operator*(const DimQuantity& a, double k) { return k * a; }
  friend DimQuantity operator/(const DimQuantity& a, double k) { return (1.0 / k) * a; }

 private:
  double value_ = 0.0;
  DimVec physical_;
  UnitSystem system_ = UnitSystem::cgs;
};

/// Dimensionless number in the given system.
inline DimQuantity dimensionless(double v, UnitSystem s = UnitSystem::cgs) {
  return DimQuantity(v, dims::dimensionless(), s);
}

/// Rescales `q` into `target` using the hbar, c and G values held by `registry`.
DimQuantity convert(const DimQuantity& q, UnitSystem target, const ConstantsRegistry& registry,
                    ConversionOptions options = {});

struct DimensionReport {
  bool consistent = false;
  DimVec difference;  // lhs - rhs, after Gaussian expansion when enabled
};

/// Compares the dimensions of two quantities expressed in the same unit system.
DimensionReport check_dimensions(const DimQuantity& lhs, const DimQuantity& rhs,
                                 ConversionOptions options = {});

/// Immutable table of physical constants, stored in CGS-Gaussian units.
///
/// Built from the line-oriented constants file format:
///
///     # comment
///     @version <tag>
///     <name> <value> <unit>
///
/// `<unit>` is a product of base units joined by `*` or `/`, each optionally
/// raised to an integer or parenthesised rational power: `cm^3*g^-1*s^-2`,
/// `erg*s`, `g^(1/2)`. Base units: g, cm, s, esu, erg, dyn and `1` for
/// dimensionless entries. Required names: G, hbar, c, e, m_e, m_p, m_pi.
class ConstantsRegistry {
 public:
  /// Registry built from the constants file shipped with the library.
  static const ConstantsRegistry& builtin();
  static ConstantsRegistry parse(std::string_view text, std::string origin = "<memory>");
  static ConstantsRegistry load(const std::string& path);

  /// Copy of the constant tagged cgs. Throws std::out_of_range for unknown names.
  DimQuantity get(const std::string& name) const;
  bool contains(const std::string& name) const { return table_.count(name) != 0; }

  /// New registry with one value replaced (unit kept).
  ConstantsRegistry with_value(const std::string& name, double value) const;

  const std::string& version() const { return version_; }
  const std::string& source_text() const { return text_; }
  /// Hex SHA-256 of the constants text the registry was parsed from.
  const std::string& digest() const { return digest_; }
  const std::map<std::string, DimQuantity>& entries() const { return table_; }

 private:
  ConstantsRegistry() = default;
  void finalize();

  std::map<std::string, DimQuantity> table_;
  std::string version_;
  std::string text_;
  std::string digest_;
};

/// Parses a unit expression from the constants grammar into a scale factor
/// (relative to g/cm/s/esu) and a dimension vector.
std::pair<double, DimVec> parse_unit(std::string_view unit);

std::string sha256_hex(std::string_view data);

}  // namespace knlab
