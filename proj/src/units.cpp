#include "knlab/units.hpp"

#include <openssl/evp.h>

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "knlab/constants_data.hpp"
#include "knlab/error.hpp"

namespace knlab {

// ---------------------------------------------------------------------------
// Rational

Rational::Rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw std::invalid_argument("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  num_ = g == 0 ? 0 : num / g;
  den_ = g == 0 ? 1 : den / g;
}

Rational operator+(Rational a, Rational b) {
  return Rational(a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_);
}
Rational operator-(Rational a, Rational b) { return a + (-b); }
Rational operator*(Rational a, Rational b) { return Rational(a.num_ * b.num_, a.den_ * b.den_); }
Rational operator/(Rational a, Rational b) {
  if (b.num_ == 0) throw std::invalid_argument("rational division by zero");
  return Rational(a.num_ * b.den_, a.den_ * b.num_);
}

std::string Rational::to_string() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

// ---------------------------------------------------------------------------
// DimVec

DimVec DimVec::gaussian_expanded() const {
  return {mass + charge * Rational(1, 2), length + charge * Rational(3, 2), time - charge, 0};
}

std::string DimVec::to_string() const {
  std::string out;
  auto put = [&out](const char* sym, Rational e) {
    if (e.is_zero()) return;
    if (!out.empty()) out += ' ';
    out += sym;
    out += '^';
    out += e.to_string();
  };
  put("g", mass);
  put("cm", length);
  put("s", time);
  put("esu", charge);
  return out.empty() ? "1" : out;
}

// ---------------------------------------------------------------------------
// Unit systems

std::string_view to_string(UnitSystem s) {
  switch (s) {
    case UnitSystem::cgs: return "cgs";
    case UnitSystem::natural: return "natural";
    case UnitSystem::geometrized: return "geometrized";
  }
  return "?";
}

UnitSystem parse_unit_system(std::string_view name) {
  if (name == "cgs") return UnitSystem::cgs;
  if (name == "natural") return UnitSystem::natural;
  if (name == "geometrized") return UnitSystem::geometrized;
  throw std::invalid_argument("unknown unit system '" + std::string(name) +
                              "' (expected cgs, natural or geometrized)");
}

namespace {

DimVec collapsed(const DimVec& physical, UnitSystem s) {
  if (s == UnitSystem::cgs) return physical;
  const DimVec e = physical.gaussian_expanded();
  if (s == UnitSystem::natural) return {e.mass - e.length - e.time, 0, 0, 0};
  return {0, e.mass + e.length + e.time, 0, 0};
}

// Multiplier taking a CGS value of the given physical dimension into system `s`.
double cgs_to_system_factor(const DimVec& physical, UnitSystem s, const ConstantsRegistry& reg,
                            ConversionOptions opt) {
  if (s == UnitSystem::cgs) return 1.0;
  if (!physical.charge.is_zero() && !opt.gaussian_charge) {
    throw std::invalid_argument(
        "cannot express a charge dimension in " + std::string(to_string(s)) +
        " units without the Gaussian charge convention (e^2 -> erg*cm)");
  }
  const DimVec e = physical.gaussian_expanded();
  const double hbar = reg.get("hbar").value();
  const double c = reg.get("c").value();
  if (s == UnitSystem::natural) {
    return std::pow(c / hbar, e.length.to_double()) * std::pow(c * c / hbar, e.time.to_double());
  }
  const double G = reg.get("G").value();
  return std::pow(G / (c * c), e.mass.to_double()) * std::pow(c, e.time.to_double());
}

void require_same_system(const DimQuantity& a, const DimQuantity& b, const char* op) {
  if (a.system() != b.system()) {
    throw std::invalid_argument(std::string(op) + " between quantities in different unit systems (" +
                                std::string(to_string(a.system())) + " vs " +
                                std::string(to_string(b.system())) + ")");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// DimQuantity

DimQuantity::DimQuantity(double value, DimVec physical, UnitSystem system)
    : value_(value), physical_(physical), system_(system) {}

DimVec DimQuantity::dims() const { return collapsed(physical_, system_); }

DimQuantity DimQuantity::pow(Rational p) const {
  return DimQuantity(std::pow(value_, p.to_double()), physical_ * p, system_);
}

DimQuantity operator*(const DimQuantity& a, const DimQuantity& b) {
  require_same_system(a, b, "multiplication");
  return DimQuantity(a.value_ * b.value_, a.physical_ + b.physical_, a.system_);
}

DimQuantity operator/(const DimQuantity& a, const DimQuantity& b) {
  require_same_system(a, b, "division");
  return DimQuantity(a.value_ / b.value_, a.physical_ - b.physical_, a.system_);
}

DimQuantity operator+(const DimQuantity& a, const DimQuantity& b) {
  require_same_system(a, b, "addition");
  if (!(a.dims() == b.dims())) {
    throw std::invalid_argument("addition of quantities with dimensions " + a.dims().to_string() +
                                " and " + b.dims().to_string());
  }
  return DimQuantity(a.value_ + b.value_, a.physical_, a.system_);
}

DimQuantity operator-(const DimQuantity& a, const DimQuantity& b) { return a + (-1.0 * b); }

DimQuantity operator*(double k, const DimQuantity& a) {
  return DimQuantity(k * a.value_, a.physical_, a.system_);
}

DimQuantity convert(const DimQuantity& q, UnitSystem target, const ConstantsRegistry& registry,
                    ConversionOptions options) {
  if (q.system() == target) return q;
  const double to_cgs = 1.0 / cgs_to_system_factor(q.physical_dims(), q.system(), registry, options);
  const double to_target = cgs_to_system_factor(q.physical_dims(), target, registry, options);
  return DimQuantity(q.value() * to_cgs * to_target, q.physical_dims(), target);
}

DimensionReport check_dimensions(const DimQuantity& lhs, const DimQuantity& rhs,
                                 ConversionOptions options) {
  require_same_system(lhs, rhs, "dimension check");
  DimVec a, b;
  if (lhs.system() == UnitSystem::cgs) {
    a = options.gaussian_charge ? lhs.physical_dims().gaussian_expanded() : lhs.physical_dims();
    b = options.gaussian_charge ? rhs.physical_dims().gaussian_expanded() : rhs.physical_dims();
  } else {
    a = lhs.dims();
    b = rhs.dims();
  }
  DimensionReport r;
  r.difference = a - b;
  r.consistent = r.difference.is_dimensionless();
  return r;
}

// ---------------------------------------------------------------------------
// Unit expressions

namespace {

struct BaseUnit {
  const char* name;
  double scale;
  DimVec dims;
};

const BaseUnit* find_base_unit(std::string_view name) {
  static const BaseUnit units[] = {
      {"1", 1.0, dims::dimensionless()},
      {"g", 1.0, dims::mass()},
      {"cm", 1.0, dims::length()},
      {"s", 1.0, dims::time()},
      {"esu", 1.0, dims::charge()},
      {"erg", 1.0, dims::energy()},
      {"dyn", 1.0, {1, 1, -2, 0}},
  };
  for (const auto& u : units) {
    if (name == u.name) return &u;
  }
  return nullptr;
}

std::int64_t parse_int(std::string_view s, std::string_view whole) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad exponent '" + std::string(s) + "' in unit '" +
                                std::string(whole) + "'");
  }
  return v;
}

Rational parse_exponent(std::string_view s, std::string_view whole) {
  if (s.size() >= 2 && s.front() == '(' && s.back() == ')') {
    s = s.substr(1, s.size() - 2);
    const auto slash = s.find('/');
    if (slash == std::string_view::npos) return Rational(parse_int(s, whole));
    return Rational(parse_int(s.substr(0, slash), whole), parse_int(s.substr(slash + 1), whole));
  }
  return Rational(parse_int(s, whole));
}

}  // namespace

std::pair<double, DimVec> parse_unit(std::string_view unit) {
  if (unit.empty()) throw std::invalid_argument("empty unit");
  double scale = 1.0;
  DimVec total;
  std::size_t i = 0;
  bool divide = false;
  while (i < unit.size()) {
    std::size_t j = i;
    int depth = 0;
    while (j < unit.size() && (depth > 0 || (unit[j] != '*' && unit[j] != '/'))) {
      if (unit[j] == '(') ++depth;
      if (unit[j] == ')') --depth;
      ++j;
    }
    const std::string_view factor = unit.substr(i, j - i);
    if (factor.empty()) throw std::invalid_argument("malformed unit '" + std::string(unit) + "'");
    const auto caret = factor.find('^');
    const std::string_view name = factor.substr(0, caret);
    const BaseUnit* base = find_base_unit(name);
    if (base == nullptr) {
      throw std::invalid_argument("unknown unit '" + std::string(name) + "' in '" +
                                  std::string(unit) + "'");
    }
    Rational p = caret == std::string_view::npos ? Rational(1)
                                                 : parse_exponent(factor.substr(caret + 1), unit);
    if (divide) p = -p;
    scale *= std::pow(base->scale, p.to_double());
    total = total + base->dims * p;
    if (j < unit.size()) divide = unit[j] == '/';
    i = j + 1;
    if (j + 1 == unit.size()) throw std::invalid_argument("malformed unit '" + std::string(unit) + "'");
  }
  return {scale, total};
}

// ---------------------------------------------------------------------------
// ConstantsRegistry

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int k = 0; k < len; ++k) {
    out += hex[md[k] >> 4];
    out += hex[md[k] & 0xf];
  }
  return out;
}

const ConstantsRegistry& ConstantsRegistry::builtin() {
  static const ConstantsRegistry reg = parse(kBuiltinConstants, "builtin:constants.txt");
  return reg;
}

ConstantsRegistry ConstantsRegistry::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open constants file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

ConstantsRegistry ConstantsRegistry::parse(std::string_view text, std::string origin) {
  ConstantsRegistry reg;
  reg.text_ = std::string(text);
  std::istringstream in(reg.text_);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<std::string> tok;
    for (std::string t; fields >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok[0] == "@version") {
      if (tok.size() != 2) throw ParseError(origin, lineno, "expected '@version <tag>'");
      reg.version_ = tok[1];
      continue;
    }
    if (tok.size() != 3) throw ParseError(origin, lineno, "expected '<name> <value> <unit>'");
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(tok[1].data(), tok[1].data() + tok[1].size(), value);
    if (ec != std::errc() || ptr != tok[1].data() + tok[1].size()) {
      throw ParseError(origin, lineno, "bad numeric value '" + tok[1] + "'");
    }
    std::pair<double, DimVec> unit;
    try {
      unit = parse_unit(tok[2]);
    } catch (const std::invalid_argument& err) {
      throw ParseError(origin, lineno, err.what());
    }
    if (reg.table_.count(tok[0]) != 0) throw ParseError(origin, lineno, "duplicate constant '" + tok[0] + "'");
    reg.table_.emplace(tok[0], DimQuantity(value * unit.first, unit.second, UnitSystem::cgs));
  }
  for (const char* required : {"G", "hbar", "c", "e", "m_e", "m_p", "m_pi"}) {
    if (reg.table_.count(required) == 0) {
      throw ParseError(origin, lineno, std::string("missing required constant '") + required + "'");
    }
  }
  reg.finalize();
  return reg;
}

void ConstantsRegistry::finalize() {
  table_.erase("m_planck");
  const DimQuantity hbar = table_.at("hbar");
  const DimQuantity c = table_.at("c");
  const DimQuantity G = table_.at("G");
  table_.emplace("m_planck", (hbar * c / G).sqrt());
  digest_ = sha256_hex(text_);
}

DimQuantity ConstantsRegistry::get(const std::string& name) const {
  auto it = table_.find(name);
  if (it == table_.end()) throw std::out_of_range("unknown constant '" + name + "'");
  return it->second;
}

ConstantsRegistry ConstantsRegistry::with_value(const std::string& name, double value) const {
  auto it = table_.find(name);
  if (it == table_.end()) throw std::out_of_range("unknown constant '" + name + "'");
  if (name == "m_planck") throw std::invalid_argument("m_planck is derived and cannot be overridden");
  ConstantsRegistry copy = *this;
  copy.table_.at(name) = DimQuantity(value, it->second.physical_dims(), UnitSystem::cgs);
  // rewrite the entry in place so the text still parses to this registry
  std::ostringstream value_text;
  value_text.precision(17);
  value_text << value;
  std::istringstream in(text_);
  std::string out;
  for (std::string line; std::getline(in, line);) {
    std::istringstream tok(line);
    std::string first, old_value, unit;
    if (tok >> first >> old_value >> unit && first == name) {
      line = first + ' ' + value_text.str() + ' ' + unit + "  # override";
    }
    out += line + '\n';
  }
  copy.text_ = out;
  copy.finalize();
  return copy;
}

}  // namespace knlab
