#include <doctest.h>

#include <random>
#include <stdexcept>

#include "knlab/error.hpp"
#include "knlab/units.hpp"
#include "oracles.hpp"

using namespace knlab;

namespace {

const ConstantsRegistry& reg() { return ConstantsRegistry::builtin(); }

double in(const DimQuantity& q, UnitSystem s) { return convert(q, s, reg()).value(); }

}  // namespace

TEST_CASE("rational exponents normalize") {
  CHECK(Rational(2, 4) == Rational(1, 2));
  CHECK(Rational(1, -2) == Rational(-1, 2));
  CHECK((Rational(1, 3) + Rational(1, 6)) == Rational(1, 2));
  CHECK((Rational(3, 2) * Rational(2, 3)) == Rational(1));
  CHECK(Rational(-3, 6).to_string() == "-1/2");
  CHECK_THROWS_AS(Rational(1, 0), std::invalid_argument);
  CHECK_THROWS_AS(Rational(1) / Rational(0), std::invalid_argument);
}

TEST_CASE("dimension vectors print and expand gaussian charge") {
  CHECK(dims::angular_momentum().to_string() == "g^1 cm^2 s^-1");
  CHECK(dims::dimensionless().to_string() == "1");
  const DimVec esu = dims::charge().gaussian_expanded();
  CHECK(esu == DimVec{Rational(1, 2), Rational(3, 2), -1, 0});
}

TEST_CASE("unit expressions parse to scale and dimension") {
  auto [k1, d1] = parse_unit("erg*s");
  CHECK(k1 == doctest::Approx(1.0));
  CHECK(d1 == dims::angular_momentum());
  auto [k2, d2] = parse_unit("cm^3*g^-1*s^-2");
  CHECK(k2 == doctest::Approx(1.0));
  CHECK(d2 == DimVec{-1, 3, -2, 0});
  auto [k3, d3] = parse_unit("g^(1/2)");
  CHECK(k3 == doctest::Approx(1.0));
  CHECK(d3 == DimVec{Rational(1, 2), 0, 0, 0});
  CHECK_THROWS_AS(parse_unit("parsec"), std::invalid_argument);
  CHECK_THROWS_AS(parse_unit("cm^"), std::invalid_argument);
}

TEST_CASE("sha256 matches the published test vector") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("builtin registry holds CODATA values") {
  CHECK(reg().get("G").value() == oracle::G);
  CHECK(reg().get("hbar").value() == oracle::hbar);
  CHECK(reg().get("m_p").value() == oracle::m_p);
  CHECK(reg().get("hbar").physical_dims() == dims::angular_momentum());
  CHECK(reg().digest().size() == 64);
  CHECK_THROWS_AS(reg().get("m_tau"), std::out_of_range);
}

TEST_CASE("the defining constants become one in their systems") {
  CHECK(in(reg().get("hbar"), UnitSystem::natural) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(in(reg().get("c"), UnitSystem::natural) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(in(reg().get("G"), UnitSystem::geometrized) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(in(reg().get("c"), UnitSystem::geometrized) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("conversions agree with hand-computed values") {
  const DimQuantity me = reg().get("m_e");
  CHECK(oracle::rel_err(in(me, UnitSystem::geometrized), oracle::G * oracle::m_e / (oracle::c * oracle::c)) < 1e-14);
  const DimQuantity one_cm(1.0, dims::length());
  CHECK(oracle::rel_err(in(one_cm, UnitSystem::natural), oracle::c / oracle::hbar) < 1e-14);
  const DimQuantity one_s(1.0, dims::time());
  CHECK(oracle::rel_err(in(one_s, UnitSystem::geometrized), oracle::c) < 1e-14);
  const DimQuantity e = reg().get("e");
  CHECK(oracle::rel_err(in(e * e, UnitSystem::natural), oracle::alpha()) < 1e-13);
  CHECK(convert(me, UnitSystem::geometrized, reg()).dims() == dims::length());
  CHECK(convert(one_cm, UnitSystem::natural, reg()).dims() == DimVec{-1, 0, 0, 0});
}

TEST_CASE("conversion round trips are exact to 1e-12 for random dimensions") {
  std::mt19937_64 rng(20240917);
  std::uniform_int_distribution<int> exponent(-3, 3);
  std::uniform_real_distribution<double> mantissa(-30.0, 30.0);
  const UnitSystem systems[] = {UnitSystem::cgs, UnitSystem::natural, UnitSystem::geometrized};
  for (int i = 0; i < 500; ++i) {
    const DimVec d{exponent(rng), exponent(rng), exponent(rng), Rational(exponent(rng), 2)};
    const DimQuantity q(std::pow(10.0, mantissa(rng) / 3.0), d);
    for (UnitSystem a : systems) {
      for (UnitSystem b : systems) {
        const DimQuantity back = convert(convert(convert(q, a, reg()), b, reg()), UnitSystem::cgs, reg());
        REQUIRE(oracle::rel_err(back.value(), q.value()) < 1e-12);
        REQUIRE(back.physical_dims() == d);
      }
    }
  }
}

TEST_CASE("arithmetic tracks dimensions and rejects mixed systems") {
  const DimQuantity m(2.0, dims::mass());
  const DimQuantity v(3.0, {0, 1, -1, 0});
  const DimQuantity p = m * v;
  CHECK(p.physical_dims() == dims::momentum());
  CHECK(p.value() == 6.0);
  CHECK(m.pow(Rational(1, 2)).physical_dims() == DimVec{Rational(1, 2), 0, 0, 0});
  CHECK_THROWS_AS(m + v, std::invalid_argument);
  CHECK_THROWS_AS(m * convert(v, UnitSystem::natural, reg()), std::invalid_argument);
}

TEST_CASE("dimension check folds gaussian charge") {
  const DimQuantity e = reg().get("e");
  const DimQuantity G = reg().get("G");
  const DimQuantity m = reg().get("m_e");
  CHECK(check_dimensions(e * e, G * m * m).consistent);
  CHECK_FALSE(check_dimensions(e * e, G * m * m, {.gaussian_charge = false}).consistent);
  CHECK_FALSE(check_dimensions(e, m).consistent);
}

TEST_CASE("constants files are validated line by line") {
  const std::string good =
      "@version test-1\nG 6.67430e-8 cm^3*g^-1*s^-2\nhbar 1.054571817e-27 erg*s\nc 2.99792458e10 cm/s\n"
      "e 4.8e-10 esu\nm_e 9.1e-28 g\nm_p 1.67e-24 g\nm_pi 2.5e-25 g\n";
  const ConstantsRegistry r = ConstantsRegistry::parse(good, "good.txt");
  CHECK(r.version() == "test-1");
  CHECK(r.digest() == sha256_hex(good));
  CHECK(r.digest() != reg().digest());

  try {
    ConstantsRegistry::parse(good + "m_mu 1.9e-25 furlong\n", "bad.txt");
    FAIL("expected a parse error");
  } catch (const ParseError& err) {
    CHECK(err.line() == 9);
    CHECK(std::string(err.what()).find("bad.txt:9") != std::string::npos);
  }
  CHECK_THROWS_AS(ConstantsRegistry::parse(good + "G 1 cm\n"), ParseError);
  CHECK_THROWS_AS(ConstantsRegistry::parse("G 6.67430e-8 cm^3*g^-1*s^-2\n"), ParseError);
  CHECK_THROWS_AS(ConstantsRegistry::parse(good + "x abc g\n"), ParseError);
}

TEST_CASE("overriding a constant changes the digest and the value") {
  const ConstantsRegistry r = reg().with_value("m_p", 2e-24);
  CHECK(r.get("m_p").value() == 2e-24);
  CHECK(r.get("m_p").physical_dims() == dims::mass());
  CHECK(r.digest() != reg().digest());
  CHECK(ConstantsRegistry::parse(r.source_text()).get("m_p").value() == 2e-24);
}

TEST_CASE("unit system names parse") {
  CHECK(parse_unit_system("natural") == UnitSystem::natural);
  CHECK(parse_unit_system("geometrized") == UnitSystem::geometrized);
  CHECK(to_string(UnitSystem::cgs) == "cgs");
  CHECK_THROWS_AS(parse_unit_system("planck"), std::invalid_argument);
}
