#include <doctest.h>

#include <algorithm>
#include <stdexcept>

#include "knlab/functionals.hpp"
#include "oracles.hpp"

using namespace knlab;

namespace {

const ConstantsRegistry& reg() { return ConstantsRegistry::builtin(); }

double spin_z(const SourceSpec& s) { return spin(s, reg()).S[2].value(); }

}  // namespace

TEST_CASE("mass of each family") {
  CHECK(oracle::rel_err(mass(SourceSpec(StaticBall{0.3, 2.0, {}, {}}), reg()).value.value(),
                        0.3 * oracle::ball_volume(2.0)) < 1e-12);
  CHECK(oracle::rel_err(mass(SourceSpec(Ring{0.5, 1.5, 0.2, {}}), reg()).value.value(), 2 * oracle::pi * 1.5 * 0.5) <
        1e-12);
  CHECK(oracle::rel_err(mass(SourceSpec(RotatingShell{0.1, 2.0, 0.2, {}}), reg()).value.value(),
                        4 * oracle::pi * 4.0 * 0.1) < 1e-12);
  const MassResult m = mass(SourceSpec(ball_with_mass(1.0, 1.0)), reg());
  CHECK(m.value.physical_dims() == dims::mass());
  CHECK(oracle::rel_err(m.cgs.value(), oracle::c * oracle::c / oracle::G) < 1e-12);
}

TEST_CASE("spin oracles") {
  CHECK(oracle::rel_err(spin_z(SourceSpec(ring_with_mass(2.0, 1.5, 0.4))), 2.0 * 1.5 * 0.4) < 1e-6);
  CHECK(oracle::rel_err(spin_z(SourceSpec(ring_with_mass(1.0, 1.0, -0.3))), -0.3) < 1e-6);
  const double eps = 1.0 / oracle::ball_volume(1.0);
  CHECK(oracle::rel_err(spin_z(SourceSpec(RotatingBall{eps, 1.0, 0.5, {}})), 0.4 * 0.5) < 1e-6);
  const double sigma = 1.0 / (4.0 * oracle::pi);
  CHECK(oracle::rel_err(spin_z(SourceSpec(RotatingShell{sigma, 1.0, 0.5, {}})), 2.0 / 3.0 * 0.5) < 1e-6);
  const SpinResult zero = spin(SourceSpec(ball_with_mass(1.0, 1.0, {}, {1, 2, 3})), reg());
  for (const auto& s : zero.S) CHECK(s.value() == 0.0);
  CHECK(spin(SourceSpec(ring_with_mass(1, 1, 0.5)), reg()).S[0].value() == 0.0);
}

TEST_CASE("spin is measured about the centroid") {
  const SourceSpec here(ring_with_mass(1.0, 1.0, 0.5));
  const SourceSpec there(ring_with_mass(1.0, 1.0, 0.5, {4.0, -3.0, 2.0}));
  const SpinResult s = spin(there, reg());
  CHECK(s.S[2].value() == doctest::Approx(spin_z(here)).epsilon(1e-12));
  CHECK(s.centroid[0] == doctest::Approx(4.0));
  CHECK(s.centroid[1] == doctest::Approx(-3.0));
  const SourceSpec pair = SourceSpec::superpose(
      {SourceSpec(ball_with_mass(1.0, 0.5, {}, {-1, 0, 0})), SourceSpec(ball_with_mass(3.0, 0.5, {}, {1, 0, 0}))});
  CHECK(centroid(pair)[0] == doctest::Approx(0.5));
}

TEST_CASE("electron preset carries hbar/2 and the electron mass") {
  for (UnitSystem sys : {UnitSystem::geometrized, UnitSystem::natural}) {
    const SourceSpec e = electron_preset(reg(), sys);
    const SpinResult s = spin(e, reg());
    CHECK(oracle::rel_err(convert(s.S[2], UnitSystem::cgs, reg()).value(), oracle::hbar / 2.0) < 1e-6);
    CHECK(oracle::rel_err(mass(e, reg()).cgs.value(), oracle::m_e) < 1e-9);
  }
}

TEST_CASE("potential of a spherical source is -m/r after calibration") {
  const SourceSpec ball(ball_with_mass(2.0, 1.0));
  for (double r : {4.0, 8.0, 16.0}) {
    const PotentialResult p = grav_potential(ball, {0, 0, r}, reg());
    CHECK(oracle::rel_err(p.phi.value(), -2.0 / r) < 1e-6);
    CHECK(p.newtonian.value() == doctest::Approx(-2.0 / r));
    CHECK(p.calibration == 0.5);
  }
  CHECK_THROWS_AS(grav_potential(ball, {0.5, 0, 0}, reg()), std::invalid_argument);
}

TEST_CASE("quadrupole remainder falls off as 1/r^3") {
  const SourceSpec pair = SourceSpec::superpose(
      {SourceSpec(ball_with_mass(0.5, 0.5, {}, {0, 0, 1})), SourceSpec(ball_with_mass(0.5, 0.5, {}, {0, 0, -1}))});
  std::vector<double> k;
  for (double r : {6.0, 12.0, 24.0}) k.push_back(grav_potential(pair, {0, 0, r}, reg()).remainder_coefficient);
  // two unit-distance half masses: phi + m/r -> -Q/r^3 with Q = 1 on the axis
  for (double v : k) CHECK(std::abs(v - 1.0) < 0.05);
  CHECK((*std::max_element(k.begin(), k.end()) - *std::min_element(k.begin(), k.end())) / k.back() < 0.1);
}

TEST_CASE("electromagnetic potential reproduces e^2 = m^2") {
  for (double m : {1.0, 0.25}) {
    const SourceSpec ball(ball_with_mass(m, 1.0));
    const double r = 3.0;
    const DimQuantity A0 = em_potential(ball, {r, 0, 0});
    CHECK(A0.value() * r / (2.0 * m * m) == doctest::Approx(1.0).epsilon(1e-6));
  }
  // the signed eta^{ij} trace flips the sign
  const SourceSpec ball(ball_with_mass(1.0, 1.0));
  CHECK(em_potential(ball, {3, 0, 0}, {}, TraceConvention::signed_eta).value() ==
        doctest::Approx(-em_potential(ball, {3, 0, 0}).value()));
  CHECK_THROWS(em_potential(SourceSpec(RotatingBall{1.0, 1.0, 0.3, {}}), {3, 0, 0}));
}

TEST_CASE("charge fractions count retained dimensions") {
  const SourceSpec iso(ball_with_mass(1.0, 1.0));
  CHECK(std::abs(charge_fraction(iso, 1, reg()).fraction - 1.0 / 3.0) < 1e-12);
  CHECK(std::abs(charge_fraction(iso, 2, reg()).fraction - 2.0 / 3.0) < 1e-12);
  CHECK(charge_fraction(iso, 3, reg()).fraction == 1.0);
  const SourceSpec aniso(ball_with_mass(1.0, 1.0, PressureModel::diagonal_model(0.1, 0.2, 0.3)));
  CHECK(charge_fraction(aniso, 1, reg()).fraction == doctest::Approx(1.0 / 6.0));
  CHECK(charge_fraction(aniso, 2, reg()).fraction == doctest::Approx(0.5));
  CHECK_THROWS_AS(charge_fraction(iso, 4, reg()), std::invalid_argument);
  CHECK_THROWS_AS(charge_fraction(SourceSpec(ball_with_mass(1.0, 1.0, PressureModel::diagonal_model(0, 0, 0))), 1, reg()),
                  std::domain_error);
  const ChargeResult q = charge_fraction(iso, 3, reg());
  CHECK(oracle::rel_err(convert(q.reference_charge, UnitSystem::cgs, reg()).value(), oracle::e) < 1e-12);
}

TEST_CASE("pressure integrals of an isotropic ball are a third of the mass each") {
  const auto p = pressure_integrals(SourceSpec(ball_with_mass(1.5, 1.0)));
  for (double v : p) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}
