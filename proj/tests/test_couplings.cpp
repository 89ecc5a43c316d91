#include <doctest.h>

#include <stdexcept>

#include "knlab/couplings.hpp"
#include "oracles.hpp"

using namespace knlab;

namespace {

const ConstantsRegistry& reg() { return ConstantsRegistry::builtin(); }

const UnitSystem kSystems[] = {UnitSystem::cgs, UnitSystem::natural, UnitSystem::geometrized};

}  // namespace

TEST_CASE("fine structure constant") {
  CHECK(oracle::rel_err(fine_structure(reg()), oracle::alpha()) < 1e-14);
  CHECK(1.0 / fine_structure(reg()) == doctest::Approx(137.035999).epsilon(1e-8));
}

TEST_CASE("R1 unification mass") {
  const double expected = std::log10(std::sqrt(oracle::e * oracle::e / oracle::G) / 1e-5);
  CHECK(expected == doctest::Approx(-0.73067).epsilon(1e-4));
  for (UnitSystem s : kSystems) {
    const RelationEntry r = eval_planck_unification(reg(), s);
    CHECK(r.checks.at(0).discrepancy == doctest::Approx(expected).epsilon(1e-12));
    CHECK(r.checks.at(0).dimension_consistent);
    CHECK(r.pass);
  }
}

TEST_CASE("R2 ratio of couplings") {
  const RelationEntry r = eval_ratio_1e40(reg());
  REQUIRE(r.checks.size() == 2);
  CHECK(std::abs(r.checks[0].discrepancy) < 1e-12);
  const double measured = std::log10(oracle::e * oracle::e / (oracle::G * oracle::m_p * oracle::m_p)) - 40.0;
  CHECK(r.checks[1].discrepancy == doctest::Approx(measured).epsilon(1e-12));
  CHECK(measured < -3.9);
  CHECK_FALSE(r.checks[1].pass);
  CHECK_FALSE(r.pass);
  CHECK(r.flags == std::vector<std::string>{"proton-mass-ambiguous"});
}

TEST_CASE("R3 quark mass") {
  const double expected = std::log10(10.0 / oracle::alpha() / 1e3);
  for (UnitSystem s : kSystems) {
    const RelationEntry r = eval_quark_mass(reg(), s);
    CHECK(r.checks.at(0).discrepancy == doctest::Approx(expected).epsilon(1e-12));
    CHECK(r.pass);
  }
  CHECK_FALSE(eval_quark_mass(reg(), UnitSystem::cgs, 1000.0).pass);
}

TEST_CASE("R4 intermediary mass") {
  const RelationEntry r = eval_pion_mass(reg());
  REQUIRE(r.checks.size() == 3);
  const double ratio = 2.0 / oracle::alpha() / 274.0;
  CHECK(std::pow(10.0, r.checks[0].discrepancy) == doctest::Approx(ratio).epsilon(1e-12));
  CHECK(std::abs(ratio - 1.0) < 0.01);
  const double pion = 2.0 * oracle::m_e / oracle::alpha() / oracle::m_pi;
  CHECK(std::pow(10.0, r.checks[1].discrepancy) == doctest::Approx(pion).epsilon(1e-12));
  CHECK(r.checks[2].informational);
  CHECK_FALSE(r.checks[2].pass);
  CHECK(r.pass);
}

TEST_CASE("R5 weak coupling") {
  for (UnitSystem s : kSystems) {
    const RelationEntry r = eval_weak_coupling(reg(), s);
    REQUIRE(r.checks.size() == 2);
    CHECK(std::abs(r.checks[0].discrepancy) < 1e-12);
    const double gw = 0.1 / std::pow(100.0 * oracle::m_p, 2);
    CHECK(r.checks[1].discrepancy == doctest::Approx(std::log10(gw / 1e43)).epsilon(1e-10));
    CHECK(r.pass);
  }
  CHECK(eval_weak_coupling(reg()).flags == std::vector<std::string>{"units-unclear"});
}

TEST_CASE("ledger is the same in every unit system") {
  const Ledger base = ledger_report(reg(), UnitSystem::cgs);
  CHECK(base.entries.size() == 5);
  CHECK(base.passed == 4);
  CHECK_FALSE(base.all_pass);
  for (UnitSystem s : kSystems) {
    const Ledger l = ledger_report(reg(), s);
    for (std::size_t i = 0; i < l.entries.size(); ++i) {
      for (std::size_t j = 0; j < l.entries[i].checks.size(); ++j) {
        CHECK(l.entries[i].checks[j].discrepancy ==
              doctest::Approx(base.entries[i].checks[j].discrepancy).epsilon(1e-12).scale(1.0));
        CHECK(l.entries[i].checks[j].lhs.system() == s);
      }
      CHECK(l.entries[i].pass == base.entries[i].pass);
    }
  }
}

TEST_CASE("constant overrides propagate") {
  // a proton heavy enough to reach 1e40 within tolerance
  const double mp = std::sqrt(oracle::e * oracle::e / (oracle::G * 1e38));
  const RelationEntry r = eval_ratio_1e40(reg().with_value("m_p", mp));
  CHECK(r.checks[1].discrepancy == doctest::Approx(-2.0).epsilon(1e-10));
  CHECK(r.pass);
}

TEST_CASE("degenerate constants are reported, not thrown") {
  const RelationEntry r = eval_planck_unification(reg().with_value("e", 0.0));
  CHECK(r.error.has_value());
  CHECK_FALSE(r.pass);
}
