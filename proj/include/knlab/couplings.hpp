#pragma once

#include <optional>
#include <string>
#include <vector>

#include "knlab/units.hpp"

namespace knlab {

enum class ToleranceKind { dex, relative };

/// One comparison lhs vs rhs inside a ledger entry.
struct RelationCheck {
  std::string label;
  std::string lhs_expr;
  std::string rhs_expr;
  DimQuantity lhs;
  DimQuantity rhs;
  double lhs_log10_cgs = 0.0;  // log10 of lhs in cgs units, for display
  double rhs_log10_cgs = 0.0;
  double discrepancy = 0.0;  // log10(lhs / rhs)
  ToleranceKind tolerance_kind = ToleranceKind::dex;
  double tolerance = 0.0;  // dex, or relative for ToleranceKind::relative
  bool dimension_consistent = false;
  bool informational = false;  // reported but excluded from the entry verdict
  bool pass = false;
};

struct RelationEntry {
  std::string id;
  std::string description;
  std::vector<std::string> flags;
  std::vector<RelationCheck> checks;
  std::optional<std::string> error;  // degenerate inputs (for example a zero constant)
  bool pass = false;
};

/// R1: mass m* = sqrt(e^2 / G) against 1e-5 g, +-1 dex.
RelationEntry eval_planck_unification(const ConstantsRegistry& reg, UnitSystem system = UnitSystem::cgs);

/// R2: e^2 / (G m_p^2) against 1e40, (a) with m_p = 1e-20 m* and (b) with
/// the physical proton mass, +-2.5 dex.
RelationEntry eval_ratio_1e40(const ConstantsRegistry& reg, UnitSystem system = UnitSystem::cgs);

/// R3: quark mass m_e / (alpha / suppression) against 1e3 m_e, +-0.5 dex.
RelationEntry eval_quark_mass(const ConstantsRegistry& reg, UnitSystem system = UnitSystem::cgs,
                              double suppression = 10.0);

/// R4: intermediary mass 2 m_e / alpha against 274 m_e and the charged pion
/// mass, 1% relative. The factor-2 audit (m_e / alpha) is informational.
RelationEntry eval_pion_mass(const ConstantsRegistry& reg, UnitSystem system = UnitSystem::cgs);

struct WeakInputs {
  double g2 = 0.1;
  double mw_over_mp = 100.0;
};

/// R5: G_w = g^2 / m_w^2 against 1e-5 / m_p^2 (ratio 1 with round inputs)
/// and against 1e43 g^-2 with the registry proton mass, +-1 dex.
RelationEntry eval_weak_coupling(const ConstantsRegistry& reg, UnitSystem system = UnitSystem::cgs,
                                 WeakInputs inputs = {});

struct Ledger {
  UnitSystem system = UnitSystem::cgs;
  std::vector<RelationEntry> entries;
  int passed = 0;
  bool all_pass = false;
};

Ledger ledger_report(const ConstantsRegistry& reg, UnitSystem system = UnitSystem::cgs);

/// Fine-structure constant e^2 / (hbar c) from the registry.
double fine_structure(const ConstantsRegistry& reg);

}  // namespace knlab
