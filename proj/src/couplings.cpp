#include "knlab/couplings.hpp"

#include <cmath>
#include <sstream>

namespace knlab {

namespace {

struct Ctx {
  const ConstantsRegistry& reg;
  UnitSystem system;

  DimQuantity k(const std::string& name) const { return convert(reg.get(name), system, reg); }
  DimQuantity value(double v, DimVec physical_cgs) const {
    return convert(DimQuantity(v, physical_cgs, UnitSystem::cgs), system, reg);
  }
  DimQuantity number(double v) const { return DimQuantity(v, dims::dimensionless(), system); }
  double log10_cgs(const DimQuantity& q) const { return std::log10(convert(q, UnitSystem::cgs, reg).value()); }
};

RelationCheck make_check(const Ctx& ctx, std::string label, std::string lhs_expr, const DimQuantity& lhs,
                         std::string rhs_expr, const DimQuantity& rhs, ToleranceKind kind, double tolerance) {
  RelationCheck c;
  c.label = std::move(label);
  c.lhs_expr = std::move(lhs_expr);
  c.rhs_expr = std::move(rhs_expr);
  c.lhs = lhs;
  c.rhs = rhs;
  c.tolerance_kind = kind;
  c.tolerance = tolerance;
  c.dimension_consistent = check_dimensions(lhs, rhs).consistent;
  c.lhs_log10_cgs = ctx.log10_cgs(lhs);
  c.rhs_log10_cgs = ctx.log10_cgs(rhs);
  const double ratio = lhs.value() / rhs.value();
  c.discrepancy = std::log10(ratio);
  if (kind == ToleranceKind::dex) {
    c.pass = std::abs(c.discrepancy) <= tolerance;
  } else {
    c.pass = std::abs(ratio - 1.0) <= tolerance;
  }
  if (!std::isfinite(c.discrepancy)) c.pass = false;
  return c;
}

void finish(RelationEntry& e) {
  e.pass = !e.checks.empty();
  for (const auto& c : e.checks) {
    if (!std::isfinite(c.discrepancy) && !e.error) {
      e.error = "log of zero or non-finite ratio in '" + c.label + "' (" + c.lhs_expr + " / " + c.rhs_expr + ")";
    }
    if (!c.informational && !c.pass) e.pass = false;
  }
  if (e.error) e.pass = false;
}

}  // namespace

double fine_structure(const ConstantsRegistry& reg) {
  const DimQuantity e = reg.get("e");
  return convert(e * e / (reg.get("hbar") * reg.get("c")), UnitSystem::cgs, reg).value();
}

RelationEntry eval_planck_unification(const ConstantsRegistry& reg, UnitSystem system) {
  const Ctx ctx{reg, system};
  RelationEntry e;
  e.id = "R1";
  e.description = "Mass at which the electric and gravitational couplings agree, e^2 = G m^2, against 1e-5 g";
  const DimQuantity charge = ctx.k("e");
  const DimQuantity m_star = (charge * charge / ctx.k("G")).sqrt();
  e.checks.push_back(make_check(ctx, "unification mass", "sqrt(e^2/G)", m_star, "1e-5 g",
                                ctx.value(1e-5, dims::mass()), ToleranceKind::dex, 1.0));
  finish(e);
  return e;
}

RelationEntry eval_ratio_1e40(const ConstantsRegistry& reg, UnitSystem system) {
  const Ctx ctx{reg, system};
  RelationEntry e;
  e.id = "R2";
  e.description =
      "Electric to gravitational coupling of the proton, e^2/(G m_p^2), against 1e40; (a) takes m_p = 1e-20 of "
      "the unification mass sqrt(e^2/G), (b) the measured proton mass";
  e.flags.push_back("proton-mass-ambiguous");
  const DimQuantity charge = ctx.k("e");
  const DimQuantity G = ctx.k("G");
  const DimQuantity e2 = charge * charge;
  const DimQuantity m_star = (e2 / G).sqrt();
  const DimQuantity mp_model = 1e-20 * m_star;
  const DimQuantity target = ctx.number(1e40);
  e.checks.push_back(make_check(ctx, "(a) model proton mass", "e^2/(G (1e-20 sqrt(e^2/G))^2)",
                                e2 / (G * mp_model * mp_model), "1e40", target, ToleranceKind::dex, 2.5));
  const DimQuantity mp = ctx.k("m_p");
  e.checks.push_back(make_check(ctx, "(b) measured proton mass", "e^2/(G m_p^2)", e2 / (G * mp * mp), "1e40",
                                target, ToleranceKind::dex, 2.5));
  finish(e);
  return e;
}

RelationEntry eval_quark_mass(const ConstantsRegistry& reg, UnitSystem system, double suppression) {
  const Ctx ctx{reg, system};
  RelationEntry e;
  e.id = "R3";
  std::ostringstream desc;
  desc << "Quark mass from a coupling suppressed by " << suppression
       << ", m_q = m_e / (alpha / " << suppression << "), against 1e3 m_e";
  e.description = desc.str();
  const DimQuantity charge = ctx.k("e");
  const DimQuantity alpha = charge * charge / (ctx.k("hbar") * ctx.k("c"));
  const DimQuantity me = ctx.k("m_e");
  const DimQuantity mq = me / (alpha / suppression);
  std::ostringstream expr;
  expr << "m_e/(alpha/" << suppression << ")";
  e.checks.push_back(make_check(ctx, "quark mass", expr.str(), mq, "1e3 m_e", 1e3 * me, ToleranceKind::dex, 0.5));
  finish(e);
  return e;
}

RelationEntry eval_pion_mass(const ConstantsRegistry& reg, UnitSystem system) {
  const Ctx ctx{reg, system};
  RelationEntry e;
  e.id = "R4";
  e.description =
      "Intermediary mass 2 m_e / alpha against 274 m_e and the charged pion mass; the factor 2 comes from the "
      "2 G m_e prefactor of the near-field coupling";
  const DimQuantity charge = ctx.k("e");
  const DimQuantity alpha = charge * charge / (ctx.k("hbar") * ctx.k("c"));
  const DimQuantity me = ctx.k("m_e");
  const DimQuantity m_int = 2.0 * me / alpha;
  e.checks.push_back(make_check(ctx, "against 274 m_e", "2 m_e/alpha", m_int, "274 m_e", 274.0 * me,
                                ToleranceKind::relative, 0.01));
  e.checks.push_back(make_check(ctx, "against the charged pion", "2 m_e/alpha", m_int, "m_pi", ctx.k("m_pi"),
                                ToleranceKind::relative, 0.01));
  RelationCheck audit = make_check(ctx, "factor-2 audit (without the 2)", "m_e/alpha", me / alpha, "274 m_e",
                                   274.0 * me, ToleranceKind::relative, 0.01);
  audit.informational = true;
  e.checks.push_back(audit);
  finish(e);
  return e;
}

RelationEntry eval_weak_coupling(const ConstantsRegistry& reg, UnitSystem system, WeakInputs inputs) {
  const Ctx ctx{reg, system};
  RelationEntry e;
  e.id = "R5";
  std::ostringstream desc;
  desc << "Weak coupling G_w = g^2/m_w^2 with g^2 = " << inputs.g2 << " and m_w = " << inputs.mw_over_mp
       << " m_p, against 1e-5/m_p^2 and against 1e43 g^-2";
  e.description = desc.str();
  e.flags.push_back("units-unclear");
  const DimQuantity mp = ctx.k("m_p");
  const DimQuantity mw = inputs.mw_over_mp * mp;
  const DimQuantity Gw = ctx.number(inputs.g2) / (mw * mw);
  e.checks.push_back(make_check(ctx, "(a) round inputs", "g^2/m_w^2", Gw, "1e-5/m_p^2",
                                ctx.number(1e-5) / (mp * mp), ToleranceKind::dex, 1.0));
  e.checks.push_back(make_check(ctx, "(b) registry proton mass", "g^2/m_w^2", Gw, "1e43 g^-2",
                                ctx.value(1e43, {-2, 0, 0, 0}), ToleranceKind::dex, 1.0));
  finish(e);
  return e;
}

Ledger ledger_report(const ConstantsRegistry& reg, UnitSystem system) {
  Ledger l;
  l.system = system;
  l.entries.push_back(eval_planck_unification(reg, system));
  l.entries.push_back(eval_ratio_1e40(reg, system));
  l.entries.push_back(eval_quark_mass(reg, system));
  l.entries.push_back(eval_pion_mass(reg, system));
  l.entries.push_back(eval_weak_coupling(reg, system));
  for (const auto& e : l.entries) l.passed += e.pass ? 1 : 0;
  l.all_pass = l.passed == static_cast<int>(l.entries.size());
  return l;
}

}  // namespace knlab
