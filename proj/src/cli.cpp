#include "knlab/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "knlab/couplings.hpp"
#include "knlab/error.hpp"
#include "knlab/fields.hpp"
#include "knlab/functionals.hpp"
#include "knlab/nearfield.hpp"

namespace knlab {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kTool = "knlab";

std::string shortest(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string readable(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string scalar_text(const json& j, bool for_table) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_boolean()) return j.get<bool>() ? "true" : "false";
  if (j.is_null()) return "";
  if (j.is_number_float()) return for_table ? readable(j.get<double>()) : shortest(j.get<double>());
  return j.dump();
}

bool is_quantity(const json& j) { return j.is_object() && j.contains("value") && j.contains("unit"); }

std::string cell_text(const json& j) {
  if (!is_quantity(j)) return scalar_text(j, true);
  const std::string unit = j["unit"].get<std::string>();
  return scalar_text(j["value"], true) + (unit == "1" ? "" : " " + unit);
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "." + std::to_string(i), out);
  } else {
    out.emplace_back(prefix, scalar_text(j, false));
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

// Collects records and renders them once the command has finished.
class Emitter {
 public:
  Emitter(json header, std::string flags) : header_(std::move(header)), flags_(std::move(flags)) {}

  void add(json rec) {
    rec["flags"] = flags_;
    records_.push_back(std::move(rec));
  }
  void summary(json s) {
    s["flags"] = flags_;
    summary_ = std::move(s);
  }
  void plot_columns(std::string x, std::string y) { plot_ = {std::move(x), std::move(y)}; }
  void set_flags(std::string flags) { flags_ = std::move(flags); }

  void write(std::ostream& os, OutputFormat format) const {
    switch (format) {
      case OutputFormat::jsonl: write_jsonl(os); break;
      case OutputFormat::csv: write_csv(os); break;
      case OutputFormat::table: write_table(os); break;
      case OutputFormat::plot: write_plot(os); break;
    }
  }

 private:
  void write_jsonl(std::ostream& os) const {
    os << header_.dump() << "\n";
    for (const auto& r : records_) os << r.dump() << "\n";
    if (!summary_.is_null()) os << summary_.dump() << "\n";
  }

  void comment_header(std::ostream& os) const {
    os << "# " << header_["tool"].get<std::string>() << " " << header_["version"].get<std::string>() << "\n";
    os << "# constants " << header_["constants"]["version"].get<std::string>() << " sha256 "
       << header_["constants"]["sha256"].get<std::string>() << "\n";
    os << "# conventions";
    for (const auto& [k, v] : header_["conventions"].items()) os << " " << k << "=" << scalar_text(v, false);
    os << "\n";
    std::istringstream cfg(header_["config"].get<std::string>());
    for (std::string line; std::getline(cfg, line);) os << "# config: " << line << "\n";
  }

  void summary_line(std::ostream& os) const {
    if (summary_.is_null()) return;
    os << "# summary:";
    for (const auto& [k, v] : summary_.items()) {
      if (k != "record" && k != "flags" && k != "system") os << " " << k << "=" << scalar_text(v, false);
    }
    os << "\n";
  }

  void write_csv(std::ostream& os) const {
    comment_header(os);
    std::vector<std::string> columns;
    std::set<std::string> seen;
    std::vector<std::map<std::string, std::string>> rows;
    for (const auto& r : records_) {
      std::vector<std::pair<std::string, std::string>> flat;
      flatten(r, "", flat);
      std::map<std::string, std::string> row;
      for (auto& [k, v] : flat) {
        if (seen.insert(k).second) columns.push_back(k);
        row[k] = v;
      }
      rows.push_back(std::move(row));
    }
    for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << csv_field(columns[c]);
    os << "\n";
    for (const auto& row : rows) {
      for (std::size_t c = 0; c < columns.size(); ++c) {
        const auto it = row.find(columns[c]);
        os << (c ? "," : "") << (it == row.end() ? "" : csv_field(it->second));
      }
      os << "\n";
    }
    summary_line(os);
  }

  void write_table(std::ostream& os) const {
    comment_header(os);
    std::vector<std::string> columns;
    std::set<std::string> seen;
    for (const auto& r : records_)
      for (const auto& [k, v] : r.items())
        if ((!v.is_structured() || is_quantity(v)) && k != "flags" && seen.insert(k).second) columns.push_back(k);
    std::vector<std::vector<std::string>> cells;
    std::vector<std::size_t> width(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) width[c] = columns[c].size();
    for (const auto& r : records_) {
      std::vector<std::string> row;
      for (std::size_t c = 0; c < columns.size(); ++c) {
        row.push_back(r.contains(columns[c]) ? cell_text(r[columns[c]]) : "");
        width[c] = std::max(width[c], row.back().size());
      }
      cells.push_back(std::move(row));
    }
    auto line = [&](const std::vector<std::string>& row) {
      std::string s;
      for (std::size_t c = 0; c < row.size(); ++c) {
        s += row[c];
        if (c + 1 < row.size()) s += std::string(width[c] - row[c].size() + 2, ' ');
      }
      os << s << "\n";
    };
    line(columns);
    for (const auto& row : cells) line(row);
    summary_line(os);
  }

  void write_plot(std::ostream& os) const {
    comment_header(os);
    os << plot_.first << "," << plot_.second << "\n";
    for (const auto& r : records_) {
      if (!r.contains("plot")) continue;
      os << scalar_text(r["plot"][0], false) << "," << scalar_text(r["plot"][1], false) << "\n";
    }
  }

  json header_;
  std::string flags_;
  std::vector<json> records_;
  json summary_;
  std::pair<std::string, std::string> plot_{"x", "y"};
};

json quantity(const DimQuantity& q, const ConstantsRegistry& reg) {
  json j;
  j["value"] = q.value();
  j["unit"] = q.dims().to_string();
  j["system"] = std::string(to_string(q.system()));
  if (q.system() != UnitSystem::cgs) {
    const DimQuantity c = convert(q, UnitSystem::cgs, reg);
    j["cgs"] = c.value();
    j["cgs_unit"] = c.physical_dims().to_string();
  }
  return j;
}

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

// ---------------------------------------------------------------------------
// Parameter access

class Params {
 public:
  Params(const std::map<std::string, std::string>& p, std::string command) : p_(p), command_(std::move(command)) {}

  void allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : p_) {
      if (!ok.count(k)) throw std::invalid_argument("option '" + k + "' does not apply to '" + command_ + "'");
    }
  }
  bool has(const std::string& k) const { return p_.count(k) != 0; }
  std::string str(const std::string& k, const std::string& fallback = "") const {
    const auto it = p_.find(k);
    return it == p_.end() ? fallback : it->second;
  }
  double num(const std::string& k, double fallback) const { return has(k) ? parse(k, str(k)) : fallback; }
  std::optional<double> opt(const std::string& k) const {
    if (!has(k)) return std::nullopt;
    return parse(k, str(k));
  }
  int integer(const std::string& k, int fallback) const {
    if (!has(k)) return fallback;
    const double v = parse(k, str(k));
    if (v != std::floor(v)) throw std::invalid_argument("option '" + k + "' expects an integer");
    return static_cast<int>(v);
  }
  std::vector<double> list(const std::string& k, const std::string& text) const {
    std::vector<double> out;
    std::istringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) out.push_back(parse(k, item));
    return out;
  }
  Vec3 vec(const std::string& k) const {
    const auto v = list(k, str(k));
    if (v.size() != 3) throw std::invalid_argument("option '" + k + "' expects x,y,z");
    return {v[0], v[1], v[2]};
  }
  bool flag(const std::string& k) const {
    const std::string v = str(k, "false");
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("option '" + k + "' expects true or false");
  }

 private:
  static double parse(const std::string& k, std::string text) {
    const auto b = text.find_first_not_of(" \t");
    const auto e = text.find_last_not_of(" \t");
    text = b == std::string::npos ? "" : text.substr(b, e - b + 1);
    double v = 0.0;
    const char* first = text.data();
    if (!text.empty() && text.front() == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
      throw std::invalid_argument("option '" + k + "' expects a finite number, got '" + text + "'");
    }
    return v;
  }

  const std::map<std::string, std::string>& p_;
  std::string command_;
};

struct Ctx {
  const RunConfig& cfg;
  const ConstantsRegistry& reg;
  Params params;
  Emitter& em;
  bool numerical_failure = false;
};

SourceSpec require_source(const Ctx& c) {
  if (c.cfg.source.empty()) throw std::invalid_argument("'" + c.cfg.command + "' needs --source (file or preset:<name>)");
  return resolve_source(c.cfg.source, c.reg, c.cfg.system);
}

std::string family_name(const SourcePart& p) {
  static const char* names[] = {"static_ball", "rotating_ball", "rotating_shell", "ring", "harmonic_ball", "grid"};
  return names[p.index()];
}

json base_record(const char* kind, UnitSystem system) {
  json r;
  r["record"] = kind;
  r["system"] = std::string(to_string(system));
  return r;
}

double hbar_in(UnitSystem s, const ConstantsRegistry& reg) { return convert(reg.get("hbar"), s, reg).value(); }

// ---------------------------------------------------------------------------
// source validate

int cmd_source_validate(Ctx& c) {
  c.params.allow({"conservation-spacing"});
  const SourceSpec src = require_source(c);
  json r = base_record("source", src.system());
  json parts = json::array();
  for (const auto& p : src.parts()) {
    const SupportBall sb = support_of(p);
    parts.push_back({{"family", family_name(p)},
                     {"measure", std::string(to_string(measure_of(p)))},
                     {"support_center", vec_json(sb.center)},
                     {"support_radius", sb.radius},
                     {"static", part_is_static(p)}});
  }
  r["valid"] = true;
  r["part_count"] = src.parts().size();
  r["static"] = src.is_static();
  r["offdiagonal_stress"] = src.has_offdiagonal_stress();
  r["mass"] = quantity(mass(src, c.reg, c.cfg.quadrature).value, c.reg);
  r["parts"] = parts;
  c.em.add(r);

  if (c.params.has("conservation-spacing")) {
    const ConservationReport rep = conservation_residual(src, c.params.num("conservation-spacing", 0.0));
    json q = base_record("conservation", src.system());
    q["spacing"] = rep.spacing;
    q["coarse_spacing"] = rep.coarse_spacing;
    q["max_residual"] = rep.max_residual;
    q["interior_residual"] = rep.interior_residual;
    q["coarse_max_residual"] = rep.coarse_max_residual;
    q["order"] = rep.order;
    q["order_estimate"] = rep.order_estimate;
    c.em.add(q);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// field eval

struct PointSet {
  std::vector<SpacetimePoint> points;
  std::vector<double> abscissa;
  std::string label;
};

PointSet field_points(const Ctx& c, const SourceSpec& src) {
  PointSet ps;
  if (c.params.has("point")) {
    std::istringstream ss(c.params.str("point"));
    for (std::string item; std::getline(ss, item, ';');) {
      const auto v = c.params.list("point", item);
      if (v.size() != 4) throw std::invalid_argument("option 'point' expects t,x,y,z entries separated by ';'");
      ps.points.push_back({v[0], {v[1], v[2], v[3]}});
      ps.abscissa.push_back(norm(ps.points.back().x));
    }
    ps.label = "r";
    return ps;
  }
  const std::string axis = c.params.str("axis", "x");
  if (axis != "x" && axis != "y" && axis != "z") throw std::invalid_argument("option 'axis' expects x, y or z");
  const double extent = std::max(src.extent_from({}), 1e-300);
  const double lo = c.params.num("r-min", 2.0 * extent);
  const double hi = c.params.num("r-max", 8.0 * extent);
  const int n = c.params.integer("count", 16);
  const double t = c.params.num("t", 0.0);
  if (n < 1 || !(hi >= lo)) throw std::invalid_argument("ray needs count >= 1 and r-max >= r-min");
  for (int i = 0; i < n; ++i) {
    const double r = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    Vec3 x{};
    x[axis[0] - 'x'] = r;
    ps.points.push_back({t, x});
    ps.abscissa.push_back(r);
  }
  ps.label = "r";
  return ps;
}

std::pair<int, int> parse_component(const std::string& s) {
  if (s.size() != 2 || s[0] < '0' || s[0] > '3' || s[1] < '0' || s[1] > '3') {
    throw std::invalid_argument("option 'component' expects two digits in 0..3, e.g. 00");
  }
  return {s[0] - '0', s[1] - '0'};
}

int cmd_field_eval(Ctx& c) {
  c.params.allow({"quantity", "component", "point", "axis", "r-min", "r-max", "count", "t", "step"});
  const SourceSpec src = require_source(c);
  const std::string quantity_name = c.params.str("quantity", "h");
  const PointSet ps = field_points(c, src);
  int status = kExitOk;

  if (quantity_name == "h") {
    const auto [mu, nu] = parse_component(c.params.str("component", "00"));
    c.em.plot_columns(ps.label, "h" + std::to_string(mu) + std::to_string(nu));
    const auto batch = retarded_h_batch(src, ps.points, mu, nu, c.cfg.quadrature, c.cfg.workers);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& e = batch[i];
      json r = base_record("field", src.system());
      r["quantity"] = "h";
      r["mu"] = mu;
      r["nu"] = nu;
      r["t"] = e.sample.t;
      r["x"] = vec_json(e.sample.x);
      r["r"] = norm(e.sample.x);
      r["value"] = quantity(e.sample.value, c.reg);
      r["quadrature_error"] = e.sample.quadrature_error;
      r["nodes"] = e.sample.node_count;
      r["converged"] = e.ok;
      if (!e.ok) {
        r["error"] = e.error;
        status = kExitNumerical;
      }
      r["plot"] = json::array({ps.abscissa[i], e.sample.value.value()});
      c.em.add(r);
    }
    return status;
  }

  if (quantity_name == "metric") {
    const auto [mu, nu] = parse_component(c.params.str("component", "00"));
    c.em.plot_columns(ps.label, "g" + std::to_string(mu) + std::to_string(nu));
    for (std::size_t i = 0; i < ps.points.size(); ++i) {
      const auto& p = ps.points[i];
      json r = base_record("field", src.system());
      r["quantity"] = "metric";
      r["t"] = p.t;
      r["x"] = vec_json(p.x);
      r["r"] = norm(p.x);
      try {
        const MetricSample m = metric(src, p.t, p.x, c.cfg.quadrature);
        r["g"] = m.g;
        r["quadrature_error"] = m.error;
        r["converged"] = true;
        r["plot"] = json::array({ps.abscissa[i], m(mu, nu)});
      } catch (const ConvergenceError& err) {
        r["converged"] = false;
        r["error"] = err.what();
        status = kExitNumerical;
      }
      c.em.add(r);
    }
    return status;
  }

  if (quantity_name == "gauge") {
    const int mu = c.params.integer("component", 1);
    if (mu < 0 || mu > 3) throw std::invalid_argument("gauge component must be 0..3");
    c.em.plot_columns(ps.label, "A" + std::to_string(mu));
    for (std::size_t i = 0; i < ps.points.size(); ++i) {
      const auto& p = ps.points[i];
      json r = base_record("field", src.system());
      r["quantity"] = "gauge";
      r["t"] = p.t;
      r["x"] = vec_json(p.x);
      r["r"] = norm(p.x);
      try {
        const GaugePotential A = gauge_potential(src, p.t, p.x, c.params.opt("step"), c.cfg.quadrature, c.reg);
        json comps = json::array();
        for (const auto& a : A.A) comps.push_back(quantity(a, c.reg));
        r["A"] = comps;
        r["error"] = A.error;
        r["step"] = A.step;
        r["converged"] = true;
        r["plot"] = json::array({ps.abscissa[i], A.A[mu].value()});
      } catch (const ConvergenceError& err) {
        r["converged"] = false;
        r["error"] = err.what();
        status = kExitNumerical;
      } catch (const SingularityError& err) {
        r["converged"] = false;
        r["error"] = err.what();
        status = kExitNumerical;
      }
      c.em.add(r);
    }
    return status;
  }
  throw std::invalid_argument("option 'quantity' expects h, metric or gauge");
}

// ---------------------------------------------------------------------------
// functional

Vec3 evaluation_point(const Ctx& c, const SourceSpec& src) {
  if (c.params.has("at")) {
    if (c.params.has("r")) throw std::invalid_argument("give either 'at' or 'r', not both");
    return c.params.vec("at");
  }
  const Vec3 center = centroid(src, c.cfg.quadrature);
  const double r = c.params.num("r", 4.0 * src.extent_from(center));
  return center + Vec3{r, 0.0, 0.0};
}

int cmd_functional(Ctx& c, const std::string& which) {
  const SourceSpec src = require_source(c);
  json r = base_record("functional", src.system());
  r["functional"] = which;

  if (which == "mass") {
    c.params.allow({});
    r["value"] = quantity(mass(src, c.reg, c.cfg.quadrature).value, c.reg);
  } else if (which == "spin") {
    c.params.allow({});
    const SpinResult s = spin(src, c.reg, c.cfg.quadrature);
    json comps = json::array();
    for (const auto& q : s.S) comps.push_back(quantity(q, c.reg));
    const double mag = std::sqrt(s.S[0].value() * s.S[0].value() + s.S[1].value() * s.S[1].value() +
                                 s.S[2].value() * s.S[2].value());
    const double half = 0.5 * hbar_in(src.system(), c.reg);
    r["S"] = comps;
    r["magnitude"] = quantity(DimQuantity(mag, dims::angular_momentum(), src.system()), c.reg);
    r["centroid"] = vec_json(s.centroid);
    r["hbar_half"] = quantity(DimQuantity(half, dims::angular_momentum(), src.system()), c.reg);
    r["ratio_to_hbar_half"] = mag / half;
  } else if (which == "phi") {
    c.params.allow({"at", "r"});
    const PotentialResult p = grav_potential(src, evaluation_point(c, src), c.reg, c.cfg.quadrature);
    r["phi"] = quantity(p.phi, c.reg);
    r["newtonian"] = quantity(p.newtonian, c.reg);
    r["r"] = p.r;
    r["remainder_coefficient"] = p.remainder_coefficient;
    r["calibration"] = p.calibration;
    r["uncalibrated_phi"] = p.phi.value() / p.calibration;
    r["quadrature_error"] = p.quadrature_error;
  } else if (which == "em") {
    c.params.allow({"at", "r", "trace"});
    const std::string trace = c.params.str("trace", "magnitude");
    if (trace != "magnitude" && trace != "signed") throw std::invalid_argument("option 'trace' expects magnitude or signed");
    const Vec3 x = evaluation_point(c, src);
    const DimQuantity A0 = em_potential(src, x, c.cfg.quadrature,
                                        trace == "signed" ? TraceConvention::signed_eta : TraceConvention::magnitude);
    const double m = mass(src, c.reg, c.cfg.quadrature).value.value();
    const double dist = norm(x - centroid(src, c.cfg.quadrature));
    r["A0"] = quantity(A0, c.reg);
    r["r"] = dist;
    r["trace_convention"] = trace;
    r["A0_r_over_2m2"] = A0.value() * dist / (2.0 * m * m);
    if (trace == "signed") c.em.set_flags("signature=+---;eta_ij=signed;phi_calibration=0.5;h_prefactor=4");
  } else if (which == "charge") {
    c.params.allow({"dims"});
    std::vector<int> ds{1, 2, 3};
    if (c.params.has("dims")) ds = {c.params.integer("dims", 3)};
    for (int d : ds) {
      const ChargeResult q = charge_fraction(src, d, c.reg, c.cfg.quadrature);
      json row = r;
      row["retained_dimensions"] = q.retained_dimensions;
      row["fraction"] = q.fraction;
      row["reference_charge"] = quantity(q.reference_charge, c.reg);
      c.em.add(row);
    }
    return kExitOk;
  } else {
    throw std::invalid_argument("unknown functional '" + which + "'");
  }
  c.em.add(r);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// nearfield

const HarmonicBall& require_harmonic(const SourceSpec& src) {
  if (src.parts().size() != 1 || !std::holds_alternative<HarmonicBall>(src.parts().front())) {
    throw std::invalid_argument("the near-field series needs a single harmonic_ball source");
  }
  return std::get<HarmonicBall>(src.parts().front());
}

int cmd_nearfield_expand(Ctx& c) {
  c.params.allow({"t", "order", "r-min", "r-max", "count", "compare"});
  const SourceSpec src = require_source(c);
  const HarmonicBall& ball = require_harmonic(src);
  const double t = c.params.num("t", 0.0);
  const ExpansionCoeffs k = retardation_series(ball, t, c.params.integer("order", 2));

  json r = base_record("coefficients", src.system());
  r["a_minus1"] = k.a_minus1;
  r["a_0"] = k.a_0;
  r["a_1"] = k.a_1;
  r["t"] = k.t;
  r["order"] = k.order;
  r["frequency"] = ball.frequency;
  c.em.add(r);

  const double lo = c.params.num("r-min", 2.0 * ball.radius);
  const double hi = c.params.num("r-max", 10.0 * ball.radius);
  const int n = c.params.integer("count", 16);
  if (n < 1 || !(lo > ball.radius) || !(hi >= lo)) {
    throw std::invalid_argument("series radii need count >= 1 and radius < r-min <= r-max");
  }
  std::vector<double> radii;
  for (int i = 0; i < n; ++i) radii.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));

  c.em.plot_columns("r", "h00_series");
  const bool compare = c.params.flag("compare");
  SeriesComparison cmp;
  if (compare) cmp = series_vs_direct(ball, src.system(), radii, t, c.cfg.quadrature);
  for (std::size_t i = 0; i < radii.size(); ++i) {
    json s = base_record("series", src.system());
    s["r"] = radii[i];
    s["omega_r"] = std::abs(ball.frequency) * radii[i];
    s["series"] = k(radii[i]);
    if (compare) {
      s["direct"] = cmp.direct[i];
      s["relative_deviation"] = cmp.deviation[i];
    }
    s["plot"] = json::array({radii[i], k(radii[i])});
    c.em.add(s);
  }
  for (const auto& w : cmp.warnings) {
    json wr = base_record("warning", src.system());
    wr["message"] = w;
    c.em.add(wr);
  }
  return kExitOk;
}

std::vector<std::pair<double, double>> read_two_column_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open fit input '" + path + "'");
  std::vector<std::pair<double, double>> out;
  std::string line;
  int n = 0;
  bool first_data = true;
  while (std::getline(in, line)) {
    ++n;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(path, n, "expected two comma-separated columns (r, V)");
    auto num = [&](std::string s, double& v) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
    };
    double r = 0.0, V = 0.0;
    const bool ok = num(line.substr(0, comma), r) && num(line.substr(comma + 1), V);
    if (!ok) {
      if (first_data) {  // column names
        first_data = false;
        continue;
      }
      throw ParseError(path, n, "expected two numbers (r, V)");
    }
    first_data = false;
    out.emplace_back(r, V);
  }
  return out;
}

int cmd_nearfield_fit(Ctx& c) {
  c.params.allow({"input", "r-min", "r-max", "m", "t", "count"});
  std::vector<std::pair<double, double>> samples;
  UnitSystem system = UnitSystem::natural;
  const std::optional<double> m = c.params.opt("m");
  if (c.params.has("input")) {
    samples = read_two_column_csv(c.params.str("input"));
  } else {
    const SourceSpec src = require_source(c);
    system = src.system();
    const double lo = c.params.has("r-min") ? c.params.num("r-min", 0) : (m ? 0.5 / *m : 0.0);
    const double hi = c.params.has("r-max") ? c.params.num("r-max", 0) : (m ? 2.0 / *m : 0.0);
    if (!(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("fit from a source needs r-min < r-max (or m)");
    const int n = c.params.integer("count", 16);
    if (n < 3) throw std::invalid_argument("option 'count' must be at least 3");
    std::vector<SpacetimePoint> pts;
    for (int i = 0; i < n; ++i) pts.push_back({c.params.num("t", 0.0), {lo + (hi - lo) * i / (n - 1), 0.0, 0.0}});
    const auto batch = retarded_h_batch(src, pts, 0, 0, c.cfg.quadrature, c.cfg.workers);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (!batch[i].ok) throw ConvergenceError(batch[i].error, batch[i].sample.value.value(), batch[i].sample.quadrature_error);
      samples.emplace_back(pts[i].x[0], -batch[i].sample.value.value());
    }
  }
  std::optional<std::pair<double, double>> window;
  if (c.params.has("r-min") || c.params.has("r-max")) {
    window = std::pair{c.params.num("r-min", 0.0), c.params.num("r-max", std::numeric_limits<double>::max())};
  }
  const CornellFit fit = cornell_fit(samples, window, m);
  json r = base_record("cornell-fit", system);
  r["alpha"] = fit.alpha;
  r["beta"] = fit.beta;
  r["residual"] = fit.residual;
  r["r_min"] = fit.r_min;
  r["r_max"] = fit.r_max;
  r["normalization_mass"] = fit.normalization_mass;
  r["samples"] = fit.samples;
  c.em.add(r);
  if (!m) return kExitOk;
  const EnergyScale e = energy_scale_check(fit, *m);
  json q = base_record("energy-scale", system);
  q["value"] = e.value;
  q["ratio"] = e.ratio;
  q["degenerate"] = e.degenerate;
  q["pass"] = e.pass;
  c.em.add(q);
  return e.pass ? kExitOk : kExitCheckFailed;
}

json check_record(const std::string& label, double value, const std::string& target, bool pass, UnitSystem s) {
  json r = base_record("check", s);
  r["check"] = label;
  r["value"] = value;
  r["target"] = target;
  r["pass"] = pass;
  return r;
}

int cmd_nearfield_check(Ctx& c) {
  c.params.allow({"m", "count"});
  const double m = c.params.num("m", 1.0);
  const CornellRun run = cornell_pipeline(m, c.cfg.quadrature, c.params.integer("count", 16), c.cfg.workers);
  const UnitSystem nat = UnitSystem::natural;
  bool ok = true;
  auto add = [&](const std::string& label, double value, const std::string& target, bool pass) {
    ok = ok && pass;
    c.em.add(check_record(label, value, target, pass, nat));
  };
  add("alpha", run.fit.alpha, "[0.1, 10]", run.fit.alpha >= 0.1 && run.fit.alpha <= 10.0);
  const double b = std::abs(run.fit.beta) / (m * m);
  add("|beta|/m^2", b, "[0.1, 10]", b >= 0.1 && b <= 10.0);
  add("|V(1/m)|/m", run.energy.ratio, run.energy.degenerate ? "degenerate cancellation" : "[0.1, 10]",
      run.energy.pass);

  // series regime: omega r over a decade up to 0.1 around a small ball
  const double R = 1e-3 / m;
  const HarmonicBall small{m / (4.0 / 3.0 * std::numbers::pi * R * R * R), R, m, 0.0, {}};
  std::vector<double> radii;
  for (int i = 0; i <= 8; ++i) radii.push_back(0.01 / m * std::pow(10.0, i / 8.0));
  const SeriesComparison cmp = series_vs_direct(small, nat, radii, std::numbers::pi / (4.0 * m), c.cfg.quadrature);
  add("series max relative deviation (omega r <= 0.1)", cmp.max_deviation, "< 0.01", cmp.max_deviation < 0.01);
  const double p = convergence_exponent(cmp, m);
  add("series convergence exponent", p, "[2.5, 3.5]", p >= 2.5 && p <= 3.5);
  return ok ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// couplings ledger

json relation_json(const RelationEntry& e, UnitSystem system, const ConstantsRegistry& reg) {
  json r = base_record("relation", system);
  r["id"] = e.id;
  r["pass"] = e.pass;
  std::string disc;
  for (const auto& ch : e.checks) {
    if (!disc.empty()) disc += "; ";
    disc += readable(ch.discrepancy);
    disc += ch.tolerance_kind == ToleranceKind::dex ? " (+-" + readable(ch.tolerance) + " dex)"
                                                   : " (rel " + readable(ch.tolerance) + ")";
    if (ch.informational) disc += " info";
  }
  r["discrepancy_log10"] = disc;
  std::string flags;
  for (const auto& f : e.flags) flags += (flags.empty() ? "" : ",") + f;
  r["entry_flags"] = flags;
  if (e.error) r["error"] = *e.error;
  r["description"] = e.description;
  json checks = json::array();
  for (const auto& ch : e.checks) {
    json j;
    j["label"] = ch.label;
    j["lhs"] = ch.lhs_expr;
    j["rhs"] = ch.rhs_expr;
    j["lhs_value"] = quantity(ch.lhs, reg);
    j["rhs_value"] = quantity(ch.rhs, reg);
    j["lhs_log10_cgs"] = ch.lhs_log10_cgs;
    j["rhs_log10_cgs"] = ch.rhs_log10_cgs;
    j["discrepancy_log10"] = ch.discrepancy;
    j["tolerance"] = ch.tolerance;
    j["tolerance_kind"] = ch.tolerance_kind == ToleranceKind::dex ? "dex" : "relative";
    j["dimension_consistent"] = ch.dimension_consistent;
    j["informational"] = ch.informational;
    j["pass"] = ch.pass;
    checks.push_back(j);
  }
  r["checks"] = checks;
  return r;
}

int cmd_couplings_ledger(Ctx& c) {
  c.params.allow({"units"});
  const UnitSystem system = parse_unit_system(c.params.str("units", "cgs"));
  const Ledger l = ledger_report(c.reg, system);
  for (const auto& e : l.entries) c.em.add(relation_json(e, system, c.reg));
  c.em.summary({{"record", "summary"},
                {"system", std::string(to_string(system))},
                {"passed", l.passed},
                {"total", l.entries.size()},
                {"all_pass", l.all_pass}});
  return l.all_pass ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// report

struct Section {
  std::string name;
  std::string anchor;
  std::function<void(std::vector<json>&)> body;
  UnitSystem system = UnitSystem::geometrized;
};

json report_check(const std::string& label, double value, double target, const std::string& tolerance, bool pass) {
  json r;
  r["check"] = label;
  r["value"] = value;
  r["target"] = target;
  r["tolerance"] = tolerance;
  r["pass"] = pass;
  return r;
}

json rel_check(const std::string& label, double value, double target, double tol) {
  const double err = std::abs(value - target) / std::abs(target);
  return report_check(label, value, target, "rel " + readable(tol), err < tol);
}

json abs_check(const std::string& label, double value, double target, double tol) {
  return report_check(label, value, target, "abs " + readable(tol), std::abs(value - target) <= tol);
}

json range_check(const std::string& label, double value, double lo, double hi) {
  json r = report_check(label, value, 0.5 * (lo + hi), "range [" + readable(lo) + ", " + readable(hi) + "]",
                        value >= lo && value <= hi);
  r["target"] = "[" + readable(lo) + ", " + readable(hi) + "]";
  return r;
}

int cmd_report(Ctx& c) {
  c.params.allow({});
  const QuadratureConfig& q = c.cfg.quadrature;
  const ConstantsRegistry& reg = c.reg;
  const UnitSystem geo = UnitSystem::geometrized;
  constexpr double pi = std::numbers::pi;

  std::vector<Section> sections;
  sections.push_back({"retarded-field", "linearized retarded field", [&](std::vector<json>& out) {
                        const SourceSpec ball(ball_with_mass(1.0, 1.0), geo);
                        for (double r : {2.0, 4.0, 8.0}) {
                          out.push_back(rel_check("h00 exterior r=" + readable(r) + "R",
                                                  retarded_h(ball, 0, {r, 0, 0}, 0, 0, q).value.value(), 4.0 / r, 1e-6));
                        }
                        out.push_back(rel_check("h00 interior r=0.5R", retarded_h(ball, 0, {0.5, 0, 0}, 0, 0, q).value.value(),
                                                2.0 * (3.0 - 0.25), 1e-4));
                      }});
  sections.push_back({"gauge-potential", "gauge potential from log sqrt|det g|", [&](std::vector<json>& out) {
                        const double m = 1e-3;
                        const SourceSpec dust(ball_with_mass(m, 1.0, PressureModel::diagonal_model(0, 0, 0)), geo);
                        const GaugePotential A = gauge_potential(dust, 0.0, {4.0, 0, 0}, std::nullopt, q, reg);
                        const double first_order = -2.0 * hbar_in(geo, reg) * m / 16.0;
                        out.push_back(rel_check("A_x / first-order -2 hbar m / r^2", A.A[1].value() / first_order, 1.0, 1e-2));
                      }});
  sections.push_back({"mass-functional", "mass functional", [&](std::vector<json>& out) {
                        const StaticBall b{0.3, 2.0, {}, {}};
                        out.push_back(rel_check("static ball mass", mass(SourceSpec(b, geo), reg, q).value.value(),
                                                4.0 / 3.0 * pi * 8.0 * 0.3, 1e-12));
                      }});
  sections.push_back({"spin-functional", "spin functional", [&](std::vector<json>& out) {
                        out.push_back(rel_check("ring S_z = m R v",
                                                spin(SourceSpec(ring_with_mass(2.0, 1.5, 0.4), geo), reg, q).S[2].value(),
                                                2.0 * 1.5 * 0.4, 1e-6));
                        const double eps = 1.0 / (4.0 / 3.0 * pi);
                        out.push_back(rel_check("rigid ball S_z = (2/5) m R^2 omega",
                                                spin(SourceSpec(RotatingBall{eps, 1.0, 0.5, {}}, geo), reg, q).S[2].value(),
                                                0.4 * 0.5, 1e-6));
                        const SpinResult s = spin(SourceSpec(ball_with_mass(1.0, 1.0), geo), reg, q);
                        out.push_back(abs_check("static ball |S|", std::abs(s.S[0].value()) + std::abs(s.S[1].value()) +
                                                                       std::abs(s.S[2].value()),
                                                0.0, 0.0));
                      }});
  sections.push_back({"electron-preset", "electron spin hbar/2", [&](std::vector<json>& out) {
                        const SourceSpec e = electron_preset(reg, geo);
                        const double half = 0.5 * hbar_in(geo, reg);
                        out.push_back(rel_check("spin / (hbar/2)", spin(e, reg, q).S[2].value() / half, 1.0, 1e-6));
                        const double me = convert(reg.get("m_e"), geo, reg).value();
                        out.push_back(rel_check("mass / m_e", mass(e, reg, q).value.value() / me, 1.0, 1e-9));
                      }});
  sections.push_back({"potential-extraction", "Newtonian potential from g^00", [&](std::vector<json>& out) {
                        const SourceSpec ball(ball_with_mass(1.0, 1.0), geo);
                        const PotentialResult p = grav_potential(ball, {4.0, 0, 0}, reg, q);
                        out.push_back(rel_check("phi at 4R vs -m/r", p.phi.value(), -0.25, 1e-6));
                        const SourceSpec pair = SourceSpec::superpose(
                            {SourceSpec(ball_with_mass(0.5, 0.5, {}, {0, 0, 1}), geo),
                             SourceSpec(ball_with_mass(0.5, 0.5, {}, {0, 0, -1}), geo)});
                        double lo = 1e300, hi = 0.0;
                        for (double r : {6.0, 12.0, 24.0}) {
                          const double k = grav_potential(pair, {0, 0, r}, reg, q).remainder_coefficient;
                          lo = std::min(lo, k);
                          hi = std::max(hi, k);
                        }
                        out.push_back(report_check("quadrupole remainder spread over [4R, 16R]", (hi - lo) / hi, 0.0,
                                                   "< 0.1", (hi - lo) / hi < 0.1));
                      }});
  sections.push_back({"electromagnetic-potential", "A_0 from the pressure trace", [&](std::vector<json>& out) {
                        const SourceSpec ball(ball_with_mass(1.0, 1.0), geo);
                        const double A0 = em_potential(ball, {3.0, 0, 0}, q).value();
                        out.push_back(rel_check("A0 r / (2 m^2)", A0 * 3.0 / 2.0, 1.0, 1e-6));
                      }});
  sections.push_back({"charge-fraction", "fractional charge from retained dimensions", [&](std::vector<json>& out) {
                        const SourceSpec ball(ball_with_mass(1.0, 1.0), geo);
                        for (int d = 1; d <= 3; ++d) {
                          out.push_back(abs_check("d=" + std::to_string(d), charge_fraction(ball, d, reg, q).fraction,
                                                  d / 3.0, 1e-12));
                        }
                      }});
  sections.push_back({"retardation-series", "near-field retardation series", [&](std::vector<json>& out) {
                        const double R = 1e-3;
                        const HarmonicBall small{1.0 / (4.0 / 3.0 * pi * R * R * R), R, 1.0, 0.0, {}};
                        std::vector<double> radii;
                        for (int i = 0; i <= 8; ++i) radii.push_back(0.01 * std::pow(10.0, i / 8.0));
                        const SeriesComparison cmp = series_vs_direct(small, UnitSystem::natural, radii, pi / 4.0, q);
                        out.push_back(report_check("max relative deviation, omega r <= 0.1", cmp.max_deviation, 0.0,
                                                   "< 0.01", cmp.max_deviation < 0.01));
                        out.push_back(range_check("convergence exponent", convergence_exponent(cmp, 1.0), 2.5, 3.5));
                      },
                      UnitSystem::natural});
  sections.push_back({"cornell-fit", "Cornell-type potential", [&](std::vector<json>& out) {
                        std::vector<std::pair<double, double>> exact;
                        for (int i = 0; i < 12; ++i) {
                          const double r = 0.5 + 0.25 * i;
                          exact.emplace_back(r, -1.0 / r + 4.0 * r);
                        }
                        const CornellFit f = cornell_fit(exact);
                        out.push_back(report_check("in-model residual", f.residual, 0.0, "< 1e-10", f.residual < 1e-10));
                        const CornellRun run = cornell_pipeline(1.0, q, 16, c.cfg.workers);
                        out.push_back(range_check("alpha", run.fit.alpha, 0.1, 10.0));
                        out.push_back(range_check("|beta| / m^2", std::abs(run.fit.beta), 0.1, 10.0));
                        json e = range_check("|V(1/m)| / m", run.energy.ratio, 0.1, 10.0);
                        e["pass"] = run.energy.pass;
                        out.push_back(e);
                      },
                      UnitSystem::natural});
  sections.push_back({"couplings-ledger", "order-of-magnitude coupling relations", [&](std::vector<json>& out) {
                        const Ledger l = ledger_report(reg, UnitSystem::cgs);
                        for (const auto& e : l.entries) {
                          for (const auto& ch : e.checks) {
                            const bool dex = ch.tolerance_kind == ToleranceKind::dex;
                            json r = report_check(
                                e.id + " " + ch.label + (dex ? " (log10 ratio)" : " (ratio - 1)"),
                                dex ? ch.discrepancy : std::pow(10.0, ch.discrepancy) - 1.0, 0.0,
                                (ch.tolerance_kind == ToleranceKind::dex ? "dex " : "rel ") + readable(ch.tolerance),
                                ch.pass);
                            r["informational"] = ch.informational;
                            if (e.error) r["error"] = *e.error;
                            out.push_back(r);
                          }
                        }
                      },
                      UnitSystem::cgs});

  int passed = 0;
  bool numerical = false;
  for (const auto& s : sections) {
    std::vector<json> checks;
    std::string status = "pass";
    std::string error;
    try {
      s.body(checks);
      for (const auto& ch : checks) {
        if (!ch["pass"].get<bool>() && !(ch.contains("informational") && ch["informational"].get<bool>())) status = "fail";
      }
    } catch (const ConvergenceError& err) {
      status = "error";
      error = err.what();
      numerical = true;
    } catch (const SingularityError& err) {
      status = "error";
      error = err.what();
      numerical = true;
    } catch (const std::exception& err) {
      status = "error";
      error = err.what();
    }
    if (status == "pass") ++passed;
    if (checks.empty()) checks.push_back(report_check("(section error)", std::nan(""), std::nan(""), "", false));
    for (auto& ch : checks) {
      json r;
      r["record"] = "check";
      r["system"] = std::string(to_string(s.system));
      r["section"] = s.name;
      r["anchor"] = s.anchor;
      r["section_status"] = status;
      for (const auto& [k, v] : ch.items()) r[k] = v;
      if (!error.empty()) r["error"] = error;
      c.em.add(r);
    }
  }
  c.em.summary({{"record", "summary"},
                {"system", "per-section"},
                {"sections", sections.size()},
                {"passed", passed},
                {"all_pass", passed == static_cast<int>(sections.size())}});
  if (numerical) return kExitNumerical;
  return passed == static_cast<int>(sections.size()) ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------------------

json make_header(const RunConfig& cfg, const ConstantsRegistry& reg) {
  json h;
  h["record"] = "header";
  h["tool"] = kTool;
  h["version"] = kToolVersion;
  h["constants"] = {{"version", reg.version()}, {"sha256", reg.digest()}};
  h["conventions"] = {{"signature", "+---"},
                      {"eta_ij", "magnitude"},
                      {"phi_calibration", kPhiCalibration},
                      {"h_prefactor", 4},
                      {"phi_note", "(1/2) h^00 of a point mass is 2m/r with prefactor 4; phi is scaled by 1/2 to read -m/r"}};
  const std::string text = cfg.canonical();
  h["config"] = text;
  h["config_sha256"] = sha256_hex(text);
  return h;
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  std::optional<ConstantsRegistry> loaded;
  const ConstantsRegistry* reg = &ConstantsRegistry::builtin();
  try {
    cfg.quadrature.validate();
    if (!cfg.constants.empty()) {
      loaded = ConstantsRegistry::load(cfg.constants);
      reg = &*loaded;
    }
  } catch (const std::exception& e) {
    err << "knlab: " << e.what() << "\n";
    return kExitUsage;
  }
  if (cfg.format == OutputFormat::plot && cfg.command != "field eval" && cfg.command != "nearfield expand") {
    err << "knlab: the plot format is available for 'field eval' and 'nearfield expand' only\n";
    return kExitUsage;
  }

  Emitter em(make_header(cfg, *reg), "signature=+---;eta_ij=magnitude;phi_calibration=0.5;h_prefactor=4");
  Ctx ctx{cfg, *reg, Params(cfg.params, cfg.command), em};
  int code = kExitOk;
  try {
    const std::string& cmd = cfg.command;
    if (cmd == "source validate") {
      code = cmd_source_validate(ctx);
    } else if (cmd == "field eval") {
      code = cmd_field_eval(ctx);
    } else if (cmd.rfind("functional ", 0) == 0) {
      code = cmd_functional(ctx, cmd.substr(11));
    } else if (cmd == "nearfield expand") {
      code = cmd_nearfield_expand(ctx);
    } else if (cmd == "nearfield fit") {
      code = cmd_nearfield_fit(ctx);
    } else if (cmd == "nearfield check") {
      code = cmd_nearfield_check(ctx);
    } else if (cmd == "couplings ledger") {
      code = cmd_couplings_ledger(ctx);
    } else if (cmd == "report") {
      code = cmd_report(ctx);
    } else {
      err << "knlab: unknown command '" << cmd << "'\n";
      return kExitUsage;
    }
  } catch (const ConvergenceError& e) {
    json r;
    r["record"] = "error";
    r["kind"] = "numerical";
    r["message"] = e.what();
    r["best_estimate"] = e.best_estimate();
    r["achieved_error"] = e.achieved_error();
    em.add(r);
    err << "knlab: " << e.what() << "\n";
    code = kExitNumerical;
  } catch (const SingularityError& e) {
    json r;
    r["record"] = "error";
    r["kind"] = "singular";
    r["message"] = e.what();
    em.add(r);
    err << "knlab: " << e.what() << "\n";
    code = kExitNumerical;
  } catch (const std::exception& e) {
    err << "knlab: " << e.what() << "\n";
    return kExitUsage;
  }

  if (cfg.out.empty()) {
    em.write(out, cfg.format);
  } else {
    std::ofstream f(cfg.out, std::ios::binary);
    if (!f) {
      err << "knlab: cannot write '" << cfg.out << "'\n";
      return kExitUsage;
    }
    em.write(f, cfg.format);
  }
  return code;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"knlab: linearized-gravity source, field, functional and coupling checks"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config_path, source, preset, system, format, out_path, constants;
  int workers = 0, radial = 0, angular = 0, refinements = -1;
  double rel_tol = 0.0;
  app.add_option("--config", config_path, "run file (key = value, see README)");
  app.add_option("--source", source, "source file or preset:<name>");
  app.add_option("--preset", preset, "built-in source, same as --source preset:<name>");
  app.add_option("--system", system, "unit system for sources: geometrized | natural");
  app.add_option("--format", format, "jsonl | csv | table | plot");
  app.add_option("--out", out_path, "output file (stdout when absent)");
  app.add_option("--constants", constants, "constants file replacing the built-in table");
  app.add_option("--workers", workers, "threads for field evaluation")->check(CLI::PositiveNumber);
  app.add_option("--radial-nodes", radial, "base radial Gauss nodes")->check(CLI::PositiveNumber);
  app.add_option("--angular-nodes", angular, "base polar Gauss nodes")->check(CLI::PositiveNumber);
  app.add_option("--rel-tol", rel_tol, "relative tolerance of the retarded integral")->check(CLI::PositiveNumber);
  app.add_option("--max-refinements", refinements, "node doublings before giving up")->check(CLI::NonNegativeNumber);

  std::map<std::string, std::string> params;
  std::string command;
  auto param = [&](CLI::App* sub, const std::string& name, const std::string& help) {
    sub->add_option_function<std::string>("--" + name, [&params, name](const std::string& v) { params[name] = v; },
                                          help);
  };
  auto flag = [&](CLI::App* sub, const std::string& name, const std::string& help) {
    sub->add_flag_function("--" + name, [&params, name](std::int64_t) { params[name] = "true"; }, help);
  };
  auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& help) {
    CLI::App* sub = parent->add_subcommand(name, help);
    const std::string full = parent == &app ? name : parent->get_name() + " " + name;
    sub->callback([&command, full] { command = full; });
    return sub;
  };

  CLI::App* source_cmd = app.add_subcommand("source", "source checks")->require_subcommand(1);
  param(leaf(source_cmd, "validate", "validate a source and summarize it"), "conservation-spacing",
        "also report the divergence residual on a lattice of this spacing");

  CLI::App* field_cmd = app.add_subcommand("field", "retarded field evaluation")->require_subcommand(1);
  CLI::App* eval = leaf(field_cmd, "eval", "evaluate h, the metric or the gauge potential");
  param(eval, "quantity", "h (default) | metric | gauge");
  param(eval, "component", "tensor component such as 00, or the gauge index");
  param(eval, "point", "t,x,y,z points separated by ';'");
  param(eval, "axis", "ray direction from the origin: x | y | z");
  param(eval, "r-min", "first ray radius");
  param(eval, "r-max", "last ray radius");
  param(eval, "count", "ray samples");
  param(eval, "t", "time on the ray");
  param(eval, "step", "finite-difference step for the gauge potential");

  CLI::App* fn = app.add_subcommand("functional", "integral functionals")->require_subcommand(1);
  leaf(fn, "mass", "integral of T^00");
  leaf(fn, "spin", "angular momentum about the centroid");
  CLI::App* phi = leaf(fn, "phi", "Newtonian potential from g^00");
  param(phi, "at", "field point x,y,z");
  param(phi, "r", "distance from the centroid along +x");
  CLI::App* em = leaf(fn, "em", "A_0 from the pressure trace");
  param(em, "at", "field point x,y,z");
  param(em, "r", "distance from the centroid along +x");
  param(em, "trace", "magnitude (default) | signed");
  CLI::App* charge = leaf(fn, "charge", "charge fraction for retained dimensions");
  param(charge, "dims", "1, 2 or 3 (all when absent)");

  CLI::App* nf = app.add_subcommand("nearfield", "retardation series and Cornell fits")->require_subcommand(1);
  CLI::App* expand = leaf(nf, "expand", "series coefficients and values");
  param(expand, "t", "evaluation time");
  param(expand, "order", "truncation order 0..2");
  param(expand, "r-min", "first radius");
  param(expand, "r-max", "last radius");
  param(expand, "count", "number of radii");
  flag(expand, "compare", "also evaluate the retarded integral");
  CLI::App* fit = leaf(nf, "fit", "fit -alpha/r + beta r");
  param(fit, "input", "two-column CSV of r, V");
  param(fit, "r-min", "window start");
  param(fit, "r-max", "window end");
  param(fit, "m", "normalization mass (V is divided by m) and energy check");
  param(fit, "t", "time for samples taken from --source");
  param(fit, "count", "samples taken from --source");
  CLI::App* check = leaf(nf, "check", "series accuracy and the Cornell end-to-end checks");
  param(check, "m", "mass of the harmonic source");
  param(check, "count", "fit samples");

  CLI::App* cp = app.add_subcommand("couplings", "order-of-magnitude relations")->require_subcommand(1);
  param(leaf(cp, "ledger", "evaluate R1-R5"), "units", "evaluation units: cgs (default) | natural | geometrized");

  CLI::App* report = app.add_subcommand("report", "run every section and write one document");
  report->callback([&command] { command = "report"; });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "knlab: " << e.what() << "\n";
    return kExitUsage;
  }

  RunConfig cfg;
  bool format_given = false;
  try {
    if (!config_path.empty()) {
      cfg = RunConfig::load(config_path);
      format_given = true;
    }
    if (!command.empty()) cfg.command = command;
    if (cfg.command.empty()) throw std::invalid_argument("no command given (see --help)");
    for (const auto& [k, v] : params) cfg.params[k] = v;
    if (!source.empty() && !preset.empty()) throw std::invalid_argument("give either --source or --preset");
    if (!source.empty()) cfg.source = source;
    if (!preset.empty()) cfg.source = "preset:" + preset;
    if (!system.empty()) cfg.system = parse_unit_system(system);
    if (!format.empty()) {
      cfg.format = parse_output_format(format);
      format_given = true;
    }
    if (!format_given && cfg.command == "couplings ledger") cfg.format = OutputFormat::table;
    if (!out_path.empty()) cfg.out = out_path;
    if (!constants.empty()) cfg.constants = constants;
    if (workers > 0) cfg.workers = workers;
    if (radial > 0) cfg.quadrature.radial_nodes = radial;
    if (angular > 0) cfg.quadrature.angular_nodes = angular;
    if (rel_tol > 0.0) cfg.quadrature.rel_tol = rel_tol;
    if (refinements >= 0) cfg.quadrature.max_refinements = refinements;
  } catch (const std::exception& e) {
    err << "knlab: " << e.what() << "\n";
    return kExitUsage;
  }
  return run(cfg, out, err);
}

}  // namespace knlab
