#include "knlab/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

#include "knlab/error.hpp"
#include "knlab/functionals.hpp"
#include "knlab/grid_io.hpp"

namespace knlab {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct Line {
  int number;
  std::string section;  // "" before the first header
  std::string key;
  std::string value;
  bool header = false;
};

// Splits key = value text with [section] headers and # comments.
std::vector<Line> lex(std::string_view text, const std::string& origin) {
  std::vector<Line> out;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::string section;
  int n = 0;
  while (std::getline(in, raw)) {
    ++n;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(origin, n, "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section.empty()) throw ParseError(origin, n, "empty section name");
      out.push_back({n, section, {}, {}, true});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(origin, n, "expected 'key = value'");
    Line l{n, section, trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)), false};
    if (l.key.empty()) throw ParseError(origin, n, "missing key before '='");
    out.push_back(std::move(l));
  }
  return out;
}

double to_double(const Line& l, const std::string& origin) {
  double v = 0.0;
  const char* b = l.value.data();
  const char* e = b + l.value.size();
  if (b != e && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || !std::isfinite(v)) {
    throw ParseError(origin, l.number, "'" + l.key + "' expects a finite number, got '" + l.value + "'");
  }
  return v;
}

int to_int(const Line& l, const std::string& origin) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(l.value.data(), l.value.data() + l.value.size(), v);
  if (ec != std::errc() || ptr != l.value.data() + l.value.size()) {
    throw ParseError(origin, l.number, "'" + l.key + "' expects an integer, got '" + l.value + "'");
  }
  return v;
}

std::vector<double> to_list(const Line& l, const std::string& origin, std::size_t n) {
  std::vector<double> out;
  std::istringstream ss(l.value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    Line sub = l;
    sub.value = trim(item);
    out.push_back(to_double(sub, origin));
  }
  if (out.size() != n) {
    throw ParseError(origin, l.number, "'" + l.key + "' expects " + std::to_string(n) + " comma-separated numbers");
  }
  return out;
}

template <class F>
auto at_line(const std::string& origin, int line, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& err) {
    throw ParseError(origin, line, err.what());
  }
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

std::string_view to_string(OutputFormat f) {
  switch (f) {
    case OutputFormat::jsonl: return "jsonl";
    case OutputFormat::csv: return "csv";
    case OutputFormat::table: return "table";
    case OutputFormat::plot: return "plot";
  }
  return "?";
}

OutputFormat parse_output_format(std::string_view name) {
  if (name == "jsonl" || name == "json" || name == "json-lines") return OutputFormat::jsonl;
  if (name == "csv") return OutputFormat::csv;
  if (name == "table") return OutputFormat::table;
  if (name == "plot") return OutputFormat::plot;
  throw std::invalid_argument("unknown output format '" + std::string(name) + "' (jsonl, csv, table, plot)");
}

std::string RunConfig::canonical() const {
  std::ostringstream os;
  os << "command = " << command << "\n";
  if (!source.empty()) os << "source = " << source << "\n";
  os << "system = " << to_string(system) << "\n";
  os << "format = " << to_string(format) << "\n";
  if (!constants.empty()) os << "constants = " << constants << "\n";
  os << "[quadrature]\n"
     << "radial_nodes = " << quadrature.radial_nodes << "\n"
     << "angular_nodes = " << quadrature.angular_nodes << "\n"
     << "rel_tol = " << format_double(quadrature.rel_tol) << "\n"
     << "max_refinements = " << quadrature.max_refinements << "\n";
  if (!params.empty()) {
    os << "[params]\n";
    for (const auto& [k, v] : params) os << k << " = " << v << "\n";
  }
  return os.str();
}

RunConfig RunConfig::parse(std::string_view text, const std::string& origin) {
  RunConfig cfg;
  for (const Line& l : lex(text, origin)) {
    if (l.header) {
      if (l.section != "quadrature" && l.section != "params") {
        throw ParseError(origin, l.number, "unknown section [" + l.section + "] (expected [quadrature] or [params])");
      }
      continue;
    }
    if (l.section.empty()) {
      if (l.key == "command") {
        cfg.command = l.value;
      } else if (l.key == "source") {
        cfg.source = l.value;
      } else if (l.key == "system") {
        cfg.system = at_line(origin, l.number, [&] { return parse_unit_system(l.value); });
      } else if (l.key == "format") {
        cfg.format = at_line(origin, l.number, [&] { return parse_output_format(l.value); });
      } else if (l.key == "out") {
        cfg.out = l.value;
      } else if (l.key == "constants") {
        cfg.constants = l.value;
      } else if (l.key == "workers") {
        cfg.workers = to_int(l, origin);
        if (cfg.workers < 1) throw ParseError(origin, l.number, "workers must be at least 1");
      } else {
        throw ParseError(origin, l.number, "unknown key '" + l.key + "'");
      }
    } else if (l.section == "quadrature") {
      if (l.key == "radial_nodes") {
        cfg.quadrature.radial_nodes = to_int(l, origin);
      } else if (l.key == "angular_nodes") {
        cfg.quadrature.angular_nodes = to_int(l, origin);
      } else if (l.key == "rel_tol") {
        cfg.quadrature.rel_tol = to_double(l, origin);
      } else if (l.key == "max_refinements") {
        cfg.quadrature.max_refinements = to_int(l, origin);
      } else {
        throw ParseError(origin, l.number, "unknown quadrature key '" + l.key + "'");
      }
      at_line(origin, l.number, [&] {
        cfg.quadrature.validate();
        return 0;
      });
    } else {
      cfg.params[l.key] = l.value;
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

// ---------------------------------------------------------------------------

namespace {

struct PartBuilder {
  int line = 0;
  std::map<std::string, Line> keys;
};

const Line* find(const PartBuilder& b, const std::string& key) {
  const auto it = b.keys.find(key);
  return it == b.keys.end() ? nullptr : &it->second;
}

SourcePart build_part(const PartBuilder& b, const std::string& origin, const std::string& base_dir,
                      const ConstantsRegistry& registry, UnitSystem system) {
  const Line* fam = find(b, "family");
  if (!fam) throw ParseError(origin, b.line, "[source] section is missing 'family'");
  const std::string& family = fam->value;

  std::map<std::string, bool> allowed;
  auto num = [&](const std::string& key, std::optional<double> fallback = std::nullopt) -> double {
    allowed[key] = true;
    if (const Line* l = find(b, key)) return to_double(*l, origin);
    if (fallback) return *fallback;
    throw ParseError(origin, b.line, family + " needs '" + key + "'");
  };
  auto center = [&]() -> Vec3 {
    allowed["center"] = true;
    if (const Line* l = find(b, "center")) {
      const auto v = to_list(*l, origin, 3);
      return {v[0], v[1], v[2]};
    }
    return {};
  };
  // Either the total mass or the named density.
  auto density = [&](const std::string& name, double measure) -> double {
    allowed[name] = allowed["mass"] = true;
    const Line* m = find(b, "mass");
    const Line* d = find(b, name);
    if (m && d) throw ParseError(origin, m->number, "give either 'mass' or '" + name + "', not both");
    if (m) return to_double(*m, origin) / measure;
    if (d) return to_double(*d, origin);
    throw ParseError(origin, b.line, family + " needs 'mass' or '" + name + "'");
  };
  allowed["family"] = true;

  SourcePart part;
  if (family == "static_ball" || family == "rotating_ball" || family == "harmonic_ball") {
    const double R = num("radius");
    if (!(R > 0.0)) throw ParseError(origin, find(b, "radius")->number, "radius must be positive");
    const double volume = 4.0 / 3.0 * std::numbers::pi * R * R * R;
    const double eps = density("energy_density", volume);
    const Vec3 c = center();
    if (family == "static_ball") {
      PressureModel p;
      allowed["pressure"] = true;
      if (const Line* l = find(b, "pressure"); l && l->value != "isotropic") {
        const auto v = to_list(*l, origin, 3);
        p = PressureModel::diagonal_model(v[0], v[1], v[2]);
      }
      part = StaticBall{eps, R, p, c};
    } else if (family == "rotating_ball") {
      part = RotatingBall{eps, R, num("angular_speed"), c};
    } else {
      std::optional<double> freq;
      allowed["frequency"] = true;
      if (const Line* l = find(b, "frequency")) freq = to_double(*l, origin);
      const double phase = num("phase", 0.0);
      part = at_line(origin, b.line, [&] { return harmonic_ball(eps * volume, R, freq, phase, system, registry, c); });
    }
  } else if (family == "rotating_shell") {
    const double R = num("radius");
    if (!(R > 0.0)) throw ParseError(origin, find(b, "radius")->number, "radius must be positive");
    part = RotatingShell{density("surface_density", 4.0 * std::numbers::pi * R * R), R, num("angular_speed", 0.0),
                         center()};
  } else if (family == "ring") {
    const double R = num("radius");
    if (!(R > 0.0)) throw ParseError(origin, find(b, "radius")->number, "radius must be positive");
    part = Ring{density("line_density", 2.0 * std::numbers::pi * R), R, num("speed", 0.0), center()};
  } else if (family == "grid") {
    allowed["file"] = true;
    const Line* f = find(b, "file");
    if (!f) throw ParseError(origin, b.line, "grid needs 'file'");
    std::filesystem::path p(f->value);
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    part = at_line(origin, f->number, [&] { return read_grid_file(p.string()); });
  } else {
    throw ParseError(origin, fam->number, "unknown family '" + family + "'");
  }

  for (const auto& [key, l] : b.keys) {
    if (!allowed.count(key)) throw ParseError(origin, l.number, "key '" + key + "' does not apply to " + family);
  }
  at_line(origin, b.line, [&] {
    validate_part(part);
    return 0;
  });
  return part;
}

}  // namespace

SourceSpec parse_source(std::string_view text, const std::string& origin, const std::string& base_dir,
                        const ConstantsRegistry& registry, UnitSystem default_system) {
  UnitSystem system = default_system;
  std::vector<PartBuilder> builders;
  int last_line = 0;
  for (const Line& l : lex(text, origin)) {
    last_line = l.number;
    if (l.header) {
      if (l.section != "source") throw ParseError(origin, l.number, "unknown section [" + l.section + "]");
      builders.push_back({l.number, {}});
      continue;
    }
    if (l.section.empty()) {
      if (l.key != "system") throw ParseError(origin, l.number, "only 'system' may precede the first [source]");
      system = at_line(origin, l.number, [&] { return parse_unit_system(l.value); });
      if (system == UnitSystem::cgs) {
        throw ParseError(origin, l.number, "sources use c = 1 units: natural or geometrized");
      }
      continue;
    }
    auto& keys = builders.back().keys;
    if (keys.count(l.key)) throw ParseError(origin, l.number, "duplicate key '" + l.key + "'");
    keys.emplace(l.key, l);
  }
  if (builders.empty()) throw ParseError(origin, last_line + 1, "no [source] section");

  std::vector<SourceSpec> parts;
  for (const auto& b : builders) {
    parts.emplace_back(build_part(b, origin, base_dir, registry, system), system);
  }
  return parts.size() == 1 ? parts.front() : SourceSpec::superpose(parts);
}

SourceSpec load_source_file(const std::string& path, const ConstantsRegistry& registry, UnitSystem default_system) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open source file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_source(ss.str(), path, std::filesystem::path(path).parent_path().string(), registry, default_system);
}

SourceSpec resolve_source(const std::string& spec, const ConstantsRegistry& registry, UnitSystem system) {
  constexpr std::string_view prefix = "preset:";
  if (spec.rfind(prefix, 0) != 0) return load_source_file(spec, registry, system);
  if (system == UnitSystem::cgs) throw std::invalid_argument("presets are defined in natural or geometrized units");
  const std::string name = spec.substr(prefix.size());
  if (name == "electron") return electron_preset(registry, system);
  if (name == "harmonic") return SourceSpec(HarmonicBall{1.0 / (4.0 / 3.0 * std::numbers::pi * 1e-3), 0.1, 1.0, 0.0, {}},
                                            UnitSystem::natural);
  if (name == "ball") return SourceSpec(ball_with_mass(1.0, 1.0), system);
  if (name == "dust-ball") return SourceSpec(ball_with_mass(1e-3, 1.0, PressureModel::diagonal_model(0, 0, 0)), system);
  if (name == "rotating-ball") {
    return SourceSpec(RotatingBall{1.0 / (4.0 / 3.0 * std::numbers::pi), 1.0, 0.5, {}}, system);
  }
  if (name == "shell") return SourceSpec(RotatingShell{1.0 / (4.0 * std::numbers::pi), 1.0, 0.5, {}}, system);
  if (name == "ring") return SourceSpec(ring_with_mass(1.0, 1.0, 0.5), system);
  throw std::invalid_argument("unknown preset '" + name +
                              "' (electron, harmonic, ball, dust-ball, rotating-ball, shell, ring)");
}

}  // namespace knlab
