#pragma once

#include <map>
#include <string>
#include <string_view>

#include "knlab/quadrature.hpp"
#include "knlab/sources.hpp"
#include "knlab/units.hpp"

namespace knlab {

enum class OutputFormat { jsonl, csv, table, plot };

std::string_view to_string(OutputFormat f);
OutputFormat parse_output_format(std::string_view name);

/// Everything that determines a run's output.
///
/// Run files are line-oriented:
///
///     # comment
///     command = functional spin
///     source = preset:electron          (or a source file path)
///     system = geometrized
///     format = jsonl                    (jsonl | json | csv | table | plot)
///     out = result.jsonl                (stdout when absent)
///     constants = my_constants.txt      (built-in table when absent)
///     workers = 4
///     [quadrature]
///     radial_nodes = 8
///     angular_nodes = 16
///     rel_tol = 1e-10
///     max_refinements = 4
///     [params]
///     at = 10, 0, 0                     (subcommand options, same names as the CLI flags)
struct RunConfig {
  std::string command;
  std::string source;
  UnitSystem system = UnitSystem::geometrized;
  QuadratureConfig quadrature;
  std::string out;
  OutputFormat format = OutputFormat::jsonl;
  std::string constants;
  int workers = 1;
  std::map<std::string, std::string> params;

  /// Canonical text of the settings that affect results. `workers` and `out`
  /// are excluded, so the echo does not depend on where or how fast a run goes.
  std::string canonical() const;

  static RunConfig parse(std::string_view text, const std::string& origin = "<config>");
  static RunConfig load(const std::string& path);
};

/// Source files hold one or more [source] sections, superposed:
///
///     system = geometrized              (optional, before the first section)
///     [source]
///     family = static_ball              static_ball | rotating_ball | rotating_shell | ring | harmonic_ball | grid
///     mass = 1                          or the family density (energy_density, surface_density, line_density)
///     radius = 1
///     center = 0, 0, 0
///     pressure = isotropic              static_ball only: isotropic or p1, p2, p3
///     angular_speed = 0.5               rotating_ball, rotating_shell
///     speed = 1                         ring (tangential, units of c)
///     frequency = 1                     harmonic_ball (Compton frequency of the mass when absent)
///     phase = 0                         harmonic_ball
///     file = cells.grid                 grid (relative to the source file)
///
/// Malformed input throws ParseError naming the line.
SourceSpec parse_source(std::string_view text, const std::string& origin, const std::string& base_dir,
                        const ConstantsRegistry& registry, UnitSystem default_system = UnitSystem::geometrized);
SourceSpec load_source_file(const std::string& path, const ConstantsRegistry& registry,
                            UnitSystem default_system = UnitSystem::geometrized);

/// Resolves `preset:<name>` or a file path. Presets: electron (ring with spin
/// hbar/2), harmonic (mass 1, radius 0.1, frequency 1, natural units),
/// ball (static uniform ball, mass 1, radius 1), dust-ball (pressureless, mass
/// 1e-3, radius 1, weak enough for the gauge potential), rotating-ball,
/// shell, ring.
SourceSpec resolve_source(const std::string& spec, const ConstantsRegistry& registry,
                          UnitSystem system = UnitSystem::geometrized);

}  // namespace knlab
