#include "knlab/sources.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace knlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Relative distance within which a point counts as lying on a ring or shell.
constexpr double kOnManifold = 1e-9;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// T = density * (1, v) (1, v): dust with lab-frame energy density `density`.
StressTensor dust(double density, const Vec3& v, Measure m) {
  StressTensor T;
  T.measure = m;
  const double u[4] = {1.0, v[0], v[1], v[2]};
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) T(a, b) = density * u[a] * u[b];
  return T;
}

Vec3 rigid_velocity(double omega, const Vec3& rel) { return {-omega * rel[1], omega * rel[0], 0.0}; }

StressTensor isotropic_ball_tensor(double eps, const PressureModel& p) {
  StressTensor T;
  T(0, 0) = eps;
  for (int i = 0; i < 3; ++i) T(i + 1, i + 1) = p.isotropic ? eps / 3.0 : p.diagonal[i];
  return T;
}

// Tensor of a ball family at x ignoring the support boundary.
StressTensor ball_profile(const SourcePart& part, double t, const Vec3& x) {
  return std::visit(
      overloaded{
          [&](const StaticBall& b) { return isotropic_ball_tensor(b.energy_density, b.pressure); },
          [&](const RotatingBall& b) {
            return dust(b.energy_density, rigid_velocity(b.angular_speed, x - b.center), Measure::volume);
          },
          [&](const HarmonicBall& b) {
            StressTensor T = isotropic_ball_tensor(b.energy_density, PressureModel::isotropic_model());
            const double f = std::cos(b.frequency * t + b.phase);
            for (double& v : T.c) v *= f;
            return T;
          },
          [&](const auto&) -> StressTensor { throw std::logic_error("not a ball family"); },
      },
      part);
}


void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be finite");
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be > 0");
}

void require_nonnegative(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be >= 0");
}

void require_center(const Vec3& c) {
  for (double v : c) require_finite(v, "center coordinate");
}

}  // namespace

bool is_ball_family(const SourcePart& part) {
  return std::holds_alternative<StaticBall>(part) || std::holds_alternative<RotatingBall>(part) ||
         std::holds_alternative<HarmonicBall>(part);
}

StressTensor dust_tensor(double density, const Vec3& v, Measure m) { return dust(density, v, m); }

StressTensor ball_interior(const SourcePart& part, double t, const Vec3& x) { return ball_profile(part, t, x); }

std::string_view to_string(Measure m) {
  switch (m) {
    case Measure::volume: return "volume";
    case Measure::surface: return "surface";
    case Measure::line: return "line";
  }
  return "?";
}

StressTensor StressTensor::lowered() const {
  StressTensor out = *this;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) out(a, b) = eta(a) * eta(b) * (*this)(a, b);
  return out;
}

bool StressTensor::is_zero() const {
  return std::all_of(c.begin(), c.end(), [](double v) { return v == 0.0; });
}

StressTensor& StressTensor::operator+=(const StressTensor& o) {
  for (int k = 0; k < 16; ++k) c[k] += o.c[k];
  return *this;
}

// ---------------------------------------------------------------------------

void validate_part(const SourcePart& part) {
  std::visit(overloaded{
                 [](const StaticBall& b) {
                   require_nonnegative(b.energy_density, "energy density");
                   require_positive(b.radius, "radius");
                   require_center(b.center);
                   if (!b.pressure.isotropic) {
                     for (double p : b.pressure.diagonal) require_finite(p, "pressure");
                   }
                 },
                 [](const RotatingBall& b) {
                   require_nonnegative(b.energy_density, "energy density");
                   require_positive(b.radius, "radius");
                   require_finite(b.angular_speed, "angular speed");
                   require_center(b.center);
                   if (std::abs(b.angular_speed) * b.radius > 1.0) {
                     throw std::invalid_argument("rotating ball: equatorial speed exceeds c");
                   }
                 },
                 [](const RotatingShell& s) {
                   require_nonnegative(s.surface_density, "surface density");
                   require_positive(s.radius, "radius");
                   require_finite(s.angular_speed, "angular speed");
                   require_center(s.center);
                   if (std::abs(s.angular_speed) * s.radius > 1.0) {
                     throw std::invalid_argument("rotating shell: equatorial speed exceeds c");
                   }
                 },
                 [](const Ring& r) {
                   require_nonnegative(r.line_density, "line density");
                   require_positive(r.radius, "radius");
                   require_finite(r.speed, "speed");
                   require_center(r.center);
                   if (std::abs(r.speed) > 1.0) throw std::invalid_argument("ring: tangential speed exceeds c");
                 },
                 [](const HarmonicBall& b) {
                   require_nonnegative(b.energy_density, "energy density");
                   require_positive(b.radius, "radius");
                   require_nonnegative(b.frequency, "frequency");
                   require_finite(b.phase, "phase");
                   require_center(b.center);
                 },
                 [](const GridSource& g) {
                   require_positive(g.spacing, "grid spacing");
                   require_center(g.origin);
                   for (int n : g.cells) {
                     if (n <= 0) throw std::invalid_argument("grid cell counts must be > 0");
                   }
                   if (g.data.size() != 16 * g.cell_count()) {
                     throw std::invalid_argument("grid data size does not match 16 components per cell");
                   }
                   for (std::size_t cell = 0; cell < g.cell_count(); ++cell) {
                     for (int a = 0; a < 4; ++a) {
                       for (int b = 0; b < 4; ++b) {
                         const double v = g.at(cell, a, b);
                         if (!std::isfinite(v)) throw std::invalid_argument("grid holds a non-finite sample");
                         const double w = g.at(cell, b, a);
                         if (std::abs(v - w) > 1e-12 * std::max(std::abs(v), std::abs(w))) {
                           std::ostringstream msg;
                           msg << "grid sample " << cell << " is not symmetric in (" << a << "," << b << ")";
                           throw std::invalid_argument(msg.str());
                         }
                       }
                     }
                     if (g.at(cell, 0, 0) < 0.0) {
                       throw std::invalid_argument("grid sample " + std::to_string(cell) +
                                                   " has negative energy density");
                     }
                   }
                 },
             },
             part);
}

SupportBall support_of(const SourcePart& part) {
  return std::visit(overloaded{
                        [](const GridSource& g) {
                          const Vec3 hi = g.upper();
                          const Vec3 mid = 0.5 * (g.origin + hi);
                          return SupportBall{mid, norm(hi - mid)};
                        },
                        [](const auto& p) { return SupportBall{p.center, p.radius}; },
                    },
                    part);
}

bool part_is_static(const SourcePart& part) {
  if (const auto* h = std::get_if<HarmonicBall>(&part)) return h->frequency == 0.0;
  return true;
}

Measure measure_of(const SourcePart& part) {
  if (std::holds_alternative<Ring>(part)) return Measure::line;
  if (std::holds_alternative<RotatingShell>(part)) return Measure::surface;
  return Measure::volume;
}

StressTensor evaluate_part(const SourcePart& part, double t, const Vec3& x) {
  if (!std::isfinite(t) || !std::isfinite(x[0]) || !std::isfinite(x[1]) || !std::isfinite(x[2])) {
    throw std::invalid_argument("evaluate: non-finite time or position");
  }
  return std::visit(
      overloaded{
          [&](const RotatingShell& s) {
            const Vec3 rel = x - s.center;
            if (std::abs(norm(rel) - s.radius) > kOnManifold * s.radius) return StressTensor{};
            return dust(s.surface_density, rigid_velocity(s.angular_speed, rel), Measure::surface);
          },
          [&](const Ring& r) {
            const Vec3 rel = x - r.center;
            const double rho = std::hypot(rel[0], rel[1]);
            if (std::hypot(rho - r.radius, rel[2]) > kOnManifold * r.radius) return StressTensor{};
            const Vec3 v{-r.speed * rel[1] / rho, r.speed * rel[0] / rho, 0.0};
            return dust(r.line_density, v, Measure::line);
          },
          [&](const GridSource& g) {
            StressTensor T;
            int idx[3];
            for (int d = 0; d < 3; ++d) {
              const double u = (x[d] - g.origin[d]) / g.spacing;
              if (u < 0.0 || u >= g.cells[d]) return StressTensor{};
              idx[d] = std::min(static_cast<int>(u), g.cells[d] - 1);
            }
            const std::size_t cell = g.index(idx[0], idx[1], idx[2]);
            for (int k = 0; k < 16; ++k) T.c[k] = g.data[16 * cell + k];
            return T;
          },
          [&](const auto& b) {
            if (norm(x - b.center) > b.radius) return StressTensor{};
            return ball_profile(part, t, x);
          },
      },
      part);
}

// ---------------------------------------------------------------------------

SourceSpec::SourceSpec(SourcePart part, UnitSystem system) : system_(system) {
  if (system == UnitSystem::cgs) {
    throw std::invalid_argument("sources are defined in c = 1 code units (natural or geometrized)");
  }
  validate_part(part);
  parts_.push_back(std::move(part));
}

SourceSpec SourceSpec::superpose(const std::vector<SourceSpec>& sources) {
  SourceSpec out;
  bool first = true;
  for (const auto& s : sources) {
    if (s.empty()) continue;
    if (first) {
      out.system_ = s.system_;
      first = false;
    } else if (s.system_ != out.system_) {
      throw std::invalid_argument("cannot superpose sources defined in different unit systems");
    }
    out.parts_.insert(out.parts_.end(), s.parts_.begin(), s.parts_.end());
  }
  return out;
}

StressTensor SourceSpec::evaluate(double t, const Vec3& x) const {
  StressTensor total;
  for (const auto& p : parts_) {
    StressTensor T = evaluate_part(p, t, x);
    if (T.is_zero()) continue;
    // a lower-dimensional measure dominates the volume density at the same point
    if (T.measure != total.measure && !total.is_zero()) {
      if (static_cast<int>(T.measure) < static_cast<int>(total.measure)) continue;
      total = T;
      continue;
    }
    total.measure = T.measure;
    total += T;
  }
  return total;
}

bool SourceSpec::is_static() const {
  return std::all_of(parts_.begin(), parts_.end(), part_is_static);
}

bool SourceSpec::has_offdiagonal_stress() const {
  for (const auto& p : parts_) {
    if (std::holds_alternative<StaticBall>(p) || std::holds_alternative<HarmonicBall>(p)) continue;
    if (const auto* g = std::get_if<GridSource>(&p)) {
      for (std::size_t cell = 0; cell < g->cell_count(); ++cell)
        for (int a = 1; a < 4; ++a)
          for (int b = 1; b < 4; ++b)
            if (a != b && g->at(cell, a, b) != 0.0) return true;
      continue;
    }
    return true;
  }
  return false;
}

std::vector<SupportBall> SourceSpec::support() const {
  std::vector<SupportBall> out;
  for (const auto& p : parts_) out.push_back(support_of(p));
  return out;
}

double SourceSpec::extent_from(const Vec3& about) const {
  double r = 0.0;
  for (const auto& s : support()) r = std::max(r, norm(s.center - about) + s.radius);
  return r;
}

// ---------------------------------------------------------------------------

Ring ring_with_mass(double mass, double radius, double speed, Vec3 center) {
  return Ring{mass / (kTwoPi * radius), radius, speed, center};
}

StaticBall ball_with_mass(double mass, double radius, PressureModel p, Vec3 center) {
  const double volume = 4.0 / 3.0 * std::numbers::pi * radius * radius * radius;
  return StaticBall{mass / volume, radius, p, center};
}

HarmonicBall harmonic_ball(double mass, double radius, std::optional<double> frequency, double phase,
                           UnitSystem system, const ConstantsRegistry& registry, Vec3 center) {
  const double volume = 4.0 / 3.0 * std::numbers::pi * radius * radius * radius;
  double omega = 0.0;
  if (frequency) {
    omega = *frequency;
  } else {
    // Compton frequency m c^2 / hbar with c = 1 in code units
    const double hbar = convert(registry.get("hbar"), system, registry).value();
    omega = mass / hbar;
  }
  return HarmonicBall{mass / volume, radius, omega, phase, center};
}

// ---------------------------------------------------------------------------

std::vector<MeasureNode> sample_measure(const SourceSpec& source, double t, const QuadratureConfig& cfg) {
  cfg.validate();
  std::vector<MeasureNode> nodes;
  const GaussRule radial = gauss_legendre(cfg.radial_nodes);
  const GaussRule polar = gauss_legendre(cfg.angular_nodes);
  const int n_azimuth = 2 * cfg.angular_nodes;

  for (const auto& part : source.parts()) {
    if (const auto* g = std::get_if<GridSource>(&part)) {
      const double cell_volume = g->spacing * g->spacing * g->spacing;
      for (int k = 0; k < g->cells[2]; ++k)
        for (int j = 0; j < g->cells[1]; ++j)
          for (int i = 0; i < g->cells[0]; ++i) {
            const std::size_t cell = g->index(i, j, k);
            MeasureNode n{g->cell_center(i, j, k), cell_volume, {}};
            for (int c = 0; c < 16; ++c) n.T.c[c] = g->data[16 * cell + c];
            if (!n.T.is_zero()) nodes.push_back(n);
          }
      continue;
    }
    const SupportBall sb = support_of(part);
    if (const auto* r = std::get_if<Ring>(&part)) {
      const int n = 8 * cfg.angular_nodes;
      for (int k = 0; k < n; ++k) {
        const double phi = kTwoPi * k / n;
        const Vec3 x = r->center + Vec3{r->radius * std::cos(phi), r->radius * std::sin(phi), 0.0};
        const Vec3 v{-r->speed * std::sin(phi), r->speed * std::cos(phi), 0.0};
        nodes.push_back({x, kTwoPi * r->radius / n, dust(r->line_density, v, Measure::line)});
      }
      continue;
    }
    if (const auto* s = std::get_if<RotatingShell>(&part)) {
      for (std::size_t a = 0; a < polar.nodes.size(); ++a) {
        const double ct = polar.nodes[a];
        const double st = std::sqrt(1.0 - ct * ct);
        for (int k = 0; k < n_azimuth; ++k) {
          const double phi = kTwoPi * k / n_azimuth;
          const Vec3 rel{s->radius * st * std::cos(phi), s->radius * st * std::sin(phi), s->radius * ct};
          const double w = s->radius * s->radius * polar.weights[a] * kTwoPi / n_azimuth;
          nodes.push_back({s->center + rel, w,
                           dust(s->surface_density, rigid_velocity(s->angular_speed, rel), Measure::surface)});
        }
      }
      continue;
    }
    // ball families
    const auto rs = map_rule(radial, 0.0, sb.radius);
    for (const auto& rn : rs) {
      for (std::size_t a = 0; a < polar.nodes.size(); ++a) {
        const double ct = polar.nodes[a];
        const double st = std::sqrt(1.0 - ct * ct);
        for (int k = 0; k < n_azimuth; ++k) {
          const double phi = kTwoPi * k / n_azimuth;
          const Vec3 rel{rn.x * st * std::cos(phi), rn.x * st * std::sin(phi), rn.x * ct};
          const double w = rn.w * rn.x * rn.x * polar.weights[a] * kTwoPi / n_azimuth;
          const Vec3 x = sb.center + rel;
          nodes.push_back({x, w, ball_profile(part, t, x)});
        }
      }
    }
  }
  return nodes;
}

// ---------------------------------------------------------------------------

double cube_fraction_below_plane(const Vec3& n, double d) {
  std::array<double, 3> a{std::abs(n[0]), std::abs(n[1]), std::abs(n[2])};
  std::sort(a.begin(), a.end(), std::greater<>());
  const double total = a[0] + a[1] + a[2];
  if (!(total > 0.0)) return d >= 0.0 ? 1.0 : 0.0;
  // unit cube [0,1]^3, region sum a_i w_i <= alpha
  double alpha = d + 0.5 * total;
  if (alpha <= 0.0) return 0.0;
  if (alpha >= total) return 1.0;
  bool complement = false;
  if (alpha > 0.5 * total) {
    alpha = total - alpha;
    complement = true;
  }
  auto cube = [](double v) { return v > 0.0 ? v * v * v : 0.0; };
  auto square = [](double v) { return v > 0.0 ? v * v : 0.0; };
  constexpr double tiny = 1e-4;
  double v = 0.0;
  if (a[2] >= tiny * a[0]) {
    v = (cube(alpha) - cube(alpha - a[0]) - cube(alpha - a[1]) - cube(alpha - a[2]) +
         cube(alpha - a[0] - a[1]) + cube(alpha - a[0] - a[2]) + cube(alpha - a[1] - a[2]) -
         cube(alpha - total)) /
        (6.0 * a[0] * a[1] * a[2]);
  } else if (a[1] >= tiny * a[0]) {
    // thin third direction: average of the 2-D cut over w3
    const double al = alpha - 0.5 * a[2];
    v = (square(al) - square(al - a[0]) - square(al - a[1]) + square(al - a[0] - a[1])) / (2.0 * a[0] * a[1]);
  } else {
    const double al = alpha - 0.5 * (a[1] + a[2]);
    v = al / a[0];
  }
  v = std::clamp(v, 0.0, 1.0);
  return complement ? 1.0 - v : v;
}

GridSource discretize(const SourceSpec& source, double spacing, const Box& box, double t) {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw std::invalid_argument("discretize: spacing must be > 0");
  for (int d = 0; d < 3; ++d) {
    if (!(box.hi[d] > box.lo[d])) throw std::invalid_argument("discretize: empty box");
  }
  auto inside_box = [&](const Vec3& x) {
    for (int d = 0; d < 3; ++d)
      if (x[d] < box.lo[d] || x[d] > box.hi[d]) return false;
    return true;
  };

  // clipped-support check on the measure of each part
  QuadratureConfig probe;
  probe.radial_nodes = 12;
  probe.angular_nodes = 24;
  for (std::size_t p = 0; p < source.parts().size(); ++p) {
    SourceSpec single(source.parts()[p], source.system());
    double total = 0.0, outside = 0.0;
    for (const auto& node : sample_measure(single, t, probe)) {
      total += node.w;
      if (!inside_box(node.x)) outside += node.w;
    }
    const SupportBall sb = support_of(source.parts()[p]);
    bool clipped = outside > 0.0;
    if (is_ball_family(source.parts()[p])) {
      for (int d = 0; d < 3; ++d) {
        clipped = clipped || sb.center[d] - sb.radius < box.lo[d] || sb.center[d] + sb.radius > box.hi[d];
      }
    }
    if (clipped) {
      std::ostringstream msg;
      msg << "discretize: box clips part " << p << " of the source (clipped fraction of support ~"
          << (total > 0.0 ? outside / total : 0.0) << ")";
      throw std::invalid_argument(msg.str());
    }
  }

  GridSource g;
  g.spacing = spacing;
  g.origin = box.lo;
  for (int d = 0; d < 3; ++d) {
    g.cells[d] = std::max(1, static_cast<int>(std::ceil((box.hi[d] - box.lo[d]) / spacing - 1e-9)));
  }
  g.data.assign(16 * g.cell_count(), 0.0);
  const double cell_volume = spacing * spacing * spacing;
  const double half_diag = 0.5 * std::sqrt(3.0) * spacing;

  auto deposit = [&](const Vec3& x, double w, const StressTensor& T) {
    int idx[3];
    for (int d = 0; d < 3; ++d) {
      idx[d] = std::clamp(static_cast<int>(std::floor((x[d] - g.origin[d]) / spacing)), 0, g.cells[d] - 1);
    }
    const std::size_t cell = g.index(idx[0], idx[1], idx[2]);
    for (int c = 0; c < 16; ++c) g.data[16 * cell + c] += T.c[c] * w / cell_volume;
  };

  for (const auto& part : source.parts()) {
    if (is_ball_family(part)) {
      const SupportBall sb = support_of(part);
      for (int k = 0; k < g.cells[2]; ++k)
        for (int j = 0; j < g.cells[1]; ++j)
          for (int i = 0; i < g.cells[0]; ++i) {
            const Vec3 c = g.cell_center(i, j, k);
            const Vec3 rel = c - sb.center;
            const double dist = norm(rel);
            const double depth = sb.radius - dist;
            double frac = 0.0;
            if (depth >= half_diag) frac = 1.0;
            else if (depth > -half_diag) frac = cube_fraction_below_plane((1.0 / dist) * rel, depth / spacing);
            if (frac == 0.0) continue;
            const StressTensor T = ball_profile(part, t, c);
            const std::size_t cell = g.index(i, j, k);
            for (int q = 0; q < 16; ++q) g.data[16 * cell + q] += frac * T.c[q];
          }
      continue;
    }
    // lower-dimensional measures and grids: deposit fine measure nodes
    QuadratureConfig fine;
    const SupportBall sb = support_of(part);
    fine.radial_nodes = 4;
    fine.angular_nodes = std::max(16, static_cast<int>(std::ceil(4.0 * sb.radius / spacing)));
    for (const auto& node : sample_measure(SourceSpec(part, source.system()), t, fine)) {
      deposit(node.x, node.w, node.T);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kSmoothingFraction = 1.0 / 8.0;

// Profile used by the conservation check: sharp for balls and grids, Gaussian
// smoothed for rings and shells.
StressTensor conservation_profile(const SourcePart& part, double t, const Vec3& x) {
  if (const auto* r = std::get_if<Ring>(&part)) {
    const double w = kSmoothingFraction * r->radius;
    const Vec3 rel = x - r->center;
    const double rho = std::hypot(rel[0], rel[1]);
    const double d2 = (rho - r->radius) * (rho - r->radius) + rel[2] * rel[2];
    const double eps = r->line_density * std::exp(-d2 / (2 * w * w)) / (kTwoPi * w * w);
    return dust(eps, rigid_velocity(r->speed / r->radius, rel), Measure::volume);
  }
  if (const auto* s = std::get_if<RotatingShell>(&part)) {
    const double w = kSmoothingFraction * s->radius;
    const Vec3 rel = x - s->center;
    const double d = norm(rel) - s->radius;
    const double eps = s->surface_density * std::exp(-d * d / (2 * w * w)) / (std::sqrt(kTwoPi) * w);
    return dust(eps, rigid_velocity(s->angular_speed, rel), Measure::volume);
  }
  return evaluate_part(part, t, x);
}

struct LatticeResidual {
  std::array<double, 4> max{};
  std::array<double, 4> interior{};
};

LatticeResidual analytic_residual(const SourceSpec& source, double h) {
  const auto& parts = source.parts();
  Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi = -1.0 * lo;
  for (const auto& p : parts) {
    const SupportBall sb = support_of(p);
    double margin = 2.0 * h;
    if (measure_of(p) != Measure::volume) margin += 5.0 * kSmoothingFraction * sb.radius;
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::min(lo[d], sb.center[d] - sb.radius - margin);
      hi[d] = std::max(hi[d], sb.center[d] + sb.radius + margin);
    }
  }
  auto T_at = [&](double t, const Vec3& x) {
    StressTensor T;
    for (const auto& p : parts) T += conservation_profile(p, t, x);
    return T;
  };
  const bool is_static = source.is_static();
  std::array<int, 3> n{};
  for (int d = 0; d < 3; ++d) n[d] = static_cast<int>(std::ceil((hi[d] - lo[d]) / h));

  LatticeResidual out;
  for (int k = 0; k < n[2]; ++k)
    for (int j = 0; j < n[1]; ++j)
      for (int i = 0; i < n[0]; ++i) {
        const Vec3 x{lo[0] + (i + 0.5) * h, lo[1] + (j + 0.5) * h, lo[2] + (k + 0.5) * h};
        std::array<double, 4> r{};
        for (int d = 0; d < 3; ++d) {
          Vec3 xp = x, xm = x;
          xp[d] += h;
          xm[d] -= h;
          const StressTensor Tp = T_at(0.0, xp);
          const StressTensor Tm = T_at(0.0, xm);
          for (int nu = 0; nu < 4; ++nu) r[nu] += (Tp(d + 1, nu) - Tm(d + 1, nu)) / (2.0 * h);
        }
        if (!is_static) {
          const StressTensor Tp = T_at(h, x);
          const StressTensor Tm = T_at(-h, x);
          for (int nu = 0; nu < 4; ++nu) r[nu] += (Tp(0, nu) - Tm(0, nu)) / (2.0 * h);
        }
        bool interior = true;
        for (const auto& p : parts) {
          if (!is_ball_family(p)) continue;
          const SupportBall sb = support_of(p);
          if (std::abs(norm(x - sb.center) - sb.radius) <= h) interior = false;
        }
        for (int nu = 0; nu < 4; ++nu) {
          out.max[nu] = std::max(out.max[nu], std::abs(r[nu]));
          if (interior) out.interior[nu] = std::max(out.interior[nu], std::abs(r[nu]));
        }
      }
  return out;
}

// Residual on a stored lattice, optionally using every `stride`-th cell.
LatticeResidual grid_residual(const GridSource& g, int stride) {
  const double h = g.spacing * stride;
  LatticeResidual out;
  const int ni = (g.cells[0] + stride - 1) / stride;
  const int nj = (g.cells[1] + stride - 1) / stride;
  const int nk = (g.cells[2] + stride - 1) / stride;
  const int n[3] = {ni, nj, nk};
  for (int k = 1; k + 1 < nk; ++k)
    for (int j = 1; j + 1 < nj; ++j)
      for (int i = 1; i + 1 < ni; ++i) {
        const int at[3] = {i, j, k};
        std::array<double, 4> r{};
        bool interior = g.at(g.index(i * stride, j * stride, k * stride), 0, 0) > 0.0;
        for (int d = 0; d < 3; ++d) {
          int p[3] = {at[0], at[1], at[2]};
          int m[3] = {at[0], at[1], at[2]};
          ++p[d];
          --m[d];
          if (p[d] >= n[d] || p[d] * stride >= g.cells[d]) {
            interior = false;
            continue;
          }
          const std::size_t cp = g.index(p[0] * stride, p[1] * stride, p[2] * stride);
          const std::size_t cm = g.index(m[0] * stride, m[1] * stride, m[2] * stride);
          interior = interior && g.at(cp, 0, 0) > 0.0 && g.at(cm, 0, 0) > 0.0;
          for (int nu = 0; nu < 4; ++nu) r[nu] += (g.at(cp, d + 1, nu) - g.at(cm, d + 1, nu)) / (2.0 * h);
        }
        for (int nu = 0; nu < 4; ++nu) {
          out.max[nu] = std::max(out.max[nu], std::abs(r[nu]));
          if (interior) out.interior[nu] = std::max(out.interior[nu], std::abs(r[nu]));
        }
      }
  return out;
}

double order_between(double coarse, double fine) {
  if (coarse <= 0.0 && fine <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  if (fine <= 0.0) return std::numeric_limits<double>::infinity();
  return std::log2(coarse / fine);
}

}  // namespace

ConservationReport conservation_residual(const SourceSpec& source, double spacing) {
  ConservationReport rep;
  if (source.empty()) {
    rep.spacing = spacing;
    rep.coarse_spacing = 2 * spacing;
    rep.order.fill(std::numeric_limits<double>::quiet_NaN());
    rep.order_estimate = std::numeric_limits<double>::quiet_NaN();
    return rep;
  }
  LatticeResidual fine, coarse;
  if (source.parts().size() == 1 && std::holds_alternative<GridSource>(source.parts()[0])) {
    const auto& g = std::get<GridSource>(source.parts()[0]);
    rep.spacing = g.spacing;
    rep.coarse_spacing = 2 * g.spacing;
    fine = grid_residual(g, 1);
    coarse = grid_residual(g, 2);
  } else {
    if (!(spacing > 0.0)) throw std::invalid_argument("conservation_residual: spacing must be > 0");
    for (const auto& p : source.parts()) {
      if (std::holds_alternative<GridSource>(p)) {
        throw std::invalid_argument("conservation_residual: grid sources must be checked on their own");
      }
    }
    rep.spacing = spacing;
    rep.coarse_spacing = 2 * spacing;
    fine = analytic_residual(source, spacing);
    coarse = analytic_residual(source, 2 * spacing);
  }
  rep.max_residual = fine.max;
  rep.interior_residual = fine.interior;
  rep.coarse_max_residual = coarse.max;
  for (int nu = 0; nu < 4; ++nu) rep.order[nu] = order_between(coarse.max[nu], fine.max[nu]);
  rep.order_estimate = rep.order[0];
  return rep;
}

}  // namespace knlab
