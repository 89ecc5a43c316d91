#include "knlab/fields.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include "knlab/error.hpp"

namespace knlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kHalfPi = 0.5 * std::numbers::pi;

struct Level {
  std::array<double, 16> val{};
  std::array<double, 16> abs{};
  long nodes = 0;
};

// Adds w * 4 T_{mu nu} for a contravariant T.
void add(Level& L, const StressTensor& upper, double w) {
  const StressTensor T = upper.lowered();
  for (int k = 0; k < 16; ++k) {
    const double v = 4.0 * w * T.c[k];
    L.val[k] += v;
    L.abs[k] += std::abs(v);
  }
  ++L.nodes;
}

Frame frame_towards(const Vec3& axis, double scale) {
  if (norm(axis) <= 1e-14 * scale) return frame_from_axis({0.0, 0.0, 1.0});
  return frame_from_axis(axis);
}

Vec3 direction(const Frame& f, double cos_t, double sin_t, double phi) {
  return (sin_t * std::cos(phi)) * f.e1 + (sin_t * std::sin(phi)) * f.e2 + cos_t * f.e3;
}

// Ball family in spherical coordinates about the field point.
Level ball_level(const SourcePart& part, const SupportBall& sb, double t, const Vec3& x, int nr, int na) {
  Level L;
  const double R = sb.radius;
  const Vec3 rel = sb.center - x;
  const double D = norm(rel);
  const Frame f = frame_towards(rel, R);
  const GaussRule radial = gauss_legendre(nr);
  const int nphi = 2 * na;
  const double wphi = kTwoPi / nphi;

  if (D > R) {
    // impact parameter b = R sin(psi); the chord through the ball is [s_mid - half, s_mid + half]
    for (const auto& pn : map_rule(gauss_legendre(na), 0.0, kHalfPi)) {
      const double b = R * std::sin(pn.x);
      const double half = R * std::cos(pn.x);
      const double along = std::sqrt(D * D - b * b);
      const double cos_t = along / D;
      const double sin_t = b / D;
      const double wang = pn.w * b * half / (D * along);
      const auto snodes = map_rule(radial, along - half, along + half);
      for (int k = 0; k < nphi; ++k) {
        const double phi = wphi * (k + 0.5);
        const Vec3 n = direction(f, cos_t, sin_t, phi);
        for (const auto& sn : snodes) {
          add(L, ball_interior(part, t - sn.x, x + sn.x * n), sn.x * sn.w * wang * wphi);
        }
      }
    }
  } else {
    for (const auto& cn : map_rule(gauss_legendre(na), -1.0, 1.0)) {
      const double cos_t = cn.x;
      const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
      const double s_out = D * cos_t + std::sqrt(std::max(0.0, R * R - D * D * sin_t * sin_t));
      const auto snodes = map_rule(radial, 0.0, s_out);
      for (int k = 0; k < nphi; ++k) {
        const double phi = wphi * (k + 0.5);
        const Vec3 n = direction(f, cos_t, sin_t, phi);
        for (const auto& sn : snodes) {
          add(L, ball_interior(part, t - sn.x, x + sn.x * n), sn.x * sn.w * cn.w * wphi);
        }
      }
    }
  }
  return L;
}

// Thin shell in the distance variable s = |x - x'| on [|D - R|, D + R].
Level shell_level(const RotatingShell& sh, double t, const Vec3& x, int ns, int na) {
  (void)t;  // stationary
  Level L;
  const double R = sh.radius;
  const Vec3 rel = x - sh.center;
  const double D = norm(rel);
  const Frame f = frame_towards(rel, R);
  const int nphi = 2 * na;
  const double wphi = kTwoPi / nphi;

  auto node = [&](double cos_t, double w) {
    const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
    for (int k = 0; k < nphi; ++k) {
      const Vec3 r = R * direction(f, cos_t, sin_t, wphi * (k + 0.5));
      add(L, dust_tensor(sh.surface_density, {-sh.angular_speed * r[1], sh.angular_speed * r[0], 0.0},
                         Measure::surface),
          w * wphi);
    }
  };

  if (D <= 1e-12 * R) {
    // every point of the shell is at distance R
    for (const auto& cn : map_rule(gauss_legendre(na), -1.0, 1.0)) node(cn.x, R * cn.w);
    return L;
  }
  for (const auto& sn : map_rule(gauss_legendre(std::max(ns, na)), std::abs(D - R), D + R)) {
    const double cos_t = std::clamp((R * R + D * D - sn.x * sn.x) / (2.0 * R * D), -1.0, 1.0);
    node(cos_t, sn.w * R / D);
  }
  return L;
}

Level ring_level(const Ring& r, double t, const Vec3& x, int n) {
  (void)t;  // stationary
  Level L;
  const double w = kTwoPi * r.radius / n;
  for (int k = 0; k < n; ++k) {
    const double phi = kTwoPi * k / n;
    const double c = std::cos(phi), s = std::sin(phi);
    const Vec3 xp = r.center + Vec3{r.radius * c, r.radius * s, 0.0};
    const double dist = norm(x - xp);
    add(L, dust_tensor(r.line_density, {-r.speed * s, r.speed * c, 0.0}, Measure::line), w / dist);
  }
  return L;
}

bool inside_cell(const Vec3& x, const Vec3& c, double h) {
  for (int d = 0; d < 3; ++d)
    if (std::abs(x[d] - c[d]) > 0.5 * h) return false;
  return true;
}

// Midpoint sum over the lattice and over its 2h coarsening.
void grid_sums(const GridSource& g, const Vec3& x, Level& fine, Level& coarse) {
  const double h = g.spacing;
  const std::array<int, 3> nb{(g.cells[0] + 1) / 2, (g.cells[1] + 1) / 2, (g.cells[2] + 1) / 2};
  std::vector<double> blocks(16 * static_cast<std::size_t>(nb[0]) * nb[1] * nb[2], 0.0);

  for (int k = 0; k < g.cells[2]; ++k)
    for (int j = 0; j < g.cells[1]; ++j)
      for (int i = 0; i < g.cells[0]; ++i) {
        const std::size_t cell = g.index(i, j, k);
        StressTensor T;
        for (int c = 0; c < 16; ++c) T.c[c] = g.data[16 * cell + c];
        if (T.is_zero()) continue;
        const Vec3 cc = g.cell_center(i, j, k);
        const double w = inside_cell(x, cc, h) ? h * h * kUnitCubeInversePotential : h * h * h / norm(x - cc);
        add(fine, T, w);
        const std::size_t b = (static_cast<std::size_t>(k / 2) * nb[1] + j / 2) * nb[0] + i / 2;
        for (int c = 0; c < 16; ++c) blocks[16 * b + c] += T.c[c] / 8.0;
      }

  const double H = 2.0 * h;
  for (int k = 0; k < nb[2]; ++k)
    for (int j = 0; j < nb[1]; ++j)
      for (int i = 0; i < nb[0]; ++i) {
        const std::size_t b = (static_cast<std::size_t>(k) * nb[1] + j) * nb[0] + i;
        StressTensor T;
        for (int c = 0; c < 16; ++c) T.c[c] = blocks[16 * b + c];
        if (T.is_zero()) continue;
        const Vec3 cc{g.origin[0] + (i + 0.5) * H, g.origin[1] + (j + 0.5) * H, g.origin[2] + (k + 0.5) * H};
        const double w = inside_cell(x, cc, H) ? H * H * kUnitCubeInversePotential : H * H * H / norm(x - cc);
        add(coarse, T, w);
      }
}

std::string describe_point(double t, const Vec3& x) {
  std::ostringstream os;
  os.precision(9);
  os << "(t=" << t << ", x=[" << x[0] << ", " << x[1] << ", " << x[2] << "])";
  return os.str();
}

}  // namespace

RetardedField retarded_field(const SourceSpec& source, double t, const Vec3& x, const QuadratureConfig& cfg,
                             std::span<const std::pair<int, int>> components) {
  cfg.validate();
  if (!std::isfinite(t) || !std::isfinite(x[0]) || !std::isfinite(x[1]) || !std::isfinite(x[2])) {
    throw std::invalid_argument("retarded field: non-finite time or position");
  }
  std::array<bool, 16> mask{};
  if (components.empty()) {
    mask.fill(true);
  } else {
    for (auto [mu, nu] : components) {
      if (mu < 0 || mu > 3 || nu < 0 || nu > 3) throw std::invalid_argument("component indices must be in 0..3");
      mask[4 * mu + nu] = mask[4 * nu + mu] = true;
    }
  }

  RetardedField out;
  int failed = -1;
  double failed_error = 0.0;
  const double floor_factor = 1e-2 * cfg.rel_tol;
  const int refinements = std::max(1, cfg.max_refinements);

  for (const auto& part : source.parts()) {
    if (const auto* g = std::get_if<GridSource>(&part)) {
      Level fine, coarse;
      grid_sums(*g, x, fine, coarse);
      for (int k = 0; k < 16; ++k) {
        out.h[k] += fine.val[k];
        out.error[k] += std::abs(fine.val[k] - coarse.val[k]) / 3.0;
      }
      out.node_count += fine.nodes;
      continue;
    }
    if (const auto* r = std::get_if<Ring>(&part)) {
      const Vec3 rel = x - r->center;
      if (std::hypot(std::hypot(rel[0], rel[1]) - r->radius, rel[2]) <= 1e-9 * r->radius) {
        throw SingularityError("retarded field of a thin ring is singular on the ring " + describe_point(t, x));
      }
    }
    auto level = [&](int k) {
      const int scale = 1 << k;
      const int nr = cfg.radial_nodes * scale;
      const int na = cfg.angular_nodes * scale;
      if (const auto* r = std::get_if<Ring>(&part)) return ring_level(*r, t, x, 8 * na);
      if (const auto* s = std::get_if<RotatingShell>(&part)) return shell_level(*s, t, x, nr, na);
      return ball_level(part, support_of(part), t, x, nr, na);
    };

    Level prev = level(0);
    Level cur;
    std::array<double, 16> err{};
    int miss = -1;
    for (int k = 1; k <= refinements; ++k) {
      cur = level(k);
      miss = -1;
      for (int c = 0; c < 16; ++c) {
        err[c] = std::abs(cur.val[c] - prev.val[c]);
        const double tol = std::max(cfg.rel_tol * std::abs(cur.val[c]), floor_factor * cur.abs[c]);
        if (mask[c] && err[c] > tol && miss < 0) miss = c;
      }
      if (miss < 0) break;
      prev = cur;
    }
    if (miss >= 0 && failed < 0) {
      failed = miss;
      failed_error = err[miss];
    }
    for (int c = 0; c < 16; ++c) {
      out.h[c] += cur.val[c];
      out.error[c] += err[c];
    }
    out.node_count += cur.nodes;
  }

  if (failed >= 0) {
    std::ostringstream os;
    os << "retarded integral h_" << failed / 4 << failed % 4 << " at " << describe_point(t, x)
       << " did not reach rel_tol " << cfg.rel_tol << " after " << refinements << " refinements (error "
       << failed_error << ")";
    throw ConvergenceError(os.str(), out.h[failed], out.error[failed]);
  }
  return out;
}

FieldSample retarded_h(const SourceSpec& source, double t, const Vec3& x, int mu, int nu,
                       const QuadratureConfig& cfg) {
  const std::pair<int, int> comp{mu, nu};
  const RetardedField f = retarded_field(source, t, x, cfg, std::span(&comp, 1));
  return FieldSample{t, x, mu, nu, DimQuantity(f(mu, nu), dims::mass_per_length(), source.system()),
                     f.error[4 * mu + nu], f.node_count};
}

MetricSample metric(const SourceSpec& source, double t, const Vec3& x, const QuadratureConfig& cfg) {
  const RetardedField f = retarded_field(source, t, x, cfg);
  MetricSample m;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      m.g[4 * a + b] = (a == b ? eta(a) : 0.0) + f(a, b);
      m.error[4 * a + b] = f.error[4 * a + b];
    }
  return m;
}

namespace {

// log sqrt|det g| with the weak-field and signature guards.
double log_sqrt_det(const SourceSpec& source, double t, const Vec3& x, const QuadratureConfig& cfg) {
  const MetricSample m = metric(source, t, x, cfg);
  Eigen::Matrix4d g;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      const double h = m(a, b) - (a == b ? eta(a) : 0.0);
      if (!(std::abs(h) < 0.5)) {
        throw SingularityError("weak-field guard: |h_" + std::to_string(a) + std::to_string(b) +
                               "| >= 0.5 at " + describe_point(t, x));
      }
      g(a, b) = m(a, b);
    }
  const double det = g.determinant();
  if (!(det < 0.0)) throw SingularityError("det g is not negative at " + describe_point(t, x));
  return 0.5 * std::log(-det);
}

}  // namespace

GaugePotential gauge_potential(const SourceSpec& source, double t, const Vec3& x, std::optional<double> step,
                               const QuadratureConfig& cfg, const ConstantsRegistry& registry) {
  double delta = 1e-3;
  if (step) {
    delta = *step;
  } else {
    double radius = 0.0;
    for (const auto& sb : source.support()) radius = std::max(radius, sb.radius);
    if (radius > 0.0) delta = 1e-3 * radius;
  }
  if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("finite-difference step must be positive");

  const double hbar = convert(registry.get("hbar"), source.system(), registry).value();
  auto derivative = [&](int mu, double d) {
    double tp = t, tm = t;
    Vec3 xp = x, xm = x;
    if (mu == 0) {
      tp += d;
      tm -= d;
    } else {
      xp[mu - 1] += d;
      xm[mu - 1] -= d;
    }
    return (log_sqrt_det(source, tp, xp, cfg) - log_sqrt_det(source, tm, xm, cfg)) / (2.0 * d);
  };

  GaugePotential out;
  out.step = delta;
  for (int mu = 0; mu < 4; ++mu) {
    const double d1 = derivative(mu, delta);
    const double d2 = derivative(mu, 0.5 * delta);
    out.A[mu] = DimQuantity(hbar * d1, dims::momentum(), source.system());
    out.error[mu] = std::abs(hbar) * (4.0 / 3.0) * std::abs(d1 - d2);
  }
  return out;
}

std::vector<BatchEntry> retarded_h_batch(const SourceSpec& source, std::span<const SpacetimePoint> points, int mu,
                                         int nu, const QuadratureConfig& cfg, int workers) {
  cfg.validate();
  if (workers < 1) throw std::invalid_argument("worker count must be at least 1");
  std::vector<BatchEntry> out(points.size());
  std::atomic<std::size_t> next{0};

  auto run = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      const auto& p = points[i];
      BatchEntry& e = out[i];
      try {
        e.sample = retarded_h(source, p.t, p.x, mu, nu, cfg);
      } catch (const ConvergenceError& err) {
        e.ok = false;
        e.error = err.what();
        e.sample = FieldSample{p.t, p.x, mu, nu, DimQuantity(err.best_estimate(), dims::mass_per_length(), source.system()),
                               err.achieved_error(), 0};
      } catch (const std::exception& err) {
        e.ok = false;
        e.error = err.what();
        e.sample = FieldSample{p.t, p.x, mu, nu,
                               DimQuantity(std::numeric_limits<double>::quiet_NaN(), dims::mass_per_length(),
                                           source.system()),
                               std::numeric_limits<double>::quiet_NaN(), 0};
      }
    }
  };

  const int n = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), points.size()));
  if (n <= 1) {
    run();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (int w = 0; w < n; ++w) pool.emplace_back(run);
  }
  return out;
}

}  // namespace knlab
