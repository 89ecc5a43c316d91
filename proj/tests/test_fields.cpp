#include <doctest.h>

#include <stdexcept>

#include "knlab/error.hpp"
#include "knlab/fields.hpp"
#include "oracles.hpp"

using namespace knlab;

namespace {

const ConstantsRegistry& reg() { return ConstantsRegistry::builtin(); }

double h(const SourceSpec& s, double t, Vec3 x, int mu = 0, int nu = 0) {
  return retarded_h(s, t, x, mu, nu).value.value();
}

}  // namespace

TEST_CASE("uniform ball follows the shell theorem outside and the closed form inside") {
  const SourceSpec ball(ball_with_mass(1.3, 0.8));
  for (double r : {1.6, 3.2, 6.4}) CHECK(oracle::rel_err(h(ball, 0, {0, r, 0}), oracle::ball_h00(1.3, 0.8, r)) < 1e-6);
  for (double r : {0.0, 0.2, 0.5, 0.79}) {
    CHECK(oracle::rel_err(h(ball, 0, {r, 0, 0}), oracle::ball_h00(1.3, 0.8, r)) < 1e-4);
  }
}

TEST_CASE("isotropic pressure gives h_ii = h_00 / 3 and no off-diagonal terms") {
  const SourceSpec ball(ball_with_mass(1.0, 1.0));
  const RetardedField f = retarded_field(ball, 0.0, {2.0, 0.5, 0.0});
  for (int i = 1; i <= 3; ++i) CHECK(f(i, i) == doctest::Approx(f(0, 0) / 3.0).epsilon(1e-10));
  CHECK(f(0, 1) == 0.0);
  CHECK(f(1, 2) == 0.0);
}

TEST_CASE("thin shell potential is flat inside") {
  const RotatingShell shell{1.0 / (4.0 * oracle::pi), 1.0, 0.0, {}};
  const SourceSpec s(shell);
  CHECK(oracle::rel_err(h(s, 0, {0.3, 0.2, 0.1}), oracle::shell_h00(1.0, 1.0, 0.4)) < 1e-6);
  CHECK(oracle::rel_err(h(s, 0, {0, 0, 3.0}), oracle::shell_h00(1.0, 1.0, 3.0)) < 1e-6);
}

TEST_CASE("ring potential on the axis") {
  const SourceSpec ring(ring_with_mass(2.0, 1.5, 0.4));
  for (double z : {0.0, 0.5, 4.0}) {
    CHECK(oracle::rel_err(h(ring, 0, {0, 0, z}), oracle::ring_axis_h00(2.0, 1.5, z)) < 1e-8);
  }
}

TEST_CASE("field points on a ring are singular") {
  const SourceSpec ring(ring_with_mass(1.0, 1.0, 0.0));
  CHECK_THROWS_AS(retarded_h(ring, 0, {1.0, 0.0, 0.0}, 0, 0), SingularityError);
}

TEST_CASE("rotating ball drags with an exact dipole h_0y") {
  const SourceSpec rb(RotatingBall{1.0 / oracle::ball_volume(1.0), 1.0, 0.5, {}});
  for (double r : {2.0, 5.0}) {
    CHECK(oracle::rel_err(h(rb, 0, {r, 0, 0}, 0, 2), oracle::rotating_ball_h0y(1.0, 1.0, 0.5, r)) < 1e-6);
    CHECK(h(rb, 0, {r, 0, 0}, 0, 2) == doctest::Approx(h(rb, 0, {r, 0, 0}, 2, 0)));
  }
}

TEST_CASE("oscillating ball matches the retarded closed form") {
  const double m = 1.0, R = 0.5, w = 1.7, phase = 0.4;
  const SourceSpec s(HarmonicBall{m / oracle::ball_volume(R), R, w, phase, {}}, UnitSystem::natural);
  for (double t : {0.0, 0.9}) {
    for (double r : {0.8, 2.0, 6.0}) {
      const double exact = oracle::harmonic_ball_h00(m, R, w, phase, t, r);
      CHECK(std::abs(h(s, t, {0, r, 0}) - exact) < 1e-7 * 4.0 * m / r);
    }
  }
}

TEST_CASE("fields are linear under superposition") {
  const SourceSpec a(ball_with_mass(0.7, 0.5, {}, {0.5, 0, 0}));
  const SourceSpec b(RotatingBall{0.4, 0.6, 0.3, {-1.0, 0.2, 0}});
  const SourceSpec c(ring_with_mass(0.3, 0.8, 0.2, {0, 0, 1}));
  const SourceSpec sum = SourceSpec::superpose({a, b, c});
  const Vec3 x{2.0, 1.0, -1.5};
  const RetardedField fs = retarded_field(sum, 0, x);
  const RetardedField fa = retarded_field(a, 0, x), fb = retarded_field(b, 0, x), fc = retarded_field(c, 0, x);
  for (int k = 0; k < 16; ++k) {
    CHECK(fs.h[k] == doctest::Approx(fa.h[k] + fb.h[k] + fc.h[k]).epsilon(1e-10).scale(1.0));
  }
  // density scaling
  const SourceSpec twice(RotatingBall{0.8, 0.6, 0.3, {-1.0, 0.2, 0}});
  CHECK(h(twice, 0, x, 0, 1) == doctest::Approx(2.0 * h(b, 0, x, 0, 1)).epsilon(1e-10));
}

TEST_CASE("fields are covariant under translation and scaling") {
  const Vec3 shift{3.0, -2.0, 0.5};
  const SourceSpec a(RotatingBall{1.0, 1.0, 0.4, {}});
  const SourceSpec b(RotatingBall{1.0, 1.0, 0.4, shift});
  const Vec3 x{1.5, 0.7, 0.2};
  const RetardedField fa = retarded_field(a, 0, x), fb = retarded_field(b, 0, x + shift);
  for (int k = 0; k < 16; ++k) CHECK(fb.h[k] == doctest::Approx(fa.h[k]).epsilon(1e-10).scale(1.0));
  // M -> kM, R -> kR, r -> kr leaves h00 unchanged
  const SourceSpec big(ball_with_mass(3.0, 3.0));
  CHECK(h(big, 0, {6.0, 0, 0}) == doctest::Approx(h(SourceSpec(ball_with_mass(1.0, 1.0)), 0, {2.0, 0, 0})));
}

TEST_CASE("metric is eta plus h") {
  const SourceSpec ball(ball_with_mass(0.1, 1.0));
  const MetricSample g = metric(ball, 0, {3, 0, 0});
  CHECK(g(0, 0) == doctest::Approx(1.0 + 0.4 / 3.0));
  CHECK(g(1, 1) == doctest::Approx(-1.0 + 0.4 / 9.0));
  CHECK(g(0, 1) == 0.0);
}

TEST_CASE("refinement budget exhaustion reports the best estimate") {
  const SourceSpec ball(ball_with_mass(1.0, 1.0));
  QuadratureConfig q;
  q.radial_nodes = 2;
  q.angular_nodes = 2;
  q.rel_tol = 1e-15;
  q.max_refinements = 1;
  try {
    retarded_h(ball, 0, {0.5, 0.3, 0}, 0, 0, q);
    FAIL("expected a convergence error");
  } catch (const ConvergenceError& e) {
    CHECK(std::isfinite(e.best_estimate()));
    CHECK(e.achieved_error() > 0.0);
  }
}

TEST_CASE("batch evaluation is independent of the worker count") {
  const SourceSpec s(HarmonicBall{1.0, 0.3, 2.0, 0.0, {}}, UnitSystem::natural);
  std::vector<SpacetimePoint> pts;
  for (int i = 0; i < 13; ++i) pts.push_back({0.1 * i, {0.5 + 0.2 * i, 0.1, 0.0}});
  const auto one = retarded_h_batch(s, pts, 0, 0, {}, 1);
  const auto four = retarded_h_batch(s, pts, 0, 0, {}, 4);
  REQUIRE(one.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(one[i].ok);
    CHECK(one[i].sample.value.value() == four[i].sample.value.value());
    CHECK(one[i].sample.value.value() == h(s, pts[i].t, pts[i].x));
  }
}

TEST_CASE("field samples carry c = 1 field dimensions") {
  const FieldSample f = retarded_h(SourceSpec(ball_with_mass(1.0, 1.0)), 0, {2, 0, 0}, 0, 0);
  CHECK(f.value.physical_dims() == dims::mass_per_length());
  CHECK(f.value.system() == UnitSystem::geometrized);
  CHECK(f.value.dims().is_dimensionless());
  CHECK(f.node_count > 0);
}

TEST_CASE("grid sources approximate the continuum field") {
  const SourceSpec ball(ball_with_mass(1.0, 1.0));
  const GridSource g = discretize(ball, 0.1, Box{{-1.05, -1.05, -1.05}, {1.05, 1.05, 1.05}});
  const SourceSpec grid(g);
  const FieldSample f = retarded_h(grid, 0, {3, 0, 0}, 0, 0);
  CHECK(oracle::rel_err(f.value.value(), 4.0 / 3.0) < 1e-2);
  CHECK(f.quadrature_error >= 0.0);
}

TEST_CASE("gauge potential is the gradient of log sqrt(-det g)") {
  const double m = 1e-3;
  const SourceSpec dust(ball_with_mass(m, 1.0, PressureModel::diagonal_model(0, 0, 0)));
  const double hbar = 1.054571817e-27 * 6.67430e-8 / std::pow(2.99792458e10, 3);  // geometrized, cm^2
  const Vec3 x{4.0, 0, 0};
  const GaugePotential A = gauge_potential(dust, 0, x, std::nullopt, {}, reg());
  CHECK(A.A[1].physical_dims() == dims::momentum());
  CHECK(oracle::rel_err(A.A[1].value(), -2.0 * hbar * m / 16.0) < 1e-2);
  CHECK(std::abs(A.A[0].value()) < 1e-12 * std::abs(A.A[1].value()));
  CHECK(std::abs(A.A[2].value()) < 1e-6 * std::abs(A.A[1].value()));

  // A is linear in hbar
  const ConstantsRegistry doubled = reg().with_value("hbar", 2.0 * 1.054571817e-27);
  const GaugePotential B = gauge_potential(dust, 0, x, std::nullopt, {}, doubled);
  CHECK(B.A[1].value() == doctest::Approx(2.0 * A.A[1].value()).epsilon(1e-10));
}

TEST_CASE("gauge potential refuses strong fields") {
  const SourceSpec ball(ball_with_mass(1.0, 1.0));
  CHECK_THROWS_AS(gauge_potential(ball, 0, {2, 0, 0}, std::nullopt, {}, reg()), SingularityError);
}
