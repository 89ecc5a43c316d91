#include "knlab/quadrature.hpp"

#include <numbers>
#include <stdexcept>
#include <string>

namespace knlab {

Frame frame_from_axis(const Vec3& axis) {
  const double n = norm(axis);
  if (!(n > 0.0)) return {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const Vec3 e3 = (1.0 / n) * axis;
  // seed with the coordinate axis least aligned with e3
  Vec3 seed{1, 0, 0};
  if (std::abs(e3[1]) < std::abs(e3[0]) && std::abs(e3[1]) <= std::abs(e3[2])) seed = {0, 1, 0};
  else if (std::abs(e3[2]) < std::abs(e3[0])) seed = {0, 0, 1};
  Vec3 e1 = cross(seed, e3);
  e1 = (1.0 / norm(e1)) * e1;
  return {e1, cross(e3, e1), e3};
}

GaussRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("Gauss-Legendre rule needs at least one node");
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    if (n == 1) p0 = 1.0;
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

std::vector<MappedNode> map_rule(const GaussRule& rule, double a, double b) {
  std::vector<MappedNode> out(rule.nodes.size());
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = {mid + half * rule.nodes[i], half * rule.weights[i]};
  }
  return out;
}

void QuadratureConfig::validate() const {
  if (radial_nodes < 2 || angular_nodes < 2) {
    throw std::invalid_argument("quadrature node counts must be >= 2");
  }
  if (!(rel_tol > 0.0)) throw std::invalid_argument("quadrature tolerance must be > 0");
  if (max_refinements < 0) throw std::invalid_argument("max_refinements must be >= 0");
}

}  // namespace knlab
