#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "eshelby/error.hpp"

namespace eshelby::quad {

/// One-dimensional rule on an interval.
struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::size_t size() const { return nodes.size(); }
};

/// Gauss-Legendre rule with n points on [lo, hi], nodes from Newton
/// iteration on the Legendre recurrence.
inline Rule1D gauss_legendre(int n, double lo = 0.0, double hi = 1.0) {
  if (n < 1) throw ValidationError("gauss_legendre: need at least one node");
  // Legendre P_n(x) and its derivative.
  auto legendre = [n](double x, double& dp) {
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    return p1;
  };
  Rule1D rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      const double dx = legendre(x, dp) / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    legendre(x, dp);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = mid - half * x;
    rule.nodes[n - 1 - i] = mid + half * x;
    rule.weights[i] = half * w;
    rule.weights[n - 1 - i] = half * w;
  }
  return rule;
}

/// Node on the reference triangle {(u, v): u, v >= 0, u + v <= 1}.
struct TriNode {
  double u, v, w;
};

/// Collapsed (Duffy) product rule of n x n Gauss points on the reference
/// triangle. Weights sum to 1/2.
inline std::vector<TriNode> triangle_rule(int n) {
  const Rule1D g = gauss_legendre(n);
  std::vector<TriNode> out;
  out.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double xi = g.nodes[i];
      const double eta = g.nodes[j];
      out.push_back({xi, eta * (1.0 - xi), g.weights[i] * g.weights[j] * (1.0 - xi)});
    }
  }
  return out;
}

}  // namespace eshelby::quad
