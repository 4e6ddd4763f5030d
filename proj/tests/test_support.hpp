#pragma once

// Random inputs shared by the test suites.

#include <Eigen/Dense>
#include <cstdint>

#include "eshelby/random.hpp"
#include "eshelby/tensor_core.hpp"

namespace testing_support {

using eshelby::Mat3;
using eshelby::Rng;

inline Mat3 random_symmetric(Rng& rng) {
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = rng.normal();
  return 0.5 * (m + m.transpose());
}

/// Proper rotation from the QR factor of a Gaussian matrix.
inline Mat3 random_rotation(Rng& rng) {
  Mat3 g;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Mat3> qr(g);
  Mat3 q = qr.householderQ();
  if (q.determinant() < 0.0) q.col(0) *= -1.0;
  return q;
}

/// Strongly convex, well-ordered pair with a stiffer or softer inclusion.
inline eshelby::MaterialPair random_pair(Rng& rng, bool stiffer = true) {
  const double mu = rng.uniform(0.3, 3.0);
  if (stiffer) {
    const double lambda = rng.uniform(-0.5 * mu, 3.0);
    return eshelby::MaterialPair(lambda, mu, lambda + rng.uniform(0.1, 3.0), mu * rng.uniform(1.2, 4.0));
  }
  const double lambda = rng.uniform(0.0, 3.0);
  const double mt = mu * rng.uniform(0.2, 0.8);
  // 3 lambda_t + 2 mu_t > 0 needs lambda_t > -2 mu_t / 3.
  const double lt = lambda - rng.uniform(0.1, 0.9) * (lambda + 2.0 * mt / 3.0);
  return eshelby::MaterialPair(lambda, mu, lt, mt);
}

}  // namespace testing_support
