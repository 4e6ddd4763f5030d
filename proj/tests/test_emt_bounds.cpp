#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "eshelby/emt_bounds.hpp"
#include "test_support.hpp"

using namespace eshelby;
using testing_support::random_pair;
using testing_support::random_rotation;

namespace {

// Three-dimensional constants written out with k = lambda + 2 mu / 3.
double k1_oracle(const MaterialPair& p) {
  const double k = p.lambda + 2.0 * p.mu / 3.0, kt = p.lambda_t + 2.0 * p.mu_t / 3.0;
  return (3.0 * kt + 4.0 * p.mu) / (3.0 * (kt - k) * (3.0 * k + 4.0 * p.mu));
}
double k2_oracle(const MaterialPair& p) {
  const double k = p.lambda + 2.0 * p.mu / 3.0, dm = p.mu_t - p.mu;
  return (5.0 + 2.0 * dm * (1.0 / p.mu + 2.0 / (3.0 * k + 4.0 * p.mu))) / (2.0 * dm);
}

// Ball EMT from the classical dilute-sphere strain ratios.
Tensor4<3> ball_emt_oracle(const MaterialPair& p, double volume) {
  const double k = p.lambda + 2.0 * p.mu / 3.0, kt = p.lambda_t + 2.0 * p.mu_t / 3.0;
  const double nu = p.lambda / (2.0 * (p.lambda + p.mu));
  const double beta = 2.0 * (4.0 - 5.0 * nu) / (15.0 * (1.0 - nu));
  const double rb = (3.0 * k + 4.0 * p.mu) / (3.0 * kt + 4.0 * p.mu);
  const double rs = 1.0 / (1.0 + beta * (p.mu_t / p.mu - 1.0));
  return Tensor4<3>::iso(volume * 3.0 * (kt - k) * rb, volume * 2.0 * (p.mu_t - p.mu) * rs);
}

Shape random_ellipsoid(Rng& rng) {
  const double a = rng.uniform(1.0, 3.0), b = rng.uniform(1.0, a);
  return normalize_volume(Shape::ellipsoid(a, b, 1.0)).rotated(random_rotation(rng));
}

}  // namespace

TEST(TraceBounds, DefaultPair) {
  const MaterialPair p(1.0, 1.0, 2.0, 2.0);
  const TraceBounds k = trace_bound_constants(p, 3);
  EXPECT_NEAR(k.K1, 14.0 / 45.0, 1e-14);
  EXPECT_NEAR(k.K2, 67.0 / 18.0, 1e-14);
  EXPECT_NEAR(k.K1 + k.K2, 121.0 / 30.0, 1e-14);
  // Swapping the phases flips the sign of both contrast prefactors.
  const TraceBounds swapped = trace_bound_constants(MaterialPair(2.0, 2.0, 1.0, 1.0), 3);
  EXPECT_LT(swapped.K1, 0.0);
  EXPECT_LT(swapped.K2, 0.0);
  EXPECT_NEAR(swapped.K1, k1_oracle(MaterialPair(2.0, 2.0, 1.0, 1.0)), 1e-14);
}

TEST(TraceBounds, OracleProperty) {
  Rng rng(50);
  for (int t = 0; t < 200; ++t) {
    const MaterialPair p = random_pair(rng, t % 2 == 0);
    const TraceBounds k = trace_bound_constants(p, 3);
    EXPECT_NEAR(k.K1, k1_oracle(p), 1e-12 * std::abs(k1_oracle(p))) << "case " << t;
    EXPECT_NEAR(k.K2, k2_oracle(p), 1e-12 * std::abs(k2_oracle(p))) << "case " << t;
    // Both constants carry the sign of the contrast.
    EXPECT_EQ(k.K1 > 0.0, t % 2 == 0);
    EXPECT_EQ(k.K2 > 0.0, t % 2 == 0);
  }
}

TEST(TraceBounds, RejectsZeroContrastAndBadDimension) {
  EXPECT_THROW(trace_bound_constants(MaterialPair(1.0, 1.0, 1.0 / 3.0, 2.0), 3), ValidationError);
  EXPECT_THROW(trace_bound_constants(MaterialPair(1.0, 1.0, 2.0, 1.0), 3), ValidationError);
  EXPECT_THROW(trace_bound_constants(MaterialPair(1.0, 1.0, 2.0, 2.0), 4), ValidationError);
}

TEST(ConstantStrainEMT, UnitBall) {
  const MaterialPair p(1.0, 1.0, 2.0, 2.0);
  const EMTReport<3> r = emt_constant_strain(normalize_volume(Shape::ball(1.0)), p);
  EXPECT_LT((r.M.coeffs() - ball_emt_oracle(p, 1.0).coeffs()).norm(), 1e-10);
  // Eigenvalues 3 (5/3) (9/14) and 2 (45/67).
  Eigen::SelfAdjointEigenSolver<Tensor4<3>::Matrix> es(r.M.coeffs());
  EXPECT_NEAR(es.eigenvalues()(0), 90.0 / 67.0, 1e-10);
  EXPECT_NEAR(es.eigenvalues()(5), 45.0 / 14.0, 1e-10);
  EXPECT_EQ(r.definiteness_sign, 1);
  EXPECT_LT(r.symmetry_defect, 1e-12);

  const BoundReport b = bound_report(r.M, p);
  EXPECT_NEAR(b.tr1, 14.0 / 45.0, 1e-10);
  EXPECT_NEAR(b.tr2, 67.0 / 18.0, 1e-10);
  EXPECT_NEAR(b.trace_inverse, 121.0 / 30.0, 1e-10);
  EXPECT_NEAR(b.gap1, 0.0, 1e-10);
  EXPECT_NEAR(b.gap2, 0.0, 1e-10);
  EXPECT_EQ(b.direction, 1);
}

TEST(ConstantStrainEMT, BallOracleProperty) {
  Rng rng(51);
  for (int t = 0; t < 200; ++t) {
    const MaterialPair p = random_pair(rng, t % 2 == 0);
    const double r = rng.uniform(0.5, 2.0);
    const Shape ball = Shape::ball(r);
    const EMTReport<3> rep = emt_constant_strain(ball, p);
    const Tensor4<3> oracle = ball_emt_oracle(p, ball.volume());
    EXPECT_LT((rep.M.coeffs() - oracle.coeffs()).norm(), 1e-9 * oracle.coeffs().norm()) << "case " << t;
  }
}

// Ellipsoids attain both bounds; symmetric with the sign of the contrast.
TEST(ConstantStrainEMT, EllipsoidProperty) {
  Rng rng(52);
  for (int t = 0; t < 200; ++t) {
    const bool stiffer = t % 2 == 0;
    const MaterialPair p = random_pair(rng, stiffer);
    const Shape s = random_ellipsoid(rng);
    const EMTReport<3> r = emt_constant_strain(s, p);
    EXPECT_LT(r.symmetry_defect, 1e-10) << "case " << t;
    EXPECT_EQ(r.definiteness_sign, stiffer ? 1 : -1) << "case " << t;
    const BoundReport b = bound_report(r.M, p);
    EXPECT_EQ(b.direction, stiffer ? 1 : -1);
    EXPECT_NEAR(b.gap1, 0.0, 1e-8 * std::abs(b.K1)) << "case " << t;
    EXPECT_NEAR(b.gap2, 0.0, 1e-8 * std::abs(b.K2)) << "case " << t;
    EXPECT_NEAR(b.trace_inverse, b.tr1 + b.tr2, 1e-10 * std::abs(b.trace_inverse));
  }
}

TEST(ConstantStrainEMT, ScalesWithVolumeAndRotates) {
  Rng rng(53);
  const MaterialPair p(1.0, 1.0, 2.0, 2.0);
  const Shape s = Shape::ellipsoid(2.0, 1.0, 0.5);
  const Tensor4<3> m1 = emt_constant_strain(s, p).M;
  const Tensor4<3> m2 = emt_constant_strain(s.scaled(1.5), p).M;
  EXPECT_LT((m2.coeffs() - std::pow(1.5, 3) * m1.coeffs()).norm(), 1e-10 * m2.coeffs().norm());
  // Rotation preserves the spectrum of M.
  const Tensor4<3> mr = emt_constant_strain(s.rotated(random_rotation(rng)), p).M;
  Eigen::SelfAdjointEigenSolver<Tensor4<3>::Matrix> e1(m1.coeffs()), e2(mr.coeffs());
  EXPECT_LT((e1.eigenvalues() - e2.eigenvalues()).norm(), 1e-10);
}

TEST(ConstantStrainEMT, RejectsNonEllipsoids) {
  const MaterialPair p(1.0, 1.0, 2.0, 2.0);
  EXPECT_THROW(emt_constant_strain(Shape::cuboid(1.0, 1.0, 1.0), p), ValidationError);
  EXPECT_THROW(emt_constant_strain_quadrature(Shape::cuboid(1.0, 1.0, 1.0), p, 3), ValidationError);
}

TEST(ConstantStrainEMT, ZeroContrastIsZero) {
  const MaterialPair p(1.0, 1.0, 1.0, 1.0);
  const EMTReport<3> r = emt_constant_strain(Shape::ellipsoid(2.0, 1.0, 0.5), p);
  EXPECT_LT(r.M.coeffs().norm(), 1e-14);
  EXPECT_EQ(r.definiteness_sign, 0);
  EXPECT_THROW(bound_report(r.M, p), std::exception);
}

TEST(QuadratureEMT, BallMatchesAnalytic) {
  const MaterialPair p(1.0, 1.0, 2.0, 2.0);
  const EMTReport<3> r = emt_constant_strain_quadrature(normalize_volume(Shape::ball(1.0)), p, 4);
  const BoundReport b = bound_report(r.M, p);
  EXPECT_NEAR(b.tr1, 14.0 / 45.0, 1e-3);
  EXPECT_NEAR(b.tr2, 67.0 / 18.0, 1e-3);
  EXPECT_NEAR(b.trace_inverse, 121.0 / 30.0, 1e-3);
  ASSERT_TRUE(r.reference.has_value());
  EXPECT_GT(r.error_estimate, 0.0);
  const GapErrors e = gap_errors(r, p);
  EXPECT_LT(std::abs(b.gap1), epsilon_num(e.gap1));
  EXPECT_LT(std::abs(b.gap2), epsilon_num(e.gap2));
}

TEST(QuadratureEMT, EllipsoidGapsWithinEstimatedError) {
  Rng rng(54);
  const MaterialPair p(1.0, 1.0, 2.0, 2.0);
  for (int t = 0; t < 2; ++t) {
    const Shape s = random_ellipsoid(rng);
    const EMTReport<3> r = emt_constant_strain_quadrature(s, p, 4);
    const BoundReport b = bound_report(r.M, p);
    const GapErrors e = gap_errors(r, p);
    EXPECT_LT(std::abs(b.gap1), epsilon_num(e.gap1)) << s.to_string();
    EXPECT_LT(std::abs(b.gap2), epsilon_num(e.gap2)) << s.to_string();
    EXPECT_LT((r.M.coeffs() - emt_constant_strain(s, p).M.coeffs()).norm(), 1e-4);
  }
}

TEST(Gaps, ClosedFormHasNoErrorEstimate) {
  const MaterialPair p(1.0, 1.0, 2.0, 2.0);
  const EMTReport<3> r = emt_constant_strain(Shape::ball(1.0), p);
  const GapErrors e = gap_errors(r, p);
  EXPECT_EQ(e.gap1, 0.0);
  EXPECT_EQ(epsilon_num(0.0), 1e-10);
  EXPECT_EQ(epsilon_num(1e-3), 1e-2);
}
