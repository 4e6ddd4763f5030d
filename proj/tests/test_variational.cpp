#include <gtest/gtest.h>

#include <cmath>

#include "eshelby/emt_bounds.hpp"
#include "eshelby/variational.hpp"
#include "test_support.hpp"

using namespace eshelby;
using testing_support::random_pair;
using testing_support::random_symmetric;

namespace {

const MaterialPair kPair(1.0, 1.0, 2.0, 2.0);

PolarizationField axpy(double a, const PolarizationField& x, const PolarizationField& y) {
  PolarizationField out = y;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += a * x.values[i];
  return out;
}

}  // namespace

TEST(Energy, NegativeForRandomFieldsProperty) {
  const VariationalProblem prob(normalize_volume(Shape::ball(1.0)), kPair, 8);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const PolarizationField p = prob.random_field(seed);
    const double e = prob.energy(p);
    EXPECT_LT(e, 0.0) << "seed " << seed;
    if (seed % 40 == 0) {
      PolarizationField twice = axpy(1.0, p, p);
      EXPECT_NEAR(prob.energy(twice), 4.0 * e, 1e-12 * std::abs(e));
    }
  }
}

TEST(Energy, OperatorIsSelfAdjoint) {
  const VariationalProblem prob(Shape::cuboid(1.0, 1.0, 1.0), kPair, 8);
  const PolarizationField x = prob.random_field(1), y = prob.random_field(2);
  const double xy = prob.inner(x, PolarizationField{prob.green_apply(y).strain});
  const double yx = prob.inner(y, PolarizationField{prob.green_apply(x).strain});
  EXPECT_NEAR(xy, yx, 1e-12 * std::abs(xy));
  EXPECT_THROW(prob.energy(PolarizationField{std::vector<Coords6>(3)}), ValidationError);
}

TEST(Energy, NegdefIdentityManySeeds) {
  Rng rng(70);
  for (int t = 0; t < 200; ++t) {
    const MaterialPair p = random_pair(rng, t % 2 == 0);
    EXPECT_LT(negdef_identity(p, 6, 7000 + t).relative_residual, 1e-8) << "case " << t;
  }
}

TEST(Maximizer, StationaryConcaveMaximum) {
  const VariationalProblem prob(Shape::cuboid(1.0, 1.0, 1.0), kPair, 10);
  Rng rng(71);
  const SymMat3 a = SymMat3::from_matrix(random_symmetric(rng));
  const Maximizer m = prob.maximize_EA(a, 1e-10);
  EXPECT_LT(m.stationarity, 1e-8);
  EXPECT_GT(m.iterations, 0);
  const double top = prob.energy_EA(m.P, a);
  // At the maximum the quadratic part equals minus the linear part.
  EXPECT_NEAR(top, m.value, 1e-8 * std::abs(top));
  for (std::uint64_t s = 0; s < 10; ++s) {
    const PolarizationField moved = axpy(0.05, prob.random_field(100 + s), m.P);
    EXPECT_LT(prob.energy_EA(moved, a), top);
  }
}

TEST(Maximizer, ZeroLoadingAndSofterInclusion) {
  const VariationalProblem prob(Shape::ball(0.6), kPair, 8);
  const Maximizer m = prob.maximize_EA(SymMat3());
  EXPECT_EQ(m.iterations, 0);
  EXPECT_EQ(m.value, 0.0);
  const VariationalProblem soft(Shape::ball(0.6), MaterialPair(1.0, 1.0, 0.5, 0.5), 8);
  EXPECT_THROW(soft.maximize_EA(SymMat3::from_matrix(Mat3::Identity())), ValidationError);
}

TEST(IdentitySums, BallAndCube) {
  for (const Shape& s : {normalize_volume(Shape::ball(1.0)), Shape::cuboid(1.0, 1.0, 1.0)}) {
    const VariationalProblem prob(s, kPair, 16);
    EXPECT_NEAR(prob.identity_sum(1), -1.0 / 9.0, 0.02 / 9.0) << s.to_string();
    EXPECT_NEAR(prob.identity_sum(2), -11.0 / 9.0, 0.22 / 9.0) << s.to_string();
  }
  const VariationalProblem prob(Shape::ball(0.6), kPair, 8);
  EXPECT_THROW(prob.identity_sum(3), ValidationError);
}

// Inside an ellipsoid a uniform polarization produces a uniform strain.
TEST(ConstantField, EllipsoidStrainIsNearlyUniform) {
  const Shape s = normalize_volume(Shape::ellipsoid(1.5, 1.0, 0.8));
  const VariationalProblem prob(s, kPair, 16);
  Rng rng(72);
  const GreenApplication g = prob.green_apply(prob.constant_field(SymMat3::from_matrix(random_symmetric(rng))));
  EXPECT_LT(prob.strain_spread(g), 0.05);

  const VariationalProblem ball(normalize_volume(Shape::ball(1.0)), kPair, 32);
  EXPECT_LT(ball.strain_spread(ball.green_apply(ball.constant_field(SymMat3::identity()))), 0.05);
}

TEST(VariationalEMT, BallCloseToConstantStrain) {
  const Shape s = normalize_volume(Shape::ball(1.0));
  const EMTReport<3> r = emt_variational(s, kPair, 32, false);
  EXPECT_EQ(r.method, "variational");
  EXPECT_EQ(r.definiteness_sign, 1);
  EXPECT_NEAR(r.M.coeffs()(0, 0), 45.0 / 14.0, 0.02 * 45.0 / 14.0);
  const BoundReport b = bound_report(r.M, kPair);
  EXPECT_NEAR(b.tr1, 14.0 / 45.0, 0.02 * 14.0 / 45.0);
  EXPECT_NEAR(b.tr2, 67.0 / 18.0, 0.02 * 67.0 / 18.0);
  // Coupling between the blocks is dropped.
  for (int k = 1; k < 6; ++k) EXPECT_EQ(r.M.coeffs()(0, k), 0.0);
}

TEST(VariationalEMT, EllipsoidMaximizerIsNearlyConstant) {
  const Shape s = normalize_volume(Shape::ellipsoid(1.5, 1.0, 0.8));
  const VariationalProblem prob(s, kPair, 16);
  const EllipsoidMoments mom = analytic_ellipsoid_moments(s);
  const Mat3 a = Vec3(1.0, -0.4, 0.2).asDiagonal();
  const SymMat3 expected = bstar(SymMat3::symmetrized(interior_strain_ellipsoid(a, mom, kPair).B), kPair);
  const Maximizer m = prob.maximize_EA(SymMat3::from_matrix(a));
  EXPECT_LT(prob.deviation_from_constant(m.P, expected), 0.06);
}

TEST(VariationalEMT, CubeGapsPositiveAndErrorEstimate) {
  const EMTReport<3> r = emt_variational(Shape::cuboid(1.0, 1.0, 1.0), kPair, 32);
  ASSERT_TRUE(r.reference.has_value());
  EXPECT_GT(r.error_estimate, 0.0);
  EXPECT_LT(r.symmetry_defect, 1e-2);
  const BoundReport b = bound_report(r.M, kPair);
  EXPECT_GT(b.gap1, 0.0);
  EXPECT_GT(b.gap2, 0.0);
  EXPECT_EQ(reference_grid(16), 12);
  EXPECT_EQ(reference_grid(32), 24);
  EXPECT_EQ(reference_grid(8), 8);
  EXPECT_THROW(emt_variational(Shape::cuboid(1.0, 1.0, 1.0), kPair, 12), ValidationError);
}

// For an ellipsoid and A = M^-1 B_k the maximizer is the constant field B_k,
// cell by cell away from the staircase boundary. The boundary layer keeps the
// whole-domain L2 distance near 5-7% at n = 32.
TEST(VariationalEMT, EllipsoidMaximizerForInverseLoading) {
  const Shape s = normalize_volume(Shape::ellipsoid(1.5, 1.0, 0.8));
  const VariationalProblem prob(s, kPair, 32);
  const auto inv = symmetric_inverse(emt_constant_strain(s, kPair).M);
  const auto& basis = make_basis<3>();
  for (int k : {0, 3}) {
    const SymMat3 a = inv.inverse(basis.elements[k]);
    const Maximizer m = prob.maximize_EA(a);
    EXPECT_LT(prob.interior_deviation(m.P, basis.elements[k]), 0.05) << "k = " << k;
    EXPECT_LT(prob.deviation_from_constant(m.P, basis.elements[k]), 0.08) << "k = " << k;
  }
}
