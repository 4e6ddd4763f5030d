#include <gtest/gtest.h>

#include <cmath>

#include "eshelby/tensor_core.hpp"
#include "test_support.hpp"

using namespace eshelby;
using testing_support::random_pair;
using testing_support::random_rotation;
using testing_support::random_symmetric;

namespace {

constexpr int kCases = 250;

Mat3 diag3(double a, double b, double c) { return Vec3(a, b, c).asDiagonal(); }

// Independent of the basis: (tr X / 3) I.
Mat3 hydro_part(const Mat3& x) { return (x.trace() / 3.0) * Mat3::Identity(); }

}  // namespace

TEST(Basis, ThreeDimensionalElements) {
  const auto& b = make_basis<3>();
  ASSERT_EQ(b.elements.size(), 6u);
  EXPECT_LT((b.elements[0].matrix() - Mat3::Identity() / std::sqrt(3.0)).norm(), 1e-15);
  for (int k = 1; k < 6; ++k) EXPECT_NEAR(b.elements[k].trace(), 0.0, 1e-15);
}

TEST(Basis, GramMatrixIsIdentity) {
  const auto& b3 = make_basis<3>();
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      EXPECT_NEAR(b3.elements[i].matrix().cwiseProduct(b3.elements[j].matrix()).sum(), i == j ? 1.0 : 0.0, 1e-14);
  const auto& b2 = make_basis<2>();
  ASSERT_EQ(b2.elements.size(), 3u);
  EXPECT_LT((b2.elements[0].matrix() - Eigen::Matrix2d::Identity() / std::sqrt(2.0)).norm(), 1e-15);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      EXPECT_NEAR(ddot(b2.elements[i], b2.elements[j]), i == j ? 1.0 : 0.0, 1e-14);
}

TEST(Basis, CoordinatesAreAnIsometry) {
  Rng rng(11);
  const auto& b = make_basis<3>();
  for (int t = 0; t < kCases; ++t) {
    const SymMat3 x = SymMat3::symmetrized(random_symmetric(rng));
    const auto c = b.to_coords(x);
    EXPECT_NEAR(c.squaredNorm(), x.matrix().squaredNorm(), 1e-12);
    EXPECT_LT((b.from_coords(c).matrix() - x.matrix()).norm(), 1e-13);
  }
}

TEST(SymMatType, RejectsNonSymmetricInput) {
  Mat3 m = Mat3::Identity();
  m(0, 1) = 1.0;
  EXPECT_THROW(SymMat3::from_matrix(m), ValidationError);
  const SymMat3 s = SymMat3::symmetrized(m);
  EXPECT_EQ(s(0, 1), s(1, 0));
}

TEST(LambdaProject, Examples) {
  const SymMat3 i = SymMat3::identity();
  EXPECT_LT((lambda_project(i, 1).matrix() - Mat3::Identity()).norm(), 1e-15);
  EXPECT_LT(lambda_project(i, 2).matrix().norm(), 1e-15);
  EXPECT_LT(lambda_project(SymMat3::diag(Vec3(1, -1, 0)), 1).matrix().norm(), 1e-15);
  EXPECT_THROW(lambda_project(i, 3), ValidationError);
}

// Projector algebra on random symmetric matrices, both as matrix maps and as
// coordinate tensors.
TEST(LambdaProject, ProjectorIdentitiesProperty) {
  Rng rng(12);
  const Tensor4<3> l1 = Tensor4<3>::lambda1(), l2 = Tensor4<3>::lambda2();
  EXPECT_LT((l1 * l1 - l1).coeffs().norm(), 1e-15);
  EXPECT_LT((l2 * l2 - l2).coeffs().norm(), 1e-15);
  EXPECT_LT((l1 * l2).coeffs().norm(), 1e-15);
  for (int t = 0; t < kCases; ++t) {
    const SymMat3 x = SymMat3::symmetrized(random_symmetric(rng));
    const SymMat3 p1 = lambda_project(x, 1), p2 = lambda_project(x, 2);
    EXPECT_LT((p1.matrix() - hydro_part(x.matrix())).norm(), 1e-13);
    EXPECT_LT((lambda_project(p1, 1).matrix() - p1.matrix()).norm(), 1e-13);
    EXPECT_LT((lambda_project(p2, 2).matrix() - p2.matrix()).norm(), 1e-13);
    EXPECT_LT(lambda_project(p2, 1).matrix().norm(), 1e-13);
    EXPECT_LT(lambda_project(p1, 2).matrix().norm(), 1e-13);
    EXPECT_LT((l1.apply(x).matrix() - p1.matrix()).norm(), 1e-13);
    EXPECT_LT((l2.apply(x).matrix() - p2.matrix()).norm(), 1e-13);
  }
}

TEST(TensorTrace, Examples) {
  EXPECT_NEAR(tensor_trace(Tensor4<3>::identity()), 6.0, 1e-15);
  EXPECT_NEAR(tensor_trace(Tensor4<3>::lambda1()), 1.0, 1e-15);
  // d kappa_conv Lambda_1 + 2 mu Lambda_2 with kappa_conv = 5/3: 5 + 5 * 2.
  EXPECT_NEAR(tensor_trace(iso_tensor<3>(1.0, 1.0)), 15.0, 1e-13);
}

TEST(TensorTrace, BasisInvarianceAndBlockSplitProperty) {
  Rng rng(13);
  const auto& basis = make_basis<3>();
  for (int t = 0; t < kCases; ++t) {
    Tensor4<3>::Matrix m = Tensor4<3>::Matrix::NullaryExpr([&](Eigen::Index, Eigen::Index) { return rng.normal(); });
    const Tensor4<3> tt(0.5 * (m + m.transpose()));
    // Rotated basis Q B_k Q^T is orthonormal as well.
    const Mat3 q = random_rotation(rng);
    std::array<SymMat3, 6> rot;
    for (int k = 0; k < 6; ++k) rot[k] = basis.elements[k].rotated(q);
    EXPECT_NEAR(tensor_trace(tt, rot), tensor_trace(tt), 1e-11);
    const Tensor4<3> l1 = Tensor4<3>::lambda1(), l2 = Tensor4<3>::lambda2();
    EXPECT_NEAR(tensor_trace(Tensor4<3>(l1 * tt * l1)) + tensor_trace(Tensor4<3>(l2 * tt * l2)), tensor_trace(tt),
                1e-12);
  }
}

TEST(IsoTensor, Examples) {
  const Tensor4<3> c0 = iso_tensor<3>(1.0, 1.0);
  EXPECT_LT((c0.apply(SymMat3::identity()).matrix() - 5.0 * Mat3::Identity()).norm(), 1e-13);
  const SymMat3 x = SymMat3::diag(Vec3(1.0, -3.0, 2.0));
  EXPECT_LT((c0.apply(x).matrix() - 2.0 * x.matrix()).norm(), 1e-13);
  const MaterialPair p(1.0, 1.0, 2.0, 2.0);
  EXPECT_LT((contrast_tensor<3>(p).apply(SymMat3::identity()).matrix() - 5.0 * Mat3::Identity()).norm(), 1e-13);
  EXPECT_THROW(iso_tensor<3>(1.0, -1.0), ValidationError);
  EXPECT_THROW(iso_tensor<3>(-1.0, 1.0), ValidationError);
}

TEST(IsoTensor, MatchesLameFormulaProperty) {
  Rng rng(14);
  for (int t = 0; t < kCases; ++t) {
    const double mu = rng.uniform(0.1, 4.0), lambda = rng.uniform(-0.6 * mu, 4.0);
    const Mat3 x = random_symmetric(rng);
    const Mat3 oracle = lambda * x.trace() * Mat3::Identity() + 2.0 * mu * x;
    EXPECT_LT((iso_tensor<3>(lambda, mu).apply(SymMat3::symmetrized(x)).matrix() - oracle).norm(), 1e-12);
    const auto iso = iso_tensor<3>(lambda, mu).coeffs();
    // Lambda_2 block is 2 mu times the identity, coupling is zero.
    EXPECT_LT((iso.bottomRightCorner<5, 5>() - 2.0 * mu * Eigen::Matrix<double, 5, 5>::Identity()).norm(), 1e-13);
    EXPECT_LT(iso.col(0).tail<5>().norm(), 1e-13);
  }
}

TEST(Bstar, Examples) {
  const MaterialPair p(1.0, 1.0, 2.0, 2.0);
  EXPECT_LT((bstar(SymMat3::identity(), p).matrix() - 5.0 * Mat3::Identity()).norm(), 1e-14);
  const SymMat3 dev = SymMat3::diag(Vec3(2.0, -1.0, -1.0));
  EXPECT_LT((bstar(dev, p).matrix() - 2.0 * dev.matrix()).norm(), 1e-14);
  EXPECT_LT(bstar(SymMat3::zero(), p).matrix().norm(), 1e-15);
}

TEST(Bstar, PositiveForStifferInclusionProperty) {
  Rng rng(15);
  for (int t = 0; t < kCases; ++t) {
    const MaterialPair p = random_pair(rng, true);
    const SymMat3 b = SymMat3::symmetrized(random_symmetric(rng));
    const Mat3 oracle = (p.lambda_t - p.lambda) * b.trace() * Mat3::Identity() + 2.0 * (p.mu_t - p.mu) * b.matrix();
    EXPECT_LT((bstar(b, p).matrix() - oracle).norm(), 1e-12);
    EXPECT_LT((contrast_tensor<3>(p).apply(b).matrix() - oracle).norm(), 1e-12);
    EXPECT_GT(ddot(bstar(b, p), b), 0.0);
  }
}

TEST(MaterialPairType, AlphaConstants) {
  const MaterialPair p(1.0, 1.0, 2.0, 2.0);
  EXPECT_NEAR(p.alpha1(), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p.alpha2(), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(p.alpha(), 1.5, 1e-15);
  EXPECT_NEAR(p.kappa_conv(), 5.0 / 3.0, 1e-15);
  EXPECT_NEAR(p.kappa_convex(), 5.0, 1e-15);
}

TEST(MaterialPairType, AlphaExceedsOneProperty) {
  Rng rng(16);
  for (int t = 0; t < kCases; ++t) {
    const MaterialPair p = random_pair(rng, t % 2 == 0);
    EXPECT_GT(p.alpha(), 1.0);
    EXPECT_TRUE(p.well_ordered());
    // alpha = (lambda + 2 mu) / (lambda + mu) in closed form.
    EXPECT_NEAR(p.alpha(), (p.lambda + 2.0 * p.mu) / (p.lambda + p.mu), 1e-12 * p.alpha());
  }
}

TEST(MaterialPairType, ConvexityViolationsThrow) {
  EXPECT_THROW(MaterialPair(1.0, 0.0, 2.0, 2.0), ValidationError);
  EXPECT_THROW(MaterialPair(-1.0, 1.0, 2.0, 2.0), ValidationError);
  EXPECT_THROW(MaterialPair(1.0, 1.0, 2.0, -2.0), ValidationError);
  EXPECT_THROW(MaterialPair(1.0, 1.0, 2.0, 2.0, 4), ValidationError);
  EXPECT_THROW(MaterialPair(1.0, 1.0, 0.5, 2.0).require_well_ordered(), ValidationError);
}

TEST(SymmetricInverseTest, InvertsAndReportsCondition) {
  const auto inv = symmetric_inverse(Tensor4<3>::iso(5.0, 2.0));
  EXPECT_LT((inv.inverse.coeffs() - Tensor4<3>::iso(0.2, 0.5).coeffs()).norm(), 1e-14);
  EXPECT_NEAR(inv.condition_number, 2.5, 1e-13);
  EXPECT_THROW(symmetric_inverse(Tensor4<3>::lambda1()), NumericalError);
}

TEST(EigenClassTest, Examples) {
  EXPECT_EQ(eigen_class(SymMat3::diag(Vec3(2, 2, 2))), EigenClass::AllEqual);
  EXPECT_EQ(eigen_class(SymMat3::diag(Vec3(1, 2, 3))), EigenClass::AllDistinct);
  EXPECT_EQ(eigen_class(SymMat3::diag(Vec3(1, 1, 3))), EigenClass::Double);
  EXPECT_STREQ(to_string(EigenClass::Double), "DOUBLE");
}

TEST(Pencil, DoubleEigenvalueFamilyExample) {
  const PencilReport r = pencil_check(diag3(1, 1, 4), diag3(0, 0, 1));
  ASSERT_TRUE(r.always_multiple);
  ASSERT_TRUE(r.diagonalizer.has_value());
  const Mat3 q = *r.diagonalizer;
  for (const Mat3& b : {diag3(1, 1, 4), diag3(0, 0, 1)}) {
    Mat3 d = q * b * q.transpose();
    d.diagonal().setZero();
    EXPECT_LT(d.cwiseAbs().maxCoeff(), 1e-10);
  }
  for (double c : r.discriminant) EXPECT_NEAR(c, 0.0, 1e-12);
}

TEST(Pencil, SeparableExample) {
  Mat3 b1 = Mat3::Zero();
  b1(0, 1) = b1(1, 0) = 1.0;
  const PencilReport r = pencil_check(b1, diag3(0, 0, 1));
  EXPECT_FALSE(r.always_multiple);
  ASSERT_TRUE(r.witness_t.has_value());
  // Spectrum {1, -1, t}: multiple only at t = +-1.
  EXPECT_GT(std::abs(std::abs(*r.witness_t) - 1.0), 1e-8);
  // Discriminant is (t - 1)^2 (t + 1)^2 * 4: roots at +-1.
  const Poly g(r.discriminant);
  EXPECT_NEAR(g(1.0), 0.0, 1e-12);
  EXPECT_NEAR(g(-1.0), 0.0, 1e-12);
  EXPECT_GT(std::abs(g(0.0)), 1.0);
}

TEST(Pencil, ScalarSecondMatrix) {
  EXPECT_TRUE(pencil_check(diag3(1, 1, 2), 3.0 * Mat3::Identity()).always_multiple);
  EXPECT_FALSE(pencil_check(diag3(1, 2, 3), 3.0 * Mat3::Identity()).always_multiple);
  const PencilReport r = pencil_check(diag3(5, 5, 5), 3.0 * Mat3::Identity());
  EXPECT_TRUE(r.always_multiple);
  ASSERT_TRUE(r.diagonalizer.has_value());
}

TEST(Pencil, RejectsNonSymmetricInput) {
  Mat3 b = Mat3::Identity();
  b(0, 2) = 1.0;
  EXPECT_THROW(pencil_check(b, Mat3::Identity()), ValidationError);
}

// Q diag(a, a, c) Q^T with Q diag(b, b, e) Q^T shares a double eigenspace for
// every t.
TEST(Pencil, SharedDoubleEigenspaceFamilyProperty) {
  Rng rng(17);
  for (int t = 0; t < kCases; ++t) {
    const Mat3 q = random_rotation(rng);
    const double a = rng.normal(), c = a + rng.uniform(0.5, 3.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    const double b = rng.normal(), e = b + rng.uniform(0.5, 3.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    const Mat3 b1 = q * diag3(a, a, c) * q.transpose(), b2 = q * diag3(b, b, e) * q.transpose();
    const PencilReport r = pencil_check(0.5 * (b1 + b1.transpose()), 0.5 * (b2 + b2.transpose()));
    ASSERT_TRUE(r.always_multiple) << "case " << t;
    ASSERT_TRUE(r.diagonalizer.has_value());
    const Mat3 u = *r.diagonalizer;
    EXPECT_LT((u * u.transpose() - Mat3::Identity()).norm(), 1e-10);
    for (const Mat3* m : {&b1, &b2}) {
      Mat3 d = u * *m * u.transpose();
      d.diagonal().setZero();
      EXPECT_LT(d.cwiseAbs().maxCoeff(), 1e-10) << "case " << t;
    }
  }
}

TEST(Pencil, IndependentRandomPairsProperty) {
  Rng rng(18);
  for (int t = 0; t < kCases; ++t) {
    const Mat3 b1 = random_symmetric(rng), b2 = random_symmetric(rng);
    const PencilReport r = pencil_check(b1, b2);
    ASSERT_FALSE(r.always_multiple) << "case " << t;
    ASSERT_TRUE(r.witness_t.has_value());
    const Vec3 ev = Eigen::SelfAdjointEigenSolver<Mat3>(b1 + *r.witness_t * b2).eigenvalues();
    EXPECT_GT(std::min(ev(1) - ev(0), ev(2) - ev(1)), 1e-8);
    // The discriminant equals prod (l_i - l_j)^2 at the witness.
    const double oracle = std::pow((ev(1) - ev(0)) * (ev(2) - ev(1)) * (ev(2) - ev(0)), 2);
    EXPECT_NEAR(Poly(r.discriminant)(*r.witness_t), oracle, 1e-8 * std::max(1.0, oracle));
  }
}
