#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "eshelby/green_operator.hpp"
#include "eshelby/variational.hpp"
#include "test_support.hpp"

using namespace eshelby;
using testing_support::random_pair;
using testing_support::random_symmetric;

namespace {

double max_diff(const Array4& a, const Array4& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) d = std::max(d, std::abs(a.v[i] - b.v[i]));
  return d;
}

double max_abs(const Array4& a) {
  double d = 0.0;
  for (double x : a.v) d = std::max(d, std::abs(x));
  return d;
}

// d^4 |z| by nested central differences of |z| itself.
double fd4_abs(const Vec3& z, int i, int j, int k, int l, double h) {
  auto e = [](int a) { return Vec3::Unit(a); };
  std::function<double(const Vec3&, int)> d = [&](const Vec3& x, int depth) -> double {
    if (depth == 0) return x.norm();
    const int axis = depth == 4 ? i : depth == 3 ? j : depth == 2 ? k : l;
    return (d(x + h * e(axis), depth - 1) - d(x - h * e(axis), depth - 1)) / (2.0 * h);
  };
  return d(z, 4);
}

// Fourier symbol of the strain response to a polarization for an isotropic
// matrix: E = -sym(u (x) N (P u)), N = (mu I + (lambda + mu) u u)^-1.
Mat3 symbol_oracle(const Vec3& u, const Mat3& p, const MaterialPair& pair) {
  const Mat3 n = (pair.mu * Mat3::Identity() + (pair.lambda + pair.mu) * u * u.transpose()).inverse();
  const Vec3 v = n * (p * u);
  const Mat3 uv = u * v.transpose();
  return -0.5 * (uv + uv.transpose());
}

}  // namespace

TEST(InfluenceArray, ReducedMatchesDirectAwayFromOrigin) {
  for (const Offset& m : {Offset{2, 0, 0}, Offset{2, 1, 0}, Offset{2, 2, 1}, Offset{3, 1, 1}, Offset{2, -2, 2}}) {
    const Array4 r = green::n4_reduced(m, 24), d = green::n4_direct(m, 16);
    EXPECT_LT(max_diff(r, d), 1e-8 * max_abs(d)) << m[0] << m[1] << m[2];
  }
}

TEST(InfluenceArray, FarFieldApproachesPointKernel) {
  const Offset m{11, 5, -3};
  const Vec3 z(11, 5, -3);
  const Array4 n4 = green::n4_canonical(m);
  double worst = 0.0, scale = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) {
          const double point = fd4_abs(z, i, j, k, l, 0.05) / (4.0 * std::numbers::pi);
          worst = std::max(worst, std::abs(n4(i, j, k, l) - point));
          scale = std::max(scale, std::abs(point));
        }
  EXPECT_LT(worst, 1e-2 * scale);
}

// sum_ij N4_iijj(m) = (1/4pi) int tau Delta^2 |z + m| = -2 tau(-m).
TEST(InfluenceArray, BilaplacianTrace) {
  for (int a = -3; a <= 3; ++a)
    for (int b = -3; b <= 3; ++b)
      for (int c = -3; c <= 3; ++c) {
        const Array4 n4 = green::influence_table(3)->operator()({a, b, c});
        double t = 0.0;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) t += n4(i, i, j, j);
        EXPECT_NEAR(t, (a == 0 && b == 0 && c == 0) ? -2.0 : 0.0, 1e-8) << a << b << c;
        EXPECT_NEAR(green::trace_pair(n4).trace(), t, 1e-14);
      }
}

TEST(InfluenceArray, TableMatchesCanonicalUnderSignedPermutations) {
  const auto table = green::influence_table(4);
  for (const Offset& m : {Offset{0, 0, 0}, Offset{1, 0, 0}, Offset{-1, 2, 0}, Offset{3, -1, 4}, Offset{0, -4, 2}}) {
    const Array4 t = (*table)(m);
    const Array4 direct = green::n4_canonical(m);
    EXPECT_LT(max_diff(t, direct), 1e-9 * std::max(1.0, max_abs(direct))) << m[0] << m[1] << m[2];
    // Central symmetry: tau and d^4|z| are both even.
    EXPECT_LT(max_diff(t, (*table)({-m[0], -m[1], -m[2]})), 1e-14);
  }
  EXPECT_THROW((*table)({5, 0, 0}), std::exception);
}

TEST(InfluenceMatrix, SymmetricAndSelfTermDefinite) {
  const MaterialPair p(1.0, 1.0, 2.0, 2.0);
  GreenOperator g(4, p);
  const auto& s = g.self().coeffs();
  EXPECT_LT((s - s.transpose()).norm(), 1e-14);
  // The self influence is a (cubic) contraction: negative definite.
  Eigen::SelfAdjointEigenSolver<Tensor4<3>::Matrix> es(s);
  EXPECT_LT(es.eigenvalues().maxCoeff(), 0.0);
  // Cubic symmetry: the hydrostatic basis element is an eigenvector.
  Coords6 e0 = Coords6::Unit(0);
  const Coords6 img = s * e0;
  EXPECT_LT((img - img(0) * e0).norm(), 1e-12);
}

TEST(FourierSymbol, MatchesIsotropicOracleProperty) {
  Rng rng(60);
  const auto& basis = make_basis<3>();
  for (int t = 0; t < 200; ++t) {
    const MaterialPair p = random_pair(rng, t % 2 == 0);
    const Vec3 k(rng.normal(), rng.normal(), rng.normal());
    const Mat3 pol = random_symmetric(rng);
    const Coords6 out = fourier_symbol(k, p) * basis.to_coords(SymMat3::from_matrix(pol));
    const Mat3 oracle = symbol_oracle(k.normalized(), pol, p);
    EXPECT_LT((basis.from_coords(out).matrix() - oracle).norm(), 1e-11 * pol.norm()) << "case " << t;
  }
}

TEST(FourierSymbol, NegdefIdentityProperty) {
  Rng rng(61);
  for (int t = 0; t < 200; ++t) {
    const MaterialPair p = random_pair(rng, t % 2 == 0);
    const NegdefCheck chk = negdef_identity(p, 4, 1000 + t);
    EXPECT_LT(chk.relative_residual, 1e-8) << "case " << t;
    EXPECT_LT(chk.energy, 0.0);
  }
  EXPECT_THROW(negdef_identity(MaterialPair(1.0, 1.0, 2.0, 2.0), 1, 1), ValidationError);
}

TEST(GreenOperator, FftConvolutionMatchesDenseSum) {
  Rng rng(62);
  const MaterialPair p(0.7, 1.3, 2.0, 2.0);
  for (int n : {3, 5}) {
    GreenOperator g(n, p);
    std::vector<Coords6> q(n * n * n), fast, slow;
    for (auto& c : q)
      for (int l = 0; l < 6; ++l) c(l) = rng.normal();
    g.convolve(q, fast);
    g.convolve_dense(q, slow);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      err = std::max(err, (fast[i] - slow[i]).norm());
      scale = std::max(scale, slow[i].norm());
    }
    EXPECT_LT(err, 1e-12 * scale) << "n = " << n;
  }
  GreenOperator g(3, p);
  std::vector<Coords6> bad(5), out;
  EXPECT_THROW(g.convolve(bad, out), ValidationError);
}

TEST(GreenOperator, ConvolutionIsSymmetric) {
  Rng rng(63);
  const MaterialPair p(1.0, 1.0, 2.0, 2.0);
  GreenOperator g(4, p);
  std::vector<Coords6> a(64), b(64), ga, gb;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (int l = 0; l < 6; ++l) {
      a[i](l) = rng.normal();
      b[i](l) = rng.normal();
    }
  g.convolve(a, ga);
  g.convolve(b, gb);
  double ab = 0.0, ba = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += b[i].dot(ga[i]);
    ba += a[i].dot(gb[i]);
  }
  EXPECT_NEAR(ab, ba, 1e-11 * std::abs(ab));
}
