#pragma once

// Interior strain of an inclusion under uniform remote loading A.
//
// With B* = (C1 - C0) B, the single layer of B* n equals
//   alpha2 [alpha B* grad w - grad w^{B*}]
// and the displacement inside is u = A x + S[B* n]. Inside an ellipsoid
// grad w = W x and d^3 p = T x, so B - A = F(B*) with
//   F(P) = alpha2 [alpha sym(P W) - T : P],
// a 6 x 6 linear system. For other shapes the same relation is tested in the
// least-squares sense over interior samples.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "eshelby/error.hpp"
#include "eshelby/geometry.hpp"
#include "eshelby/parallel.hpp"
#include "eshelby/potentials.hpp"
#include "eshelby/tensor_core.hpp"

namespace eshelby {

/// Fourth-order array with index access t(i, j, k, l).
struct Array4 {
  std::array<double, 81> v{};
  double& operator()(int i, int j, int k, int l) { return v[((i * 3 + j) * 3 + k) * 3 + l]; }
  double operator()(int i, int j, int k, int l) const { return v[((i * 3 + j) * 3 + k) * 3 + l]; }

  /// (T : P)_kl = sum_ij T_ijkl P_ij
  Mat3 contract(const Mat3& p) const {
    Mat3 out = Mat3::Zero();
    for (int k = 0; k < 3; ++k)
      for (int l = 0; l < 3; ++l)
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) out(k, l) += (*this)(i, j, k, l) * p(i, j);
    return out;
  }
  /// Average over all 24 index permutations.
  Array4 fully_symmetrized() const {
    Array4 out;
    int idx[4];
    for (int a = 0; a < 81; ++a) {
      idx[0] = a / 27;
      idx[1] = (a / 9) % 3;
      idx[2] = (a / 3) % 3;
      idx[3] = a % 3;
      std::array<int, 4> perm = {0, 1, 2, 3};
      double acc = 0.0;
      int count = 0;
      do {
        acc += (*this)(idx[perm[0]], idx[perm[1]], idx[perm[2]], idx[perm[3]]);
        ++count;
      } while (std::next_permutation(perm.begin(), perm.end()));
      out.v[a] = acc / count;
    }
    return out;
  }
  Array4 rotated(const Mat3& q) const {
    Array4 out;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k)
          for (int l = 0; l < 3; ++l) {
            double acc = 0.0;
            for (int a = 0; a < 3; ++a)
              for (int b = 0; b < 3; ++b)
                for (int c = 0; c < 3; ++c)
                  for (int d = 0; d < 3; ++d) acc += q(i, a) * q(j, b) * q(k, c) * q(l, d) * (*this)(a, b, c, d);
            out(i, j, k, l) = acc;
          }
    return out;
  }
};

/// Constant Hessian of w and constant fourth derivative of p inside an
/// ellipsoid.
struct EllipsoidMoments {
  Mat3 W = Mat3::Zero();
  Array4 T;
  /// Relative residuals of the linear fits (zero for the analytic route).
  double fit_residual_W = 0.0;
  double fit_residual_T = 0.0;
  std::string method;
};

/// W = -2 N2, T = -2 N4 with N = (abc/4pi) int_{S^2} xi...xi / |diag(a,b,c) xi|^3.
inline EllipsoidMoments analytic_ellipsoid_moments(const Shape& shape) {
  const Vec3 ax = shape.semi_axes();
  const int nt = 96, np = 192;
  const auto gl = quad::gauss_legendre(nt, -1.0, 1.0);
  Mat3 n2 = Mat3::Zero();
  Array4 n4;
  for (int a = 0; a < nt; ++a) {
    const double ct = gl.nodes[a], st = std::sqrt(1.0 - ct * ct);
    for (int b = 0; b < np; ++b) {
      const double ph = 2.0 * std::numbers::pi * b / np;
      const Vec3 xi(st * std::cos(ph), st * std::sin(ph), ct);
      const double r = xi.cwiseProduct(ax).norm();
      const double wgt = gl.weights[a] * (2.0 * std::numbers::pi / np) / (r * r * r);
      n2 += wgt * xi * xi.transpose();
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          for (int k = 0; k < 3; ++k)
            for (int l = 0; l < 3; ++l) n4(i, j, k, l) += wgt * xi(i) * xi(j) * xi(k) * xi(l);
    }
  }
  const double c = -2.0 * ax.prod() * inv_four_pi;
  EllipsoidMoments m;
  m.W = shape.rotation() * (c * n2) * shape.rotation().transpose();
  for (double& v : n4.v) v *= c;
  m.T = n4.rotated(shape.rotation());
  m.method = "analytic";
  return m;
}

/// Least-squares fits of grad w = W x + c and d_k d_i d_j p = T_ijkl x_l + c_ijk
/// over interior samples. Throws NumericalError if a relative fit residual
/// exceeds max_residual (quadrature under-resolution).
inline EllipsoidMoments fitted_ellipsoid_moments(const ShapePotentials& pot, const std::vector<Vec3>& samples,
                                                 double max_residual = 1e-6) {
  if (samples.size() < 20) throw ValidationError("ellipsoid moments need at least 20 interior samples");
  const auto n = static_cast<Eigen::Index>(samples.size());
  std::vector<Sym3> d3(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) { d3[i] = pot.third_p(samples[i]); });
  Eigen::MatrixXd a(n, 4);
  for (Eigen::Index s = 0; s < n; ++s) a.row(s) << samples[s](0), samples[s](1), samples[s](2), 1.0;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < 4) throw ValidationError("ellipsoid moments: degenerate sample set");

  EllipsoidMoments m;
  m.method = "quadrature";
  double res_w = 0.0, norm_w = 0.0, res_t = 0.0, norm_t = 0.0;
  Eigen::VectorXd rhs(n);
  for (int k = 0; k < 3; ++k) {
    for (Eigen::Index s = 0; s < n; ++s) rhs(s) = grad_w_from(d3[s])(k);
    const Eigen::Vector4d c = qr.solve(rhs);
    m.W.row(k) = c.head<3>().transpose();
    res_w += (a * c - rhs).squaredNorm();
    norm_w += rhs.squaredNorm();
  }
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j)
      for (int k = j; k < 3; ++k) {
        for (Eigen::Index s = 0; s < n; ++s) rhs(s) = d3[s][i][j][k];
        const Eigen::Vector4d c = qr.solve(rhs);
        res_t += (a * c - rhs).squaredNorm();
        norm_t += rhs.squaredNorm();
        for (int l = 0; l < 3; ++l) {
          // write all permutations of (i, j, k); l is the differentiation index
          const int id[3] = {i, j, k};
          std::array<int, 3> perm = {0, 1, 2};
          do {
            m.T(id[perm[0]], id[perm[1]], id[perm[2]], l) = c(l);
          } while (std::next_permutation(perm.begin(), perm.end()));
        }
      }
  m.W = 0.5 * (m.W + m.W.transpose());
  m.T = m.T.fully_symmetrized();
  m.fit_residual_W = norm_w > 0.0 ? std::sqrt(res_w / norm_w) : 0.0;
  m.fit_residual_T = norm_t > 0.0 ? std::sqrt(res_t / norm_t) : 0.0;
  if (m.fit_residual_W > max_residual || m.fit_residual_T > max_residual)
    throw NumericalError("ellipsoid moment fit residual " +
                         format_number(std::max(m.fit_residual_W, m.fit_residual_T)) + " exceeds " +
                         format_number(max_residual) + " (quadrature under-resolved or shape not an ellipsoid)");
  return m;
}

/// Interior strain and rigid motion u = (B + Omega) x + v.
struct StrainSolution {
  Mat3 B = Mat3::Zero();
  /// Skew part of the interior displacement gradient.
  Mat3 omega = Mat3::Zero();
  Vec3 v = Vec3::Zero();
  /// Normalized RMS defect of the linear relation (see uniformity_residual).
  double residual = 0.0;
  /// Condition number of the solved system.
  double condition = 1.0;
};

/// F(P) = alpha2 [alpha sym(P W) - T : P] on symmetric matrices.
inline Tensor4<3> strain_operator(const EllipsoidMoments& m, const MaterialPair& pair) {
  const double a2 = pair.alpha2(), al = pair.alpha();
  return Tensor4<3>::from_map([&](const SymMat3& p) {
    const Mat3 pw = p.matrix() * m.W;
    return SymMat3::symmetrized(a2 * (al * 0.5 * (pw + pw.transpose()) - m.T.contract(p.matrix())));
  });
}

/// Solves B - A = F((C1 - C0) B) for the interior strain of an ellipsoid.
inline StrainSolution interior_strain_ellipsoid(const Mat3& a, const EllipsoidMoments& m, const MaterialPair& pair) {
  pair.validate();
  const Tensor4<3> k = Tensor4<3>::identity() - strain_operator(m, pair) * contrast_tensor<3>(pair);
  Eigen::JacobiSVD<Tensor4<3>::Matrix> svd(k.coeffs(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto sv = svd.singularValues();
  StrainSolution sol;
  sol.condition = sv(0) / sv(5);
  if (!(sv(5) > 1e-12 * sv(0))) throw NumericalError("singular strain system (condition " + format_number(sol.condition) + ")");
  const auto& basis = make_basis<3>();
  const OrthoBasis<3>::Coords coords = svd.solve(basis.to_coords(SymMat3::from_matrix(a)));
  sol.B = basis.from_coords(coords).matrix();
  return sol;
}

namespace detail {

struct SampleFields {
  std::vector<Vec3> points;
  std::vector<Vec3> grad_w;
  std::vector<Sym3> d3;
};

inline SampleFields evaluate_fields(const ShapePotentials& pot, const std::vector<Vec3>& pts) {
  SampleFields f;
  f.points = pts;
  f.grad_w.resize(pts.size());
  f.d3.resize(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    f.d3[i] = pot.third_p(pts[i]);
    f.grad_w[i] = grad_w_from(f.d3[i]);
  });
  return f;
}

/// S[P n](x) = alpha2 [alpha P grad w - grad w^P] from precomputed fields.
inline Vec3 single_layer_of(const Mat3& p, const Vec3& gw, const Sym3& d3, const MaterialPair& pair) {
  return pair.alpha2() * (pair.alpha() * (p * gw) - grad_wB_from(p, d3));
}

inline double rms_spread(const std::vector<Vec3>& pts) {
  Vec3 mean = Vec3::Zero();
  for (const auto& x : pts) mean += x;
  mean /= static_cast<double>(pts.size());
  double acc = 0.0;
  for (const auto& x : pts) acc += (x - mean).squaredNorm();
  return std::sqrt(acc / pts.size());
}

inline Mat3 skew(const Vec3& w) {
  Mat3 s;
  s << 0.0, -w(2), w(1), w(2), 0.0, -w(0), -w(1), w(0), 0.0;
  return s;
}

/// RMS over samples of |S[B* n](x) - (B - A) x - Omega x - v|, normalized by
/// ||A|| * RMS|x - mean|.
inline double relation_defect(const SampleFields& f, const Mat3& a, const StrainSolution& s, const MaterialPair& pair) {
  const Mat3 bs = bstar(SymMat3::symmetrized(s.B), pair).matrix();
  double acc = 0.0;
  for (std::size_t i = 0; i < f.points.size(); ++i) {
    const Vec3 g = single_layer_of(bs, f.grad_w[i], f.d3[i], pair) - (s.B - a + s.omega) * f.points[i] - s.v;
    acc += g.squaredNorm();
  }
  const double scale = a.norm() * rms_spread(f.points);
  return std::sqrt(acc / f.points.size()) / (scale > 0.0 ? scale : 1.0);
}

}  // namespace detail

/// Least-squares (B, Omega, v) for S[B* n](x) = (B - A) x + Omega x + v over
/// `samples`; the returned residual is re-evaluated on `fresh` samples with
/// the fitted values held fixed.
inline StrainSolution uniformity_residual(const ShapePotentials& pot, const Mat3& a, const MaterialPair& pair,
                                          const std::vector<Vec3>& samples, const std::vector<Vec3>& fresh) {
  pair.validate();
  if (samples.size() < 60) throw ValidationError("uniformity_residual needs at least 60 interior samples");
  const SymMat3 as = SymMat3::from_matrix(a);
  const auto f = detail::evaluate_fields(pot, samples);
  const auto& basis = make_basis<3>();
  const auto n = static_cast<Eigen::Index>(samples.size());
  // Unknowns: 6 strain coordinates, 3 rotation components, 3 shift components.
  Eigen::MatrixXd m(3 * n, 12);
  Eigen::VectorXd rhs(3 * n);
  for (Eigen::Index s = 0; s < n; ++s) {
    const Vec3& x = f.points[s];
    for (int c = 0; c < 6; ++c) {
      const Mat3 e = basis.elements[c].matrix();
      const Mat3 es = bstar(basis.elements[c], pair).matrix();
      m.block<3, 1>(3 * s, c) = detail::single_layer_of(es, f.grad_w[s], f.d3[s], pair) - e * x;
    }
    for (int c = 0; c < 3; ++c) {
      Vec3 unit = Vec3::Zero();
      unit(c) = 1.0;
      m.block<3, 1>(3 * s, 6 + c) = -(detail::skew(unit) * x);
      m.block<3, 1>(3 * s, 9 + c) = -unit;
    }
    rhs.segment<3>(3 * s) = -(a * x);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  qr.setThreshold(1e-12);
  if (qr.rank() < 12) throw NumericalError("uniformity_residual: rank-deficient least-squares system");
  const Eigen::VectorXd sol = qr.solve(rhs);
  StrainSolution out;
  Eigen::Matrix<double, 6, 1> coords = sol.head<6>();
  out.B = basis.from_coords(coords).matrix();
  out.omega = detail::skew(sol.segment<3>(6));
  out.v = sol.tail<3>();
  {
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
    out.condition = sv(0) / sv(sv.size() - 1);
  }
  out.residual = detail::relation_defect(detail::evaluate_fields(pot, fresh), as.matrix(), out, pair);
  return out;
}

/// Defect of a given interior strain (e.g. from the 6 x 6 ellipsoid solve) at
/// samples, with the best rigid motion fitted.
inline StrainSolution with_rigid_fit(const ShapePotentials& pot, const Mat3& a, const Mat3& b, const MaterialPair& pair,
                                     const std::vector<Vec3>& samples) {
  const auto f = detail::evaluate_fields(pot, samples);
  const Mat3 bs = bstar(SymMat3::symmetrized(b), pair).matrix();
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd m(3 * n, 6);
  Eigen::VectorXd rhs(3 * n);
  for (Eigen::Index s = 0; s < n; ++s) {
    const Vec3& x = f.points[s];
    for (int c = 0; c < 3; ++c) {
      Vec3 unit = Vec3::Zero();
      unit(c) = 1.0;
      m.block<3, 1>(3 * s, c) = detail::skew(unit) * x;
      m.block<3, 1>(3 * s, 3 + c) = unit;
    }
    rhs.segment<3>(3 * s) = detail::single_layer_of(bs, f.grad_w[s], f.d3[s], pair) - (b - a) * x;
  }
  const Eigen::VectorXd sol = m.colPivHouseholderQr().solve(rhs);
  StrainSolution out;
  out.B = b;
  out.omega = detail::skew(sol.head<3>());
  out.v = sol.tail<3>();
  out.residual = detail::relation_defect(f, a, out, pair);
  return out;
}

}  // namespace eshelby
