#pragma once

// Algebra on the space of symmetric d x d matrices (d = 2, 3): symmetric
// matrices, the fixed orthonormal basis, symmetric 4-tensors stored as
// d* x d* matrices in that basis, isotropic materials, and the eigenvalue
// pencil test for pairs of symmetric 3 x 3 matrices.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "eshelby/error.hpp"
#include "eshelby/polynomial.hpp"

namespace eshelby {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Dimension of the space of symmetric D x D matrices.
template <int D>
inline constexpr int sym_dim = D * (D + 1) / 2;

inline void require_supported_dimension(int d) {
  if (d != 2 && d != 3) throw ValidationError("unsupported dimension " + std::to_string(d));
}

/// Symmetric D x D matrix. Entries are stored exactly symmetric.
template <int D>
class SymMat {
  static_assert(D == 2 || D == 3, "only d = 2, 3 are supported");

 public:
  using Matrix = Eigen::Matrix<double, D, D>;

  SymMat() : m_(Matrix::Zero()) {}

  /// Symmetric part of m; no check.
  static SymMat symmetrized(const Matrix& m) {
    SymMat s;
    s.m_ = 0.5 * (m + m.transpose());
    return s;
  }

  /// Accepts m if it is symmetric to within 1e-12 relative, else throws.
  static SymMat from_matrix(const Matrix& m) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw ValidationError("matrix is not symmetric");
    return symmetrized(m);
  }

  static SymMat identity() {
    SymMat s;
    s.m_.setIdentity();
    return s;
  }
  static SymMat zero() { return SymMat(); }
  static SymMat diag(const Eigen::Matrix<double, D, 1>& v) {
    SymMat s;
    s.m_ = v.asDiagonal();
    return s;
  }

  const Matrix& matrix() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }
  double trace() const { return m_.trace(); }
  double norm() const { return m_.norm(); }

  SymMat& operator+=(const SymMat& o) {
    m_ += o.m_;
    return *this;
  }
  SymMat& operator-=(const SymMat& o) {
    m_ -= o.m_;
    return *this;
  }
  SymMat& operator*=(double s) {
    m_ *= s;
    return *this;
  }
  friend SymMat operator+(SymMat a, const SymMat& b) { return a += b; }
  friend SymMat operator-(SymMat a, const SymMat& b) { return a -= b; }
  friend SymMat operator*(double s, SymMat a) { return a *= s; }
  friend SymMat operator*(SymMat a, double s) { return a *= s; }
  friend SymMat operator-(SymMat a) { return a *= -1.0; }

  /// Q X Q^T
  SymMat rotated(const Matrix& q) const { return symmetrized(q * m_ * q.transpose()); }

 private:
  Matrix m_;
};

using SymMat3 = SymMat<3>;

/// Contraction A : B.
template <int D>
double ddot(const SymMat<D>& a, const SymMat<D>& b) {
  return a.matrix().cwiseProduct(b.matrix()).sum();
}

/// Orthonormal basis of the symmetric matrices. Element 0 is I / sqrt(d),
/// the rest are trace-free.
template <int D>
struct OrthoBasis {
  static constexpr int size = sym_dim<D>;
  using Coords = Eigen::Matrix<double, size, 1>;

  std::array<SymMat<D>, size> elements;

  Coords to_coords(const SymMat<D>& x) const {
    Coords c;
    for (int k = 0; k < size; ++k) c(k) = ddot(elements[k], x);
    return c;
  }
  SymMat<D> from_coords(const Coords& c) const {
    SymMat<D> x;
    for (int k = 0; k < size; ++k) x += c(k) * elements[k];
    return x;
  }
};

/// The fixed basis used for every Tensor4 coordinate representation.
/// d = 3: I/sqrt3, (e1e1 - e2e2)/sqrt2, (e1e1 + e2e2 - 2 e3e3)/sqrt6,
/// sqrt2 sym(e_i e_j) for (i,j) = (1,2), (1,3), (2,3).
template <int D>
const OrthoBasis<D>& make_basis() {
  static_assert(D == 2 || D == 3, "only d = 2, 3 are supported");
  static const OrthoBasis<D> basis = [] {
    using M = typename SymMat<D>::Matrix;
    OrthoBasis<D> b;
    int k = 0;
    b.elements[k++] = SymMat<D>::symmetrized(M::Identity() / std::sqrt(double(D)));
    M m = M::Zero();
    m(0, 0) = 1.0;
    m(1, 1) = -1.0;
    b.elements[k++] = SymMat<D>::symmetrized(m / std::sqrt(2.0));
    if constexpr (D == 3) {
      m.setZero();
      m(0, 0) = 1.0;
      m(1, 1) = 1.0;
      m(2, 2) = -2.0;
      b.elements[k++] = SymMat<D>::symmetrized(m / std::sqrt(6.0));
    }
    for (int i = 0; i < D; ++i) {
      for (int j = i + 1; j < D; ++j) {
        m.setZero();
        m(i, j) = m(j, i) = 1.0 / std::sqrt(2.0);
        b.elements[k++] = SymMat<D>::symmetrized(m);
      }
    }
    return b;
  }();
  return basis;
}

/// Lambda_1(X) = (tr X / d) I for which = 1, Lambda_2(X) = X - Lambda_1(X) for
/// which = 2.
template <int D>
SymMat<D> lambda_project(const SymMat<D>& x, int which) {
  const SymMat<D> hydro = (x.trace() / D) * SymMat<D>::identity();
  if (which == 1) return hydro;
  if (which == 2) return x - hydro;
  throw ValidationError("lambda_project: projector index must be 1 or 2");
}

/// Symmetric linear map on the symmetric matrices, as a d* x d* matrix in
/// the make_basis<D>() coordinates: coeffs(k, l) = B_k : T(B_l).
template <int D>
class Tensor4 {
 public:
  static constexpr int N = sym_dim<D>;
  using Matrix = Eigen::Matrix<double, N, N>;

  Tensor4() : c_(Matrix::Zero()) {}
  explicit Tensor4(const Matrix& coeffs) : c_(coeffs) {}

  static Tensor4 identity() { return Tensor4(Matrix::Identity()); }
  /// Lambda_1 = (1/d) I (x) I: projector onto the first basis element.
  static Tensor4 lambda1() {
    Matrix m = Matrix::Zero();
    m(0, 0) = 1.0;
    return Tensor4(m);
  }
  static Tensor4 lambda2() { return identity() - lambda1(); }
  /// a Lambda_1 + b Lambda_2
  static Tensor4 iso(double a, double b) { return a * lambda1() + b * lambda2(); }

  /// Builds the coordinate matrix of an arbitrary linear map.
  template <class F>
  static Tensor4 from_map(F&& map) {
    const auto& basis = make_basis<D>();
    Matrix m;
    for (int l = 0; l < N; ++l) m.col(l) = basis.to_coords(map(basis.elements[l]));
    return Tensor4(m);
  }

  const Matrix& coeffs() const { return c_; }
  Matrix& coeffs() { return c_; }

  SymMat<D> apply(const SymMat<D>& x) const {
    const auto& basis = make_basis<D>();
    return basis.from_coords(c_ * basis.to_coords(x));
  }
  SymMat<D> operator()(const SymMat<D>& x) const { return apply(x); }

  friend Tensor4 operator+(const Tensor4& a, const Tensor4& b) { return Tensor4(a.c_ + b.c_); }
  friend Tensor4 operator-(const Tensor4& a, const Tensor4& b) { return Tensor4(a.c_ - b.c_); }
  friend Tensor4 operator*(double s, const Tensor4& a) { return Tensor4(s * a.c_); }
  /// Composition (a * b)(X) = a(b(X)).
  friend Tensor4 operator*(const Tensor4& a, const Tensor4& b) { return Tensor4(a.c_ * b.c_); }

  Tensor4 transpose() const { return Tensor4(c_.transpose()); }
  Tensor4 symmetrized() const { return Tensor4(0.5 * (c_ + c_.transpose())); }

  /// ||T - T^T|| / ||T||, zero for the zero tensor.
  double symmetry_defect() const {
    const double n = c_.norm();
    return n == 0.0 ? 0.0 : (c_ - c_.transpose()).norm() / n;
  }

 private:
  Matrix c_;
};

/// tr T = sum_k T(B_k) : B_k over the fixed basis.
template <int D>
double tensor_trace(const Tensor4<D>& t) {
  return t.coeffs().trace();
}

/// tr T over an arbitrary orthonormal basis, evaluated through the map
/// itself. Agrees with tensor_trace for every orthonormal basis.
template <int D>
double tensor_trace(const Tensor4<D>& t, const std::array<SymMat<D>, sym_dim<D>>& basis) {
  double acc = 0.0;
  for (const auto& b : basis) acc += ddot(t.apply(b), b);
  return acc;
}

/// Inverse of a symmetric 4-tensor via symmetric eigendecomposition.
template <int D>
struct SymInverse {
  Tensor4<D> inverse;
  double condition_number;
};

template <int D>
SymInverse<D> symmetric_inverse(const Tensor4<D>& t) {
  using M = typename Tensor4<D>::Matrix;
  const M sym = 0.5 * (t.coeffs() + t.coeffs().transpose());
  Eigen::SelfAdjointEigenSolver<M> es(sym);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const auto ev = es.eigenvalues();
  const double amax = ev.cwiseAbs().maxCoeff();
  const double amin = ev.cwiseAbs().minCoeff();
  if (amax == 0.0 || amin <= 1e-14 * amax) throw NumericalError("singular 4-tensor");
  const M inv = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return {Tensor4<D>(inv), amax / amin};
}

/// Two isotropic phases: matrix (lambda, mu) and inclusion (lambda_t, mu_t).
struct MaterialPair {
  double lambda = 1.0;
  double mu = 1.0;
  double lambda_t = 2.0;
  double mu_t = 2.0;
  int dim = 3;

  MaterialPair() = default;
  MaterialPair(double l, double m, double lt, double mt, int d = 3)
      : lambda(l), mu(m), lambda_t(lt), mu_t(mt), dim(d) {
    validate();
  }

  /// Strong convexity of both phases; throws ValidationError otherwise.
  void validate() const {
    require_supported_dimension(dim);
    if (!std::isfinite(lambda) || !std::isfinite(mu) || !std::isfinite(lambda_t) ||
        !std::isfinite(mu_t))
      throw ValidationError("material parameters must be finite");
    if (!(mu > 0.0) || !(kappa_convex() > 0.0) || !(mu_t > 0.0) || !(kappa_convex_t() > 0.0))
      throw ValidationError("strong convexity violated: need mu > 0, d lambda + 2 mu > 0 for both phases");
  }

  /// (lambda - lambda_t)(mu - mu_t) > 0: C1 - C0 is definite.
  bool well_ordered() const { return (lambda - lambda_t) * (mu - mu_t) > 0.0; }
  void require_well_ordered() const {
    if (!well_ordered())
      throw ValidationError("pair is not well ordered: need (lambda - lambda_t)(mu - mu_t) > 0");
  }
  bool zero_contrast() const { return lambda == lambda_t && mu == mu_t; }
  /// +1 if C1 > C0, -1 if C1 < C0 (requires well_ordered()).
  int contrast_sign() const { return mu_t > mu ? 1 : -1; }

  double kappa_convex() const { return dim * lambda + 2.0 * mu; }
  double kappa_convex_t() const { return dim * lambda_t + 2.0 * mu_t; }
  /// Conventional bulk modulus lambda + 2 mu / d.
  double kappa_conv() const { return lambda + 2.0 * mu / dim; }
  double kappa_conv_t() const { return lambda_t + 2.0 * mu_t / dim; }

  // Kelvin-matrix constants of the matrix phase (three dimensions).
  double alpha1() const { return 0.5 * (1.0 / mu + 1.0 / (2.0 * mu + lambda)); }
  double alpha2() const { return 0.5 * (1.0 / mu - 1.0 / (2.0 * mu + lambda)); }
  double alpha() const { return (alpha1() + alpha2()) / (2.0 * alpha2()); }

  bool operator==(const MaterialPair&) const = default;
};

/// lambda I (x) I + 2 mu Id = (d lambda + 2 mu) Lambda_1 + 2 mu Lambda_2.
template <int D>
Tensor4<D> iso_tensor(double lambda, double mu) {
  if (!(mu > 0.0) || !(D * lambda + 2.0 * mu > 0.0))
    throw ValidationError("iso_tensor: strong convexity violated");
  return Tensor4<D>::iso(D * lambda + 2.0 * mu, 2.0 * mu);
}

template <int D>
Tensor4<D> matrix_tensor(const MaterialPair& p) {
  return iso_tensor<D>(p.lambda, p.mu);
}
template <int D>
Tensor4<D> inclusion_tensor(const MaterialPair& p) {
  return iso_tensor<D>(p.lambda_t, p.mu_t);
}
/// C1 - C0. Not required to be definite.
template <int D>
Tensor4<D> contrast_tensor(const MaterialPair& p) {
  return Tensor4<D>::iso(D * (p.lambda_t - p.lambda) + 2.0 * (p.mu_t - p.mu),
                         2.0 * (p.mu_t - p.mu));
}

/// B* = (lambda_t - lambda) tr(B) I + 2 (mu_t - mu) B, i.e. (C1 - C0) B.
template <int D>
SymMat<D> bstar(const SymMat<D>& b, const MaterialPair& p) {
  return ((p.lambda_t - p.lambda) * b.trace()) * SymMat<D>::identity() + (2.0 * (p.mu_t - p.mu)) * b;
}

// ---------------------------------------------------------------------------
// Spectra of symmetric 3 x 3 matrices.

enum class EigenClass { AllEqual, AllDistinct, Double };

inline const char* to_string(EigenClass c) {
  switch (c) {
    case EigenClass::AllEqual:
      return "ALL_EQUAL";
    case EigenClass::AllDistinct:
      return "ALL_DISTINCT";
    case EigenClass::Double:
      return "DOUBLE";
  }
  return "?";
}

/// Ascending eigenvalues and matching orthonormal eigenvectors (columns).
inline std::pair<Vec3, Mat3> sym_eigen(const SymMat3& b) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(b.matrix());
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

/// Spectrum class with separation tolerance rel_tol * ||B||. A gap exactly at
/// the tolerance counts as DOUBLE.
inline EigenClass eigen_class(const SymMat3& b, double rel_tol = 1e-8) {
  const Vec3 ev = sym_eigen(b).first;
  const double tau = rel_tol * b.norm();
  const double spread = ev(2) - ev(0);
  if (spread == 0.0 || spread < tau) return EigenClass::AllEqual;
  if (std::min(ev(1) - ev(0), ev(2) - ev(1)) > tau) return EigenClass::AllDistinct;
  return EigenClass::Double;
}

/// Outcome of the pencil test on B1 + t B2.
struct PencilReport {
  bool always_multiple = false;
  /// Orthogonal R with R B_i R^T diagonal (present iff always_multiple).
  std::optional<Mat3> diagonalizer;
  /// A t at which B1 + t B2 has three well separated eigenvalues (present iff
  /// not always_multiple).
  std::optional<double> witness_t;
  /// Coefficients (ascending powers of t, padded to degree 6) of the
  /// discriminant of the characteristic polynomial of B1 + t B2.
  std::vector<double> discriminant;
};

/// Discriminant of det(x I - (B1 + t B2)) as a polynomial in t.
inline Poly pencil_discriminant(const Mat3& b1, const Mat3& b2) {
  std::array<std::array<Poly, 3>, 3> m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m[i][j] = Poly::linear(b1(i, j), b2(i, j));
  const Poly tr = m[0][0] + m[1][1] + m[2][2];
  const Poly minors = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) + (m[0][0] * m[2][2] - m[0][2] * m[2][0]) +
                      (m[1][1] * m[2][2] - m[1][2] * m[2][1]);
  const Poly det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                   m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                   m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  // x^3 - tr x^2 + minors x - det
  return cubic_discriminant(-1.0 * tr, minors, -1.0 * det);
}

namespace detail {

inline double min_gap(const SymMat3& m) {
  const Vec3 ev = sym_eigen(m).first;
  return std::min(ev(1) - ev(0), ev(2) - ev(1));
}

/// Searches a fixed candidate list for the t with the widest eigenvalue
/// separation of B1 + t B2.
inline std::optional<double> find_witness(const Mat3& b1, const Mat3& b2) {
  static const double candidates[] = {0.0,  1.0,   -1.0,  0.5,  -0.5,  2.0,   -2.0,  0.25, -0.25,
                                      3.0,  -3.0,  0.1,   -0.1, 5.0,   -5.0,  0.37, -0.73, 1.618,
                                      -2.7, 10.0,  -10.0, 0.01, -0.01, 100.0, -100.0};
  double best_gap = -1.0, best_t = 0.0;
  for (double t : candidates) {
    const double g = min_gap(SymMat3::symmetrized(b1 + t * b2));
    if (g > best_gap) {
      best_gap = g;
      best_t = t;
    }
  }
  if (best_gap > 1e-8) return best_t;
  return std::nullopt;
}

inline void check_symmetric(const Mat3& m, const char* name) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ValidationError(std::string("pencil_check: ") + name + " is not symmetric");
}

}  // namespace detail

/// Tests whether B1 + t B2 has a multiple eigenvalue for every real t and, if
/// so, returns a common diagonalizer.
///
/// B2 proportional to I is handled directly (the pencil only shifts the
/// spectrum of B1). B2 with three distinct eigenvalues cannot give an
/// identically multiple pencil. Otherwise B2 has a double eigenvalue s and a
/// simple one s + c; rotating to B2's eigenbasis and applying (B2 - s I) / c
/// brings B2 to diag(0, 0, 1), and the pencil is identically multiple iff the
/// t^4 coefficient (a - b)^2 + 4 d^2 and the t^2 coefficient (e^2 + f^2)^2 of
/// the normalized discriminant vanish.
inline PencilReport pencil_check(const Mat3& b1, const Mat3& b2, double tol = 1e-10) {
  detail::check_symmetric(b1, "B1");
  detail::check_symmetric(b2, "B2");
  const SymMat3 s1 = SymMat3::symmetrized(b1);
  const SymMat3 s2 = SymMat3::symmetrized(b2);

  PencilReport report;
  {
    std::vector<double> disc = pencil_discriminant(s1.matrix(), s2.matrix()).coeffs();
    disc.resize(7, 0.0);
    report.discriminant = std::move(disc);
  }

  const EigenClass c2 = eigen_class(s2);
  if (c2 == EigenClass::AllEqual) {
    const EigenClass c1 = eigen_class(s1);
    report.always_multiple = c1 != EigenClass::AllDistinct;
    if (report.always_multiple) {
      report.diagonalizer = sym_eigen(s1).second.transpose();
    } else {
      report.witness_t = detail::find_witness(s1.matrix(), s2.matrix());
    }
    return report;
  }
  if (c2 == EigenClass::AllDistinct) {
    report.witness_t = detail::find_witness(s1.matrix(), s2.matrix());
    if (!report.witness_t) throw NumericalError("pencil_check: no separating t found");
    return report;
  }

  // B2 has exactly one double eigenvalue. Order the eigenbasis so the simple
  // eigenvector is last.
  auto [ev, vecs] = sym_eigen(s2);
  Mat3 u;
  double s, c;
  if (ev(1) - ev(0) < ev(2) - ev(1)) {
    u = vecs;  // double pair is (0, 1), simple is 2
    s = 0.5 * (ev(0) + ev(1));
    c = ev(2) - s;
  } else {
    u.col(0) = vecs.col(1);
    u.col(1) = vecs.col(2);
    u.col(2) = vecs.col(0);
    s = 0.5 * (ev(1) + ev(2));
    c = ev(0) - s;
  }
  Mat3 b1n = u.transpose() * s1.matrix() * u;
  b1n = 0.5 * (b1n + b1n.transpose());
  const double scale = b1n.norm();
  if (scale == 0.0) {
    report.always_multiple = true;
    report.diagonalizer = u.transpose();
    return report;
  }
  b1n /= scale;
  Mat3 e33 = Mat3::Zero();
  e33(2, 2) = 1.0;
  const Poly gamma = pencil_discriminant(b1n, e33);
  bool vanishes = true;
  for (double v : gamma.coeffs()) vanishes = vanishes && std::abs(v) < tol;
  (void)c;

  if (!vanishes) {
    report.witness_t = detail::find_witness(s1.matrix(), s2.matrix());
    if (!report.witness_t) throw NumericalError("pencil_check: no separating t found");
    return report;
  }
  // Rotate inside B2's double eigenspace so the leading 2 x 2 block of B1 is
  // diagonal as well.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es2(b1n.topLeftCorner<2, 2>());
  Mat3 r = Mat3::Identity();
  r.topLeftCorner<2, 2>() = es2.eigenvectors();
  report.always_multiple = true;
  report.diagonalizer = (u * r).transpose();
  return report;
}

}  // namespace eshelby
