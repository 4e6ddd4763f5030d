#pragma once

// Kelvin kernel, single-layer potential and the shape potentials
//   p(x) = (1/4pi) int_Omega |x - y| dy,   w(x) = (2/4pi) int_Omega dy / |x - y|,
//   w^B = B : Hess p,
// all evaluated as surface integrals by the divergence theorem, so only
// derivatives up to third order of |x - y| ever appear.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "eshelby/error.hpp"
#include "eshelby/geometry.hpp"
#include "eshelby/parallel.hpp"
#include "eshelby/tensor_core.hpp"

namespace eshelby {

inline constexpr double inv_four_pi = 0.25 / std::numbers::pi;

/// Kelvin matrix of the matrix phase:
/// Gamma_ij(x) = -(alpha1/4pi) delta_ij/|x| - (alpha2/4pi) x_i x_j/|x|^3.
inline Mat3 kelvin(const Vec3& x, const MaterialPair& pair) {
  const double r = x.norm();
  if (r == 0.0) throw ValidationError("Kelvin matrix evaluated at the origin");
  return -inv_four_pi * (pair.alpha1() / r * Mat3::Identity() + pair.alpha2() / (r * r * r) * (x * x.transpose()));
}

/// Fully symmetric third-order array d3[i][j][k].
using Sym3 = std::array<std::array<std::array<double, 3>, 3>, 3>;

/// Distance from x to the nearest quadrature node.
inline double node_distance(const SurfQuad& sq, const Vec3& x) {
  double best = 1e300;
  for (const auto& y : sq.points) best = std::min(best, (x - y).squaredNorm());
  return std::sqrt(best);
}

/// Throws NumericalError if x lies within two node spacings of the surface.
inline void require_clearance(const SurfQuad& sq, const Vec3& x) {
  const double d = node_distance(sq, x);
  if (d < 2.0 * sq.spacing)
    throw NumericalError("evaluation point at distance " + format_number(d) + " from the surface, below the cutoff " +
                         format_number(2.0 * sq.spacing));
}

// ---------------------------------------------------------------------------
// Raw surface-integral evaluators (no clearance check).

namespace raw {

/// p(x) = (1/16pi) oint |y - x| (y - x) . n
inline double p(const SurfQuad& sq, const Vec3& x) {
  double acc = 0.0;
  for (std::size_t q = 0; q < sq.size(); ++q) {
    const Vec3 d = sq.points[q] - x;
    acc += sq.weights[q] * d.norm() * d.dot(sq.normals[q]);
  }
  return acc * 0.25 * inv_four_pi;
}

/// grad p = -(1/4pi) oint |x - y| n
inline Vec3 grad_p(const SurfQuad& sq, const Vec3& x) {
  Vec3 acc = Vec3::Zero();
  for (std::size_t q = 0; q < sq.size(); ++q) acc += sq.weights[q] * (x - sq.points[q]).norm() * sq.normals[q];
  return -inv_four_pi * acc;
}

/// d_i d_j p = -(1/4pi) oint (x_j - y_j)/|x - y| n_i, symmetrized.
inline Mat3 hess_p(const SurfQuad& sq, const Vec3& x) {
  Mat3 acc = Mat3::Zero();
  for (std::size_t q = 0; q < sq.size(); ++q) {
    const Vec3 r = x - sq.points[q];
    acc += (sq.weights[q] / r.norm()) * (sq.normals[q] * r.transpose());
  }
  acc = -inv_four_pi * acc;
  return 0.5 * (acc + acc.transpose());
}

/// d_k d_i d_j p = -(1/4pi) oint (delta_jk/r - r_j r_k/r^3) n_i, symmetrized
/// over all index permutations.
inline Sym3 third_p(const SurfQuad& sq, const Vec3& x) {
  double raw[3][3][3] = {};
  for (std::size_t q = 0; q < sq.size(); ++q) {
    const Vec3 r = x - sq.points[q];
    const double rn = r.norm();
    const double w1 = sq.weights[q] / rn;
    const double w3 = sq.weights[q] / (rn * rn * rn);
    const Vec3& n = sq.normals[q];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = j; k < 3; ++k) raw[i][j][k] += n(i) * ((j == k ? w1 : 0.0) - w3 * r(j) * r(k));
  }
  Sym3 out{};
  auto get = [&](int i, int j, int k) { return j <= k ? raw[i][j][k] : raw[i][k][j]; };
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        out[i][j][k] = -inv_four_pi * (get(i, j, k) + get(j, i, k) + get(k, j, i)) / 3.0;
  return out;
}

/// w = Laplacian of p.
inline double w(const SurfQuad& sq, const Vec3& x) {
  double acc = 0.0;
  for (std::size_t q = 0; q < sq.size(); ++q) {
    const Vec3 r = x - sq.points[q];
    acc += sq.weights[q] * r.dot(sq.normals[q]) / r.norm();
  }
  return -inv_four_pi * acc;
}

/// d_k w = -(1/4pi) oint (n_k/r - (r . n) r_k / r^3)
inline Vec3 grad_w(const SurfQuad& sq, const Vec3& x) {
  Vec3 acc = Vec3::Zero();
  for (std::size_t q = 0; q < sq.size(); ++q) {
    const Vec3 r = x - sq.points[q];
    const double rn = r.norm();
    acc += sq.weights[q] * (sq.normals[q] / rn - (r.dot(sq.normals[q]) / (rn * rn * rn)) * r);
  }
  return -inv_four_pi * acc;
}

/// S[f](x) = oint Gamma(x - y) f(y), f given per node.
inline Vec3 single_layer(const SurfQuad& sq, const std::vector<Vec3>& f, const Vec3& x, const MaterialPair& pair) {
  Vec3 acc = Vec3::Zero();
  for (std::size_t q = 0; q < sq.size(); ++q) acc += sq.weights[q] * (kelvin(x - sq.points[q], pair) * f[q]);
  return acc;
}

}  // namespace raw

inline double contract(const Mat3& b, const Sym3& d3, int k) {
  double acc = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) acc += b(i, j) * d3[i][j][k];
  return acc;
}

/// grad w^B_k = sum_ij B_ij d_k d_i d_j p.
inline Vec3 grad_wB_from(const Mat3& b, const Sym3& d3) {
  return Vec3(contract(b, d3, 0), contract(b, d3, 1), contract(b, d3, 2));
}

inline Vec3 grad_w_from(const Sym3& d3) {
  Vec3 g;
  for (int k = 0; k < 3; ++k) g(k) = d3[0][0][k] + d3[1][1][k] + d3[2][2][k];
  return g;
}

/// Value with an error estimate from a coarser quadrature level.
template <class T>
struct Estimated {
  T value;
  double error;
};

/// Shape potentials on a fixed surface quadrature, with a one-level-coarser
/// rule kept for error estimates. Evaluation points closer than two node
/// spacings to the surface are rejected.
class ShapePotentials {
 private:
  static double distance(double a, double b) { return std::abs(a - b); }
  template <class M>
  static double distance(const Eigen::MatrixBase<M>& a, const Eigen::MatrixBase<M>& b) {
    return (a - b).norm();
  }

  void require(const Vec3& x) const {
    const double d = node_distance(fine_, x);
    if (d < 2.0 * fine_.spacing) {
      const double est = std::abs(raw::w(fine_, x) - raw::w(coarse_, x));
      throw NumericalError("point at distance " + format_number(d) + " from the surface is inside the cutoff " +
                           format_number(2.0 * fine_.spacing) + " (estimated error of w there: " +
                           format_number(est) + ")");
    }
  }
  template <class F>
  auto checked(const Vec3& x, F&& f) const {
    require(x);
    return f(fine_);
  }

  Shape shape_;
  int level_;
  SurfQuad fine_;
  SurfQuad coarse_;

 public:
  explicit ShapePotentials(const Shape& shape, int level = 4)
      : shape_(shape),
        level_(level),
        fine_(surface_quadrature(shape, level)),
        coarse_(surface_quadrature(shape, std::max(1, level - 1))) {}

  const Shape& shape() const { return shape_; }
  int level() const { return level_; }
  const SurfQuad& quad() const { return fine_; }
  const SurfQuad& coarse_quad() const { return coarse_; }

  double p(const Vec3& x) const { return checked(x, [&](const SurfQuad& q) { return raw::p(q, x); }); }
  double w(const Vec3& x) const { return checked(x, [&](const SurfQuad& q) { return raw::w(q, x); }); }
  Vec3 grad_p(const Vec3& x) const { return checked(x, [&](const SurfQuad& q) { return raw::grad_p(q, x); }); }
  Mat3 hess_p(const Vec3& x) const { return checked(x, [&](const SurfQuad& q) { return raw::hess_p(q, x); }); }
  Sym3 third_p(const Vec3& x) const {
    require(x);
    return raw::third_p(fine_, x);
  }
  /// w^B = B : Hess p. w^I = w up to rounding.
  double wB(const Mat3& b, const Vec3& x) const { return b.cwiseProduct(hess_p(x)).sum(); }
  Vec3 grad_w(const Vec3& x) const { return checked(x, [&](const SurfQuad& q) { return raw::grad_w(q, x); }); }
  Vec3 grad_wB(const Mat3& b, const Vec3& x) const { return grad_wB_from(b, third_p(x)); }

  /// Single layer of a density given as a function of (point, normal).
  template <class F>
  Vec3 single_layer(F&& density, const Vec3& x, const MaterialPair& pair) const {
    return checked(x, [&](const SurfQuad& q) { return raw::single_layer(q, sample(q, density), x, pair); });
  }

  /// Value on the fine rule and |fine - coarse| as error estimate.
  template <class F>
  auto estimate(F&& f) const -> Estimated<decltype(f(std::declval<const SurfQuad&>()))> {
    auto a = f(fine_);
    auto b = f(coarse_);
    return {a, distance(a, b)};
  }

  template <class F>
  static std::vector<Vec3> sample(const SurfQuad& q, F&& density) {
    std::vector<Vec3> f(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) f[i] = density(q.points[i], q.normals[i]);
    return f;
  }

};

/// Both evaluations of the single layer: directly through the Kelvin kernel
/// and through S = -((alpha1 + alpha2)/2) Lap H + alpha2 grad div H with
/// H[f](x) = (1/4pi) oint |x - y| f(y), derivatives taken on the kernel.
inline std::pair<Vec3, Vec3> h_decomposition_check(const SurfQuad& sq, const std::vector<Vec3>& f, const Vec3& x,
                                                   const MaterialPair& pair) {
  require_clearance(sq, x);
  const Vec3 direct = raw::single_layer(sq, f, x, pair);
  Vec3 lap_h = Vec3::Zero(), grad_div_h = Vec3::Zero();
  for (std::size_t q = 0; q < sq.size(); ++q) {
    const Vec3 r = x - sq.points[q];
    const double rn = r.norm();
    // Lap |r| = 2/r, d_i d_j |r| = delta_ij/r - r_i r_j/r^3
    lap_h += sq.weights[q] * (2.0 / rn) * f[q];
    grad_div_h += sq.weights[q] * (f[q] / rn - (r.dot(f[q]) / (rn * rn * rn)) * r);
  }
  lap_h *= inv_four_pi;
  grad_div_h *= inv_four_pi;
  const Vec3 via_h = -0.5 * (pair.alpha1() + pair.alpha2()) * lap_h + pair.alpha2() * grad_div_h;
  return {direct, via_h};
}

// ---------------------------------------------------------------------------
// Quadratic fits

/// Least-squares quadratic in three variables.
struct QuadraticFit {
  /// Coefficients of 1, x, y, z, x^2, y^2, z^2, xy, xz, yz.
  Eigen::Matrix<double, 10, 1> coeffs = Eigen::Matrix<double, 10, 1>::Zero();
  /// RMS residual divided by the RMS of the centered values.
  double rel_residual = 0.0;

  double operator()(const Vec3& x) const { return basis(x).dot(coeffs); }
  static Eigen::Matrix<double, 10, 1> basis(const Vec3& x) {
    Eigen::Matrix<double, 10, 1> b;
    b << 1.0, x(0), x(1), x(2), x(0) * x(0), x(1) * x(1), x(2) * x(2), x(0) * x(1), x(0) * x(2), x(1) * x(2);
    return b;
  }
};

inline QuadraticFit fit_quadratic(const std::vector<Vec3>& points, const std::vector<double>& values) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n != static_cast<Eigen::Index>(values.size())) throw ValidationError("fit_quadratic: size mismatch");
  if (n < 10) throw ValidationError("fit_quadratic: need at least 10 samples");
  Eigen::MatrixXd a(n, 10);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a.row(i) = QuadraticFit::basis(points[i]).transpose();
    v(i) = values[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < 10) throw ValidationError("fit_quadratic: rank-deficient sample set");
  QuadraticFit fit;
  fit.coeffs = qr.solve(v);
  const double mean = v.mean();
  const double spread = std::sqrt((v.array() - mean).square().mean());
  const double rms = std::sqrt((a * fit.coeffs - v).array().square().mean());
  fit.rel_residual = spread > 0.0 ? rms / spread : rms;
  return fit;
}

/// Dive/Nikliborc statistic: how far w is from a quadratic at interior
/// samples. Small for ellipsoids only.
inline QuadraticFit quadratic_fit_w(const ShapePotentials& pot, const std::vector<Vec3>& samples) {
  if (samples.size() < 30) throw ValidationError("quadratic_fit_w: need at least 30 samples");
  std::vector<double> values(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) { values[i] = pot.w(samples[i]); });
  return fit_quadratic(samples, values);
}

// ---------------------------------------------------------------------------
// CSV dumps

struct PotentialSamples {
  std::string kind;  // p, w, wB, grad_w, grad_wB, single_layer
  std::vector<Vec3> points;
  std::vector<std::vector<double>> values;
};

inline void write_samples_csv(const PotentialSamples& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FileError("cannot write '" + path + "'");
  out.precision(17);
  const std::size_t width = s.values.empty() ? 0 : s.values.front().size();
  out << "x,y,z";
  if (width == 1)
    out << ",value";
  else
    for (std::size_t c = 0; c < width; ++c) out << ",value" << c;
  out << ",kind\n";
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    out << s.points[i](0) << ',' << s.points[i](1) << ',' << s.points[i](2);
    for (double v : s.values[i]) out << ',' << v;
    out << ',' << s.kind << '\n';
  }
}

}  // namespace eshelby
