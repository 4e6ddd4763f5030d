#pragma once

// Elastic moment tensors and the trace bounds
//   tr(Lambda_1 M^-1 Lambda_1) <= K1,  tr(Lambda_2 M^-1 Lambda_2) <= K2
// (inequalities reverse when the inclusion is softer).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "eshelby/error.hpp"
#include "eshelby/geometry.hpp"
#include "eshelby/tensor_core.hpp"
#include "eshelby/uniformity.hpp"

namespace eshelby {

struct TraceBounds {
  double K1 = 0.0;
  double K2 = 0.0;
};

/// K1, K2 evaluated with the bulk modulus lambda + 2 mu / d.
inline TraceBounds trace_bound_constants(const MaterialPair& pair, int d) {
  require_supported_dimension(d);
  MaterialPair p = pair;
  p.dim = d;
  p.validate();
  const double k = p.kappa_conv(), kt = p.kappa_conv_t();
  const double mu = p.mu, mt = p.mu_t;
  if (kt == k || mt == mu) throw ValidationError("trace bounds undefined at zero bulk or shear contrast");
  TraceBounds b;
  b.K1 = 1.0 / (d * (kt - k)) * (d * kt + 2.0 * (d - 1) * mu) / (d * k + 2.0 * (d - 1) * mu);
  b.K2 = 1.0 / (2.0 * (mt - mu)) *
         ((d * d + d - 2) / 2.0 + 2.0 * (mt - mu) * ((d - 1) / (2.0 * mu) + (d - 1) / (d * k + 2.0 * (d - 1) * mu)));
  return b;
}

template <int D>
struct EMTReport {
  Tensor4<D> M;
  std::string method;
  double symmetry_defect = 0.0;
  /// +1 if all eigenvalues positive, -1 if all negative, 0 otherwise.
  int definiteness_sign = 0;
  double volume = 1.0;
  /// Estimated absolute error of the coefficients (Frobenius norm).
  double error_estimate = 0.0;
  /// M at the coarser resolution behind error_estimate, when one was used.
  std::optional<Tensor4<D>> reference;
};

template <int D>
int definiteness(const Tensor4<D>& m) {
  using Mat = typename Tensor4<D>::Matrix;
  Eigen::SelfAdjointEigenSolver<Mat> es(Mat(0.5 * (m.coeffs() + m.coeffs().transpose())));
  const auto ev = es.eigenvalues();
  if (ev.minCoeff() > 0.0) return 1;
  if (ev.maxCoeff() < 0.0) return -1;
  return 0;
}

/// Fills defect and sign, then symmetrizes M.
template <int D>
EMTReport<D> finish_report(Tensor4<D> m, std::string method, double volume, double error) {
  EMTReport<D> r;
  r.symmetry_defect = m.symmetry_defect();
  r.M = m.symmetrized();
  r.definiteness_sign = definiteness(r.M);
  r.method = std::move(method);
  r.volume = volume;
  r.error_estimate = error;
  return r;
}

/// EMT of an ellipsoid from its moments: column k is |Omega| (C1 - C0) B(B_k),
/// with B(A) the interior strain for loading A.
inline Tensor4<3> emt_from_moments(const EllipsoidMoments& mom, const MaterialPair& pair, double volume) {
  const auto& basis = make_basis<3>();
  Tensor4<3>::Matrix cols;
  for (int k = 0; k < 6; ++k) {
    const StrainSolution s = interior_strain_ellipsoid(basis.elements[k].matrix(), mom, pair);
    cols.col(k) = basis.to_coords(bstar(SymMat3::symmetrized(s.B), pair));
  }
  return Tensor4<3>(volume * cols);
}

/// Constant-strain EMT of an ellipsoid from the analytic moments.
inline EMTReport<3> emt_constant_strain(const Shape& shape, const MaterialPair& pair) {
  if (!shape.is_ellipsoid()) throw ValidationError("constant-strain EMT requires an ellipsoid");
  const EllipsoidMoments mom = analytic_ellipsoid_moments(shape);
  return finish_report(emt_from_moments(mom, pair, shape.volume()), "constant_strain", shape.volume(), 0.0);
}

/// Constant-strain EMT with moments fitted from surface quadrature at `level`;
/// the error estimate is the change against level - 1.
inline EMTReport<3> emt_constant_strain_quadrature(const Shape& shape, const MaterialPair& pair, int level,
                                                   std::uint64_t seed = 1, int samples = 40) {
  if (!shape.is_ellipsoid()) throw ValidationError("constant-strain EMT requires an ellipsoid");
  auto at_level = [&](int l, double max_residual) {
    ShapePotentials pot(shape, l);
    const auto pts = sample_interior(shape, pot.quad(), samples, seed);
    return emt_from_moments(fitted_ellipsoid_moments(pot, pts, max_residual), pair, shape.volume());
  };
  const Tensor4<3> fine = at_level(level, 1e-6);
  // The coarse level only feeds the error estimate, so it gets a looser fit gate.
  const Tensor4<3> coarse = at_level(std::max(2, level - 1), 1e-4);
  auto r = finish_report(fine, "constant_strain", shape.volume(), (fine.coeffs() - coarse.coeffs()).norm());
  r.reference = coarse.symmetrized();
  return r;
}

struct BoundReport {
  double tr1 = 0.0, tr2 = 0.0;
  double K1 = 0.0, K2 = 0.0;
  double gap1 = 0.0, gap2 = 0.0;
  double total_gap = 0.0;
  double trace_inverse = 0.0;
  double condition = 1.0;
  /// +1 when the bounds read tr <= K (stiffer inclusion), -1 when reversed.
  int direction = 1;
};

/// Block traces of M^-1 and their gaps to K1, K2.
template <int D>
BoundReport bound_report(const Tensor4<D>& m, const MaterialPair& pair) {
  const auto inv = symmetric_inverse(m);
  const Tensor4<D> l1 = Tensor4<D>::lambda1(), l2 = Tensor4<D>::lambda2();
  const TraceBounds k = trace_bound_constants(pair, D);
  BoundReport r;
  r.tr1 = tensor_trace(Tensor4<D>(l1 * inv.inverse * l1));
  r.tr2 = tensor_trace(Tensor4<D>(l2 * inv.inverse * l2));
  r.trace_inverse = tensor_trace(inv.inverse);
  r.K1 = k.K1;
  r.K2 = k.K2;
  r.gap1 = r.K1 - r.tr1;
  r.gap2 = r.K2 - r.tr2;
  r.total_gap = (r.K1 + r.K2) - r.trace_inverse;
  r.condition = inv.condition_number;
  r.direction = pair.kappa_conv_t() > pair.kappa_conv() ? 1 : -1;
  return r;
}

struct GapErrors {
  double gap1 = 0.0, gap2 = 0.0, total_gap = 0.0;
};

/// Gap changes between the report's M and its coarser reference; zero when
/// M carries no reference (closed-form moments).
template <int D>
GapErrors gap_errors(const EMTReport<D>& r, const MaterialPair& pair) {
  GapErrors e;
  if (!r.reference) return e;
  const BoundReport fine = bound_report(r.M, pair);
  const BoundReport coarse = bound_report(*r.reference, pair);
  e.gap1 = std::abs(fine.gap1 - coarse.gap1);
  e.gap2 = std::abs(fine.gap2 - coarse.gap2);
  e.total_gap = std::abs(fine.total_gap - coarse.total_gap);
  return e;
}

/// Tolerance for calling a gap zero: 10x the estimated error, floored at
/// 1e-10 for closed-form results.
inline double epsilon_num(double error) { return std::max(10.0 * error, 1e-10); }

}  // namespace eshelby
