#pragma once

// Discrete polarization functional on a voxelized inclusion.
//
// A polarization P is piecewise constant: P_c on the occupied part (fraction
// phi_c) of cell c. The induced cell-averaged strain is
//   E_c = sum_c' phi_c' G(c - c') P_c' + (1 - phi_c) G(0) P_c,
// where the last term lets a partial cell feel its own polarization at full
// strength. With <X, Y> = h^3 sum phi_c X_c : Y_c the energy is <P, E>, and
//   E_A(P) = <P, E(P)> + <P, (C0 - C1)^-1 P> + 2 <P, A>,
// which is strictly concave when C1 > C0. Its maximum equals <P*, A>.

#include <fftw3.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "eshelby/emt_bounds.hpp"
#include "eshelby/error.hpp"
#include "eshelby/geometry.hpp"
#include "eshelby/green_operator.hpp"
#include "eshelby/random.hpp"
#include "eshelby/tensor_core.hpp"

namespace eshelby {

/// Basis coordinates of P per cell, zero outside the occupied cells.
struct PolarizationField {
  std::vector<Coords6> values;

  SymMat3 value(std::size_t cell) const { return make_basis<3>().from_coords(values[cell]); }
};

struct GreenApplication {
  /// Cell-averaged strain coordinates, every cell of the grid.
  std::vector<Coords6> strain;
  double energy = 0.0;
};

struct Maximizer {
  PolarizationField P;
  double value = 0.0;
  int iterations = 0;
  /// |grad E_A(P*)| / |grad E_A(0)| in the weighted norm.
  double stationarity = 0.0;
};

class VariationalProblem {
 public:
  VariationalProblem(const Shape& shape, const MaterialPair& pair, int n)
      : shape_(shape), pair_(pair), grid_(voxelize(shape, n)), op_(std::make_unique<GreenOperator>(n, pair)) {
    pair_.validate();
    const double h = grid_.cell;
    cell_volume_ = h * h * h;
    for (std::size_t c = 0; c < grid_.fractions.size(); ++c)
      if (grid_.fractions[c] > 0.0) occupied_.push_back(c);
  }

  const VoxelGrid& grid() const { return grid_; }
  const MaterialPair& pair() const { return pair_; }
  const Shape& shape() const { return shape_; }
  std::size_t unknowns() const { return 6 * occupied_.size(); }

  PolarizationField zero_field() const { return {std::vector<Coords6>(grid_.fractions.size(), Coords6::Zero())}; }

  /// P = B on every occupied cell.
  PolarizationField constant_field(const SymMat3& b) const {
    PolarizationField p = zero_field();
    const Coords6 v = make_basis<3>().to_coords(b);
    for (std::size_t c : occupied_) p.values[c] = v;
    return p;
  }

  PolarizationField random_field(std::uint64_t seed) const {
    Rng rng(seed);
    PolarizationField p = zero_field();
    for (std::size_t c : occupied_)
      for (int k = 0; k < 6; ++k) p.values[c](k) = rng.normal();
    return p;
  }

  /// Weighted inner product <X, Y>.
  double inner(const PolarizationField& x, const PolarizationField& y) const {
    double acc = 0.0;
    for (std::size_t c : occupied_) acc += grid_.fractions[c] * x.values[c].dot(y.values[c]);
    return acc * cell_volume_;
  }

  GreenApplication green_apply(const PolarizationField& p) const {
    require_size(p);
    std::vector<Coords6> q(p.values.size(), Coords6::Zero());
    for (std::size_t c : occupied_) q[c] = grid_.fractions[c] * p.values[c];
    GreenApplication out;
    op_->convolve(q, out.strain);
    const auto& g0 = op_->self().coeffs();
    for (std::size_t c : occupied_) out.strain[c] += (1.0 - grid_.fractions[c]) * (g0 * p.values[c]);
    out.energy = inner(p, PolarizationField{out.strain});
    return out;
  }

  double energy(const PolarizationField& p) const { return green_apply(p).energy; }

  double energy_EA(const PolarizationField& p, const SymMat3& a) const {
    const GreenApplication g = green_apply(p);
    const PolarizationField dp = apply_block(p, compliance_contrast().coeffs());
    return g.energy + inner(p, dp) + 2.0 * inner(p, constant_field(a));
  }

  /// Preconditioned conjugate gradients on -(K + D) P = A, the stationarity
  /// condition of E_A. Requires C1 > C0.
  Maximizer maximize_EA(const SymMat3& a, double tol = 1e-8, int max_iterations = -1) const {
    require_stiffer();
    const Tensor4<3>::Matrix d = compliance_contrast().coeffs();
    const Tensor4<3>::Matrix precond = (-(op_->self().coeffs() + d)).inverse();
    if (max_iterations < 0) max_iterations = static_cast<int>(10 * unknowns());

    Maximizer out;
    out.P = zero_field();
    PolarizationField r = constant_field(a);  // residual A + (K + D) P at P = 0
    const double r0 = std::sqrt(inner(r, r));
    if (r0 == 0.0) return out;
    PolarizationField z = apply_block(r, precond);
    PolarizationField dir = z;
    double rz = inner(r, z);
    int it = 0;
    double rn = r0;
    while (rn > tol * r0) {
      if (it >= max_iterations) throw NumericalError("maximize_EA: iteration cap exceeded");
      // q = -(K + D) dir
      PolarizationField q{green_apply(dir).strain};
      for (std::size_t c : occupied_) q.values[c] = -(q.values[c] + d * dir.values[c]);
      const double curv = inner(dir, q);
      if (!(curv > 0.0)) throw NumericalError("maximize_EA: functional is not strictly concave");
      const double step = rz / curv;
      for (std::size_t c : occupied_) {
        out.P.values[c] += step * dir.values[c];
        r.values[c] -= step * q.values[c];
      }
      z = apply_block(r, precond);
      const double rz_new = inner(r, z);
      for (std::size_t c : occupied_) dir.values[c] = z.values[c] + (rz_new / rz) * dir.values[c];
      rz = rz_new;
      rn = std::sqrt(inner(r, r));
      ++it;
    }
    out.iterations = it;
    // Certificate from a fresh evaluation rather than the recurrence.
    PolarizationField g{green_apply(out.P).strain};
    for (std::size_t c : occupied_) g.values[c] += d * out.P.values[c] + make_basis<3>().to_coords(a);
    out.stationarity = std::sqrt(inner(g, g)) / r0;
    out.value = inner(out.P, constant_field(a));
    return out;
  }

  /// sum over the Lambda_l basis elements B_k of <B_k, F(1_Omega B_k)>.
  double identity_sum(int l) const {
    if (l != 1 && l != 2) throw ValidationError("identity_sum: l must be 1 or 2");
    const auto& basis = make_basis<3>();
    double acc = 0.0;
    for (int k = (l == 1 ? 0 : 1); k < (l == 1 ? 1 : 6); ++k) acc += energy(constant_field(basis.elements[k]));
    return acc;
  }

  /// Weighted relative L2 distance of P from the constant field B.
  double deviation_from_constant(const PolarizationField& p, const SymMat3& b) const {
    const PolarizationField ref = constant_field(b);
    PolarizationField diff = p;
    for (std::size_t c : occupied_) diff.values[c] -= ref.values[c];
    return std::sqrt(inner(diff, diff) / inner(ref, ref));
  }

  /// Full cells whose 26 neighbours are full too. The one-cell layer along
  /// the staircase boundary carries local geometry error and is left out of
  /// the interior statistics below.
  std::vector<std::size_t> interior_cells() const {
    const int n = grid_.n;
    auto full = [&](int i, int j, int k) {
      return i >= 0 && j >= 0 && k >= 0 && i < n && j < n && k < n && grid_.fractions[grid_.index(i, j, k)] >= 1.0;
    };
    std::vector<std::size_t> cells;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          bool ok = true;
          for (int a = -1; a <= 1 && ok; ++a)
            for (int b = -1; b <= 1 && ok; ++b)
              for (int c = -1; c <= 1 && ok; ++c) ok = full(i + a, j + b, k + c);
          if (ok) cells.push_back(grid_.index(i, j, k));
        }
    if (cells.empty()) throw NumericalError("grid has no interior cells");
    return cells;
  }

  /// max |P_c - B| / |B| over interior cells.
  double interior_deviation(const PolarizationField& p, const SymMat3& b) const {
    const Coords6 ref = make_basis<3>().to_coords(b);
    double worst = 0.0;
    for (std::size_t c : interior_cells()) worst = std::max(worst, (p.values[c] - ref).norm());
    return worst / ref.norm();
  }

  /// Relative spread max |E_c - mean| / |mean| over interior cells.
  double strain_spread(const GreenApplication& g) const {
    const std::vector<std::size_t> cells = interior_cells();
    Coords6 mean = Coords6::Zero();
    for (std::size_t c : cells) mean += g.strain[c];
    mean /= static_cast<double>(cells.size());
    double worst = 0.0;
    for (std::size_t c : cells) worst = std::max(worst, (g.strain[c] - mean).norm());
    return worst / mean.norm();
  }

  /// (C0 - C1)^-1
  Tensor4<3> compliance_contrast() const {
    const Tensor4<3> dc = contrast_tensor<3>(pair_);
    return Tensor4<3>(-dc.coeffs().inverse());
  }

 private:
  void require_size(const PolarizationField& p) const {
    if (p.values.size() != grid_.fractions.size()) throw ValidationError("polarization field does not match grid");
  }
  void require_stiffer() const {
    const double a = 3.0 * (pair_.lambda_t - pair_.lambda) + 2.0 * (pair_.mu_t - pair_.mu);
    if (!(a > 0.0) || !(pair_.mu_t > pair_.mu))
      throw ValidationError("maximize_EA needs a stiffer inclusion (C1 - C0 positive definite)");
  }
  PolarizationField apply_block(const PolarizationField& p, const Tensor4<3>::Matrix& m) const {
    PolarizationField out = zero_field();
    for (std::size_t c : occupied_) out.values[c] = m * p.values[c];
    return out;
  }

  Shape shape_;
  MaterialPair pair_;
  VoxelGrid grid_;
  // convolve reuses FFT buffers, hence mutable through the pointer.
  std::unique_ptr<GreenOperator> op_;
  double cell_volume_ = 0.0;
  std::vector<std::size_t> occupied_;
};

/// Variational EMT: column l holds <P*_l, B_k> for loading A = B_l. The
/// Lambda_1 - Lambda_2 coupling entries are set to zero.
inline Tensor4<3> variational_moment_tensor(const VariationalProblem& prob) {
  const auto& basis = make_basis<3>();
  Tensor4<3>::Matrix m;
  for (int l = 0; l < 6; ++l) {
    const Maximizer sol = prob.maximize_EA(basis.elements[l]);
    for (int k = 0; k < 6; ++k) m(k, l) = prob.inner(sol.P, prob.constant_field(basis.elements[k]));
  }
  for (int k = 1; k < 6; ++k) m(0, k) = m(k, 0) = 0.0;
  return Tensor4<3>(m);
}

/// Grid used for the error estimate of a variational EMT at n.
inline int reference_grid(int n) { return std::max(8, (3 * n) / 4); }

/// Variational EMT at grid n. With `with_reference` the EMT is recomputed at
/// reference_grid(n) and the coefficient change is the error estimate.
inline EMTReport<3> emt_variational(const Shape& shape, const MaterialPair& pair, int n, bool with_reference = true) {
  if (n < 16) throw ValidationError("variational EMT needs grid n >= 16");
  const Tensor4<3> m = variational_moment_tensor(VariationalProblem(shape, pair, n));
  if (!with_reference) return finish_report(m, "variational", shape.volume(), 0.0);
  const Tensor4<3> coarse = variational_moment_tensor(VariationalProblem(shape, pair, reference_grid(n)));
  auto r = finish_report(m, "variational", shape.volume(), (m.coeffs() - coarse.coeffs()).norm());
  r.reference = coarse.symmetrized();
  return r;
}

/// Fourier symbol of the strain operator at wave direction k:
/// the cell influence formula with N4 = -2 k^4, N2 = -2 k^2 (unit k).
inline Tensor4<3>::Matrix fourier_symbol(const Vec3& k, const MaterialPair& pair) {
  const Vec3 u = k.normalized();
  Array4 n4;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) n4(i, j, a, b) = -2.0 * u(i) * u(j) * u(a) * u(b);
  return green::influence_matrix(n4, pair);
}

struct NegdefCheck {
  double energy = 0.0;        ///< sum P : F(P)
  double elastic = 0.0;       ///< sum C0 F(P) : F(P)
  double relative_residual = 0.0;
};

/// Checks P : F(P) + C0 F(P) : F(P) = 0 summed over all modes of a periodic
/// n^3 field with random entries (mean mode removed).
inline NegdefCheck negdef_identity(const MaterialPair& pair, int n, std::uint64_t seed) {
  if (n < 2) throw ValidationError("negdef_identity: n >= 2 required");
  pair.validate();
  Rng rng(seed);
  const std::size_t total = static_cast<std::size_t>(n) * n * n;
  const std::size_t half = static_cast<std::size_t>(n) * n * (n / 2 + 1);
  std::vector<std::vector<std::complex<double>>> spec(6, std::vector<std::complex<double>>(half));
  {
    double* in = fftw_alloc_real(total);
    fftw_complex* out = fftw_alloc_complex(half);
    fftw_plan plan = fftw_plan_dft_r2c_3d(n, n, n, in, out, FFTW_ESTIMATE);
    for (int l = 0; l < 6; ++l) {
      for (std::size_t i = 0; i < total; ++i) in[i] = rng.normal();
      fftw_execute(plan);
      auto* o = reinterpret_cast<std::complex<double>*>(out);
      spec[l].assign(o, o + half);
    }
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
  const Tensor4<3>::Matrix c0 = matrix_tensor<3>(pair).coeffs();
  auto freq = [n](int i) { return i <= n / 2 ? i : i - n; };
  NegdefCheck chk;
  double scale = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c <= n / 2; ++c) {
        if (a == 0 && b == 0 && c == 0) continue;
        const std::size_t idx = (static_cast<std::size_t>(a) * n + b) * (n / 2 + 1) + c;
        // Modes with 0 < c < n/2 stand for a conjugate pair.
        const double mult = (c == 0 || (n % 2 == 0 && c == n / 2)) ? 1.0 : 2.0;
        const Tensor4<3>::Matrix g = fourier_symbol(Vec3(freq(a), freq(b), c), pair);
        Eigen::Matrix<std::complex<double>, 6, 1> p;
        for (int l = 0; l < 6; ++l) p(l) = spec[l][idx];
        const Eigen::Matrix<std::complex<double>, 6, 1> f = g.cast<std::complex<double>>() * p;
        const double e = mult * p.dot(f).real();
        const double el = mult * f.dot(c0.cast<std::complex<double>>() * f).real();
        chk.energy += e;
        chk.elastic += el;
        scale += std::abs(e);
      }
  chk.relative_residual = std::abs(chk.energy + chk.elastic) / scale;
  return chk;
}

}  // namespace eshelby
