#pragma once

// Discrete Green operator on a voxel grid.
//
// A polarization P that is uniform on a cubic cell V produces the
// displacement S_V[P n] and the strain
//   alpha2 [alpha sym(P Hess w_V) - d^4 p_V : P].
// Averaged over a target cell at integer offset m (cell size h), the fourth
// derivatives give the scale-free influence array
//   N4(m) = (1/4pi) int_{[-1,1]^3} tau(z) d^4 |z + m| dz,
// tau(z) = prod (1 - |z_i|) being the autocorrelation of the unit cell, and
// Hess w_V averages to N2(m)_kl = sum_i N4(m)_iikl.
//
// For offsets near the origin d^4|z| is not integrable over the tent support
// as a 3D integral, so one repeated axis is integrated by parts against the
// tent (tent'' = delta(-1) - 2 delta(0) + delta(1)), leaving 2D integrals of
// second derivatives of |z| with 1/r singularities, handled by Duffy
// transforms. Far offsets use plain tensor Gauss-Legendre on the eight unit
// cubes where tau is smooth.

#include <fftw3.h>

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "eshelby/error.hpp"
#include "eshelby/parallel.hpp"
#include "eshelby/potentials.hpp"
#include "eshelby/quadrature_rules.hpp"
#include "eshelby/tensor_core.hpp"
#include "eshelby/uniformity.hpp"

namespace eshelby {

using Offset = std::array<int, 3>;

namespace green {

/// d_i d_j |z|
inline double d2_abs(const Vec3& z, int i, int j) {
  const double r = z.norm();
  return ((i == j) ? 1.0 / r : 0.0) - z(i) * z(j) / (r * r * r);
}

/// The 15 index quadruples i <= j <= k <= l.
inline const std::array<std::array<int, 4>, 15>& sym4_indices() {
  static const auto idx = [] {
    std::array<std::array<int, 4>, 15> out{};
    int t = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j)
        for (int k = j; k < 3; ++k)
          for (int l = k; l < 3; ++l) out[t++] = {i, j, k, l};
    return out;
  }();
  return idx;
}

/// Independent components of d^4 |z| (order of sym4_indices), z != 0.
inline void d4_abs_unique(const Vec3& z, double* out) {
  const double r = z.norm();
  const double r3 = 1.0 / (r * r * r);
  const Vec3 u = z / r;
  auto dl = [](int a, int b) { return a == b ? 1.0 : 0.0; };
  const auto& idx = sym4_indices();
  for (int t = 0; t < 15; ++t) {
    const int i = idx[t][0], j = idx[t][1], k = idx[t][2], l = idx[t][3];
    const double dd = dl(i, j) * dl(k, l) + dl(i, k) * dl(j, l) + dl(i, l) * dl(j, k);
    const double du = dl(i, j) * u(k) * u(l) + dl(i, k) * u(j) * u(l) + dl(i, l) * u(j) * u(k) +
                      dl(j, k) * u(i) * u(l) + dl(j, l) * u(i) * u(k) + dl(k, l) * u(i) * u(j);
    out[t] = r3 * (-dd + 3.0 * du - 15.0 * u(i) * u(j) * u(k) * u(l));
  }
}

/// Expands 15 independent values into a fully symmetric array.
inline Array4 expand_sym4(const double* unique) {
  Array4 out;
  const auto& idx = sym4_indices();
  for (int t = 0; t < 15; ++t) {
    std::array<int, 4> id = idx[t];
    do {
      out(id[0], id[1], id[2], id[3]) = unique[t];
    } while (std::next_permutation(id.begin(), id.end()));
  }
  return out;
}

/// Fully symmetric d^4 |z| for z != 0.
inline Array4 d4_abs(const Vec3& z) {
  double u[15];
  d4_abs_unique(z, u);
  return expand_sym4(u);
}

/// int_{[-1,1]^2} t(u) t(v) g(u, v) du dv over the four unit squares. If
/// `singular` is set, g blows up like 1/r at the lattice point (su, sv) and
/// squares touching it are integrated with a Duffy transform at that corner.
template <class G>
double tent_integral_2d(G&& g, bool singular, int su, int sv, const quad::Rule1D& rule) {
  auto tent = [](double x) { return 1.0 - std::abs(x); };
  double total = 0.0;
  for (int u0 : {-1, 0})
    for (int v0 : {-1, 0}) {
      const bool touches = singular && (su == u0 || su == u0 + 1) && (sv == v0 || sv == v0 + 1);
      if (!touches) {
        for (std::size_t a = 0; a < rule.size(); ++a)
          for (std::size_t b = 0; b < rule.size(); ++b) {
            const double u = u0 + rule.nodes[a], v = v0 + rule.nodes[b];
            total += rule.weights[a] * rule.weights[b] * tent(u) * tent(v) * g(u, v);
          }
        continue;
      }
      // Corner P and the two triangles (P, P + du, P + du + dv), (P, P + du + dv, P + dv).
      const double du = (su == u0) ? 1.0 : -1.0;
      const double dv = (sv == v0) ? 1.0 : -1.0;
      const Eigen::Vector2d p(su, sv);
      const Eigen::Vector2d corners[2][2] = {{Eigen::Vector2d(du, 0.0), Eigen::Vector2d(du, dv)},
                                             {Eigen::Vector2d(du, dv), Eigen::Vector2d(0.0, dv)}};
      for (const auto& tri : corners) {
        for (std::size_t a = 0; a < rule.size(); ++a)
          for (std::size_t b = 0; b < rule.size(); ++b) {
            const double s = rule.nodes[a], t = rule.nodes[b];
            const Eigen::Vector2d x = p + s * (tri[0] + t * (tri[1] - tri[0]));
            total += rule.weights[a] * rule.weights[b] * s * tent(x(0)) * tent(x(1)) * g(x(0), x(1));
          }
      }
    }
  return total;
}

/// One component of N4(m) by integration by parts along an axis of
/// multiplicity >= 2. `mult` holds how often each axis occurs (sum 4).
inline double n4_component_reduced(const Offset& m, const std::array<int, 3>& mult, const quad::Rule1D& rule) {
  int a = 0;
  for (int i = 1; i < 3; ++i)
    if (mult[i] > mult[a]) a = i;
  if (mult[a] < 2) throw NumericalError("n4_component_reduced: no repeated axis");
  std::array<int, 3> rest = mult;
  rest[a] -= 2;
  int di = -1, dj = -1;
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < rest[i]; ++c) (di < 0 ? di : dj) = i;
  const int b = (a + 1) % 3, c = (a + 2) % 3;
  static constexpr double second_diff[3] = {1.0, -2.0, 1.0};
  double total = 0.0;
  for (int s = -1; s <= 1; ++s) {
    const double ya = m[a] + s;
    auto g = [&](double u, double v) {
      Vec3 z;
      z(a) = ya;
      z(b) = u + m[b];
      z(c) = v + m[c];
      return d2_abs(z, di, dj);
    };
    const bool singular = ya == 0.0 && std::abs(m[b]) <= 1 && std::abs(m[c]) <= 1;
    total += second_diff[s + 1] * tent_integral_2d(g, singular, -m[b], -m[c], rule);
  }
  return total * inv_four_pi;
}

/// Full N4(m) from the reduced 2D formulas.
inline Array4 n4_reduced(const Offset& m, int order = 24) {
  const auto rule = quad::gauss_legendre(order);
  Array4 out;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j)
      for (int k = j; k < 3; ++k)
        for (int l = k; l < 3; ++l) {
          std::array<int, 3> mult = {0, 0, 0};
          ++mult[i];
          ++mult[j];
          ++mult[k];
          ++mult[l];
          const double v = n4_component_reduced(m, mult, rule);
          const int id[4] = {i, j, k, l};
          std::array<int, 4> perm = {0, 1, 2, 3};
          do {
            out(id[perm[0]], id[perm[1]], id[perm[2]], id[perm[3]]) = v;
          } while (std::next_permutation(perm.begin(), perm.end()));
        }
  return out;
}

/// N4(m) by 3D Gauss-Legendre over the eight unit cubes; valid when the tent
/// support around m stays away from the origin (max |m_i| >= 2).
inline Array4 n4_direct(const Offset& m, int order) {
  const auto rule = quad::gauss_legendre(order);
  double acc[15] = {};
  double d[15];
  for (int c0 : {-1, 0})
    for (int c1 : {-1, 0})
      for (int c2 : {-1, 0})
        for (std::size_t a = 0; a < rule.size(); ++a)
          for (std::size_t b = 0; b < rule.size(); ++b)
            for (std::size_t c = 0; c < rule.size(); ++c) {
              const Vec3 z(c0 + rule.nodes[a], c1 + rule.nodes[b], c2 + rule.nodes[c]);
              const double w = rule.weights[a] * rule.weights[b] * rule.weights[c] * (1.0 - std::abs(z(0))) *
                               (1.0 - std::abs(z(1))) * (1.0 - std::abs(z(2)));
              d4_abs_unique(z + Vec3(m[0], m[1], m[2]), d);
              for (int t = 0; t < 15; ++t) acc[t] += w * d[t];
            }
  for (double& v : acc) v *= inv_four_pi;
  return expand_sym4(acc);
}

inline Array4 n4_canonical(const Offset& m) {
  const int linf = std::max({std::abs(m[0]), std::abs(m[1]), std::abs(m[2])});
  if (linf <= 2) return n4_reduced(m);
  if (linf <= 4) return n4_direct(m, 8);
  if (linf <= 8) return n4_direct(m, 5);
  return n4_direct(m, 4);
}

/// N4 for every canonical offset a >= b >= c >= 0 with a <= max_offset,
/// cached per max_offset.
class InfluenceTable {
 public:
  explicit InfluenceTable(int max_offset) : max_(max_offset) {
    std::vector<Offset> keys;
    for (int a = 0; a <= max_; ++a)
      for (int b = 0; b <= a; ++b)
        for (int c = 0; c <= b; ++c) keys.push_back({a, b, c});
    values_.resize(keys.size());
    parallel_for(keys.size(), [&](std::size_t i) { values_[i] = n4_canonical(keys[i]); });
    for (std::size_t i = 0; i < keys.size(); ++i) index_[keys[i]] = i;
  }

  int max_offset() const { return max_; }

  /// N4(m) for any m with |m_i| <= max_offset, by signed permutation of the
  /// canonical entry.
  Array4 operator()(const Offset& m) const {
    std::array<int, 3> axis = {0, 1, 2};
    std::sort(axis.begin(), axis.end(), [&](int x, int y) {
      return std::abs(m[x]) > std::abs(m[y]) || (std::abs(m[x]) == std::abs(m[y]) && x < y);
    });
    const Offset key = {std::abs(m[axis[0]]), std::abs(m[axis[1]]), std::abs(m[axis[2]])};
    const auto it = index_.find(key);
    if (it == index_.end()) throw ValidationError("offset outside the influence table");
    const Array4& base = values_[it->second];
    // world axis axis[p] corresponds to canonical axis p
    std::array<int, 3> pi{};
    std::array<double, 3> sgn{};
    for (int p = 0; p < 3; ++p) {
      pi[axis[p]] = p;
      sgn[axis[p]] = m[axis[p]] < 0 ? -1.0 : 1.0;
    }
    Array4 out;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k)
          for (int l = 0; l < 3; ++l)
            out(i, j, k, l) = sgn[i] * sgn[j] * sgn[k] * sgn[l] * base(pi[i], pi[j], pi[k], pi[l]);
    return out;
  }

 private:
  int max_;
  std::vector<Array4> values_;
  std::map<Offset, std::size_t> index_;
};

inline std::shared_ptr<const InfluenceTable> influence_table(int max_offset) {
  static std::mutex mutex;
  static std::map<int, std::shared_ptr<const InfluenceTable>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(max_offset);
  if (it != cache.end()) return it->second;
  auto t = std::make_shared<const InfluenceTable>(max_offset);
  cache[max_offset] = t;
  return t;
}

/// N2_kl = sum_i N4_iikl
inline Mat3 trace_pair(const Array4& n4) {
  Mat3 out;
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l) out(k, l) = n4(0, 0, k, l) + n4(1, 1, k, l) + n4(2, 2, k, l);
  return out;
}

/// Cell-averaged strain map P -> alpha2 [alpha sym(P N2) - N4 : P] in basis
/// coordinates:
///   G_kl = alpha2 [alpha tr(B_k B_l N2) - B_k : N4 : B_l].
inline Tensor4<3>::Matrix influence_matrix(const Array4& n4, const MaterialPair& pair) {
  static const Eigen::Matrix<double, 6, 9> vb = [] {
    Eigen::Matrix<double, 6, 9> v;
    const auto& basis = make_basis<3>();
    for (int k = 0; k < 6; ++k)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) v(k, 3 * i + j) = basis.elements[k](i, j);
    return v;
  }();
  Eigen::Matrix<double, 9, 9> n4m;
  for (int a = 0; a < 9; ++a)
    for (int b = 0; b < 9; ++b) n4m(a, b) = n4.v[9 * a + b];
  const Mat3 n2 = trace_pair(n4);
  // tr(B_k B_l N2) = sum_ij (B_k)_ij (B_l N2)_ji; with the 9 x 9 map
  // X -> X N2 acting on vec(B_l) and B_k symmetric.
  Eigen::Matrix<double, 9, 9> right = Eigen::Matrix<double, 9, 9>::Zero();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int a = 0; a < 3; ++a) right(3 * i + j, 3 * i + a) = n2(a, j);
  const Tensor4<3>::Matrix g =
      pair.alpha2() * (pair.alpha() * (vb * right * vb.transpose()) - vb * n4m * vb.transpose());
  return 0.5 * (g + g.transpose());
}

inline Tensor4<3> influence_tensor(const Array4& n4, const MaterialPair& pair) {
  return Tensor4<3>(influence_matrix(n4, pair));
}

}  // namespace green

using Coords6 = Eigen::Matrix<double, 6, 1>;

/// Convolution E_c = sum_c' G(c - c') Q_c' on an n^3 grid, evaluated with
/// FFTs on the zero-padded (2n)^3 grid.
class GreenOperator {
 public:
  GreenOperator(int n, const MaterialPair& pair) : n_(n), big_(2 * n), pair_(pair) {
    if (n < 1) throw ValidationError("grid size must be positive");
    table_ = green::influence_table(n - 1);
    self_ = green::influence_tensor((*table_)({0, 0, 0}), pair);
    const std::size_t real_size = static_cast<std::size_t>(big_) * big_ * big_;
    const std::size_t cplx_size = static_cast<std::size_t>(big_) * big_ * (big_ / 2 + 1);
    real_ = fftw_alloc_real(real_size);
    cplx_ = fftw_alloc_complex(cplx_size);
    {
      std::lock_guard<std::mutex> lock(plan_mutex());
      forward_ = fftw_plan_dft_r2c_3d(big_, big_, big_, real_, cplx_, FFTW_ESTIMATE);
      backward_ = fftw_plan_dft_c2r_3d(big_, big_, big_, cplx_, real_, FFTW_ESTIMATE);
    }
    // Kernel spectra, one per upper-triangular (k, l).
    std::vector<Tensor4<3>::Matrix> g(real_size, Tensor4<3>::Matrix::Zero());
    const int lim = n - 1;
    std::vector<Offset> offsets;
    for (int a = -lim; a <= lim; ++a)
      for (int b = -lim; b <= lim; ++b)
        for (int c = -lim; c <= lim; ++c) offsets.push_back({a, b, c});
    parallel_for(offsets.size(), [&](std::size_t t) {
      const Offset& m = offsets[t];
      g[wrap(m)] = green::influence_matrix((*table_)(m), pair_);
    });
    kernel_.resize(21);
    int slot = 0;
    for (int k = 0; k < 6; ++k)
      for (int l = k; l < 6; ++l, ++slot) {
        for (std::size_t i = 0; i < real_size; ++i) real_[i] = g[i](k, l);
        fftw_execute(forward_);
        kernel_[slot].assign(reinterpret_cast<std::complex<double>*>(cplx_),
                             reinterpret_cast<std::complex<double>*>(cplx_) + cplx_size);
      }
  }
  ~GreenOperator() {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_free(real_);
    fftw_free(cplx_);
  }
  GreenOperator(const GreenOperator&) = delete;
  GreenOperator& operator=(const GreenOperator&) = delete;

  int n() const { return n_; }
  const MaterialPair& pair() const { return pair_; }
  /// G(0): self influence of a cell.
  const Tensor4<3>& self() const { return self_; }
  Tensor4<3> influence(const Offset& m) const { return green::influence_tensor((*table_)(m), pair_); }
  const green::InfluenceTable& table() const { return *table_; }

  /// q and out are indexed like VoxelGrid cells.
  void convolve(const std::vector<Coords6>& q, std::vector<Coords6>& out) {
    const std::size_t cells = static_cast<std::size_t>(n_) * n_ * n_;
    if (q.size() != cells) throw ValidationError("convolve: field size does not match grid");
    const std::size_t real_size = static_cast<std::size_t>(big_) * big_ * big_;
    const std::size_t cplx_size = static_cast<std::size_t>(big_) * big_ * (big_ / 2 + 1);
    std::vector<std::vector<std::complex<double>>> spec(6);
    for (int l = 0; l < 6; ++l) {
      std::fill(real_, real_ + real_size, 0.0);
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j)
          for (int k = 0; k < n_; ++k) real_[big_index(i, j, k)] = q[cell_index(i, j, k)](l);
      fftw_execute(forward_);
      spec[l].assign(reinterpret_cast<std::complex<double>*>(cplx_),
                     reinterpret_cast<std::complex<double>*>(cplx_) + cplx_size);
    }
    out.assign(cells, Coords6::Zero());
    auto* c = reinterpret_cast<std::complex<double>*>(cplx_);
    const double scale = 1.0 / static_cast<double>(real_size);
    for (int k = 0; k < 6; ++k) {
      for (std::size_t i = 0; i < cplx_size; ++i) {
        std::complex<double> acc = 0.0;
        for (int l = 0; l < 6; ++l) acc += kernel_[slot(k, l)][i] * spec[l][i];
        c[i] = acc;
      }
      fftw_execute(backward_);
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j)
          for (int kk = 0; kk < n_; ++kk) out[cell_index(i, j, kk)](k) = scale * real_[big_index(i, j, kk)];
    }
  }

  /// Same convolution by direct summation over all cell pairs (reference).
  void convolve_dense(const std::vector<Coords6>& q, std::vector<Coords6>& out) const {
    const std::size_t cells = static_cast<std::size_t>(n_) * n_ * n_;
    out.assign(cells, Coords6::Zero());
    parallel_for(cells, [&](std::size_t t) {
      const int i = static_cast<int>(t / (n_ * n_)), j = static_cast<int>((t / n_) % n_), k = static_cast<int>(t % n_);
      Coords6 acc = Coords6::Zero();
      for (int a = 0; a < n_; ++a)
        for (int b = 0; b < n_; ++b)
          for (int c = 0; c < n_; ++c)
            acc += influence({i - a, j - b, k - c}).coeffs() * q[cell_index(a, b, c)];
      out[t] = acc;
    });
  }

 private:
  static std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
  }
  std::size_t cell_index(int i, int j, int k) const { return (static_cast<std::size_t>(i) * n_ + j) * n_ + k; }
  std::size_t big_index(int i, int j, int k) const { return (static_cast<std::size_t>(i) * big_ + j) * big_ + k; }
  std::size_t wrap(const Offset& m) const {
    auto w = [this](int x) { return x < 0 ? x + big_ : x; };
    return big_index(w(m[0]), w(m[1]), w(m[2]));
  }
  static int slot(int k, int l) {
    if (k > l) std::swap(k, l);
    return k * 6 - k * (k - 1) / 2 + (l - k);
  }

  int n_;
  int big_;
  MaterialPair pair_;
  std::shared_ptr<const green::InfluenceTable> table_;
  Tensor4<3> self_;
  double* real_ = nullptr;
  fftw_complex* cplx_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
  std::vector<std::vector<std::complex<double>>> kernel_;
};

}  // namespace eshelby
