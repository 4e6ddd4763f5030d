#pragma once

// Inclusion shapes, their surface/volume quadratures, interior sampling,
// voxelization and OFF mesh input.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "eshelby/error.hpp"
#include "eshelby/quadrature_rules.hpp"
#include "eshelby/random.hpp"

namespace eshelby {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class ShapeKind { Ball, Ellipsoid, Cuboid, Superellipsoid, TriMesh };

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::string path;

  /// Signed volume, positive for outward orientation.
  double signed_volume() const {
    double v = 0.0;
    for (const auto& f : faces) v += vertices[f[0]].dot(vertices[f[1]].cross(vertices[f[2]]));
    return v / 6.0;
  }
  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    double v = 0.0;
    for (const auto& f : faces) {
      const double dv = vertices[f[0]].dot(vertices[f[1]].cross(vertices[f[2]])) / 6.0;
      c += dv * (vertices[f[0]] + vertices[f[1]] + vertices[f[2]]) / 4.0;
      v += dv;
    }
    return c / v;
  }
};

/// Parses an ASCII OFF file. Polygons are fan-triangulated. The surface must
/// be closed (every edge shared by exactly two faces); inward orientation is
/// flipped with a warning on stderr.
TriMesh load_mesh(const std::string& path);

/// A bounded inclusion. The local shape is centered at the origin; the world
/// shape is rotation * (scale * local).
class Shape {
 public:
  static Shape ball(double r) { return make(ShapeKind::Ball, Vec3(r, r, r), 2.0); }
  static Shape ellipsoid(double a, double b, double c) {
    return make(ShapeKind::Ellipsoid, Vec3(a, b, c), 2.0);
  }
  static Shape cuboid(double lx, double ly, double lz) {
    return make(ShapeKind::Cuboid, Vec3(lx, ly, lz), 0.0);
  }
  static Shape superellipsoid(double a, double b, double c, double p) {
    if (!(p >= 1.0) || !std::isfinite(p)) throw ValidationError("superellipsoid exponent must be >= 1");
    return make(ShapeKind::Superellipsoid, Vec3(a, b, c), p);
  }
  static Shape mesh(TriMesh m) {
    if (m.faces.empty()) throw ValidationError("empty mesh");
    Shape s;
    s.kind_ = ShapeKind::TriMesh;
    s.dims_ = Vec3::Ones();
    s.mesh_ = std::make_shared<const TriMesh>(std::move(m));
    s.mesh_volume_ = s.mesh_->signed_volume();
    s.mesh_center_ = s.mesh_->centroid();
    return s;
  }
  static Shape from_mesh_file(const std::string& path) { return mesh(load_mesh(path)); }

  ShapeKind kind() const { return kind_; }
  /// Semi-axes (ball, ellipsoid, superellipsoid) or edge lengths (cuboid),
  /// before scaling.
  const Vec3& dims() const { return dims_; }
  double exponent() const { return p_; }
  double scale() const { return scale_; }
  const Mat3& rotation() const { return rot_; }
  const TriMesh* mesh_data() const { return mesh_.get(); }

  /// Ellipsoid family (ball, ellipsoid, superellipsoid with p = 2).
  bool is_ellipsoid() const {
    return kind_ == ShapeKind::Ball || kind_ == ShapeKind::Ellipsoid ||
           (kind_ == ShapeKind::Superellipsoid && p_ == 2.0);
  }
  /// Semi-axes after scaling (ellipsoid family only).
  Vec3 semi_axes() const {
    if (!is_ellipsoid()) throw ValidationError("shape is not an ellipsoid");
    return scale_ * dims_;
  }

  Shape scaled(double s) const {
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("scale must be positive");
    Shape out = *this;
    out.scale_ *= s;
    return out;
  }
  Shape rotated(const Mat3& q) const {
    if ((q.transpose() * q - Mat3::Identity()).norm() > 1e-10 || q.determinant() < 0.0)
      throw ValidationError("rotation must be a proper orthogonal matrix");
    Shape out = *this;
    out.rot_ = q * rot_;
    return out;
  }

  double volume() const {
    const double s3 = scale_ * scale_ * scale_;
    const Vec3& d = dims_;
    switch (kind_) {
      case ShapeKind::Ball:
      case ShapeKind::Ellipsoid:
        return s3 * 4.0 / 3.0 * std::numbers::pi * d.prod();
      case ShapeKind::Cuboid:
        return s3 * d.prod();
      case ShapeKind::Superellipsoid: {
        const double g = std::tgamma(1.0 + 1.0 / p_);
        return s3 * 8.0 * d.prod() * g * g * g / std::tgamma(1.0 + 3.0 / p_);
      }
      case ShapeKind::TriMesh:
        return s3 * mesh_volume_;
    }
    return 0.0;
  }

  /// Point inside or on the boundary.
  bool contains(const Vec3& x) const {
    const Vec3 y = rot_.transpose() * x / scale_;
    switch (kind_) {
      case ShapeKind::Ball:
      case ShapeKind::Ellipsoid:
        return y.cwiseQuotient(dims_).squaredNorm() <= 1.0;
      case ShapeKind::Cuboid:
        return (y.cwiseAbs() - 0.5 * dims_).maxCoeff() <= 0.0;
      case ShapeKind::Superellipsoid: {
        double s = 0.0;
        for (int i = 0; i < 3; ++i) s += std::pow(std::abs(y(i)) / dims_(i), p_);
        return s <= 1.0;
      }
      case ShapeKind::TriMesh:
        return winding_number(y) > 0.5;
    }
    return false;
  }

  /// Generalized winding number of the (unscaled) mesh around y.
  double winding_number(const Vec3& y) const {
    double omega = 0.0;
    for (const auto& f : mesh_->faces) {
      const Vec3 a = mesh_->vertices[f[0]] - y;
      const Vec3 b = mesh_->vertices[f[1]] - y;
      const Vec3 c = mesh_->vertices[f[2]] - y;
      const double la = a.norm(), lb = b.norm(), lc = c.norm();
      const double num = a.dot(b.cross(c));
      const double den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
      omega += 2.0 * std::atan2(num, den);
    }
    return omega / (4.0 * std::numbers::pi);
  }

  /// Axis-aligned world bounding box.
  std::pair<Vec3, Vec3> bounding_box() const {
    Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
    auto add = [&](const Vec3& local) {
      const Vec3 w = rot_ * (scale_ * local);
      lo = lo.cwiseMin(w);
      hi = hi.cwiseMax(w);
    };
    if (kind_ == ShapeKind::TriMesh) {
      for (const auto& v : mesh_->vertices) add(v);
      return {lo, hi};
    }
    if (is_ellipsoid() && kind_ != ShapeKind::Superellipsoid) {
      // Exact box of a rotated ellipsoid: half-width_i = |row_i(R D)|.
      const Mat3 rd = rot_ * (scale_ * dims_).asDiagonal();
      const Vec3 half = rd.rowwise().norm();
      return {-half, half};
    }
    const Vec3 half = kind_ == ShapeKind::Cuboid ? Vec3(0.5 * dims_) : dims_;
    for (int m = 0; m < 8; ++m)
      add(Vec3((m & 1) ? half(0) : -half(0), (m & 2) ? half(1) : -half(1), (m & 4) ? half(2) : -half(2)));
    return {lo, hi};
  }

  /// Diameter: exact for the ellipsoid family, bounding-box diagonal
  /// otherwise (an upper bound).
  double diameter() const {
    if (is_ellipsoid()) return 2.0 * scale_ * dims_.maxCoeff();
    if (kind_ == ShapeKind::Cuboid || kind_ == ShapeKind::Superellipsoid) {
      const Vec3 half = kind_ == ShapeKind::Cuboid ? Vec3(0.5 * dims_) : dims_;
      return 2.0 * scale_ * half.norm();
    }
    auto [lo, hi] = bounding_box();
    return (hi - lo).norm();
  }

  /// Star center used by the cone volume rule.
  Vec3 center() const {
    if (kind_ == ShapeKind::TriMesh) return rot_ * (scale_ * mesh_center_);
    return Vec3::Zero();
  }

  /// Shape grammar: ball:r, ellipsoid:a,b,c, cuboid:lx,ly,lz,
  /// superellipsoid:a,b,c,p, mesh:path. Scale is folded into the numbers.
  std::string to_string() const;

 private:
  static Shape make(ShapeKind k, const Vec3& d, double p) {
    if (!(d.minCoeff() > 0.0) || !d.allFinite()) throw ValidationError("shape dimensions must be positive");
    Shape s;
    s.kind_ = k;
    s.dims_ = d;
    s.p_ = p;
    return s;
  }

  ShapeKind kind_ = ShapeKind::Ball;
  Vec3 dims_ = Vec3::Ones();
  double p_ = 2.0;
  double scale_ = 1.0;
  Mat3 rot_ = Mat3::Identity();
  std::shared_ptr<const TriMesh> mesh_;
  double mesh_volume_ = 0.0;
  Vec3 mesh_center_ = Vec3::Zero();
};

inline std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string Shape::to_string() const {
  const Vec3 d = scale_ * dims_;
  auto f = [](double v) { return format_number(v); };
  switch (kind_) {
    case ShapeKind::Ball:
      return "ball:" + f(d(0));
    case ShapeKind::Ellipsoid:
      return "ellipsoid:" + f(d(0)) + "," + f(d(1)) + "," + f(d(2));
    case ShapeKind::Cuboid:
      return "cuboid:" + f(d(0)) + "," + f(d(1)) + "," + f(d(2));
    case ShapeKind::Superellipsoid:
      return "superellipsoid:" + f(d(0)) + "," + f(d(1)) + "," + f(d(2)) + "," + f(p_);
    case ShapeKind::TriMesh:
      return "mesh:" + mesh_->path + (scale_ != 1.0 ? "@" + f(scale_) : std::string());
  }
  return "";
}

namespace detail {

inline std::vector<double> parse_numbers(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ValidationError("bad number '" + item + "' in " + what);
    }
    if (used != item.size()) throw ValidationError("bad number '" + item + "' in " + what);
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

/// Inverse of Shape::to_string. A mesh may carry a scale suffix "@s".
inline Shape parse_shape(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ValidationError("shape '" + text + "' has no ':'");
  const std::string kind = text.substr(0, colon);
  const std::string args = text.substr(colon + 1);
  if (kind == "mesh") {
    const auto at = args.rfind('@');
    if (at != std::string::npos) {
      const auto s = detail::parse_numbers(args.substr(at + 1), text);
      if (s.size() != 1) throw ValidationError("bad mesh scale in '" + text + "'");
      return Shape::from_mesh_file(args.substr(0, at)).scaled(s[0]);
    }
    return Shape::from_mesh_file(args);
  }
  const auto v = detail::parse_numbers(args, text);
  auto need = [&](std::size_t n) {
    if (v.size() != n) throw ValidationError("shape '" + kind + "' takes " + std::to_string(n) + " numbers");
  };
  if (kind == "ball") {
    need(1);
    return Shape::ball(v[0]);
  }
  if (kind == "ellipsoid") {
    need(3);
    return Shape::ellipsoid(v[0], v[1], v[2]);
  }
  if (kind == "cuboid") {
    need(3);
    return Shape::cuboid(v[0], v[1], v[2]);
  }
  if (kind == "superellipsoid") {
    need(4);
    return Shape::superellipsoid(v[0], v[1], v[2], v[3]);
  }
  throw ValidationError("unknown shape kind '" + kind + "'");
}

/// Uniformly rescaled copy with unit volume.
inline Shape normalize_volume(const Shape& s) {
  const double v = s.volume();
  if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("degenerate shape (volume " + format_number(v) + ")");
  return s.scaled(std::cbrt(1.0 / v));
}

// ---------------------------------------------------------------------------
// Quadratures

struct SurfQuad {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<double> weights;
  /// Largest distance between neighbouring nodes (resolution scale).
  double spacing = 0.0;

  std::size_t size() const { return points.size(); }
  double area() const {
    double a = 0.0;
    for (double w : weights) a += w;
    return a;
  }
  void add(const Vec3& x, const Vec3& n, double w) {
    points.push_back(x);
    normals.push_back(n);
    weights.push_back(w);
  }
};

struct VolQuad {
  std::vector<Vec3> points;
  std::vector<double> weights;
  double volume() const {
    double v = 0.0;
    for (double w : weights) v += w;
    return v;
  }
};

namespace detail {

/// Icosahedron with outward-oriented faces, vertices on the unit sphere.
inline void icosahedron(std::vector<Vec3>& verts, std::vector<std::array<int, 3>>& faces) {
  const double g = std::numbers::phi;
  verts.clear();
  for (double s1 : {-1.0, 1.0})
    for (double s2 : {-1.0, 1.0}) {
      verts.emplace_back(0.0, s1, s2 * g);
      verts.emplace_back(s1, s2 * g, 0.0);
      verts.emplace_back(s2 * g, 0.0, s1);
    }
  faces.clear();
  const int n = static_cast<int>(verts.size());
  auto adjacent = [&](int i, int j) { return std::abs((verts[i] - verts[j]).norm() - 2.0) < 1e-9; };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k)
        if (adjacent(i, j) && adjacent(j, k) && adjacent(i, k)) {
          const Vec3 nrm = (verts[j] - verts[i]).cross(verts[k] - verts[i]);
          if (nrm.dot(verts[i]) > 0.0)
            faces.push_back({i, j, k});
          else
            faces.push_back({i, k, j});
        }
  for (auto& v : verts) v.normalize();
}

inline SurfQuad ellipsoid_surface(const Vec3& axes, double p, int level, const Mat3& rot) {
  (void)p;
  std::vector<Vec3> iv;
  std::vector<std::array<int, 3>> ifaces;
  icosahedron(iv, ifaces);
  const int f = 2 * level;
  const int q = 5;
  const auto tri = quad::triangle_rule(q);
  const Mat3 d = axes.asDiagonal();
  const Vec3 inv2 = axes.cwiseProduct(axes).cwiseInverse();
  SurfQuad sq;
  sq.points.reserve(20 * f * f * tri.size());
  double max_edge = 0.0;
  auto emit = [&](const Vec3& p0, const Vec3& p1, const Vec3& p2) {
    const Vec3 e1 = p1 - p0, e2 = p2 - p0;
    for (const auto& node : tri) {
      const Vec3 pp = p0 + node.u * e1 + node.v * e2;
      const double len = pp.norm();
      const Vec3 xs = pp / len;
      const Mat3 proj = (Mat3::Identity() - xs * xs.transpose()) / len;
      const Vec3 ys = d * (proj * e1);
      const Vec3 yt = d * (proj * e2);
      const Vec3 y = d * xs;
      const Vec3 nrm = y.cwiseProduct(inv2).normalized();
      sq.add(rot * y, rot * nrm, node.w * ys.cross(yt).norm());
    }
    const double edge = std::max({(d * (p1 - p0)).norm(), (d * (p2 - p0)).norm(), (d * (p2 - p1)).norm()});
    max_edge = std::max(max_edge, edge);
  };
  for (const auto& fc : ifaces) {
    const Vec3 a = iv[fc[0]], b = iv[fc[1]], c = iv[fc[2]];
    auto vert = [&](int i, int j) { return Vec3(a + (double(i) / f) * (b - a) + (double(j) / f) * (c - a)); };
    for (int i = 0; i < f; ++i)
      for (int j = 0; i + j < f; ++j) {
        emit(vert(i, j), vert(i + 1, j), vert(i, j + 1));
        if (i + j <= f - 2) emit(vert(i + 1, j), vert(i + 1, j + 1), vert(i, j + 1));
      }
  }
  sq.spacing = max_edge / q;
  return sq;
}

inline SurfQuad cuboid_surface(const Vec3& edges, int level, const Mat3& rot) {
  const int m = 2 * level;
  const int q = 6;
  const auto g = quad::gauss_legendre(q);
  SurfQuad sq;
  for (int axis = 0; axis < 3; ++axis) {
    const int b = (axis + 1) % 3, c = (axis + 2) % 3;
    const double hb = edges(b) / m, hc = edges(c) / m;
    for (double sign : {-1.0, 1.0}) {
      Vec3 nrm = Vec3::Zero();
      nrm(axis) = sign;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
          for (int u = 0; u < q; ++u)
            for (int v = 0; v < q; ++v) {
              Vec3 x;
              x(axis) = sign * 0.5 * edges(axis);
              x(b) = -0.5 * edges(b) + (i + g.nodes[u]) * hb;
              x(c) = -0.5 * edges(c) + (j + g.nodes[v]) * hc;
              sq.add(rot * x, rot * nrm, g.weights[u] * g.weights[v] * hb * hc);
            }
    }
  }
  sq.spacing = std::max({edges(0), edges(1), edges(2)}) / m / q * std::sqrt(2.0);
  return sq;
}

/// Superellipsoid |x/a|^p + |y/b|^p + |z/c|^p = 1 parametrized by radial
/// projection of the faces of the cube [-1, 1]^3.
inline SurfQuad superellipsoid_surface(const Vec3& axes, double p, int level, const Mat3& rot) {
  const int m = 2 * level;
  const int q = 6;
  const auto g = quad::gauss_legendre(q);
  SurfQuad sq;
  double max_step = 0.0;
  auto point = [&](const Vec3& dir, Vec3& x, double& rho, double& sum) {
    sum = 0.0;
    for (int i = 0; i < 3; ++i) sum += std::pow(std::abs(dir(i)) / axes(i), p);
    rho = std::pow(sum, -1.0 / p);
    x = rho * dir;
  };
  for (int axis = 0; axis < 3; ++axis) {
    const int b = (axis + 1) % 3, c = (axis + 2) % 3;
    for (double sign : {-1.0, 1.0}) {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          const double s0 = -1.0 + 2.0 * i / m, t0 = -1.0 + 2.0 * j / m, h = 2.0 / m;
          for (int u = 0; u < q; ++u)
            for (int v = 0; v < q; ++v) {
              Vec3 dir = Vec3::Zero();
              dir(axis) = sign;
              dir(b) = s0 + g.nodes[u] * h;
              dir(c) = t0 + g.nodes[v] * h;
              Vec3 x;
              double rho = 0.0, sum = 0.0;
              point(dir, x, rho, sum);
              // d rho / d dir_k
              auto drho = [&](int k) {
                const double dk = dir(k);
                const double ds = p * std::pow(std::abs(dk), p - 1.0) * (dk < 0 ? -1.0 : 1.0) / std::pow(axes(k), p);
                return -(1.0 / p) * std::pow(sum, -1.0 / p - 1.0) * ds;
              };
              Vec3 eb = Vec3::Zero(), ec = Vec3::Zero();
              eb(b) = 1.0;
              ec(c) = 1.0;
              const Vec3 xs = rho * eb + drho(b) * dir;
              const Vec3 xt = rho * ec + drho(c) * dir;
              Vec3 nrm;
              for (int k = 0; k < 3; ++k)
                nrm(k) = std::pow(std::abs(x(k)), p - 1.0) * (x(k) < 0 ? -1.0 : 1.0) / std::pow(axes(k), p);
              nrm.normalize();
              const double jac = xs.cross(xt).norm();
              sq.add(rot * x, rot * nrm, g.weights[u] * g.weights[v] * h * h * jac);
              max_step = std::max(max_step, std::max(xs.norm(), xt.norm()) * h / q);
            }
        }
    }
  }
  sq.spacing = max_step * std::sqrt(2.0);
  return sq;
}

inline SurfQuad mesh_surface(const TriMesh& mesh, double scale, const Mat3& rot, int level) {
  const int q = std::max(2, level);
  const auto tri = quad::triangle_rule(q);
  SurfQuad sq;
  double max_edge = 0.0;
  for (const auto& f : mesh.faces) {
    const Vec3 a = scale * mesh.vertices[f[0]];
    const Vec3 b = scale * mesh.vertices[f[1]];
    const Vec3 c = scale * mesh.vertices[f[2]];
    const Vec3 cr = (b - a).cross(c - a);
    const double area2 = cr.norm();
    if (area2 == 0.0) continue;
    const Vec3 nrm = cr / area2;
    for (const auto& node : tri) sq.add(rot * (a + node.u * (b - a) + node.v * (c - a)), rot * nrm, node.w * area2);
    max_edge = std::max({max_edge, (b - a).norm(), (c - a).norm(), (c - b).norm()});
  }
  sq.spacing = max_edge / q;
  return sq;
}

}  // namespace detail

/// Surface rule on the boundary. Resolution grows linearly with level.
inline SurfQuad surface_quadrature(const Shape& s, int level) {
  if (level < 1) throw ValidationError("quadrature level must be >= 1");
  switch (s.kind()) {
    case ShapeKind::Ball:
    case ShapeKind::Ellipsoid:
      return detail::ellipsoid_surface(s.scale() * s.dims(), 2.0, level, s.rotation());
    case ShapeKind::Cuboid:
      return detail::cuboid_surface(s.scale() * s.dims(), level, s.rotation());
    case ShapeKind::Superellipsoid:
      return detail::superellipsoid_surface(s.scale() * s.dims(), s.exponent(), level, s.rotation());
    case ShapeKind::TriMesh:
      return detail::mesh_surface(*s.mesh_data(), s.scale(), s.rotation(), level);
  }
  throw ValidationError("unknown shape");
}

/// Cone rule: each surface node is joined to the star center and the segment
/// integrated with Gauss-Legendre in the radial variable. Requires the shape
/// to be star-shaped about its center.
inline VolQuad volume_quadrature(const Shape& s, int level) {
  const SurfQuad sq = surface_quadrature(s, level);
  const Vec3 c = s.center();
  const auto radial = quad::gauss_legendre(std::max(4, 2 * level));
  VolQuad vq;
  vq.points.reserve(sq.size() * radial.size());
  for (std::size_t i = 0; i < sq.size(); ++i) {
    const Vec3 r = sq.points[i] - c;
    const double cone = sq.weights[i] * r.dot(sq.normals[i]);
    for (std::size_t k = 0; k < radial.size(); ++k) {
      const double t = radial.nodes[k];
      vq.points.push_back(c + t * r);
      vq.weights.push_back(cone * t * t * radial.weights[k]);
    }
  }
  return vq;
}

/// Deterministic interior points at distance >= margin_frac * diameter from
/// every surface node.
inline std::vector<Vec3> sample_interior(const Shape& s, const SurfQuad& sq, int count, std::uint64_t seed,
                                         double margin_frac = 0.05) {
  if (count < 1) throw ValidationError("sample count must be positive");
  Rng rng(seed);
  auto [lo, hi] = s.bounding_box();
  const double margin = margin_frac * s.diameter();
  const double m2 = margin * margin;
  std::vector<Vec3> out;
  const long max_tries = 20000L * count;
  for (long tries = 0; static_cast<int>(out.size()) < count; ++tries) {
    if (tries > max_tries) throw NumericalError("could not place interior samples with the requested margin");
    const Vec3 x(rng.uniform(lo(0), hi(0)), rng.uniform(lo(1), hi(1)), rng.uniform(lo(2), hi(2)));
    if (!s.contains(x)) continue;
    bool ok = true;
    for (const auto& y : sq.points)
      if ((x - y).squaredNorm() < m2) {
        ok = false;
        break;
      }
    if (ok) out.push_back(x);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Voxelization

struct VoxelGrid {
  int n = 0;
  double cell = 0.0;
  Vec3 origin = Vec3::Zero();
  std::vector<double> fractions;

  std::size_t index(int i, int j, int k) const { return (static_cast<std::size_t>(i) * n + j) * n + k; }
  Vec3 center(int i, int j, int k) const { return origin + cell * Vec3(i + 0.5, j + 0.5, k + 0.5); }
  double occupied_volume() const {
    double v = 0.0;
    for (double f : fractions) v += f;
    return v * cell * cell * cell;
  }
};

namespace detail {

/// Sorted z coordinates where the vertical line through (x, y) crosses the
/// mesh surface (world coordinates).
inline std::vector<double> column_crossings(const std::vector<std::array<Vec3, 3>>& tris, double x, double y) {
  std::vector<double> zs;
  for (const auto& t : tris) {
    const double x0 = t[0](0), y0 = t[0](1), x1 = t[1](0), y1 = t[1](1), x2 = t[2](0), y2 = t[2](1);
    const double det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    if (det == 0.0) continue;
    const double u = ((x - x0) * (y2 - y0) - (x2 - x0) * (y - y0)) / det;
    const double v = ((x1 - x0) * (y - y0) - (x - x0) * (y1 - y0)) / det;
    if (u < 0.0 || v < 0.0 || u + v > 1.0) continue;
    zs.push_back(t[0](2) + u * (t[1](2) - t[0](2)) + v * (t[2](2) - t[0](2)));
  }
  std::sort(zs.begin(), zs.end());
  return zs;
}

}  // namespace detail

/// Occupancy fractions on an n^3 grid of cubic cells covering the bounding
/// box (the longest side spans n cells). Cells near the boundary are
/// subsampled with 8^3 points.
inline VoxelGrid voxelize(const Shape& s, int n) {
  if (n < 2) throw ValidationError("voxel grid needs n >= 2");
  auto [lo, hi] = s.bounding_box();
  const double side = (hi - lo).maxCoeff();
  VoxelGrid g;
  g.n = n;
  g.cell = side / n;
  g.origin = 0.5 * (lo + hi) - Vec3::Constant(0.5 * side);
  g.fractions.assign(static_cast<std::size_t>(n) * n * n, 0.0);
  constexpr int sub = 8;

  if (s.kind() == ShapeKind::TriMesh) {
    const TriMesh& m = *s.mesh_data();
    std::vector<std::array<Vec3, 3>> tris;
    tris.reserve(m.faces.size());
    for (const auto& f : m.faces)
      tris.push_back({s.rotation() * (s.scale() * m.vertices[f[0]]), s.rotation() * (s.scale() * m.vertices[f[1]]),
                      s.rotation() * (s.scale() * m.vertices[f[2]])});
    const int cols = n * sub;
    const double h = g.cell / sub;
    for (int a = 0; a < cols; ++a)
      for (int b = 0; b < cols; ++b) {
        // Tiny offsets keep the ray off mesh edges and vertices.
        const double x = g.origin(0) + (a + 0.5) * h + 1.234567e-9 * side;
        const double y = g.origin(1) + (b + 0.5) * h + 2.345678e-9 * side;
        const auto zs = detail::column_crossings(tris, x, y);
        for (std::size_t t = 0; t + 1 < zs.size(); t += 2) {
          const int c0 = std::max(0, static_cast<int>(std::ceil((zs[t] - g.origin(2)) / h - 0.5)));
          const int c1 = std::min(cols - 1, static_cast<int>(std::floor((zs[t + 1] - g.origin(2)) / h - 0.5)));
          for (int c = c0; c <= c1; ++c) g.fractions[g.index(a / sub, b / sub, c / sub)] += 1.0;
        }
      }
    for (double& f : g.fractions) f /= sub * sub * sub;
    return g;
  }

  const int nc = n + 1;
  std::vector<char> corner(static_cast<std::size_t>(nc) * nc * nc);
  auto cidx = [nc](int i, int j, int k) { return (static_cast<std::size_t>(i) * nc + j) * nc + k; };
  for (int i = 0; i < nc; ++i)
    for (int j = 0; j < nc; ++j)
      for (int k = 0; k < nc; ++k) corner[cidx(i, j, k)] = s.contains(g.origin + g.cell * Vec3(i, j, k)) ? 1 : 0;

  std::vector<char> mixed(g.fractions.size(), 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        int in = 0;
        for (int m = 0; m < 8; ++m) in += corner[cidx(i + (m & 1), j + ((m >> 1) & 1), k + ((m >> 2) & 1))];
        g.fractions[g.index(i, j, k)] = in == 8 ? 1.0 : 0.0;
        mixed[g.index(i, j, k)] = (in != 0 && in != 8) ? 1 : 0;
      }
  // Dilate the mixed set by one cell: the surface can cut a cell without
  // separating its corners.
  std::vector<char> refine = mixed;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        if (!mixed[g.index(i, j, k)]) continue;
        for (int di = -1; di <= 1; ++di)
          for (int dj = -1; dj <= 1; ++dj)
            for (int dk = -1; dk <= 1; ++dk) {
              const int a = i + di, b = j + dj, c = k + dk;
              if (a >= 0 && b >= 0 && c >= 0 && a < n && b < n && c < n) refine[g.index(a, b, c)] = 1;
            }
      }
  const double h = g.cell / sub;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        if (!refine[g.index(i, j, k)]) continue;
        int in = 0;
        const Vec3 base = g.origin + g.cell * Vec3(i, j, k);
        for (int a = 0; a < sub; ++a)
          for (int b = 0; b < sub; ++b)
            for (int c = 0; c < sub; ++c) in += s.contains(base + h * Vec3(a + 0.5, b + 0.5, c + 0.5));
        g.fractions[g.index(i, j, k)] = static_cast<double>(in) / (sub * sub * sub);
      }
  return g;
}

// ---------------------------------------------------------------------------
// OFF input

inline TriMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open mesh file '" + path + "'");
  // Token stream with '#' comments removed.
  std::stringstream body;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    body << line << '\n';
  }
  std::string header;
  if (!(body >> header) || header != "OFF") throw FileError("'" + path + "' is not an OFF file");
  long nv = 0, nf = 0, ne = 0;
  if (!(body >> nv >> nf >> ne) || nv < 4 || nf < 4) throw FileError("malformed OFF header in '" + path + "'");
  TriMesh m;
  m.path = path;
  m.vertices.resize(nv);
  for (long i = 0; i < nv; ++i) {
    double x, y, z;
    if (!(body >> x >> y >> z)) throw FileError("malformed OFF vertex list in '" + path + "'");
    m.vertices[i] = Vec3(x, y, z);
  }
  for (long f = 0; f < nf; ++f) {
    int k = 0;
    if (!(body >> k) || k < 3) throw FileError("malformed OFF face in '" + path + "'");
    std::vector<int> idx(k);
    for (int& v : idx) {
      if (!(body >> v) || v < 0 || v >= nv) throw FileError("bad vertex index in OFF face in '" + path + "'");
    }
    // Optional per-face color values are ignored up to end of line.
    std::string rest;
    std::getline(body, rest);
    for (int t = 1; t + 1 < k; ++t) m.faces.push_back({idx[0], idx[t], idx[t + 1]});
  }
  // Closedness and consistent orientation: each directed edge used once and
  // its reverse used exactly once.
  std::map<std::pair<int, int>, int> directed;
  for (const auto& f : m.faces)
    for (int e = 0; e < 3; ++e) ++directed[{f[e], f[(e + 1) % 3]}];
  for (const auto& [edge, count] : directed) {
    if (count != 1) throw FileError("mesh '" + path + "' is not a consistently oriented closed surface");
    auto rev = directed.find({edge.second, edge.first});
    if (rev == directed.end()) throw FileError("mesh '" + path + "' is not closed");
  }
  if (m.signed_volume() < 0.0) {
    std::cerr << "warning: mesh '" << path << "' is inward oriented; flipping faces\n";
    for (auto& f : m.faces) std::swap(f[1], f[2]);
  }
  return m;
}

/// Writes an ASCII OFF file.
inline void save_mesh(const TriMesh& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FileError("cannot write mesh file '" + path + "'");
  out.precision(17);
  out << "OFF\n" << m.vertices.size() << ' ' << m.faces.size() << " 0\n";
  for (const auto& v : m.vertices) out << v(0) << ' ' << v(1) << ' ' << v(2) << '\n';
  for (const auto& f : m.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
}

/// Icosphere of radius r: icosahedron refined `subdivisions` times by edge
/// midpoints, vertices pushed to the sphere.
inline TriMesh make_icosphere(int subdivisions, double r = 1.0) {
  TriMesh m;
  detail::icosahedron(m.vertices, m.faces);
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      const int id = static_cast<int>(m.vertices.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    for (const auto& f : m.faces) {
      const int ab = midpoint(f[0], f[1]), bc = midpoint(f[1], f[2]), ca = midpoint(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.faces = std::move(next);
  }
  for (auto& v : m.vertices) v *= r;
  m.path = "icosphere";
  return m;
}

}  // namespace eshelby
