// Small tour: the ball attains both trace bounds, a prolate ellipsoid does
// too, and the cube misses the quadratic-potential test.

#include <cstdio>
#include <string>

#include "eshelby/eshelby.hpp"

using namespace eshelby;

namespace {

void print_bounds(const char* label, const Shape& s, const MaterialPair& pair) {
  const EMTReport<3> emt = emt_constant_strain(s, pair);
  const BoundReport b = bound_report(emt.M, pair);
  std::printf("%-22s tr1 = %.10f (K1 = %.10f)  tr2 = %.10f (K2 = %.10f)\n", label, b.tr1, b.K1, b.tr2, b.K2);
}

}  // namespace

int main(int argc, char** argv) {
  const MaterialPair pair(1.0, 1.0, 2.0, 2.0);
  print_bounds("unit-volume ball", normalize_volume(Shape::ball(1.0)), pair);
  print_bounds("ellipsoid 2:1:1", normalize_volume(Shape::ellipsoid(2.0, 1.0, 1.0)), pair);

  const Shape cube = Shape::cuboid(1.0, 1.0, 1.0);
  const ShapePotentials pot(cube, 4);
  const QuadraticFit fit = quadratic_fit_w(pot, sample_interior(cube, pot.quad(), 60, 7));
  std::printf("cube: quadratic fit of w, relative residual %.3e\n", fit.rel_residual);

  // An optional OFF mesh, e.g. samples/icosphere.off.
  if (argc > 1) {
    const Shape mesh = Shape::from_mesh_file(argv[1]);
    std::printf("%s: volume %.6f, diameter %.6f\n", argv[1], mesh.volume(), mesh.diameter());
  }
  return 0;
}
