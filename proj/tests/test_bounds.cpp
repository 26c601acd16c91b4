#include <doctest.h>

#include <cmath>

#include "heatlab/error.hpp"
#include "heatlab/bounds.hpp"

using namespace heatlab;

TEST_SUITE("bounds") {

TEST_CASE("curvature integrals on the shrinking sphere") {
  const auto tr = exact_sphere_trajectory(2, 1.0, {-3.0, 0.0}, 64);
  // int R = int 1 / (1 - t) dt
  const auto L = lambda_integrals(tr, -3.0, 0.0);
  CHECK(L.lambda1 == doctest::Approx(std::log(4.0)));
  CHECK(L.lambda2 == doctest::Approx(std::log(4.0)));
}

TEST_CASE("on-diagonal checks on the sphere and the flat control") {
  const auto tr = exact_sphere_trajectory(2, 1.0, {-5.0, 0.0}, 256);
  std::vector<double> ls;
  for (int i = 0; i < 15; ++i) ls.push_back(-0.02 * std::pow(250.0, i / 14.0));
  const auto kf = oracle_kernel_field(tr, KernelDirection::conjugate, Point::axis(0.0), 0.0, ls);
  const auto up = on_diag_upper_check(kf);
  const auto lo = on_diag_lower_check(kf, tr);
  CHECK(up.pass);
  CHECK(lo.pass);
  CHECK(lo.constant("a1") >= 1.0);

  const auto T = make_flat_torus(2, {200.0, 200.0}, 1000);
  const auto tt = static_torus_trajectory(T, {-10.0, 0.0});
  const auto kt = oracle_kernel_field(tt, KernelDirection::conjugate, Point{{100.0, 100.0}}, 0.0,
                                      {-0.5, -1.0, -2.0, -4.0, -8.0});
  const auto lt = on_diag_lower_check(kt, tt);
  CHECK(lt.constant("a1") == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("too few samples fail loudly") {
  const auto tr = exact_sphere_trajectory(2, 1.0, {-1.0, 0.0}, 64);
  const auto kf = oracle_kernel_field(tr, KernelDirection::conjugate, Point::axis(0.0), 0.0, {-0.5});
  CHECK_THROWS_AS(on_diag_upper_check(kf), Error);
}

TEST_CASE("mass bracket holds with equality on round spheres") {
  const auto tr = exact_sphere_trajectory(3, 1.0, {-1.0, 0.0}, 128);
  const auto kf = oracle_kernel_field(tr, KernelDirection::forward, Point::axis(0.0), -1.0, {-0.5, 0.0});
  const auto rep = mass_bracket_check(kf, tr);
  CHECK(rep.pass);
  CHECK(rep.ratio_min == doctest::Approx(rep.ratio_max).epsilon(1e-9));
}

TEST_CASE("gaussian exponent tends to 1/4 on the torus") {
  const auto T = make_flat_torus(2, {10.0, 10.0}, 1000);
  const auto tt = static_torus_trajectory(T, {0.0, 1.0});
  const auto kf = oracle_kernel_field(tt, KernelDirection::forward, Point{{5.0, 5.0}}, 0.0, {0.01, 0.05});
  const auto g = gaussian_envelope_check(kf, tt);
  CHECK(g.ratio_min == doctest::Approx(0.25).epsilon(0.01));
  CHECK(g.ratio_max == doctest::Approx(0.25).epsilon(0.01));
}

TEST_CASE("mean value constant is finite") {
  const auto tr = exact_sphere_trajectory(2, 1.0, {-3.0, 0.0}, 128);
  const auto kf = oracle_kernel_field(tr, KernelDirection::conjugate, Point::axis(0.0), 0.0,
                                      {-1.75, -1.8, -1.85, -1.9, -1.95, -2.0});
  const auto rep = mean_value_check(kf, tr, Point::axis(0.0), 2.0, 0.5);
  CHECK(rep.pass);
  CHECK(std::isfinite(rep.constant("C")));
}

}  // TEST_SUITE
