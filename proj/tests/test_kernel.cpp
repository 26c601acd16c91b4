#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "heatlab/error.hpp"
#include "heatlab/flow.hpp"
#include "heatlab/kernel.hpp"

#include "oracles.hpp"

using namespace heatlab;

namespace {

// Fourier series of the circle kernel, independent of the image sum.
double circle_fourier(double L, double tau, double d) {
  double s = 1.0 / L;
  for (int k = 1; k < 2000; ++k) s += 2.0 / L * std::cos(2.0 * std::numbers::pi * k * d / L) *
                                      std::exp(-std::pow(2.0 * std::numbers::pi * k / L, 2) * tau);
  return s;
}

}  // namespace

TEST_SUITE("kernel") {

TEST_CASE("unit sphere kernel against the Legendre series") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> th(0.0, std::numbers::pi), T(0.05, 2.0);
  for (int i = 0; i < 20; ++i) {
    const double theta = th(rng), Theta = T(rng);
    // oracle::sphere_kernel with r_l^2 = 2 and Theta = ln 2 / 2 * ... : use T0 = 1, l = 0.
    const double t = 1.0 - std::exp(-2.0 * Theta);
    const double expect = oracle::sphere_kernel(2, 1.0, 0.0, t, theta) * 2.0;
    CHECK(unit_sphere_heat_kernel(2, theta, Theta) == doctest::Approx(expect).epsilon(1e-10));
  }
  CHECK_THROWS_AS(unit_sphere_heat_kernel(2, 0.0, 0.0), Error);
}

TEST_CASE("circle kernel: images against Fourier modes") {
  for (double tau : {0.01, 0.3, 4.0})
    for (double d : {0.0, 0.7, 2.4})
      CHECK(circle_heat_kernel(5.0, tau, d) == doctest::Approx(circle_fourier(5.0, tau, d)).epsilon(1e-10));
  CHECK(torus_heat_kernel({5.0, 3.0}, 0.2, {0.4, 1.0}) ==
        doctest::Approx(circle_heat_kernel(5.0, 0.2, 0.4) * circle_heat_kernel(3.0, 0.2, 1.0)));
}

TEST_CASE("forward FD kernel on the exact sphere") {
  const auto tr = exact_sphere_trajectory(2, 1.0, {-1.0, 0.0}, 256);
  const auto kf = solve_forward_kernel(tr, Point::axis(0.0), -1.0, {-0.5, 0.0});
  for (const auto& s : kf.snapshots) {
    double err = 0.0, top = 0.0;
    for (std::size_t i = 0; i < s.u.size(); ++i) {
      const double ex = oracle::sphere_kernel(2, 1.0, -1.0, s.t, std::numbers::pi * s.metric.x[i]);
      err = std::max(err, std::abs(s.u[i] - ex));
      top = std::max(top, ex);
    }
    CHECK(err / top < 1e-3);
    CHECK(s.backward_mass == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("conjugate field satisfies its equation") {
  // The residual uses a three-slice time difference, so it should fall like h^2.
  const auto tr = exact_sphere_trajectory(2, 1.0, {-2.0, 0.0}, 256);
  std::vector<double> worst;
  for (double h : {0.05, 0.025, 0.0125}) {
    std::vector<double> ls;
    for (int i = 0; i < 7; ++i) ls.push_back(-0.5 - h * i);
    const auto kf = solve_conjugate_kernel(tr, Point::axis(0.0), 0.0, ls);
    const auto r = conjugate_equation_residual(kf);
    worst.push_back(*std::max_element(r.begin(), r.end()));
    CHECK(std::abs(backward_mass(kf) - 1.0) < 1e-9);
  }
  CHECK(worst.back() < 1e-3);
  CHECK(worst[0] / worst[1] > 3.0);
  CHECK(worst[1] / worst[2] > 3.0);
}

TEST_CASE("seed offset barely matters") {
  const auto tr = exact_sphere_trajectory(2, 1.0, {-1.0, 0.0}, 128);
  CHECK(seed_sensitivity(tr, KernelDirection::conjugate, Point::axis(0.0), 0.0, {-0.5, -1.0}) < 1e-3);
}

TEST_CASE("torus FD kernel matches the Gaussian") {
  const auto T = make_flat_torus(2, {20.0, 20.0}, 400);
  const auto tr = static_torus_trajectory(T, {0.0, 1.0});
  const auto kf = solve_forward_kernel(tr, Point{{10.0, 10.0}}, 0.0, {0.5, 1.0});
  for (std::size_t k = 0; k < kf.snapshots.size(); ++k) {
    const double tau = kf.snapshots[k].tau;
    CHECK(source_value(kf, k) == doctest::Approx(1.0 / (4.0 * std::numbers::pi * tau)).epsilon(1e-3));
    CHECK(slice_mass(kf, k) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("kernels on a DeTurck trajectory match the comoving ones") {
  auto p = make_round_sphere(2, 1.0, 256);
  for (int i = 1; i < 256; ++i) {
    const double s = std::sin(std::numbers::pi * p.x[i]);
    p.b[i] *= 1.0 + 0.3 * s * s * std::cos(2.0 * std::numbers::pi * p.x[i]);
  }
  FlowControl a, b;
  a.step.deturck = false;
  a.snapshot_every = b.snapshot_every = 0.005;
  const auto ta = integrate(p, 0.0, 0.1, a);
  const auto tb = integrate(p, 0.0, 0.1, b);
  const auto fa = solve_conjugate_kernel(ta, Point::axis(0.0), 0.1, {0.0});
  const auto fb = solve_conjugate_kernel(tb, Point::axis(0.0), 0.1, {0.0});
  // Poles are fixed by both gauges.
  CHECK(fb.snapshots[0].u.front() == doctest::Approx(fa.snapshots[0].u.front()).epsilon(1e-4));
  CHECK(fb.snapshots[0].u.back() == doctest::Approx(fa.snapshots[0].u.back()).epsilon(1e-3));
  CHECK(backward_mass(fb) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("oracle and FD fields agree on the torus") {
  const auto T = make_flat_torus(2, {10.0, 10.0}, 500);
  const auto tr = static_torus_trajectory(T, {-1.0, 0.0});
  const auto o = oracle_kernel_field(tr, KernelDirection::conjugate, Point{{5.0, 5.0}}, 0.0, {-1.0});
  const auto f = solve_conjugate_kernel(tr, Point{{5.0, 5.0}}, 0.0, {-1.0});
  CHECK(source_value(f, 0) == doctest::Approx(source_value(o, 0)).epsilon(1e-3));
}

}  // TEST_SUITE
