#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "heatlab/error.hpp"
#include "heatlab/geometry.hpp"

using namespace heatlab;

namespace {

// |S^n| r^n
double sphere_volume(int n, double r) {
  const double area = n == 2 ? 4.0 * std::numbers::pi : 2.0 * std::numbers::pi * std::numbers::pi;
  return area * std::pow(r, n);
}

WarpedProfile bumpy(int n, int M, double amp, int mode) {
  auto p = make_round_sphere(n, 1.0, M);
  for (int i = 1; i < M; ++i) {
    const double s = std::sin(std::numbers::pi * p.x[i]);
    p.b[i] *= 1.0 + amp * s * s * std::cos(2.0 * std::numbers::pi * mode * p.x[i]);
  }
  return p;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("round sphere curvature is constant") {
  for (int n : {2, 3, 4}) {
    const double r = 1.7;
    const auto c = curvature(make_round_sphere(n, r, 256));
    const double R = n * (n - 1) / (r * r);
    for (double v : c.R) CHECK(v == doctest::Approx(R).epsilon(1e-6));
    for (std::size_t i = 0; i < c.ric_rad.size(); ++i) {
      CHECK(c.ric_rad[i] == doctest::Approx((n - 1) / (r * r)).epsilon(1e-6));
      CHECK(c.ric_sph[i] == doctest::Approx((n - 1) / (r * r)).epsilon(1e-6));
    }
  }
}

TEST_CASE("volumes, arclength and distances on round spheres") {
  for (int n : {2, 3}) {
    const double r = 0.8;
    const auto p = make_round_sphere(n, r, 256);
    CHECK(total_volume(p) == doctest::Approx(sphere_volume(n, r)).epsilon(1e-9));
    CHECK(total_arclength(p) == doctest::Approx(std::numbers::pi * r).epsilon(1e-12));
    CHECK(geodesic_distance(p, Point::axis(0.0), Point::axis(1.0)) == doctest::Approx(std::numbers::pi * r));
    double w = 0.0;
    for (double v : measure_weights(p)) w += v;
    CHECK(w == doctest::Approx(sphere_volume(n, r)).epsilon(1e-4));
  }
}

TEST_CASE("small balls look Euclidean") {
  const auto p = make_round_sphere(2, 1.0, 1024);
  const double rho = 0.05;
  // Spherical cap 2 pi (1 - cos rho).
  CHECK(ball_volume(p, Point::axis(0.0), rho) ==
        doctest::Approx(2.0 * std::numbers::pi * (1.0 - std::cos(rho))).epsilon(1e-3));
}

TEST_CASE("scaling the metric scales volume and curvature") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> amp(-0.3, 0.3), scale(0.3, 3.0);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 2 + trial % 2;
    const auto p = bumpy(n, 128, amp(rng), 1 + trial % 3);
    const double c = scale(rng);
    auto q = p;
    for (double& v : q.a) v *= c;
    for (double& v : q.b) v *= c;
    CHECK(total_volume(q) == doctest::Approx(std::pow(c, n) * total_volume(p)).epsilon(1e-12));
    const auto Rp = curvature(p).R, Rq = curvature(q).R;
    for (std::size_t i = 0; i < Rp.size(); i += 7) CHECK(Rq[i] == doctest::Approx(Rp[i] / (c * c)).epsilon(1e-9));
  }
}

TEST_CASE("flat torus") {
  const auto T = make_flat_torus(2, {3.0, 5.0}, 60);
  CHECK(total_volume(T) == doctest::Approx(15.0));
  const auto c = curvature(T);
  for (double v : c.R) CHECK(v == 0.0);
}

TEST_CASE("validate rejects broken profiles") {
  auto p = make_round_sphere(2, 1.0, 64);
  p.a[10] = -1.0;
  CHECK_THROWS_AS(validate(p), Error);
  auto q = make_round_sphere(2, 1.0, 64);
  for (double& v : q.b) v *= 1.5;  // cone points at both poles
  CHECK_THROWS_AS(validate(q), Error);
  CHECK(pole_regularity_defect(make_round_sphere(3, 2.0, 64)) < 1e-6);
}

TEST_CASE("profile csv round trip keeps every digit") {
  auto p = bumpy(3, 32, 0.2, 2);
  p.t = 0.125;
  p.gauge.assign(p.nodes(), 0.0);
  p.gauge[5] = 1.0 / 3.0;
  std::stringstream ss;
  write_profile_csv(ss, p);
  const auto q = read_profile_csv(ss, 3, ModelKind::warped_sphere);
  CHECK(q.t == p.t);
  CHECK(q.a == p.a);
  CHECK(q.b == p.b);
  CHECK(q.gauge == p.gauge);

  std::stringstream bad("t,x,a\n0,0,1\n");
  CHECK_THROWS_AS(read_profile_csv(bad, 2, ModelKind::warped_sphere), Error);
}

}  // TEST_SUITE
