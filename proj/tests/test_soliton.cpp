#include <doctest.h>

#include <cmath>
#include <numbers>

#include "heatlab/error.hpp"
#include "heatlab/soliton.hpp"

#include "oracles.hpp"

using namespace heatlab;

TEST_SUITE("soliton") {

TEST_CASE("residual of spheres away from the soliton radius") {
  // Constant f on S^2(r): A_r = A_sigma = 1/r^2 - 1/2s.
  const double s = 1.0;
  for (double r2 : {1.5, 2.0, 2.6}) {
    const auto p = make_round_sphere(2, std::sqrt(r2), 256);
    std::vector<double> u(p.nodes(), 1.0 / (4.0 * std::numbers::pi * r2));
    std::vector<double> f(p.nodes(), 0.3);
    const double a = 1.0 / r2 - 0.5 / s;
    CHECK(soliton_residual(p, f, s, u) == doctest::Approx(2.0 * a * a).epsilon(1e-6));
  }
}

TEST_CASE("flat Gaussian soliton has zero residual") {
  const auto T = make_flat_torus(2, {30.0, 30.0}, 600);
  const double s = 0.8;
  std::vector<std::vector<double>> u, f;
  for (int d = 0; d < 2; ++d) {
    std::vector<double> ud(600), fd(600);
    for (int i = 0; i < 600; ++i) {
      const double y = i * 0.05 - 15.0;
      ud[i] = oracle::gaussian_1d(y, s);
      fd[i] = y * y / (4.0 * s);
    }
    u.push_back(ud);
    f.push_back(fd);
  }
  CHECK(soliton_residual_torus(T, f, s, u) < 1e-12);
}

TEST_CASE("rescaling the shrinking sphere") {
  const auto tr = exact_sphere_trajectory(2, 1.0, {-10.0, 0.0}, 64);
  const auto p = rescale(tr, 4.0, 1.5);
  // r^2(-6) / 4 = 14 / 4
  const double b = *std::max_element(p.b.begin(), p.b.end());
  CHECK(b * b == doctest::Approx(3.5));
  CHECK(p.t == -1.5);
}

TEST_CASE("limit report json round trip") {
  const auto tr = exact_sphere_trajectory(2, 1.0, {0.0}, 128);
  const auto L = backward_limit_experiment(tr, {10.0, 100.0}, 1.0);
  const auto back = limit_report_from_json(limit_report_to_json(L));
  CHECK(back.residual_seq == L.residual_seq);
  CHECK(back.W_seq == L.W_seq);
  CHECK(back.verdict == L.verdict);
  CHECK(limit_report_to_json(back) == limit_report_to_json(L));
}

TEST_CASE("flat control is certified flat") {
  const auto T = make_flat_torus(2, {1000.0, 1000.0}, 2000);
  const auto L = backward_limit_experiment(static_torus_trajectory(T, {0.0}), {10.0, 100.0, 1000.0}, 1.0);
  CHECK_FALSE(L.nonflat);
  CHECK_FALSE(L.verdict);
  for (double w : L.W_seq) CHECK(std::abs(w) < 1e-6);
}

}  // TEST_SUITE
