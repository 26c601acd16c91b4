#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "heatlab/error.hpp"
#include "heatlab/entropy.hpp"

#include "oracles.hpp"

using namespace heatlab;

TEST_SUITE("entropy") {

TEST_CASE("f from u inverts the Gaussian normalization") {
  const double s = 0.7;
  const std::vector<double> u{std::pow(4.0 * std::numbers::pi * s, -1.0)};
  CHECK(f_from_u(u, 2, s)[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(f_from_u(std::vector<double>{0.0}, 2, s), Error);
}

TEST_CASE("uniform density on the round soliton sphere") {
  // r^2 = 2(n-1)s and u = 1/|S|, so f is constant and W = sR + f - n.
  for (int n : {2, 3}) {
    const double s = 1.3, r2 = 2.0 * (n - 1) * s;
    const auto p = make_round_sphere(n, std::sqrt(r2), 256);
    const double vol = total_volume(p);
    std::vector<double> u(p.nodes(), 1.0 / vol);
    const double f = std::log(vol) - 0.5 * n * std::log(4.0 * std::numbers::pi * s);
    const double R = n * (n - 1) / r2;
    CHECK(w_entropy(p, u, s) == doctest::Approx(s * R + f - n).epsilon(1e-8));
  }
}

TEST_CASE("supermassive densities are rejected") {
  const auto p = make_round_sphere(2, 1.0, 64);
  std::vector<double> u(p.nodes(), 2.0 / total_volume(p));
  CHECK_THROWS_AS(w_entropy(p, u, 1.0), Error);
}

TEST_CASE("lowest eigenvalue of -4 Lap + R") {
  for (int n : {2, 3})
    for (double r : {0.5, 1.0, 2.0})
      CHECK(lambda0(make_round_sphere(n, r, 256)) == doctest::Approx(oracle::round_lambda0(n, r)).epsilon(1e-7));
  CHECK(std::abs(lambda0(make_flat_torus(3, {4.0, 5.0, 6.0}, 40))) < 1e-9);
}

TEST_CASE("trial corpus is reproducible from the seed") {
  const auto p = make_round_sphere(3, 1.0, 64);
  const auto a = make_trial_corpus(p, 42), b = make_trial_corpus(p, 42), c = make_trial_corpus(p, 43);
  REQUIRE(a.size() == b.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].v == b[i].v);
    differs = differs || a[i].v != c[i].v;
  }
  CHECK(differs);
}

TEST_CASE("log-Sobolev and Sobolev on S3") {
  const auto p = make_round_sphere(3, 1.0, 128);
  const auto corpus = make_trial_corpus(p, 7);
  const auto lsi = log_sobolev_check(p, 0.0, corpus);
  CHECK(lsi.pass);
  const auto sob = sobolev_check(p, corpus);
  CHECK(sob.pass);
  CHECK(sob.constant("A") > 0.0);
  CHECK_THROWS_AS(sobolev_check(make_round_sphere(2, 1.0, 64), make_trial_corpus(make_round_sphere(2, 1.0, 64), 1)),
                  Error);
}

TEST_CASE("Gaussians are extremal for the Euclidean log-Sobolev inequality") {
  const auto T = make_flat_torus(2, {40.0, 40.0}, 800);
  LogSobolevOptions o;
  o.alpha = 0.0;
  o.beta = 0.0;
  for (double sigma : {0.8, 1.0, 1.5}) {
    const auto rep = log_sobolev_check(T, 0.0, {gaussian_trial(T, sigma)}, o);
    CHECK(std::abs(rep.margin) < 1e-4);
  }
}

TEST_CASE("entropy trace csv has one row per s") {
  const auto tr = exact_sphere_trajectory(2, 1.0, {-3.0, 0.0}, 128);
  const auto kf = oracle_kernel_field(tr, KernelDirection::conjugate, Point::axis(0.0), 0.0, {-1.0, -1.5, -2.0});
  const auto et = w_monotonicity(tr, kf, {1.0, 1.5, 2.0});
  CHECK(et.monotone());
  std::ostringstream os;
  write_entropy_trace_csv(os, et);
  const std::string text = os.str();
  CHECK(text.rfind("s,W,residual,dW_numeric,f_min,f_max,f_var\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}

}  // TEST_SUITE
