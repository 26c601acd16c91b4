#pragma once

// Closed forms used by the tests, written independently of the library.

#include <cmath>
#include <numbers>

namespace oracle {

// Round Ricci flow: r^2(t) = r0^2 - 2(n-1) t with r(0) = r0.
inline double round_radius2(int n, double r0, double t) { return r0 * r0 - 2.0 * (n - 1) * t; }

// R of the round n-sphere of radius r; constants minimize -4 Lap + R.
inline double round_lambda0(int n, double r) { return n * (n - 1) / (r * r); }

// G(x, l; y, t) on the shrinking S^2 with r^2 = 2(T0 - t), theta the angle
// between x and y: sum (2k+1) / (4 pi r_l^2) P_k(cos theta) e^{-k(k+1) Theta}.
inline double sphere_kernel(int n, double T0, double l, double t, double theta) {
  (void)n;
  const double rl2 = 2.0 * (T0 - l);
  const double Theta = 0.5 * std::log((T0 - l) / (T0 - t));
  const double c = std::cos(theta);
  double p0 = 1.0, p1 = c, sum = 1.0 + 3.0 * c * std::exp(-2.0 * Theta);
  for (int k = 2; k < 100000; ++k) {
    const double p2 = ((2.0 * k - 1.0) * c * p1 - (k - 1.0) * p0) / k;
    const double term = (2.0 * k + 1.0) * p2 * std::exp(-k * (k + 1.0) * Theta);
    sum += term;
    if ((2.0 * k + 1.0) * std::exp(-k * (k + 1.0) * Theta) < 1e-18 * std::abs(sum)) break;
    p0 = p1;
    p1 = p2;
  }
  return sum / (4.0 * std::numbers::pi * rl2);
}

// Euclidean heat kernel on a line.
inline double gaussian_1d(double y, double s) {
  return std::exp(-y * y / (4.0 * s)) / std::sqrt(4.0 * std::numbers::pi * s);
}

}  // namespace oracle
