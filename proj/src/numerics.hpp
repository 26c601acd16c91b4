#pragma once

// Internal numerical helpers shared by the modules. Not installed.

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace heatlab::detail {

// Field on M+1 pole-to-pole nodes extended by two ghost nodes at each end.
// parity = +1 for fields even across the poles (a, radial functions), -1 for
// odd ones (b).
class GhostExtended {
 public:
  GhostExtended(std::span<const double> f, int parity) : v_(f.size() + 4) {
    const std::size_t M = f.size() - 1;
    for (std::size_t i = 0; i <= M; ++i) v_[i + 2] = f[i];
    for (std::size_t k = 1; k <= 2; ++k) {
      v_[2 - k] = parity * f[k];
      v_[M + 2 + k] = parity * f[M - k];
    }
  }
  double operator[](std::ptrdiff_t i) const { return v_[static_cast<std::size_t>(i + 2)]; }

 private:
  std::vector<double> v_;
};

// Fourth-order central first and second differences at node i.
inline double d1_at(const GhostExtended& f, std::ptrdiff_t i, double h) {
  return (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
}
inline double d2_at(const GhostExtended& f, std::ptrdiff_t i, double h) {
  return (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) / (12.0 * h * h);
}

// Periodic versions on M nodes.
inline double periodic_d1(std::span<const double> f, std::size_t i, double h) {
  const std::size_t M = f.size();
  auto at = [&](std::ptrdiff_t k) { return f[static_cast<std::size_t>((static_cast<std::ptrdiff_t>(i) + k + 2 * static_cast<std::ptrdiff_t>(M)) % static_cast<std::ptrdiff_t>(M))]; };
  return (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * h);
}
inline double periodic_d2(std::span<const double> f, std::size_t i, double h) {
  const std::size_t M = f.size();
  auto at = [&](std::ptrdiff_t k) { return f[static_cast<std::size_t>((static_cast<std::ptrdiff_t>(i) + k + 2 * static_cast<std::ptrdiff_t>(M)) % static_cast<std::ptrdiff_t>(M))]; };
  return (-at(-2) + 16.0 * at(-1) - 30.0 * at(0) + 16.0 * at(1) - at(2)) / (12.0 * h * h);
}

// Replace the first `layers` nodes at each pole of q (an even function of the
// distance to the pole) by the quadratic-in-x^2 interpolant through the next
// three nodes.
inline void extrapolate_even_at_poles(std::vector<double>& q, int layers) {
  if (layers <= 0) return;
  const std::size_t M = q.size() - 1;
  const std::array<double, 3> xi{double(layers) * layers, double(layers + 1) * (layers + 1),
                                 double(layers + 2) * (layers + 2)};
  auto weights = [&](double x) {
    std::array<double, 3> w{};
    for (int j = 0; j < 3; ++j) {
      double num = 1.0, den = 1.0;
      for (int m = 0; m < 3; ++m) {
        if (m == j) continue;
        num *= x - xi[m];
        den *= xi[j] - xi[m];
      }
      w[j] = num / den;
    }
    return w;
  };
  for (int j = 0; j < layers; ++j) {
    const auto w = weights(double(j) * j);
    const std::size_t L = static_cast<std::size_t>(layers);
    q[j] = w[0] * q[L] + w[1] * q[L + 1] + w[2] * q[L + 2];
    q[M - j] = w[0] * q[M - L] + w[1] * q[M - L - 1] + w[2] * q[M - L - 2];
  }
}

// Solve a tridiagonal system in place: lower[i] couples i to i-1, upper[i]
// couples i to i+1. rhs is overwritten with the solution.
void solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                       std::span<const double> upper, std::span<double> rhs);

// Periodic tridiagonal: lower[0] couples node 0 to node N-1 and upper[N-1]
// couples N-1 to 0.
void solve_cyclic_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                              std::span<const double> upper, std::span<double> rhs);

// Deterministic 17-significant-digit encoding.
std::string format_double(double v);

// Linear interpolation of y(x) on an increasing grid; clamps at the ends.
double interp_linear(std::span<const double> xs, std::span<const double> ys, double x);

}  // namespace heatlab::detail
