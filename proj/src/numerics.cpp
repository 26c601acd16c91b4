#include "numerics.hpp"

#include <algorithm>
#include <cstdio>

#include "heatlab/error.hpp"

namespace heatlab {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::invalid_state: return "invalid-state";
    case ErrorKind::out_of_domain: return "out-of-domain";
    case ErrorKind::degenerate_metric: return "degenerate-metric";
    case ErrorKind::step_rejected: return "step-rejected";
    case ErrorKind::singularity_detected: return "singularity-detected";
    case ErrorKind::no_admissible_scale: return "no-admissible-scale";
    case ErrorKind::invalid_interval: return "invalid-interval";
    case ErrorKind::series_not_convergent: return "series-not-convergent";
    case ErrorKind::interpolation_error: return "interpolation-error";
    case ErrorKind::solver_instability: return "solver-instability";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::invalid_window: return "invalid-window";
    case ErrorKind::degenerate_sample: return "degenerate-sample";
    case ErrorKind::positivity_violation: return "positivity-violation";
    case ErrorKind::invalid_density: return "invalid-density";
    case ErrorKind::convergence_failure: return "convergence-failure";
    case ErrorKind::unsupported_dimension: return "unsupported-dimension";
    case ErrorKind::parse_error: return "parse-error";
    case ErrorKind::io_error: return "io-error";
  }
  return "unknown";
}

namespace detail {

void solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                       std::span<const double> upper, std::span<double> rhs) {
  const std::size_t N = diag.size();
  std::vector<double> c(N);
  double beta = diag[0];
  rhs[0] /= beta;
  for (std::size_t i = 1; i < N; ++i) {
    c[i - 1] = upper[i - 1] / beta;
    beta = diag[i] - lower[i] * c[i - 1];
    rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
  }
  for (std::size_t i = N - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
}

void solve_cyclic_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                              std::span<const double> upper, std::span<double> rhs) {
  // Sherman-Morrison on the corner couplings.
  const std::size_t N = diag.size();
  const double alpha = upper[N - 1];
  const double beta = lower[0];
  const double gamma = -diag[0];
  std::vector<double> d(diag.begin(), diag.end());
  d[0] -= gamma;
  d[N - 1] -= alpha * beta / gamma;
  std::vector<double> lo(lower.begin(), lower.end()), up(upper.begin(), upper.end());
  lo[0] = 0.0;
  up[N - 1] = 0.0;
  std::vector<double> u(N, 0.0);
  u[0] = gamma;
  u[N - 1] = alpha;
  solve_tridiagonal(lo, d, up, rhs);
  solve_tridiagonal(lo, d, up, u);
  const double fact = (rhs[0] + beta * rhs[N - 1] / gamma) / (1.0 + u[0] + beta * u[N - 1] / gamma);
  for (std::size_t i = 0; i < N; ++i) rhs[i] -= fact * u[i];
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double interp_linear(std::span<const double> xs, std::span<const double> ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
  const double w = (x - xs[i]) / (xs[i + 1] - xs[i]);
  return (1.0 - w) * ys[i] + w * ys[i + 1];
}

}  // namespace detail
}  // namespace heatlab
