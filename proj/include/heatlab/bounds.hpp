#pragma once

// Empirical checkers for the kernel bounds. None of the constants are known
// in closed form; each check fits the extremal constant over its samples and
// compares it with a declared cap.

#include "heatlab/flow.hpp"
#include "heatlab/kernel.hpp"
#include "heatlab/report.hpp"

namespace heatlab {

struct LambdaIntegrals {
  double lambda1 = 0.0;  // int min R
  double lambda2 = 0.0;  // int max R
};

// Integrals of min/max scalar curvature over [t_from, t_to]. Exact spheres
// integrate in closed form; numeric trajectories use the trapezoid on the
// stored snapshots (plus the interval ends).
LambdaIntegrals lambda_integrals(const FlowTrajectory& tr, double t_from, double t_to);

// int_{lo}^{hi} sqrt(hi - s) R(x0, s) ds along the worldline of a pole.
double worldline_curvature_integral(const FlowTrajectory& tr, const Point& x0, double lo, double hi);

struct UpperOptions {
  double cap = 100.0;
  std::size_t min_samples = 5;
};
// s(tau) = G(x0; x0) tau^{n/2}; B = max s.
CheckReport on_diag_upper_check(const KernelField& kf, const UpperOptions& opts = {});

struct LowerOptions {
  double floor = 1e-2;
  double a1_cap = 100.0;
  std::size_t min_samples = 5;
};
// l(tau) = G (4 pi tau)^{n/2} exp(int sqrt(t0 - s) R ds / (2 sqrt tau)); c = min l.
// Also fits a1 with G (4 pi tau)^{n/2} and l(tau) inside [1/a1, a1].
CheckReport on_diag_lower_check(const KernelField& kf, const FlowTrajectory& tr, const LowerOptions& opts = {});

struct GaussianOptions {
  double c_lo = 1.0 / 16.0;
  double c_hi = 4.0;
  double cn_cap = 100.0;
  double eta = 1.0;
  // Samples below this fraction of the on-diagonal value are skipped.
  double rel_floor = 1e-10;
};
// Effective exponent q = -tau ln(G(y) / G(x0)) / d^2 for d^2 >= tau / 4, and
// the envelope prefactors
//   c_up = max G |B(x0, sqrt tau)| e^{eta Lambda1} e^{c_lo d^2 / tau},
//   c_dn = min G |B(x0, sqrt tau)| e^{eta Lambda2} e^{c_hi d^2 / tau}.
CheckReport gaussian_envelope_check(const KernelField& kf, const FlowTrajectory& tr, const GaussianOptions& opts = {});

struct MeanValueOptions {
  double cap = 1e4;
};
// C = sup_{Q_{r/2}} u^2 r^{n+2} / int_{Q_r} u^2, with Q_r the slices
// tau' in [tau - r^2, tau] and the ball of radius r about x.
CheckReport mean_value_check(const KernelField& kf, const FlowTrajectory& tr, const Point& x, double tau, double r,
                             const MeanValueOptions& opts = {});

// Forward mass inside [e^{-Lambda2}, e^{-Lambda1}] up to tol at every slice.
CheckReport mass_bracket_check(const KernelField& kf, const FlowTrajectory& tr, double tol = 1e-4);

}  // namespace heatlab
