#pragma once

// Backward limits: parabolic rescaling g_k(s) = g(t_ref - s tau_k) / tau_k,
// rescaled kernels u_k = tau_k^{n/2} G, and the shrinking soliton residual
// int |Ric + Hess f - g/2s|^2 u dmu.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "heatlab/flow.hpp"
#include "heatlab/geometry.hpp"
#include "heatlab/kernel.hpp"

namespace heatlab {

// Metric at t_ref - s tau_k scaled by 1/tau_k (lengths by tau_k^{-1/2});
// the result carries t = -s. out-of-domain outside the trajectory.
WarpedProfile rescale(const FlowTrajectory& tr, double tau_k, double s, double t_ref = 0.0);

// u_k, f_k on the rescaled metric. Torus fields keep one factor per axis,
// with f = sum_d axis_f[d].
struct RescaledKernel {
  double s = 0.0;
  double tau_k = 0.0;
  KernelSnapshot snap;
  std::vector<double> f;
  std::vector<std::vector<double>> axis_f;
};

// kf is a conjugate field whose source time is the rescaling reference and
// which has a slice at tau = s tau_k.
RescaledKernel rescaled_kernel(const FlowTrajectory& tr, const KernelField& kf, double tau_k, double s);

// Radial f on a warped profile. Components in the orthonormal frame:
//   A_r = ric_rad + f_ss - 1/2s,  A_sigma = ric_sph + (b_s/b) f_s - 1/2s,
// integrand A_r^2 + (n-1) A_sigma^2. dmu defaults to quadrature_weights(p).
double soliton_residual(const WarpedProfile& p, std::span<const double> f, double s, std::span<const double> u,
                        std::span<const double> dmu = {});
// Separable torus: f = sum_d axis_f[d], u = prod_d axis_u[d].
double soliton_residual_torus(const WarpedProfile& p, const std::vector<std::vector<double>>& axis_f, double s,
                              const std::vector<std::vector<double>>& axis_u);
double soliton_residual(const RescaledKernel& rk);

struct LimitOptions {
  double nonflat_W = 1e-4;
  double nonflat_R = 1e-6;
  double monotone_tol = 1e-8;
  // Numeric trajectories: solver settings for the conjugate kernel.
  KernelSolverOptions solver;
};

struct LimitReport {
  std::vector<double> tau_list;
  double s_ref = 1.0;
  std::vector<double> residual_seq;
  // W_k(s_ref) and W_k(s_ref + 1).
  std::vector<double> W_seq;
  std::vector<double> W_next_seq;
  std::vector<double> W_gap_seq;
  std::vector<double> f_variance_seq;
  // max R of the rescaled metric at s_ref, last k.
  double limit_max_R = 0.0;
  bool nonflat = false;
  bool verdict = false;
  bool control = false;
  std::string notes;
};

// Exact spheres and tori sample the closed-form kernel; numeric trajectories
// solve the conjugate equation from (pole, t_ref). Solve failures give a
// partial report with verdict false.
LimitReport backward_limit_experiment(const FlowTrajectory& tr, const std::vector<double>& tau_list, double s_ref,
                                      const LimitOptions& opts = {}, double t_ref = 0.0);

std::string limit_report_to_json(const LimitReport& r);
LimitReport limit_report_from_json(const std::string& text);
void write_limit_report_json(const std::string& path, const LimitReport& r);

}  // namespace heatlab
