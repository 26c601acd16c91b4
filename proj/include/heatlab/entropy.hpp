#pragma once

// Perelman's entropy W = int [s(|grad f|^2 + R) + f - n] u dmu with
// u = (4 pi s)^{-n/2} e^{-f}, the lowest eigenvalue of -4 Lap + R, and
// empirical (log-)Sobolev checks over a fixed trial corpus.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "heatlab/flow.hpp"
#include "heatlab/geometry.hpp"
#include "heatlab/kernel.hpp"
#include "heatlab/report.hpp"

namespace heatlab {

// f = -ln u - (n/2) ln(4 pi s). positivity-violation on u <= 0.
std::vector<double> f_from_u(std::span<const double> u, int n, double s);

// Densities on a warped profile. dmu defaults to quadrature_weights(p).
// invalid-density when the mass exceeds 1 + 1e-6.
double w_entropy(const WarpedProfile& p, std::span<const double> u, double s, std::span<const double> dmu = {});
// Separable torus densities u = prod_d axis_u[d].
double w_entropy_torus(const WarpedProfile& p, const std::vector<std::vector<double>>& axis_u, double s);
double w_entropy(const KernelSnapshot& snap, double s);

// Min, max and u-weighted variance of f.
struct FStats {
  double min = 0.0;
  double max = 0.0;
  double variance = 0.0;
};
FStats f_stats(const KernelSnapshot& snap, double s);

struct EntropyTrace {
  std::vector<double> s_grid;
  std::vector<double> W_values;
  // -2s int |Ric + Hess f - g/2s|^2 u dmu.
  std::vector<double> residuals;
  std::vector<double> dW_numeric;
  std::vector<double> f_min;
  std::vector<double> f_max;
  std::vector<double> f_var;
  // Largest W(s_{i+1}) - W(s_i) (negative when strictly decreasing).
  double max_increase = 0.0;
  // max |dW_numeric - residual| / (0.02 |residual| + 1e-6); <= 1 matches.
  double derivative_defect = 0.0;
  std::string notes;

  bool monotone(double tol = 1e-8) const { return max_increase <= tol; }
  bool derivative_match() const { return derivative_defect <= 1.0; }
  void add_note(const std::string& note);
};

// kf must be a conjugate field; s is tau measured from its source time and
// every s in s_grid must be one of its slices.
EntropyTrace w_monotonicity(const FlowTrajectory& tr, const KernelField& kf, const std::vector<double>& s_grid);

void write_entropy_trace_csv(std::ostream& os, const EntropyTrace& tr);
void write_entropy_trace_csv(const std::string& path, const EntropyTrace& tr);

struct EigenOptions {
  double tol = 1e-8;
  int max_iter = 20000;
};
// Smallest eigenvalue of the finite-volume -4 Lap + R in the measure
// weighted inner product. convergence-failure when the residual stalls.
double lambda0(const WarpedProfile& p, const EigenOptions& opts = {});

// Trial function for the inequality checks: nodal values on a warped
// profile, or one factor per axis on a torus.
struct TrialFunction {
  std::string name;
  std::vector<double> v;
  std::vector<std::vector<double>> axis_v;
};

// Constants, low eigenfunction mixtures, off-centre bumps and random
// band-limited fields, all reproducible from `seed`.
std::vector<TrialFunction> make_trial_corpus(const WarpedProfile& p, std::uint64_t seed, int random_count = 16);

// Normalized Gaussian trial v^2 = (2 pi sigma^2)^{-n/2} exp(-|x - c|^2 / (2 sigma^2))
// about the torus centre.
TrialFunction gaussian_trial(const WarpedProfile& torus, double sigma);

struct LogSobolevOptions {
  // Fixed scale; otherwise a log sweep over [eps_min, eps_max] plus the
  // optimal scale of each trial.
  std::optional<double> eps;
  double eps_min = 1e-2;
  double eps_max = 10.0;
  int sweep = 41;
  // Offset from the Euclidean constant -n - (n/2) ln(4 pi); fitted if unset.
  std::optional<double> alpha;
  // Defaults to 0 when lambda0 > 0.
  std::optional<double> beta;
  double alpha_cap = 1e3;
  // Allowed negative margin (quadrature noise).
  double tol = 1e-6;
};
// int v^2 ln v^2 <= eps^2 int (4|grad v|^2 + R v^2) - n ln eps + (t + eps^2) beta
//                   - n - (n/2) ln(4 pi) + alpha   for ||v||_2 = 1.
CheckReport log_sobolev_check(const WarpedProfile& p, double t, const std::vector<TrialFunction>& trials,
                              const LogSobolevOptions& opts = {});

struct SobolevOptions {
  // Fitted if unset.
  std::optional<double> A;
  double B = 0.0;
  double A_cap = 1e3;
};
// (int |v|^{2n/(n-2)})^{(n-2)/n} <= A int (|grad v|^2 + R v^2 / 4) + B int v^2.
// unsupported-dimension for n < 3.
CheckReport sobolev_check(const WarpedProfile& p, const std::vector<TrialFunction>& trials,
                          const SobolevOptions& opts = {});

}  // namespace heatlab
