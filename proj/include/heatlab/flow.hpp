#pragma once

// Ricci flow dg/dt = -2 Ric on the reduced models.
//
// In the fixed x-gauge the warped equations are
//   da/dt = -ric_rad * a,   db/dt = -ric_sph * b,
// with b held at zero on the poles. Tori are fixed points.

#include <optional>
#include <string>
#include <vector>

#include "heatlab/error.hpp"
#include "heatlab/geometry.hpp"
#include "heatlab/report.hpp"

namespace heatlab {

struct FlowTrajectory {
  int n = 2;
  ModelKind kind = ModelKind::warped_sphere;
  std::vector<WarpedProfile> profiles;
  std::optional<double> T0;
  // Profiles come from the closed-form shrinking sphere r^2 = 2(n-1)(T0 - t).
  bool exact = false;
  std::optional<double> D0;
  std::optional<double> kappa;
  // Relative step-doubling estimate of the accumulated time error.
  double error_estimate = 0.0;

  double t_first() const { return profiles.front().t; }
  double t_last() const { return profiles.back().t; }
  int grid() const { return profiles.front().M; }

  // True when profile_at(t) is defined: any t < T0 for exact spheres, any t
  // for tori, the stored span otherwise.
  bool covers(double t) const;
  // Exact and torus trajectories evaluate in closed form; numeric ones
  // interpolate a and b linearly between neighbouring snapshots.
  WarpedProfile profile_at(double t) const;
  // Scalar curvature at the pole x = 0 (the kernel source) at time t.
  double pole_curvature_at(double t) const;
  // Squared radius of an exact sphere.
  double exact_radius2(double t) const;
};

class StepRejected : public Error {
 public:
  StepRejected(double suggested_dt, const std::string& what)
      : Error(ErrorKind::step_rejected, what), suggested_dt_(suggested_dt) {}
  double suggested_dt() const noexcept { return suggested_dt_; }

 private:
  double suggested_dt_;
};

class SingularityDetected : public Error {
 public:
  SingularityDetected(FlowTrajectory partial, const std::string& what)
      : Error(ErrorKind::singularity_detected, what), partial_(std::move(partial)) {}
  const FlowTrajectory& partial() const noexcept { return partial_; }

 private:
  FlowTrajectory partial_;
};

FlowTrajectory exact_sphere_trajectory(int n, double T0, std::vector<double> t_list, int M);
// Constant-in-time trajectory of a torus sampled at t_list.
FlowTrajectory static_torus_trajectory(const WarpedProfile& torus, std::vector<double> t_list);

struct StepOptions {
  double cfl = 0.2;
  // Pole layers replaced by extrapolation inside the right-hand side.
  int pole_layers = 1;
  // Add the DeTurck term against the round metric on the same grid. Without
  // it the fixed gauge is unstable at the poles for n >= 3.
  bool deturck = true;
};

// Largest dt allowed by dt <= cfl * (min a dx)^2.
double stable_dt(const WarpedProfile& p, double cfl = 0.2);

// One RK4 step. With opts.deturck the result is the Ricci-DeTurck step,
// isometric to the Ricci flow step through a map fixing the poles.
WarpedProfile step_ricci_flow(const WarpedProfile& p, double dt, const StepOptions& opts = {});

// x-component of the DeTurck field of p against the round metric on the
// same grid.
std::vector<double> deturck_field(const WarpedProfile& p);

struct FlowControl {
  // Requested step; 0 picks 0.9 of the stability bound, re-evaluated as the
  // metric shrinks.
  double dt = 0.0;
  // Snapshot spacing in time; 0 stores only the endpoints. Explicit
  // snapshot_times take precedence.
  double snapshot_every = 0.0;
  std::vector<double> snapshot_times;
  StepOptions step;
  // An interior b below this fraction of max b counts as a pinch.
  double pinch_ratio = 1e-3;
  int max_rejections = 30;
};

FlowTrajectory integrate(const WarpedProfile& p, double t0, double t1, const FlowControl& ctrl = {});

// Extrapolated extinction time from a linear fit of b^2 against t over the
// last `last` snapshots (b taken at the neck if one exists, else max b).
double fit_T0(const FlowTrajectory& tr, int last = 4);

// (max R - min R) / mean R; zero on round spheres.
double roundness_defect(const WarpedProfile& p);

// D0 = sup |Rm| (T0 - t) over snapshots and nodes; stored on tr.
double type_one_constant(FlowTrajectory& tr);

// kappa = min |B(x0, r, t0)| / r^n over snapshot times t0, pole centres and
// scales r with |Rm| <= r^-2 on the parabolic ball; stored on tr.
double kappa_estimate(FlowTrajectory& tr, const std::vector<double>& scales);

struct PointPair {
  Point x;
  Point y;
};

struct DoublingOptions {
  // Cap on the fitted c with |exponent| <= c * D0.
  double c_cap = 10.0;
};

CheckReport doubling_checks(const FlowTrajectory& tr, const std::vector<PointPair>& pairs, double t1, double t2,
                            const DoublingOptions& opts = {});

// g~ = g / (1 - t), t~ = -ln(1 - t). Needs T0 = 1.
FlowTrajectory normalize_type_I(const FlowTrajectory& tr);

// Directory layout: profile_0000.csv ... plus trajectory.json.
void write_trajectory(const std::string& dir, const FlowTrajectory& tr);
FlowTrajectory read_trajectory(const std::string& dir);

}  // namespace heatlab
