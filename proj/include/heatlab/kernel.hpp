#pragma once

// Fundamental solution G(x, l; y, t) of the conjugate heat equation.
//
// As a function of (y, t) it solves the forward heat equation du/dt = Lap u
// on the evolving metric; as a function of (x, l) it solves the conjugate
// equation -du/dl = Lap u - R u. A KernelField holds one of the two slices:
//   forward:   source (x0, l) fixed, slices at t > l, values G(x0, l; y, t);
//   conjugate: source (x0, t0) fixed, slices at l < t0, values G(y, l; x0, t0).
// tau = |slice time - source time| in both cases.

#include <string>
#include <vector>

#include "heatlab/flow.hpp"
#include "heatlab/geometry.hpp"

namespace heatlab {

enum class KernelDirection { forward, conjugate };

std::string to_string(KernelDirection d);
KernelDirection kernel_direction_from_string(const std::string& s);

struct KernelSnapshot {
  double t = 0.0;
  double tau = 0.0;
  WarpedProfile metric;
  // Warped models: nodal values and measure weights.
  std::vector<double> u;
  std::vector<double> dmu;
  // Tori: u(y) = prod_d axis_u[d][i_d], one factor per axis.
  std::vector<std::vector<double>> axis_u;
  // Propagated-constant audits: the mass of the complementary slice.
  double forward_mass = 0.0;
  double backward_mass = 0.0;
};

struct KernelField {
  int n = 2;
  ModelKind kind = ModelKind::warped_sphere;
  KernelDirection direction = KernelDirection::forward;
  Point source;
  double source_time = 0.0;
  double seed_eps = 0.0;
  std::string scheme;
  double dt = 0.0;
  // Most negative value seen, relative to the running max (0 if none).
  double min_ratio = 0.0;
  std::vector<KernelSnapshot> snapshots;

  // Snapshot index at slice time t; invalid-parameter if absent.
  std::size_t index_of_time(double t) const;
  // Snapshot index at tau; invalid-parameter if absent.
  std::size_t index_of_tau(double tau) const;
  std::vector<double> times() const;
};

// Heat kernel of the unit round n-sphere at angle theta after total
// (dimensionless) time Theta.
double unit_sphere_heat_kernel(int n, double theta, double Theta);

// Exact G(x0, l; y, t) on an exact shrinking sphere, theta the angle between
// x0 and y. Uses Theta = ln(r(l)^2 / r(t)^2) / (2(n-1)).
double spectral_kernel_sphere(const FlowTrajectory& tr, double l, double t, double theta);

// Heat kernel of a circle of length L after time tau at separation d.
double circle_heat_kernel(double L, double tau, double d);
// Product of circle kernels on a torus; `offset` in length units.
double torus_heat_kernel(const std::vector<double>& sides, double tau, const std::vector<double>& offset);

struct KernelSolverOptions {
  // Seed offset; 0 means 10 * dt_floor.
  double eps = 0.0;
  double dt_floor = 1e-4;
  double rel_dt = 0.01;
  double dt_max = 0.05;
  // Leading Crank-Nicolson steps replaced by pairs of implicit Euler half steps.
  int rannacher_steps = 2;
  double negative_tol = 1e-10;
};

// Crank-Nicolson finite-volume solve of the forward heat equation from a
// seed at l + eps. x0 must be a pole (warped) or a node (torus).
KernelField solve_forward_kernel(const FlowTrajectory& tr, const Point& x0, double l, std::vector<double> t_grid,
                                 const KernelSolverOptions& opts = {});

// Conservative Crank-Nicolson solve of the conjugate equation from a seed at
// t0 - eps down to each l in l_grid.
KernelField solve_conjugate_kernel(const FlowTrajectory& tr, const Point& x0, double t0, std::vector<double> l_grid,
                                   const KernelSolverOptions& opts = {});

// Field sampled from the closed-form kernels (exact spheres: spectral series;
// tori: image or Fourier sums). `times` are slice times.
KernelField oracle_kernel_field(const FlowTrajectory& tr, KernelDirection direction, const Point& x0,
                                double source_time, std::vector<double> times);

// Integral of the slice at time t against its own measure. For forward
// fields this is the forward mass; for conjugate fields it is the conserved
// (backward) mass.
double slice_mass(const KernelField& kf, std::size_t k);

// Forward mass int G(x0, l; y, t) dmu_t(y) and backward mass
// int G(x, l; x0, t) dmu_l(x) at slice time t of kf.
double forward_mass(const KernelField& kf, double t);
double backward_mass(const KernelField& kf, double t);
// Backward mass farthest from 1 over all slices.
double backward_mass(const KernelField& kf);

// Value of the slice at the source point.
double source_value(const KernelField& kf, std::size_t k);

// Slice values along the axis through the source: warped nodes as stored;
// tori along axis 0 with the other coordinates at the source. `dist` is the
// distance to the source in the slice metric.
struct KernelLine {
  std::vector<double> u;
  std::vector<double> dist;
};
KernelLine kernel_line(const KernelField& kf, std::size_t k);

// Max relative change of the stored values when the seed offset is halved.
double seed_sensitivity(const FlowTrajectory& tr, KernelDirection direction, const Point& x0, double source_time,
                        const std::vector<double>& times, const KernelSolverOptions& opts = {});

// Residual du/dtau - Lap u + R u of a conjugate warped field at interior
// slices, relative to max |du/dtau|, evaluated away from the poles.
std::vector<double> conjugate_equation_residual(const KernelField& kf);

// CSV with header l,t,x,theta_or_coord,u,dmu and a JSON manifest.
void write_kernel_csv(const std::string& path, const KernelField& kf);
void write_kernel_manifest(const std::string& path, const KernelField& kf);

}  // namespace heatlab
