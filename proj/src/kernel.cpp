#include "heatlab/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include <json.hpp>

#include "numerics.hpp"

namespace heatlab {

std::string to_string(KernelDirection d) { return d == KernelDirection::forward ? "forward" : "conjugate"; }

KernelDirection kernel_direction_from_string(const std::string& s) {
  if (s == "forward") return KernelDirection::forward;
  if (s == "conjugate") return KernelDirection::conjugate;
  throw Error(ErrorKind::invalid_parameter, "unknown kernel direction '" + s + "'");
}

namespace {

bool close_time(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); }

}  // namespace

std::size_t KernelField::index_of_time(double t) const {
  for (std::size_t k = 0; k < snapshots.size(); ++k)
    if (close_time(snapshots[k].t, t)) return k;
  throw Error(ErrorKind::invalid_parameter, "no kernel slice at t = " + detail::format_double(t));
}

std::size_t KernelField::index_of_tau(double tau) const {
  for (std::size_t k = 0; k < snapshots.size(); ++k)
    if (close_time(snapshots[k].tau, tau)) return k;
  throw Error(ErrorKind::invalid_parameter, "no kernel slice at tau = " + detail::format_double(tau));
}

std::vector<double> KernelField::times() const {
  std::vector<double> t;
  for (const auto& s : snapshots) t.push_back(s.t);
  return t;
}

double unit_sphere_heat_kernel(int n, double theta, double Theta) {
  require(n >= 2, ErrorKind::unsupported_dimension, "sphere kernel needs n >= 2");
  require(Theta >= 0.0 && std::isfinite(Theta), ErrorKind::invalid_interval, "negative diffusion time");
  if (Theta == 0.0) throw Error(ErrorKind::series_not_convergent, "zero diffusion time gives a delta");
  const double alpha = 0.5 * (n - 1);
  const double x = std::cos(theta);
  // Gegenbauer recursion at cos(theta) and at 1 (the latter bounds the terms).
  double c_prev = 1.0, c = 2.0 * alpha * x;
  double b_prev = 1.0, b = 2.0 * alpha;
  double sum = 1.0, scale = 1.0;
  for (int k = 1; k < 1000000; ++k) {
    if (k >= 2) {
      const double c_next = (2.0 * x * (k + alpha - 1.0) * c - (k + 2.0 * alpha - 2.0) * c_prev) / k;
      const double b_next = (2.0 * (k + alpha - 1.0) * b - (k + 2.0 * alpha - 2.0) * b_prev) / k;
      c_prev = c;
      c = c_next;
      b_prev = b;
      b = b_next;
    }
    const double decay = std::exp(-double(k) * (k + n - 1) * Theta);
    const double weight = (1.0 + k / alpha) * decay;
    sum += weight * c;
    scale += weight * b;
    const double bound = weight * b;
    // Terms past k shrink geometrically once the ratio e^{-(2k+n)Theta} < 1/2.
    if (bound < 1e-17 * scale && std::exp(-(2.0 * k + n) * Theta) < 0.5) return sum / sphere_area(n);
  }
  throw Error(ErrorKind::series_not_convergent, "spectral series did not converge");
}

double spectral_kernel_sphere(const FlowTrajectory& tr, double l, double t, double theta) {
  require(tr.exact, ErrorKind::invalid_state, "spectral kernel needs an exact sphere trajectory");
  require(t > l, ErrorKind::invalid_interval, "spectral kernel needs t > l");
  require(t < *tr.T0, ErrorKind::out_of_domain, "t must be before T0");
  const double rl2 = tr.exact_radius2(l);
  const double rt2 = tr.exact_radius2(t);
  const double Theta = std::log(rl2 / rt2) / (2.0 * (tr.n - 1));
  return unit_sphere_heat_kernel(tr.n, theta, Theta) / std::pow(rl2, 0.5 * tr.n);
}

double circle_heat_kernel(double L, double tau, double d) {
  require(L > 0.0 && tau > 0.0, ErrorKind::invalid_parameter, "circle kernel needs L > 0 and tau > 0");
  d = std::remainder(d, L);
  const double pi = std::numbers::pi;
  if (tau < L * L / (4.0 * pi)) {
    const int m = static_cast<int>(std::ceil(std::sqrt(4.0 * tau * 745.0) / L)) + 1;
    double s = 0.0;
    for (int j = -m; j <= m; ++j) {
      const double y = d + j * L;
      s += std::exp(-y * y / (4.0 * tau));
    }
    return s / std::sqrt(4.0 * pi * tau);
  }
  double s = 1.0;
  for (int k = 1;; ++k) {
    const double w = 2.0 * pi * k / L;
    const double e = std::exp(-w * w * tau);
    s += 2.0 * e * std::cos(w * d);
    if (e < 1e-18) break;
  }
  return s / L;
}

double torus_heat_kernel(const std::vector<double>& sides, double tau, const std::vector<double>& offset) {
  require(sides.size() == offset.size(), ErrorKind::invalid_parameter, "offset dimension mismatch");
  double v = 1.0;
  for (std::size_t d = 0; d < sides.size(); ++d) v *= circle_heat_kernel(sides[d], tau, offset[d]);
  return v;
}

namespace {

// Finite-volume pieces on a warped profile: nodal measure W and the
// symmetric stiffness K with conductances between neighbours. On DeTurck
// slices B carries the drift of fixed points: d(W u) = (-K + B) u.
struct Operator {
  std::vector<double> w;
  std::vector<double> c;  // c[j] couples j and j+1
  std::vector<double> bl, bd, bu;  // B row i: u[i-1], u[i], u[i+1]
};

Operator assemble(const WarpedProfile& p, KernelDirection dir) {
  Operator op;
  op.w = measure_weights(p);
  const double omega = sphere_area(p.n - 1);
  const std::size_t N = p.nodes();
  op.c.resize(N - 1);
  for (std::size_t j = 0; j + 1 < N; ++j) {
    const double bm = 0.5 * (p.b[j] + p.b[j + 1]);
    const double am = 0.5 * (p.a[j] + p.a[j + 1]);
    op.c[j] = omega * std::pow(bm, p.n - 1) / am / p.dx();
  }
  if (p.gauge.empty()) return op;
  op.bl.assign(N, 0.0);
  op.bd.assign(N, 0.0);
  op.bu.assign(N, 0.0);
  if (dir == KernelDirection::forward) {
    // u_t = Lap u + W u_x
    for (std::size_t i = 1; i + 1 < N; ++i) {
      const double v = op.w[i] * p.gauge[i] / (2.0 * p.dx());
      op.bu[i] = v;
      op.bl[i] = -v;
    }
  } else {
    // d(u dmu)/dtau = (Lap u - div(u W)) dmu, central face values.
    for (std::size_t j = 0; j + 1 < N; ++j) {
      const double bm = 0.5 * (p.b[j] + p.b[j + 1]);
      const double am = 0.5 * (p.a[j] + p.a[j + 1]);
      const double g = 0.5 * omega * std::pow(bm, p.n - 1) * am * 0.5 * (p.gauge[j] + p.gauge[j + 1]);
      op.bd[j] -= g;
      op.bu[j] -= g;
      op.bd[j + 1] += g;
      op.bl[j + 1] += g;
    }
  }
  return op;
}

// y = (kw W + kk (K - B)) x on the tridiagonal structure.
void apply(const Operator& op, double kw, double kk, const std::vector<double>& x, std::vector<double>& y) {
  const std::size_t N = x.size();
  y.assign(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) y[i] = kw * op.w[i] * x[i];
  for (std::size_t j = 0; j + 1 < N; ++j) {
    const double f = kk * op.c[j] * (x[j] - x[j + 1]);
    y[j] += f;
    y[j + 1] -= f;
  }
  if (op.bd.empty()) return;
  for (std::size_t i = 0; i < N; ++i) {
    double bx = op.bd[i] * x[i];
    if (i > 0) bx += op.bl[i] * x[i - 1];
    if (i + 1 < N) bx += op.bu[i] * x[i + 1];
    y[i] -= kk * bx;
  }
}

void solve(const Operator& op, double kw, double kk, std::vector<double>& rhs) {
  const std::size_t N = rhs.size();
  std::vector<double> lo(N, 0.0), di(N), up(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) di[i] = kw * op.w[i];
  for (std::size_t j = 0; j + 1 < N; ++j) {
    di[j] += kk * op.c[j];
    di[j + 1] += kk * op.c[j];
    up[j] = -kk * op.c[j];
    lo[j + 1] = -kk * op.c[j];
  }
  if (!op.bd.empty())
    for (std::size_t i = 0; i < N; ++i) {
      di[i] -= kk * op.bd[i];
      lo[i] -= kk * op.bl[i];
      up[i] -= kk * op.bu[i];
    }
  detail::solve_tridiagonal(lo, di, up, rhs);
}

// One periodic axis, uniform spacing h: W = h, K = second difference / h.
void solve_axis_cn(std::vector<double>& f, double h, double dt, bool implicit_euler) {
  const std::size_t N = f.size();
  const double k = 1.0 / h;
  const double theta = implicit_euler ? 1.0 : 0.5;
  std::vector<double> rhs(N);
  for (std::size_t i = 0; i < N; ++i) {
    const double lap = k * (f[(i + N - 1) % N] - 2.0 * f[i] + f[(i + 1) % N]);
    rhs[i] = h * f[i] + (1.0 - theta) * dt * lap;
  }
  std::vector<double> lo(N, -theta * dt * k), di(N, h + 2.0 * theta * dt * k), up(N, -theta * dt * k);
  detail::solve_cyclic_tridiagonal(lo, di, up, rhs);
  f = std::move(rhs);
}

std::size_t pole_index(const WarpedProfile& p, const Point& x0) {
  require(x0.coord.size() == 1, ErrorKind::invalid_parameter, "warped sources carry one axial coordinate");
  if (std::abs(x0.coord[0]) < 1e-12) return 0;
  if (std::abs(x0.coord[0] - 1.0) < 1e-12) return p.nodes() - 1;
  throw Error(ErrorKind::invalid_parameter, "warped kernel sources must sit at a pole");
}

std::vector<std::size_t> torus_source_nodes(const WarpedProfile& p, const Point& x0) {
  require(static_cast<int>(x0.coord.size()) == p.n, ErrorKind::invalid_parameter, "torus sources need n coordinates");
  std::vector<std::size_t> idx;
  for (int d = 0; d < p.n; ++d) {
    const double h = p.axis_spacing(d);
    const double q = x0.coord[d] / h;
    const double r = std::round(q);
    require(std::abs(q - r) < 1e-9, ErrorKind::invalid_parameter, "torus sources must sit on a grid node");
    const long M = p.M;
    idx.push_back(static_cast<std::size_t>(((static_cast<long>(r) % M) + M) % M));
  }
  return idx;
}

// Distance of each warped node to the source pole.
std::vector<double> pole_distance(const WarpedProfile& p, std::size_t src) {
  auto s = arclength_from_pole(p);
  if (src != 0) {
    const double L = s.back();
    for (double& v : s) v = L - v;
  }
  return s;
}

std::vector<double> sphere_angles(const WarpedProfile& p, std::size_t src) {
  std::vector<double> th(p.nodes());
  for (std::size_t i = 0; i < th.size(); ++i) {
    const double x = src == 0 ? p.x[i] : 1.0 - p.x[i];
    th[i] = std::numbers::pi * x;
  }
  return th;
}

double weighted_sum(const std::vector<double>& u, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * w[i];
  return s;
}

double axis_mass(const std::vector<double>& f, double h) {
  double s = 0.0;
  for (double v : f) s += v;
  return s * h;
}

std::vector<double> prepare_taus(const KernelDirection dir, double source_time, std::vector<double>& times,
                                 double eps) {
  require(!times.empty(), ErrorKind::invalid_parameter, "empty slice time list");
  std::vector<double> taus;
  for (double t : times) {
    const double tau = dir == KernelDirection::forward ? t - source_time : source_time - t;
    require(tau >= eps * (1.0 - 1e-12), ErrorKind::invalid_parameter,
            "slice time " + detail::format_double(t) + " is not past the seed offset");
    taus.push_back(tau);
  }
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  return taus;
}

double slice_time(KernelDirection dir, double source_time, double tau) {
  return dir == KernelDirection::forward ? source_time + tau : source_time - tau;
}

// Exact forward mass after tau on an exact sphere: e^{-int R}.
double exact_forward_mass(const FlowTrajectory& tr, double lo, double hi) {
  return std::pow(tr.exact_radius2(hi) / tr.exact_radius2(lo), 0.5 * tr.n);
}

KernelField solve_kernel(const FlowTrajectory& tr, KernelDirection dir, const Point& x0, double source_time,
                         std::vector<double> times, const KernelSolverOptions& opts) {
  require(!tr.profiles.empty(), ErrorKind::invalid_state, "empty trajectory");
  const double eps = opts.eps > 0.0 ? opts.eps : 10.0 * opts.dt_floor;
  const auto taus = prepare_taus(dir, source_time, times, eps);
  for (double tau : taus) {
    const double t = slice_time(dir, source_time, tau);
    require(tr.covers(t), ErrorKind::interpolation_error, "trajectory does not cover t = " + detail::format_double(t));
  }
  require(tr.covers(source_time) || (tr.exact && source_time < *tr.T0), ErrorKind::interpolation_error,
          "trajectory does not cover the source time");

  KernelField kf;
  kf.n = tr.n;
  kf.kind = tr.kind;
  kf.direction = dir;
  kf.source = x0;
  kf.source_time = source_time;
  kf.seed_eps = eps;
  kf.scheme = "crank-nicolson";
  kf.dt = opts.dt_floor;

  auto dt_at = [&](double tau) { return std::min(opts.dt_max, std::max(opts.dt_floor, opts.rel_dt * tau)); };
  auto metric = [&](double tau) { return tr.profile_at(slice_time(dir, source_time, tau)); };

  const WarpedProfile p_seed = metric(eps);
  const bool torus = p_seed.is_torus();
  double tau = eps;
  int step_index = 0;
  double running_max = 0.0;

  auto check_sign = [&](const std::vector<double>& v) {
    double mx = 0.0, mn = 0.0;
    for (double x : v) {
      mx = std::max(mx, x);
      mn = std::min(mn, x);
    }
    running_max = std::max(running_max, mx);
    if (mn < 0.0) kf.min_ratio = std::min(kf.min_ratio, mn / running_max);
    if (mn < -opts.negative_tol * running_max)
      throw Error(ErrorKind::solver_instability,
                  "negative kernel value " + detail::format_double(mn / running_max) + " of max near tau = " +
                      detail::format_double(tau));
  };
  auto clamp = [](std::vector<double> v) {
    for (double& x : v) x = std::max(x, 0.0);
    return v;
  };

  if (torus) {
    const auto src = torus_source_nodes(p_seed, x0);
    std::vector<std::vector<double>> f(static_cast<std::size_t>(tr.n));
    for (int d = 0; d < tr.n; ++d) {
      const double h = p_seed.axis_spacing(d);
      f[d].resize(static_cast<std::size_t>(p_seed.M));
      for (int i = 0; i < p_seed.M; ++i) f[d][i] = circle_heat_kernel(p_seed.sides[d], eps, (i - double(src[d])) * h);
      const double m = axis_mass(f[d], h);
      for (double& v : f[d]) v /= m;
    }
    for (double target : taus) {
      while (tau < target * (1.0 - 1e-14) && target - tau > 1e-15) {
        double h = dt_at(tau);
        if (target - tau <= 1.5 * h) h = target - tau <= h ? target - tau : 0.5 * (target - tau);
        const bool ie = step_index < opts.rannacher_steps;
        for (int d = 0; d < tr.n; ++d) {
          const double sp = p_seed.axis_spacing(d);
          if (ie) {
            solve_axis_cn(f[d], sp, 0.5 * h, true);
            solve_axis_cn(f[d], sp, 0.5 * h, true);
          } else {
            solve_axis_cn(f[d], sp, h, false);
          }
          check_sign(f[d]);
        }
        tau = h == target - tau ? target : tau + h;
        ++step_index;
      }
      tau = target;
      KernelSnapshot s;
      s.tau = target;
      s.t = slice_time(dir, source_time, target);
      s.metric = metric(target);
      double mass = 1.0;
      for (int d = 0; d < tr.n; ++d) {
        s.axis_u.push_back(clamp(f[d]));
        mass *= axis_mass(f[d], p_seed.axis_spacing(d));
      }
      s.forward_mass = mass;
      s.backward_mass = 1.0;
      kf.snapshots.push_back(std::move(s));
    }
    return kf;
  }

  const std::size_t src = pole_index(p_seed, x0);
  const std::size_t N = p_seed.nodes();
  std::vector<double> u(N);
  double target_mass = 1.0;
  if (tr.exact) {
    const auto th = sphere_angles(p_seed, src);
    for (std::size_t i = 0; i < N; ++i)
      u[i] = dir == KernelDirection::forward ? spectral_kernel_sphere(tr, source_time, source_time + eps, th[i])
                                             : spectral_kernel_sphere(tr, source_time - eps, source_time, th[i]);
    if (dir == KernelDirection::forward) target_mass = exact_forward_mass(tr, source_time, source_time + eps);
  } else {
    const auto d = pole_distance(p_seed, src);
    for (std::size_t i = 0; i < N; ++i) u[i] = std::exp(-d[i] * d[i] / (4.0 * eps));
    if (dir == KernelDirection::forward) {
      const double R0 = tr.pole_curvature_at(source_time);
      const double R1 = tr.pole_curvature_at(source_time + eps);
      target_mass = std::exp(-0.5 * eps * (R0 + R1));
    }
  }
  {
    const double m = weighted_sum(u, measure_weights(p_seed));
    for (double& v : u) v *= target_mass / m;
  }
  Operator op_prev = assemble(p_seed, dir);
  // Constant data propagated with the same scheme. Over the seed interval the
  // conjugate update of a constant is exactly W(t0) / W(t0 - eps).
  std::vector<double> ones(N, 1.0);
  if (dir == KernelDirection::conjugate) {
    const auto w0 = measure_weights(metric(0.0));
    for (std::size_t i = 0; i < N; ++i) ones[i] = w0[i] / op_prev.w[i];
  }
  std::vector<double> rhs(N), rhs1(N);

  for (double target : taus) {
    while (tau < target * (1.0 - 1e-14) && target - tau > 1e-15) {
      double h = dt_at(tau);
      if (target - tau <= 1.5 * h) h = target - tau <= h ? target - tau : 0.5 * (target - tau);
      const bool ie = step_index < opts.rannacher_steps;
      const double tau_next = h == target - tau ? target : tau + h;
      if (dir == KernelDirection::forward) {
        // Heat equation with the metric frozen at the step midpoint.
        if (ie) {
          for (int half = 0; half < 2; ++half) {
            const Operator op = assemble(metric(tau + (half + 0.5) * 0.5 * h), dir);
            apply(op, 1.0, 0.0, u, rhs);
            solve(op, 1.0, 0.5 * h, rhs);
            u = rhs;
            apply(op, 1.0, 0.0, ones, rhs1);
            solve(op, 1.0, 0.5 * h, rhs1);
            ones = rhs1;
          }
        } else {
          const Operator op = assemble(metric(tau + 0.5 * h), dir);
          apply(op, 1.0, -0.5 * h, u, rhs);
          solve(op, 1.0, 0.5 * h, rhs);
          u = rhs;
          apply(op, 1.0, -0.5 * h, ones, rhs1);
          solve(op, 1.0, 0.5 * h, rhs1);
          ones = rhs1;
        }
      } else {
        // Conservative form d(W u)/dtau = -K u.
        if (ie) {
          double tt = tau;
          for (int half = 0; half < 2; ++half) {
            const Operator op_next = assemble(metric(tt + 0.5 * h), dir);
            apply(op_prev, 1.0, 0.0, u, rhs);
            solve(op_next, 1.0, 0.5 * h, rhs);
            u = rhs;
            apply(op_prev, 1.0, 0.0, ones, rhs1);
            solve(op_next, 1.0, 0.5 * h, rhs1);
            ones = rhs1;
            op_prev = op_next;
            tt += 0.5 * h;
          }
        } else {
          const Operator op_next = assemble(metric(tau_next), dir);
          apply(op_prev, 1.0, -0.5 * h, u, rhs);
          solve(op_next, 1.0, 0.5 * h, rhs);
          u = rhs;
          apply(op_prev, 1.0, -0.5 * h, ones, rhs1);
          solve(op_next, 1.0, 0.5 * h, rhs1);
          ones = rhs1;
          op_prev = op_next;
        }
      }
      tau = tau_next;
      ++step_index;
      check_sign(u);
    }
    tau = target;
    KernelSnapshot s;
    s.tau = target;
    s.t = slice_time(dir, source_time, target);
    s.metric = metric(target);
    s.dmu = measure_weights(s.metric);
    s.u = clamp(u);
    if (dir == KernelDirection::forward) {
      s.forward_mass = weighted_sum(s.u, s.dmu);
      s.backward_mass = ones[src];
    } else {
      s.backward_mass = weighted_sum(s.u, s.dmu);
      s.forward_mass = ones[src];
    }
    kf.snapshots.push_back(std::move(s));
  }
  return kf;
}

}  // namespace

KernelField solve_forward_kernel(const FlowTrajectory& tr, const Point& x0, double l, std::vector<double> t_grid,
                                 const KernelSolverOptions& opts) {
  return solve_kernel(tr, KernelDirection::forward, x0, l, std::move(t_grid), opts);
}

KernelField solve_conjugate_kernel(const FlowTrajectory& tr, const Point& x0, double t0, std::vector<double> l_grid,
                                   const KernelSolverOptions& opts) {
  return solve_kernel(tr, KernelDirection::conjugate, x0, t0, std::move(l_grid), opts);
}

KernelField oracle_kernel_field(const FlowTrajectory& tr, KernelDirection direction, const Point& x0,
                                double source_time, std::vector<double> times) {
  require(tr.exact || tr.kind == ModelKind::flat_torus, ErrorKind::invalid_state,
          "closed-form kernels exist for exact spheres and tori only");
  const auto taus = prepare_taus(direction, source_time, times, 0.0);
  KernelField kf;
  kf.n = tr.n;
  kf.kind = tr.kind;
  kf.direction = direction;
  kf.source = x0;
  kf.source_time = source_time;
  kf.scheme = tr.exact ? "spectral" : "image-sum";
  for (double tau : taus) {
    require(tau > 0.0, ErrorKind::invalid_interval, "slices must differ from the source time");
    KernelSnapshot s;
    s.tau = tau;
    s.t = slice_time(direction, source_time, tau);
    s.metric = tr.profile_at(s.t);
    const double lo = std::min(s.t, source_time);
    const double hi = std::max(s.t, source_time);
    if (s.metric.is_torus()) {
      const auto src = torus_source_nodes(s.metric, x0);
      double mass = 1.0;
      for (int d = 0; d < tr.n; ++d) {
        const double h = s.metric.axis_spacing(d);
        std::vector<double> f(static_cast<std::size_t>(s.metric.M));
        for (int i = 0; i < s.metric.M; ++i) f[i] = circle_heat_kernel(s.metric.sides[d], tau, (i - double(src[d])) * h);
        mass *= axis_mass(f, h);
        s.axis_u.push_back(std::move(f));
      }
      s.forward_mass = mass;
      s.backward_mass = mass;
    } else {
      const std::size_t src = pole_index(s.metric, x0);
      const auto th = sphere_angles(s.metric, src);
      s.u.resize(th.size());
      for (std::size_t i = 0; i < th.size(); ++i) s.u[i] = spectral_kernel_sphere(tr, lo, hi, th[i]);
      s.dmu = quadrature_weights(s.metric);
      // The kernel is symmetric in the two points, so the complementary
      // slice has the same values on the other metric.
      const auto w_other = quadrature_weights(tr.profile_at(direction == KernelDirection::forward ? lo : hi));
      const double own = weighted_sum(s.u, s.dmu);
      const double other = weighted_sum(s.u, w_other);
      s.forward_mass = direction == KernelDirection::forward ? own : other;
      s.backward_mass = direction == KernelDirection::forward ? other : own;
    }
    kf.snapshots.push_back(std::move(s));
  }
  return kf;
}

double slice_mass(const KernelField& kf, std::size_t k) {
  const auto& s = kf.snapshots.at(k);
  if (s.metric.is_torus()) {
    double m = 1.0;
    for (int d = 0; d < kf.n; ++d) m *= axis_mass(s.axis_u[d], s.metric.axis_spacing(d));
    return m;
  }
  return weighted_sum(s.u, s.dmu);
}

double forward_mass(const KernelField& kf, double t) { return kf.snapshots[kf.index_of_time(t)].forward_mass; }

double backward_mass(const KernelField& kf, double t) { return kf.snapshots[kf.index_of_time(t)].backward_mass; }

double backward_mass(const KernelField& kf) {
  require(!kf.snapshots.empty(), ErrorKind::invalid_state, "empty kernel field");
  double worst = kf.snapshots.front().backward_mass;
  for (const auto& s : kf.snapshots)
    if (std::abs(s.backward_mass - 1.0) > std::abs(worst - 1.0)) worst = s.backward_mass;
  return worst;
}

double source_value(const KernelField& kf, std::size_t k) {
  const auto& s = kf.snapshots.at(k);
  if (s.metric.is_torus()) {
    const auto src = torus_source_nodes(s.metric, kf.source);
    double v = 1.0;
    for (int d = 0; d < kf.n; ++d) v *= s.axis_u[d][src[d]];
    return v;
  }
  return s.u[pole_index(s.metric, kf.source)];
}

KernelLine kernel_line(const KernelField& kf, std::size_t k) {
  const auto& s = kf.snapshots.at(k);
  KernelLine line;
  if (s.metric.is_torus()) {
    const auto src = torus_source_nodes(s.metric, kf.source);
    double rest = 1.0;
    for (int d = 1; d < kf.n; ++d) rest *= s.axis_u[d][src[d]];
    const double L = s.metric.sides[0];
    const double h = s.metric.axis_spacing(0);
    for (int i = 0; i < s.metric.M; ++i) {
      line.u.push_back(s.axis_u[0][i] * rest);
      const double g = std::abs(std::remainder((i - double(src[0])) * h, L));
      line.dist.push_back(g);
    }
    return line;
  }
  line.u = s.u;
  line.dist = pole_distance(s.metric, pole_index(s.metric, kf.source));
  return line;
}

double seed_sensitivity(const FlowTrajectory& tr, KernelDirection direction, const Point& x0, double source_time,
                        const std::vector<double>& times, const KernelSolverOptions& opts) {
  KernelSolverOptions half = opts;
  const double eps = opts.eps > 0.0 ? opts.eps : 10.0 * opts.dt_floor;
  half.eps = 0.5 * eps;
  const KernelField a = solve_kernel(tr, direction, x0, source_time, times, opts);
  const KernelField b = solve_kernel(tr, direction, x0, source_time, times, half);
  double worst = 0.0;
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
    const auto la = kernel_line(a, k);
    const auto lb = kernel_line(b, k);
    const double mx = *std::max_element(la.u.begin(), la.u.end());
    for (std::size_t i = 0; i < la.u.size(); ++i) worst = std::max(worst, std::abs(la.u[i] - lb.u[i]) / mx);
  }
  return worst;
}

std::vector<double> conjugate_equation_residual(const KernelField& kf) {
  require(kf.direction == KernelDirection::conjugate && kf.kind == ModelKind::warped_sphere,
          ErrorKind::invalid_state, "residual needs a conjugate warped field");
  require(kf.snapshots.size() >= 3, ErrorKind::insufficient_data, "need three slices");
  std::vector<double> out;
  for (std::size_t k = 1; k + 1 < kf.snapshots.size(); ++k) {
    const auto& s0 = kf.snapshots[k - 1];
    const auto& s1 = kf.snapshots[k];
    const auto& s2 = kf.snapshots[k + 1];
    const double h0 = s1.tau - s0.tau, h1 = s2.tau - s1.tau;
    const auto& p = s1.metric;
    const auto der = radial_derivatives(p, s1.u);
    const auto bs = radial_derivatives(p, p.b);  // parity is irrelevant away from the poles
    const auto c = curvature(p);
    const std::size_t N = p.nodes();
    const std::size_t skip = std::max<std::size_t>(4, N / 16);
    double res = 0.0, scale = 0.0;
    for (std::size_t i = skip; i + skip < N; ++i) {
      const double dtau = -h1 / (h0 * (h0 + h1)) * s0.u[i] + (h1 - h0) / (h0 * h1) * s1.u[i] +
                          h0 / (h1 * (h0 + h1)) * s2.u[i];
      const double lap = der.d2[i] + (p.n - 1) * bs.d1[i] / p.b[i] * der.d1[i];
      const double drift = p.gauge.empty() ? 0.0 : p.gauge[i] * p.a[i] * der.d1[i];
      res = std::max(res, std::abs(dtau - lap + c.R[i] * s1.u[i] + drift));
      scale = std::max(scale, std::abs(dtau));
    }
    out.push_back(res / scale);
  }
  return out;
}

void write_kernel_csv(const std::string& path, const KernelField& kf) {
  using detail::format_double;
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::io_error, "cannot write " + path);
  os << "l,t,x,theta_or_coord,u,dmu\n";
  for (std::size_t k = 0; k < kf.snapshots.size(); ++k) {
    const auto& s = kf.snapshots[k];
    const double l = kf.direction == KernelDirection::forward ? kf.source_time : s.t;
    const double t = kf.direction == KernelDirection::forward ? s.t : kf.source_time;
    const auto line = kernel_line(kf, k);
    for (std::size_t i = 0; i < line.u.size(); ++i) {
      const double x = s.metric.is_torus() ? double(i) / s.metric.M : s.metric.x[i];
      const double coord = s.metric.is_torus() ? x * s.metric.sides[0] : std::numbers::pi * x;
      const double dmu = s.metric.is_torus() ? torus_cell_volume(s.metric) : s.dmu[i];
      os << format_double(l) << ',' << format_double(t) << ',' << format_double(x) << ',' << format_double(coord)
         << ',' << format_double(line.u[i]) << ',' << format_double(dmu) << '\n';
    }
  }
}

void write_kernel_manifest(const std::string& path, const KernelField& kf) {
  nlohmann::ordered_json j;
  j["source"] = kf.source.coord;
  j["direction"] = to_string(kf.direction);
  j[kf.direction == KernelDirection::forward ? "l" : "t0"] = kf.source_time;
  j["eps"] = kf.seed_eps;
  j["times"] = kf.times();
  nlohmann::ordered_json solver;
  solver["dt"] = kf.dt;
  solver["M"] = kf.snapshots.empty() ? 0 : kf.snapshots.front().metric.M;
  solver["scheme"] = kf.scheme;
  j["solver"] = solver;
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::io_error, "cannot write " + path);
  os << j.dump(2) << '\n';
}

}  // namespace heatlab
