#include "heatlab/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "numerics.hpp"

namespace heatlab {

namespace fs = std::filesystem;

namespace {

bool same_sides(const WarpedProfile& p, const WarpedProfile& q) { return p.sides == q.sides; }

bool is_static_torus(const FlowTrajectory& tr) {
  for (const auto& p : tr.profiles)
    if (!same_sides(p, tr.profiles.front())) return false;
  return true;
}

// Index i with profiles[i].t <= t <= profiles[i+1].t.
std::size_t bracket(const FlowTrajectory& tr, double t) {
  const auto& P = tr.profiles;
  std::size_t i = 0;
  while (i + 2 < P.size() && P[i + 1].t <= t) ++i;
  return i;
}

double time_slack(const FlowTrajectory& tr) {
  return 1e-12 * std::max({1.0, std::abs(tr.t_first()), std::abs(tr.t_last())});
}

}  // namespace

double FlowTrajectory::exact_radius2(double t) const {
  require(exact && T0.has_value(), ErrorKind::invalid_state, "trajectory is not an exact sphere");
  return 2.0 * (n - 1) * (*T0 - t);
}

bool FlowTrajectory::covers(double t) const {
  if (profiles.empty()) return false;
  if (exact) return t < *T0;
  if (kind == ModelKind::flat_torus && is_static_torus(*this)) return true;
  const double slack = time_slack(*this);
  return t >= t_first() - slack && t <= t_last() + slack;
}

WarpedProfile FlowTrajectory::profile_at(double t) const {
  require(!profiles.empty(), ErrorKind::invalid_state, "empty trajectory");
  if (exact) {
    require(t < *T0, ErrorKind::out_of_domain, "time " + detail::format_double(t) + " is not before T0");
    return make_round_sphere(n, std::sqrt(exact_radius2(t)), grid(), t);
  }
  if (kind == ModelKind::flat_torus && is_static_torus(*this)) {
    WarpedProfile p = profiles.front();
    p.t = t;
    return p;
  }
  require(covers(t), ErrorKind::interpolation_error,
          "time " + detail::format_double(t) + " outside the stored span");
  if (profiles.size() == 1) return profiles.front();
  const std::size_t i = bracket(*this, t);
  const WarpedProfile& p0 = profiles[i];
  const WarpedProfile& p1 = profiles[i + 1];
  const double w = std::clamp((t - p0.t) / (p1.t - p0.t), 0.0, 1.0);
  WarpedProfile p = p0;
  p.t = t;
  auto mix = [w](std::vector<double>& dst, const std::vector<double>& hi) {
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += w * (hi[k] - dst[k]);
  };
  if (p.is_torus()) {
    mix(p.sides, p1.sides);
  } else {
    mix(p.a, p1.a);
    mix(p.b, p1.b);
    if (p.gauge.size() == p1.gauge.size()) mix(p.gauge, p1.gauge);
  }
  return p;
}

double FlowTrajectory::pole_curvature_at(double t) const {
  if (kind == ModelKind::flat_torus) return 0.0;
  if (exact) {
    require(t < *T0, ErrorKind::out_of_domain, "time is not before T0");
    return double(n) * (n - 1) / exact_radius2(t);
  }
  require(covers(t), ErrorKind::interpolation_error, "time outside the stored span");
  if (profiles.size() == 1) return pole_scalar_curvature(profiles.front());
  const std::size_t i = bracket(*this, t);
  const double R0 = pole_scalar_curvature(profiles[i]);
  const double R1 = pole_scalar_curvature(profiles[i + 1]);
  const double w = std::clamp((t - profiles[i].t) / (profiles[i + 1].t - profiles[i].t), 0.0, 1.0);
  return R0 + w * (R1 - R0);
}

FlowTrajectory exact_sphere_trajectory(int n, double T0, std::vector<double> t_list, int M) {
  require(!t_list.empty(), ErrorKind::invalid_parameter, "empty time list");
  std::sort(t_list.begin(), t_list.end());
  require(std::adjacent_find(t_list.begin(), t_list.end()) == t_list.end(), ErrorKind::invalid_parameter,
          "duplicate snapshot times");
  FlowTrajectory tr;
  tr.n = n;
  tr.exact = true;
  tr.T0 = T0;
  for (double t : t_list) {
    require(t < T0, ErrorKind::out_of_domain, "snapshot time " + detail::format_double(t) + " is not before T0");
    tr.profiles.push_back(make_round_sphere(n, std::sqrt(2.0 * (n - 1) * (T0 - t)), M, t));
  }
  return tr;
}

FlowTrajectory static_torus_trajectory(const WarpedProfile& torus, std::vector<double> t_list) {
  require(torus.is_torus(), ErrorKind::invalid_parameter, "static trajectories are for tori");
  require(!t_list.empty(), ErrorKind::invalid_parameter, "empty time list");
  std::sort(t_list.begin(), t_list.end());
  FlowTrajectory tr;
  tr.n = torus.n;
  tr.kind = ModelKind::flat_torus;
  for (double t : t_list) {
    WarpedProfile p = torus;
    p.t = t;
    tr.profiles.push_back(std::move(p));
  }
  return tr;
}

double stable_dt(const WarpedProfile& p, double cfl) {
  if (p.is_torus()) return std::numeric_limits<double>::infinity();
  const double amin = *std::min_element(p.a.begin(), p.a.end());
  const double h = amin * p.dx();
  return cfl * h * h;
}

namespace {

struct State {
  std::vector<double> a, b;
};

// DeTurck field against the round metric, split as W = a_x / a^3 + V. The
// round Christoffel symbols go through the same stencil, so W vanishes on
// discrete round spheres.
struct Gauge {
  std::vector<double> W, V, bx;
};

Gauge gauge_parts(const std::vector<double>& x, const std::vector<double>& a, const std::vector<double>& b, int n) {
  const std::size_t N = x.size();
  const double h = 1.0 / static_cast<double>(N - 1);
  const double pi = std::acos(-1.0);
  std::vector<double> sb(N);
  for (std::size_t i = 0; i < N; ++i) sb[i] = std::sin(pi * x[i]);
  sb.front() = 0.0;
  sb.back() = 0.0;
  const detail::GhostExtended ga(a, +1), gb(b, -1), gs(sb, -1);
  Gauge g{std::vector<double>(N, 0.0), std::vector<double>(N, 0.0), std::vector<double>(N)};
  for (std::size_t i = 0; i < N; ++i) g.bx[i] = detail::d1_at(gb, static_cast<std::ptrdiff_t>(i), h);
  for (std::size_t i = 1; i + 1 < N; ++i) {
    const auto k = static_cast<std::ptrdiff_t>(i);
    const double round = sb[i] * detail::d1_at(gs, k, h) / (pi * pi);
    g.V[i] = (n - 1) * (round - b[i] * g.bx[i] / (a[i] * a[i])) / (b[i] * b[i]);
    g.W[i] = detail::d1_at(ga, k, h) / (a[i] * a[i] * a[i]) + g.V[i];
  }
  return g;
}

State rhs(const WarpedProfile& shape, const State& y, const StepOptions& opts) {
  WarpedProfile q;
  q.n = shape.n;
  q.M = shape.M;
  q.x = shape.x;
  q.a = y.a;
  q.b = y.b;
  const std::size_t N = q.nodes();
  for (std::size_t i = 0; i < N; ++i)
    if (!(q.a[i] > 0.0) || !std::isfinite(q.b[i]) || (i > 0 && i + 1 < N && !(q.b[i] > 0.0)))
      throw SingularityDetected({}, "metric degenerates at node " + std::to_string(i));
  const CurvatureField c = curvature(q, CurvatureOptions{opts.pole_layers});
  State d{std::vector<double>(N), std::vector<double>(N, 0.0)};
  for (std::size_t i = 0; i < N; ++i) d.a[i] = -c.ric_rad[i] * y.a[i];
  for (std::size_t i = 1; i + 1 < N; ++i) d.b[i] = -c.ric_sph[i] * y.b[i];
  if (!opts.deturck) return d;

  // (W a)_x with the a_x / a^3 part expanded, so the diffusion in a uses the
  // compact second difference. The pole rows are extrapolated as a whole.
  const Gauge g = gauge_parts(q.x, y.a, y.b, q.n);
  const double h = q.dx();
  const detail::GhostExtended ga(y.a, +1);
  std::vector<double> Va(N);
  for (std::size_t i = 0; i < N; ++i) Va[i] = g.V[i] * y.a[i];
  const detail::GhostExtended gva(Va, -1);
  for (std::size_t i = 0; i < N; ++i) {
    const auto k = static_cast<std::ptrdiff_t>(i);
    const double ai = y.a[i];
    const double ax = detail::d1_at(ga, k, h);
    d.a[i] += detail::d2_at(ga, k, h) / (ai * ai) - 2.0 * ax * ax / (ai * ai * ai) + detail::d1_at(gva, k, h);
  }
  detail::extrapolate_even_at_poles(d.a, std::max(1, opts.pole_layers));
  for (std::size_t i = 1; i + 1 < N; ++i) d.b[i] += g.W[i] * g.bx[i];
  return d;
}

State axpy(const State& y, double h, const State& k) {
  State r = y;
  for (std::size_t i = 0; i < r.a.size(); ++i) {
    r.a[i] += h * k.a[i];
    r.b[i] += h * k.b[i];
  }
  return r;
}

State rk4_state(const WarpedProfile& shape, const State& y, double dt, const StepOptions& opts) {
  const State k1 = rhs(shape, y, opts);
  const State k2 = rhs(shape, axpy(y, 0.5 * dt, k1), opts);
  const State k3 = rhs(shape, axpy(y, 0.5 * dt, k2), opts);
  const State k4 = rhs(shape, axpy(y, dt, k3), opts);
  State out = y;
  auto combine = [dt](std::vector<double>& dst, const std::vector<double>& y0, const std::vector<double>& a,
                      const std::vector<double>& b, const std::vector<double>& c, const std::vector<double>& e) {
    for (std::size_t i = 0; i < dst.size() && i < a.size(); ++i)
      dst[i] = y0[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + e[i]);
  };
  combine(out.a, y.a, k1.a, k2.a, k3.a, k4.a);
  combine(out.b, y.b, k1.b, k2.b, k3.b, k4.b);
  out.b.front() = 0.0;
  out.b.back() = 0.0;
  const std::size_t N = out.a.size();
  for (std::size_t i = 0; i < N; ++i)
    if (!(out.a[i] > 0.0) || (i > 0 && i + 1 < N && !(out.b[i] > 0.0)))
      throw SingularityDetected({}, "b reached zero at node " + std::to_string(i));
  return out;
}

WarpedProfile rk4(const WarpedProfile& p, double dt, const StepOptions& opts) {
  const State s = rk4_state(p, State{p.a, p.b}, dt, opts);
  WarpedProfile out = p;
  out.t = p.t + dt;
  out.a = s.a;
  out.b = s.b;
  return out;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double relative_gap(const WarpedProfile& p, const WarpedProfile& q) {
  double d = 0.0;
  for (std::size_t i = 0; i < p.a.size(); ++i)
    d = std::max({d, std::abs(p.a[i] - q.a[i]), std::abs(p.b[i] - q.b[i])});
  return d / std::max(max_abs(p.a), max_abs(p.b));
}

// Ratio of the narrowest interior local minimum of b to max b, or 1.
double neck_ratio(const WarpedProfile& p) {
  const double bmax = max_abs(p.b);
  double r = 1.0;
  for (std::size_t i = 2; i + 2 < p.b.size(); ++i)
    if (p.b[i] < p.b[i - 1] && p.b[i] < p.b[i + 1]) r = std::min(r, p.b[i] / bmax);
  return r;
}

}  // namespace

WarpedProfile step_ricci_flow(const WarpedProfile& p, double dt, const StepOptions& opts) {
  require(dt > 0.0 && std::isfinite(dt), ErrorKind::invalid_parameter, "dt must be positive");
  if (p.is_torus()) {
    WarpedProfile q = p;
    q.t += dt;
    return q;
  }
  const double bound = stable_dt(p, opts.cfl);
  if (dt > bound * (1.0 + 1e-12))
    throw StepRejected(bound, "dt " + detail::format_double(dt) + " exceeds the stability bound " +
                                  detail::format_double(bound));
  return rk4(p, dt, opts);
}

std::vector<double> deturck_field(const WarpedProfile& p) {
  require(!p.is_torus(), ErrorKind::invalid_parameter, "tori have no DeTurck field");
  return gauge_parts(p.x, p.a, p.b, p.n).W;
}

FlowTrajectory integrate(const WarpedProfile& p, double t0, double t1, const FlowControl& ctrl) {
  require(t0 < t1, ErrorKind::invalid_interval, "integrate needs t0 < t1");
  validate(p);
  std::vector<double> targets;
  if (!ctrl.snapshot_times.empty()) {
    for (double t : ctrl.snapshot_times)
      if (t > t0 && t < t1) targets.push_back(t);
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  } else if (ctrl.snapshot_every > 0.0) {
    for (int k = 1;; ++k) {
      const double t = t0 + k * ctrl.snapshot_every;
      if (t >= t1 - 1e-12 * ctrl.snapshot_every) break;
      targets.push_back(t);
    }
  }
  targets.push_back(t1);

  FlowTrajectory tr;
  tr.n = p.n;
  tr.kind = p.kind;
  WarpedProfile cur = p;
  cur.t = t0;
  if (!p.is_torus() && ctrl.step.deturck) cur.gauge = deturck_field(cur);
  tr.profiles.push_back(cur);
  if (p.is_torus()) {
    for (double t : targets) {
      cur.t = t;
      tr.profiles.push_back(cur);
    }
    return tr;
  }

  const double bmax0 = max_abs(p.b);
  const StepOptions& so = ctrl.step;
  State st{p.a, p.b};
  try {
    for (double target : targets) {
      double h = ctrl.dt > 0.0 ? ctrl.dt : 0.9 * stable_dt(cur, so.cfl);
      const long steps = std::max(1L, static_cast<long>(std::ceil((target - cur.t) / h - 1e-9)));
      h = (target - cur.t) / static_cast<double>(steps);
      State two_back = st;
      double t_start = cur.t;
      long steps_now = steps;
      long done = 0;
      int rejections = 0;
      while (done < steps_now) {
        if (done == steps_now - 2) two_back = st;
        const double bound = stable_dt(cur, so.cfl);
        if (h > bound * (1.0 + 1e-12)) {
          // Redo the rest of the interval on a finer uniform step.
          require(++rejections <= ctrl.max_rejections, ErrorKind::step_rejected,
                  "dt " + detail::format_double(h) + " exceeds the stability bound " +
                      detail::format_double(bound));
          t_start = cur.t;
          steps_now = std::max(1L, static_cast<long>(std::ceil((target - t_start) / (0.5 * bound))));
          h = (target - t_start) / static_cast<double>(steps_now);
          done = 0;
          continue;
        }
        st = rk4_state(cur, st, h, so);
        ++done;
        cur.a = st.a;
        cur.b = st.b;
        cur.t = done == steps_now ? target : t_start + static_cast<double>(done) * h;
        if (max_abs(cur.b) < 1e-6 * bmax0 || neck_ratio(cur) < ctrl.pinch_ratio)
          throw SingularityDetected({}, "pinch near t = " + detail::format_double(cur.t));
      }
      if (done >= 2) {
        const State coarse = rk4_state(cur, two_back, 2.0 * h, so);
        WarpedProfile pc = cur, pf = cur;
        pc.a = coarse.a;
        pc.b = coarse.b;
        const double local = relative_gap(pc, pf) / 15.0;
        tr.error_estimate = std::max(tr.error_estimate, local * 0.5 * static_cast<double>(steps_now));
      }
      if (so.deturck) cur.gauge = deturck_field(cur);
      tr.profiles.push_back(cur);
    }
  } catch (const SingularityDetected& e) {
    throw SingularityDetected(tr, e.what());
  }
  if (tr.profiles.size() >= 3) {
    try {
      const double T0 = fit_T0(tr);
      if (T0 > tr.t_last()) tr.T0 = T0;
    } catch (const Error&) {
    }
  }
  return tr;
}

double fit_T0(const FlowTrajectory& tr, int last) {
  if (tr.exact) return *tr.T0;
  require(tr.kind == ModelKind::warped_sphere, ErrorKind::invalid_state, "tori do not become extinct");
  const int k = std::min<int>(last, static_cast<int>(tr.profiles.size()));
  require(k >= 2, ErrorKind::insufficient_data, "need at least two snapshots");
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (int j = static_cast<int>(tr.profiles.size()) - k; j < static_cast<int>(tr.profiles.size()); ++j) {
    const WarpedProfile& p = tr.profiles[j];
    const double nr = neck_ratio(p);
    double bref = max_abs(p.b);
    if (nr < 1.0) bref *= nr;
    const double y = bref * bref;
    st += p.t;
    sy += y;
    stt += p.t * p.t;
    sty += p.t * y;
  }
  const double den = k * stt - st * st;
  require(den > 0.0, ErrorKind::insufficient_data, "snapshot times coincide");
  const double slope = (k * sty - st * sy) / den;
  const double icpt = (sy - slope * st) / k;
  require(slope < 0.0, ErrorKind::insufficient_data, "b^2 is not decreasing");
  return -icpt / slope;
}

double roundness_defect(const WarpedProfile& p) {
  if (p.is_torus()) return 0.0;
  const auto c = curvature(p);
  const auto [lo, hi] = std::minmax_element(c.R.begin(), c.R.end());
  double mean = 0.0;
  for (double r : c.R) mean += r;
  mean /= static_cast<double>(c.R.size());
  return (*hi - *lo) / std::abs(mean);
}

double type_one_constant(FlowTrajectory& tr) {
  require(tr.profiles.size() >= 2, ErrorKind::insufficient_data, "need at least two snapshots");
  if (tr.kind == ModelKind::flat_torus) {
    tr.D0 = 0.0;
    return 0.0;
  }
  require(tr.T0.has_value(), ErrorKind::invalid_state, "trajectory has no T0");
  double D0 = 0.0;
  for (const auto& p : tr.profiles) {
    double rm = 0.0;
    if (tr.exact) {
      rm = 1.0 / tr.exact_radius2(p.t);
    } else {
      const auto c = curvature(p);
      rm = *std::max_element(c.rm_norm.begin(), c.rm_norm.end());
    }
    D0 = std::max(D0, rm * (*tr.T0 - p.t));
  }
  tr.D0 = D0;
  return D0;
}

namespace {

// sup |Rm| over the nodes `inside` at time t.
double sup_rm(const FlowTrajectory& tr, double t, const std::vector<std::size_t>& inside) {
  if (tr.kind == ModelKind::flat_torus) return 0.0;
  if (tr.exact) return 1.0 / tr.exact_radius2(t);
  const auto c = curvature(tr.profile_at(t));
  double m = 0.0;
  for (std::size_t i : inside) m = std::max(m, c.rm_norm[i]);
  return m;
}

}  // namespace

double kappa_estimate(FlowTrajectory& tr, const std::vector<double>& scales) {
  require(!scales.empty(), ErrorKind::no_admissible_scale, "empty scale list");
  for (double r : scales) require(r > 0.0, ErrorKind::invalid_parameter, "scales must be positive");
  double kappa = std::numeric_limits<double>::infinity();
  for (const auto& p : tr.profiles) {
    std::vector<Point> centres;
    if (p.is_torus())
      centres.push_back(Point{std::vector<double>(static_cast<std::size_t>(p.n), 0.0)});
    else
      centres = {Point::axis(0.0), Point::axis(1.0)};
    for (const Point& c : centres) {
      for (double r : scales) {
        const double t_lo = p.t - r * r;
        if (!tr.covers(t_lo)) continue;
        std::vector<std::size_t> inside;
        if (!p.is_torus()) {
          const auto s = arclength_from_pole(p);
          const double L = s.back();
          for (std::size_t i = 0; i < s.size(); ++i) {
            const double d = c.coord[0] < 0.5 ? s[i] : L - s[i];
            if (d <= r) inside.push_back(i);
          }
        }
        std::vector<double> times{t_lo, p.t};
        for (const auto& q : tr.profiles)
          if (q.t > t_lo && q.t < p.t) times.push_back(q.t);
        double rm = 0.0;
        for (double t : times) rm = std::max(rm, sup_rm(tr, t, inside));
        if (rm * r * r > 1.0 + 1e-12) continue;
        kappa = std::min(kappa, ball_volume(p, c, r) / std::pow(r, p.n));
      }
    }
  }
  require(std::isfinite(kappa), ErrorKind::no_admissible_scale, "no scale satisfies |Rm| <= r^-2");
  tr.kappa = kappa;
  return kappa;
}

CheckReport doubling_checks(const FlowTrajectory& tr, const std::vector<PointPair>& pairs, double t1, double t2,
                            const DoublingOptions& opts) {
  require(t2 < t1 && t1 < 0.0, ErrorKind::invalid_parameter, "doubling needs t2 < t1 < 0");
  CheckReport rep;
  rep.name = "doubling";
  rep.columns = {"pair", "d_t1", "d_t2", "exponent"};
  double D0 = 0.0;
  if (tr.D0) {
    D0 = *tr.D0;
  } else {
    FlowTrajectory copy = tr;
    if (copy.profiles.size() < 2) copy.profiles.push_back(copy.profile_at(t1));
    D0 = type_one_constant(copy);
  }
  const WarpedProfile p1 = tr.profile_at(t1);
  const WarpedProfile p2 = tr.profile_at(t2);
  const double log_t = std::log(std::abs(t1) / std::abs(t2));
  double emin = std::numeric_limits<double>::infinity(), emax = -emin, eabs = 0.0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double d1 = geodesic_distance(p1, pairs[k].x, pairs[k].y);
    const double d2 = geodesic_distance(p2, pairs[k].x, pairs[k].y);
    if (d1 <= 0.0 || d2 <= 0.0) {
      rep.add_note("pair " + std::to_string(k) + " skipped (zero distance)");
      continue;
    }
    const double e = std::log(d1 / d2) / log_t;
    emin = std::min(emin, e);
    emax = std::max(emax, e);
    eabs = std::max(eabs, std::abs(e));
    ++rep.samples;
    rep.rows.push_back({double(k), d1, d2, e});
  }
  require(rep.samples > 0, ErrorKind::insufficient_data, "no usable point pair");

  // Normalized volumes |B(x0, sqrt|t|, t)| / |t|^{n/2} at the two times.
  const Point centre = p1.is_torus() ? Point{std::vector<double>(static_cast<std::size_t>(p1.n), 0.0)}
                                     : Point::axis(0.0);
  const double v1 = ball_volume(p1, centre, std::sqrt(std::abs(t1))) / std::pow(std::abs(t1), 0.5 * p1.n);
  const double v2 = ball_volume(p2, centre, std::sqrt(std::abs(t2))) / std::pow(std::abs(t2), 0.5 * p2.n);

  double c = 0.0;
  if (D0 > 0.0)
    c = eabs / D0;
  else if (eabs > 1e-12)
    c = std::numeric_limits<double>::infinity();
  rep.ratio_min = emin;
  rep.ratio_max = emax;
  rep.set_constant("D0", D0);
  rep.set_constant("c", c);
  rep.set_constant("max_abs_exponent", eabs);
  rep.set_constant("volume_ratio", v1 / v2);
  rep.margin = opts.c_cap * D0 - eabs;
  rep.pass = c <= opts.c_cap && std::isfinite(v1 / v2) && v1 > 0.0 && v2 > 0.0;
  if (tr.kind == ModelKind::flat_torus) rep.add_note("flat control: distances are static");
  return rep;
}

FlowTrajectory normalize_type_I(const FlowTrajectory& tr) {
  if (tr.kind != ModelKind::flat_torus)
    require(tr.T0.has_value() && std::abs(*tr.T0 - 1.0) < 1e-12, ErrorKind::invalid_state,
            "Type I normalization needs T0 = 1");
  FlowTrajectory out;
  out.n = tr.n;
  out.kind = tr.kind;
  for (const auto& p : tr.profiles) {
    require(p.t < 1.0, ErrorKind::out_of_domain, "snapshot at t >= 1");
    const double scale = 1.0 / std::sqrt(1.0 - p.t);
    WarpedProfile q = p;
    q.t = -std::log(1.0 - p.t);
    for (double& v : q.a) v *= scale;
    for (double& v : q.b) v *= scale;
    for (double& v : q.sides) v *= scale;
    out.profiles.push_back(std::move(q));
  }
  return out;
}

void write_trajectory(const std::string& dir, const FlowTrajectory& tr) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::io_error, "cannot create " + dir);
  nlohmann::ordered_json j;
  j["n"] = tr.n;
  j["kind"] = to_string(tr.kind);
  j["M"] = tr.grid();
  j["T0"] = tr.T0 ? nlohmann::ordered_json(*tr.T0) : nlohmann::ordered_json(nullptr);
  j["exact"] = tr.exact;
  if (tr.D0) j["D0"] = *tr.D0;
  if (tr.kappa) j["kappa"] = *tr.kappa;
  j["error_estimate"] = tr.error_estimate;
  auto times = nlohmann::ordered_json::array();
  auto files = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < tr.profiles.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "profile_%04zu.csv", k);
    write_profile_csv((fs::path(dir) / name).string(), tr.profiles[k]);
    times.push_back(tr.profiles[k].t);
    files.push_back(name);
  }
  j["times"] = times;
  j["files"] = files;
  std::ofstream os(fs::path(dir) / "trajectory.json", std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::io_error, "cannot write trajectory manifest");
  os << j.dump(2) << '\n';
}

FlowTrajectory read_trajectory(const std::string& dir) {
  std::ifstream is(fs::path(dir) / "trajectory.json", std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::io_error, "cannot read " + dir + "/trajectory.json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse_error, e.what());
  }
  FlowTrajectory tr;
  try {
    tr.n = j.at("n").get<int>();
    tr.kind = model_kind_from_string(j.at("kind").get<std::string>());
    const int M = j.at("M").get<int>();
    if (!j.at("T0").is_null()) tr.T0 = j.at("T0").get<double>();
    tr.exact = j.at("exact").get<bool>();
    if (j.contains("D0")) tr.D0 = j.at("D0").get<double>();
    if (j.contains("kappa")) tr.kappa = j.at("kappa").get<double>();
    tr.error_estimate = j.value("error_estimate", 0.0);
    for (const auto& f : j.at("files"))
      tr.profiles.push_back(read_profile_csv((fs::path(dir) / f.get<std::string>()).string(), tr.n, tr.kind, M));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse_error, e.what());
  }
  return tr;
}

}  // namespace heatlab
