#include "heatlab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "numerics.hpp"

namespace heatlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower and upper times of slice k.
std::pair<double, double> slice_interval(const KernelField& kf, std::size_t k) {
  const double t = kf.snapshots[k].t;
  return kf.direction == KernelDirection::forward ? std::pair{kf.source_time, t} : std::pair{t, kf.source_time};
}

double source_curvature(const FlowTrajectory& tr, const Point& x0, double t) {
  if (tr.kind == ModelKind::flat_torus) return 0.0;
  if (tr.exact || (x0.coord.size() == 1 && x0.coord[0] < 0.5)) return tr.pole_curvature_at(t);
  return curvature(tr.profile_at(t)).R.back();
}

std::pair<double, double> minmax_R(const FlowTrajectory& tr, double t) {
  if (tr.kind == ModelKind::flat_torus) return {0.0, 0.0};
  const auto c = curvature(tr.profile_at(t));
  const auto [lo, hi] = std::minmax_element(c.R.begin(), c.R.end());
  return {*lo, *hi};
}

double pow_tau(double tau, int n) { return std::pow(tau, 0.5 * n); }

}  // namespace

LambdaIntegrals lambda_integrals(const FlowTrajectory& tr, double t_from, double t_to) {
  require(t_from <= t_to, ErrorKind::invalid_interval, "lambda integrals need t_from <= t_to");
  LambdaIntegrals L;
  if (tr.kind == ModelKind::flat_torus || t_from == t_to) return L;
  if (tr.exact) {
    require(t_to < *tr.T0, ErrorKind::out_of_domain, "interval reaches T0");
    const double v = 0.5 * tr.n * std::log((*tr.T0 - t_from) / (*tr.T0 - t_to));
    L.lambda1 = L.lambda2 = v;
    return L;
  }
  require(tr.covers(t_from) && tr.covers(t_to), ErrorKind::interpolation_error,
          "trajectory does not cover the interval");
  std::vector<double> ts{t_from};
  for (const auto& p : tr.profiles)
    if (p.t > t_from && p.t < t_to) ts.push_back(p.t);
  ts.push_back(t_to);
  std::pair<double, double> prev = minmax_R(tr, ts.front());
  for (std::size_t k = 1; k < ts.size(); ++k) {
    const auto cur = minmax_R(tr, ts[k]);
    const double h = ts[k] - ts[k - 1];
    L.lambda1 += 0.5 * h * (prev.first + cur.first);
    L.lambda2 += 0.5 * h * (prev.second + cur.second);
    prev = cur;
  }
  return L;
}

double worldline_curvature_integral(const FlowTrajectory& tr, const Point& x0, double lo, double hi) {
  require(lo <= hi, ErrorKind::invalid_interval, "worldline integral needs lo <= hi");
  if (tr.kind == ModelKind::flat_torus || lo == hi) return 0.0;
  // s = hi - w^2 turns the integral into int_0^{sqrt(hi-lo)} 2 w^2 R dw,
  // smooth in w; composite Simpson.
  const int m = 256;
  const double W = std::sqrt(hi - lo);
  const double h = W / m;
  double sum = 0.0;
  for (int j = 0; j <= m; ++j) {
    const double w = j * h;
    const double f = 2.0 * w * w * source_curvature(tr, x0, hi - w * w);
    const double c = (j == 0 || j == m) ? 1.0 : (j % 2 ? 4.0 : 2.0);
    sum += c * f;
  }
  return sum * h / 3.0;
}

CheckReport on_diag_upper_check(const KernelField& kf, const UpperOptions& opts) {
  require(kf.snapshots.size() >= opts.min_samples, ErrorKind::insufficient_data,
          "on-diagonal check needs at least " + std::to_string(opts.min_samples) + " tau samples");
  CheckReport rep;
  rep.name = "on_diag_upper";
  rep.columns = {"tau", "G", "G_tau_n2", "G_4pi_tau_n2"};
  double B = 0.0, B4 = 0.0, r_lo = kInf;
  for (std::size_t k = 0; k < kf.snapshots.size(); ++k) {
    const double tau = kf.snapshots[k].tau;
    const double G = source_value(kf, k);
    const double s = G * pow_tau(tau, kf.n);
    const double s4 = G * pow_tau(4.0 * std::numbers::pi * tau, kf.n);
    B = std::max(B, s);
    B4 = std::max(B4, s4);
    r_lo = std::min(r_lo, s4);
    rep.rows.push_back({tau, G, s, s4});
  }
  rep.samples = kf.snapshots.size();
  rep.ratio_min = r_lo;
  rep.ratio_max = B4;
  rep.set_constant("B", B);
  rep.set_constant("B_4pi", B4);
  rep.margin = opts.cap - B;
  rep.pass = B <= opts.cap;
  if (kf.kind == ModelKind::flat_torus) rep.control = true;
  return rep;
}

CheckReport on_diag_lower_check(const KernelField& kf, const FlowTrajectory& tr, const LowerOptions& opts) {
  require(kf.snapshots.size() >= opts.min_samples, ErrorKind::insufficient_data,
          "on-diagonal check needs at least " + std::to_string(opts.min_samples) + " tau samples");
  CheckReport rep;
  rep.name = "on_diag_lower";
  rep.columns = {"tau", "G_4pi_tau_n2", "curvature_integral", "ell"};
  double c = kInf, ell_max = 0.0, raw_max = 0.0, raw_min = kInf;
  for (std::size_t k = 0; k < kf.snapshots.size(); ++k) {
    const double tau = kf.snapshots[k].tau;
    const auto [lo, hi] = slice_interval(kf, k);
    require(tr.covers(lo) || (tr.exact && lo < *tr.T0), ErrorKind::interpolation_error,
            "trajectory does not cover the source worldline");
    const double I = worldline_curvature_integral(tr, kf.source, lo, hi);
    const double raw = source_value(kf, k) * pow_tau(4.0 * std::numbers::pi * tau, kf.n);
    const double ell = raw * std::exp(I / (2.0 * std::sqrt(tau)));
    c = std::min(c, ell);
    ell_max = std::max(ell_max, ell);
    raw_max = std::max(raw_max, raw);
    raw_min = std::min(raw_min, raw);
    rep.rows.push_back({tau, raw, I, ell});
  }
  const double a1 = std::max({ell_max, 1.0 / c, raw_max});
  rep.samples = kf.snapshots.size();
  rep.ratio_min = c;
  rep.ratio_max = ell_max;
  rep.set_constant("c", c);
  rep.set_constant("a1", a1);
  rep.set_constant("raw_min", raw_min);
  rep.set_constant("raw_max", raw_max);
  rep.margin = std::min(c - opts.floor, opts.a1_cap - a1);
  rep.pass = c >= opts.floor && a1 <= opts.a1_cap;
  if (kf.kind == ModelKind::flat_torus) rep.control = true;
  return rep;
}

CheckReport gaussian_envelope_check(const KernelField& kf, const FlowTrajectory& tr, const GaussianOptions& opts) {
  CheckReport rep;
  rep.name = "gaussian_envelope";
  rep.columns = {"tau", "d", "G", "q"};
  double q_lo = kInf, q_hi = -kInf, c_up = 0.0, c_dn = kInf;
  for (std::size_t k = 0; k < kf.snapshots.size(); ++k) {
    const auto& s = kf.snapshots[k];
    const double tau = s.tau;
    const auto [lo, hi] = slice_interval(kf, k);
    const auto Lam = lambda_integrals(tr, lo, hi);
    // Distances and balls are taken in g(t) at the later time.
    auto line = kernel_line(kf, k);
    const WarpedProfile upper = tr.profile_at(hi);
    if (!upper.is_torus()) {
      line.dist = arclength_from_pole(upper);
      if (kf.source.coord[0] > 0.5)
        for (double& v : line.dist) v = line.dist.back() - v;
    }
    const double G0 = source_value(kf, k);
    const double vol = ball_volume(upper, kf.source, std::sqrt(tau));
    if (!(vol > 0.0) || !std::isfinite(vol))
      throw Error(ErrorKind::degenerate_sample, "ball volume underflow at tau = " + detail::format_double(tau));
    c_up = std::max(c_up, G0 * vol * std::exp(opts.eta * Lam.lambda1));
    for (std::size_t i = 0; i < line.u.size(); ++i) {
      const double d = line.dist[i];
      const double G = line.u[i];
      if (d * d < 0.25 * tau || !(G > opts.rel_floor * G0)) continue;
      const double q = -tau * std::log(G / G0) / (d * d);
      q_lo = std::min(q_lo, q);
      q_hi = std::max(q_hi, q);
      c_up = std::max(c_up, G * vol * std::exp(opts.eta * Lam.lambda1 + opts.c_lo * d * d / tau));
      c_dn = std::min(c_dn, G * vol * std::exp(opts.eta * Lam.lambda2 + opts.c_hi * d * d / tau));
      ++rep.samples;
      rep.rows.push_back({tau, d, G, q});
    }
  }
  require(rep.samples > 0, ErrorKind::insufficient_data, "no sample passes the d^2 >= tau/4 filter");
  rep.ratio_min = q_lo;
  rep.ratio_max = q_hi;
  rep.set_constant("q_min", q_lo);
  rep.set_constant("q_max", q_hi);
  rep.set_constant("c_n_upper", c_up);
  rep.set_constant("c_n_lower", c_dn);
  rep.margin = std::min({q_lo - opts.c_lo, opts.c_hi - q_hi, opts.cn_cap - c_up, c_dn - 1.0 / opts.cn_cap});
  rep.pass = q_lo >= opts.c_lo && q_hi <= opts.c_hi && c_up <= opts.cn_cap && c_dn >= 1.0 / opts.cn_cap;
  if (kf.kind == ModelKind::flat_torus) {
    rep.control = true;
    rep.add_note("flat torus: Ricci-flat, tested as the classical static case");
  }
  return rep;
}

namespace {

// Sum of u^2 dmu (and the max of u^2) over nodes of slice k within `radius`
// of x.
std::pair<double, double> ball_sums(const KernelField& kf, std::size_t k, const Point& x, double radius) {
  const auto& s = kf.snapshots[k];
  double sum = 0.0, sup = 0.0;
  if (!s.metric.is_torus()) {
    require(x.coord.size() == 1 && (x.coord[0] < 1e-12 || x.coord[0] > 1.0 - 1e-12), ErrorKind::invalid_window,
            "warped windows must be centred at a pole");
    auto d = arclength_from_pole(s.metric);
    if (x.coord[0] > 0.5)
      for (double& v : d) v = d.back() - v;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (d[i] < radius) {
        sum += s.u[i] * s.u[i] * s.dmu[i];
        sup = std::max(sup, s.u[i] * s.u[i]);
      }
    return {sum, sup};
  }
  const int n = kf.n;
  const WarpedProfile& p = s.metric;
  std::vector<long> lo(n), cnt(n), idx(n);
  for (int d = 0; d < n; ++d) {
    const double h = p.axis_spacing(d);
    const long c = static_cast<long>(std::floor(x.coord[d] / h));
    const long w = std::min<long>(static_cast<long>(std::ceil(radius / h)) + 1, p.M / 2);
    lo[d] = c - w;
    cnt[d] = std::min<long>(2 * w + 2, p.M);
    idx[d] = 0;
  }
  const double cell = torus_cell_volume(p);
  while (true) {
    double d2 = 0.0, v = 1.0;
    for (int d = 0; d < n; ++d) {
      const long i = ((lo[d] + idx[d]) % p.M + p.M) % p.M;
      const double g = std::remainder(i * p.axis_spacing(d) - x.coord[d], p.sides[d]);
      d2 += g * g;
      v *= s.axis_u[d][static_cast<std::size_t>(i)];
    }
    if (d2 < radius * radius) {
      sum += v * v * cell;
      sup = std::max(sup, v * v);
    }
    int d = 0;
    while (d < n && ++idx[d] == cnt[d]) idx[d++] = 0;
    if (d == n) break;
  }
  return {sum, sup};
}

}  // namespace

CheckReport mean_value_check(const KernelField& kf, const FlowTrajectory& tr, const Point& x, double tau, double r,
                             const MeanValueOptions& opts) {
  (void)tr;
  require(r > 0.0 && tau > 0.0, ErrorKind::invalid_parameter, "mean value check needs r > 0 and tau > 0");
  require(r * r <= tau * (1.0 + 1e-12), ErrorKind::invalid_window, "window radius exceeds sqrt(tau)");
  const auto& S = kf.snapshots;
  require(!S.empty() && S.front().tau <= tau - r * r + 1e-9 * tau && S.back().tau >= tau - 1e-9 * tau,
          ErrorKind::invalid_window, "cylinder leaves the computed slices");
  if (!S.front().metric.is_torus())
    require(r < total_arclength(S.front().metric), ErrorKind::invalid_window, "ball exceeds the model");
  std::vector<std::size_t> in;
  for (std::size_t k = 0; k < S.size(); ++k)
    if (S[k].tau >= tau - r * r - 1e-9 * tau && S[k].tau <= tau + 1e-9 * tau) in.push_back(k);
  require(in.size() >= 3, ErrorKind::invalid_window, "cylinder holds fewer than three slices");

  CheckReport rep;
  rep.name = "mean_value";
  rep.columns = {"tau", "int_ball_u2", "sup_half_ball_u2"};
  double integral = 0.0, sup = 0.0;
  std::pair<double, double> prev = ball_sums(kf, in.front(), x, r);
  for (std::size_t j = 0; j < in.size(); ++j) {
    const auto cur = ball_sums(kf, in[j], x, r);
    if (j > 0) integral += 0.5 * (S[in[j]].tau - S[in[j - 1]].tau) * (prev.first + cur.first);
    prev = cur;
    double half_sup = 0.0;
    if (S[in[j]].tau >= tau - 0.25 * r * r - 1e-9 * tau) {
      half_sup = ball_sums(kf, in[j], x, 0.5 * r).second;
      sup = std::max(sup, half_sup);
    }
    rep.rows.push_back({S[in[j]].tau, cur.first, half_sup});
  }
  require(integral > 0.0, ErrorKind::degenerate_sample, "field vanishes on the cylinder");
  const double C = sup * std::pow(r, kf.n + 2) / integral;
  rep.samples = in.size();
  rep.ratio_min = C;
  rep.ratio_max = C;
  rep.set_constant("C", C);
  rep.margin = opts.cap - C;
  rep.pass = C <= opts.cap;
  if (kf.kind == ModelKind::flat_torus) rep.control = true;
  return rep;
}

CheckReport mass_bracket_check(const KernelField& kf, const FlowTrajectory& tr, double tol) {
  CheckReport rep;
  rep.name = "mass_bracket";
  rep.columns = {"tau", "forward_mass", "exp_minus_lambda2", "exp_minus_lambda1", "backward_mass"};
  double worst = kInf, r_lo = kInf, r_hi = -kInf, back = 0.0;
  for (std::size_t k = 0; k < kf.snapshots.size(); ++k) {
    const auto& s = kf.snapshots[k];
    const auto [lo, hi] = slice_interval(kf, k);
    const auto L = lambda_integrals(tr, lo, hi);
    const double m = s.forward_mass;
    const double lo_b = std::exp(-L.lambda2), hi_b = std::exp(-L.lambda1);
    worst = std::min({worst, m - lo_b + tol, hi_b + tol - m});
    r_lo = std::min(r_lo, m / hi_b);
    r_hi = std::max(r_hi, m / lo_b);
    back = std::max(back, std::abs(s.backward_mass - 1.0));
    rep.rows.push_back({s.tau, m, lo_b, hi_b, s.backward_mass});
  }
  rep.samples = kf.snapshots.size();
  rep.ratio_min = r_lo;
  rep.ratio_max = r_hi;
  rep.set_constant("max_backward_defect", back);
  rep.margin = worst;
  rep.pass = worst >= 0.0;
  return rep;
}

}  // namespace heatlab
