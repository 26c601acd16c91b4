#include "heatlab/soliton.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include <json.hpp>

#include "heatlab/entropy.hpp"
#include "heatlab/error.hpp"
#include "heatlab/parallel.hpp"
#include "numerics.hpp"

namespace heatlab {

namespace {

constexpr double kUnderflow = 1e-300;
// Nodes carrying less than this fraction of the peak density are left out
// of residual integrals; their f is dominated by round-off.
constexpr double kResidualCut = 1e-14;

double floored_log(double u) { return std::log(std::max(u, kUnderflow)); }

WarpedProfile scaled(WarpedProfile p, double tau_k, double s) {
  const double sc = 1.0 / std::sqrt(tau_k);
  for (double& v : p.a) v *= sc;
  for (double& v : p.b) v *= sc;
  for (double& v : p.sides) v *= sc;
  p.t = -s;
  return p;
}

}  // namespace

WarpedProfile rescale(const FlowTrajectory& tr, double tau_k, double s, double t_ref) {
  require(tau_k > 0.0 && s > 0.0, ErrorKind::invalid_parameter, "tau_k and s must be positive");
  const double t = t_ref - s * tau_k;
  require(tr.covers(t), ErrorKind::out_of_domain, "trajectory does not reach t = " + detail::format_double(t));
  return scaled(tr.profile_at(t), tau_k, s);
}

RescaledKernel rescaled_kernel(const FlowTrajectory& tr, const KernelField& kf, double tau_k, double s) {
  require(kf.direction == KernelDirection::conjugate, ErrorKind::invalid_parameter,
          "rescaled kernels come from conjugate fields");
  require(tau_k > 0.0 && s > 0.0, ErrorKind::invalid_parameter, "tau_k and s must be positive");
  require(tr.covers(kf.source_time - s * tau_k), ErrorKind::out_of_domain, "trajectory does not reach s tau_k");
  std::size_t k = 0;
  try {
    k = kf.index_of_tau(s * tau_k);
  } catch (const Error&) {
    throw Error(ErrorKind::out_of_domain, "kernel has no slice at tau = " + detail::format_double(s * tau_k));
  }
  RescaledKernel rk;
  rk.s = s;
  rk.tau_k = tau_k;
  rk.snap = kf.snapshots[k];
  rk.snap.metric = scaled(rk.snap.metric, tau_k, s);
  rk.snap.t = -s;
  rk.snap.tau = s;
  const int n = kf.n;
  const double c = 0.5 * n * std::log(4.0 * std::numbers::pi * s);
  if (rk.snap.metric.is_torus()) {
    const double up = std::sqrt(tau_k);
    for (auto& axis : rk.snap.axis_u) {
      std::vector<double> g(axis.size());
      for (std::size_t i = 0; i < axis.size(); ++i) {
        axis[i] *= up;
        g[i] = -floored_log(axis[i]) - c / n;
      }
      rk.axis_f.push_back(std::move(g));
    }
  } else {
    const double up = std::pow(tau_k, 0.5 * n);
    for (double& v : rk.snap.u) v *= up;
    for (double& w : rk.snap.dmu) w /= up;
    rk.f.resize(rk.snap.u.size());
    for (std::size_t i = 0; i < rk.f.size(); ++i) rk.f[i] = -floored_log(rk.snap.u[i]) - c;
  }
  return rk;
}

double soliton_residual(const WarpedProfile& p, std::span<const double> f, double s, std::span<const double> u,
                        std::span<const double> dmu) {
  require(s > 0.0, ErrorKind::invalid_parameter, "s must be positive");
  require(!p.is_torus(), ErrorKind::invalid_parameter, "use soliton_residual_torus for tori");
  const std::size_t N = p.nodes();
  require(f.size() == N && u.size() == N, ErrorKind::invalid_parameter, "field size mismatch");
  const std::vector<double> w = dmu.empty() ? quadrature_weights(p) : std::vector<double>(dmu.begin(), dmu.end());
  require(w.size() == N, ErrorKind::invalid_parameter, "measure size mismatch");

  const CurvatureField cf = curvature(p);
  const RadialDerivatives D = radial_derivatives(p, f);
  const detail::GhostExtended b(p.b, -1);
  std::vector<double> q(N);
  for (std::size_t i = 1; i + 1 < N; ++i) {
    const double bs = detail::d1_at(b, static_cast<std::ptrdiff_t>(i), p.dx()) / p.a[i];
    q[i] = bs * D.d1[i] / p.b[i];
  }
  detail::extrapolate_even_at_poles(q, 3);

  const double umax = *std::max_element(u.begin(), u.end());
  const double half = 0.5 / s;
  double total = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    if (!(u[i] > kResidualCut * umax)) continue;
    const double Ar = cf.ric_rad[i] + D.d2[i] - half;
    const double As = cf.ric_sph[i] + q[i] - half;
    total += w[i] * u[i] * (Ar * Ar + (p.n - 1) * As * As);
  }
  return total;
}

double soliton_residual_torus(const WarpedProfile& p, const std::vector<std::vector<double>>& axis_f, double s,
                              const std::vector<std::vector<double>>& axis_u) {
  require(s > 0.0, ErrorKind::invalid_parameter, "s must be positive");
  require(p.is_torus(), ErrorKind::invalid_parameter, "separable fields live on tori");
  require(static_cast<int>(axis_f.size()) == p.n && static_cast<int>(axis_u.size()) == p.n,
          ErrorKind::invalid_parameter, "one factor per axis");
  std::vector<double> mass(p.n), part(p.n);
  const double half = 0.5 / s;
  for (int d = 0; d < p.n; ++d) {
    const auto& u = axis_u[d];
    const auto& g = axis_f[d];
    const double h = p.axis_spacing(d);
    const double umax = *std::max_element(u.begin(), u.end());
    for (std::size_t i = 0; i < u.size(); ++i) {
      mass[d] += h * std::max(u[i], 0.0);
      if (!(u[i] > kResidualCut * umax)) continue;
      const double A = detail::periodic_d2(g, i, h) - half;
      part[d] += h * u[i] * A * A;
    }
  }
  double total = 0.0;
  for (int d = 0; d < p.n; ++d) {
    double others = 1.0;
    for (int e = 0; e < p.n; ++e)
      if (e != d) others *= mass[e];
    total += part[d] * others;
  }
  return total;
}

double soliton_residual(const RescaledKernel& rk) {
  if (rk.snap.metric.is_torus()) return soliton_residual_torus(rk.snap.metric, rk.axis_f, rk.s, rk.snap.axis_u);
  return soliton_residual(rk.snap.metric, rk.f, rk.s, rk.snap.u, rk.snap.dmu);
}

LimitReport backward_limit_experiment(const FlowTrajectory& tr, const std::vector<double>& tau_list, double s_ref,
                                      const LimitOptions& opts, double t_ref) {
  require(!tau_list.empty(), ErrorKind::invalid_parameter, "empty tau_list");
  require(s_ref > 0.0, ErrorKind::invalid_parameter, "s_ref must be positive");
  for (std::size_t i = 0; i < tau_list.size(); ++i) {
    require(tau_list[i] > 0.0, ErrorKind::invalid_parameter, "tau_k must be positive");
    if (i) require(tau_list[i] > tau_list[i - 1], ErrorKind::invalid_parameter, "tau_list must increase");
  }
  LimitReport r;
  r.tau_list = tau_list;
  r.s_ref = s_ref;
  r.control = tr.kind == ModelKind::flat_torus;

  const Point x0 = tr.kind == ModelKind::flat_torus ? Point{std::vector<double>(tr.n, 0.0)} : Point::axis(0.0);
  std::vector<double> l_grid;
  for (double tk : tau_list)
    for (double s : {s_ref, s_ref + 1.0}) l_grid.push_back(t_ref - s * tk);
  std::sort(l_grid.begin(), l_grid.end());
  l_grid.erase(std::unique(l_grid.begin(), l_grid.end()), l_grid.end());

  KernelField kf;
  try {
    if (tr.exact || tr.kind == ModelKind::flat_torus)
      kf = oracle_kernel_field(tr, KernelDirection::conjugate, x0, t_ref, l_grid);
    else
      kf = solve_conjugate_kernel(tr, x0, t_ref, l_grid, opts.solver);
  } catch (const Error& e) {
    r.notes = std::string("kernel solve failed: ") + e.what();
    r.tau_list.clear();
    return r;
  }

  struct PerK {
    double residual = 0, W = 0, W_next = 0, f_var = 0, max_R = 0;
  };
  std::vector<PerK> out(tau_list.size());
  try {
    parallel_for(tau_list.size(), [&](std::size_t k) {
      const RescaledKernel a = rescaled_kernel(tr, kf, tau_list[k], s_ref);
      const RescaledKernel b = rescaled_kernel(tr, kf, tau_list[k], s_ref + 1.0);
      out[k].residual = soliton_residual(a);
      out[k].W = w_entropy(a.snap, s_ref);
      out[k].W_next = w_entropy(b.snap, s_ref + 1.0);
      out[k].f_var = f_stats(a.snap, s_ref).variance;
      if (!a.snap.metric.is_torus()) {
        const auto R = curvature(a.snap.metric).R;
        out[k].max_R = *std::max_element(R.begin(), R.end());
      }
    });
  } catch (const Error& e) {
    r.notes = std::string("rescaled evaluation failed: ") + e.what();
    r.tau_list.clear();
    return r;
  }
  for (const auto& o : out) {
    r.residual_seq.push_back(o.residual);
    r.W_seq.push_back(o.W);
    r.W_next_seq.push_back(o.W_next);
    r.W_gap_seq.push_back(o.W - o.W_next);
    r.f_variance_seq.push_back(o.f_var);
  }
  r.limit_max_R = out.back().max_R;
  r.nonflat = r.W_seq.back() < -opts.nonflat_W || r.limit_max_R > opts.nonflat_R;

  bool residual_down = true;
  const std::size_t K = r.residual_seq.size();
  for (std::size_t k = K >= 3 ? K - 2 : 1; k < K; ++k)
    if (!(r.residual_seq[k] < r.residual_seq[k - 1])) residual_down = false;
  bool W_down = true;
  for (std::size_t k = 1; k < K; ++k)
    if (r.W_seq[k] > r.W_seq[k - 1] + opts.monotone_tol) W_down = false;

  auto note = [&](const std::string& s) {
    if (!r.notes.empty()) r.notes += "; ";
    r.notes += s;
  };
  if (!r.nonflat) note(r.control ? "flat control: limit is flat" : "limit looks flat");
  if (!residual_down) note("soliton residual not strictly decreasing");
  if (!W_down) note("W_k(s_ref) increases in k");
  r.verdict = r.nonflat && residual_down && W_down;
  return r;
}

using ojson = nlohmann::ordered_json;

std::string limit_report_to_json(const LimitReport& r) {
  ojson j;
  j["tau_list"] = r.tau_list;
  j["s_ref"] = r.s_ref;
  j["residual_seq"] = r.residual_seq;
  j["W_seq"] = r.W_seq;
  j["W_next_seq"] = r.W_next_seq;
  j["W_gap_seq"] = r.W_gap_seq;
  j["f_variance_seq"] = r.f_variance_seq;
  j["limit_max_R"] = r.limit_max_R;
  j["nonflat"] = r.nonflat;
  j["verdict"] = r.verdict ? "pass" : "fail";
  j["control"] = r.control;
  j["notes"] = r.notes;
  return j.dump(2) + "\n";
}

LimitReport limit_report_from_json(const std::string& text) {
  LimitReport r;
  try {
    const ojson j = ojson::parse(text);
    r.tau_list = j.at("tau_list").get<std::vector<double>>();
    r.s_ref = j.at("s_ref").get<double>();
    r.residual_seq = j.at("residual_seq").get<std::vector<double>>();
    r.W_seq = j.at("W_seq").get<std::vector<double>>();
    r.W_next_seq = j.at("W_next_seq").get<std::vector<double>>();
    r.W_gap_seq = j.at("W_gap_seq").get<std::vector<double>>();
    r.f_variance_seq = j.at("f_variance_seq").get<std::vector<double>>();
    r.limit_max_R = j.at("limit_max_R").get<double>();
    r.nonflat = j.at("nonflat").get<bool>();
    const auto v = j.at("verdict").get<std::string>();
    require(v == "pass" || v == "fail", ErrorKind::parse_error, "verdict must be pass or fail");
    r.verdict = v == "pass";
    r.control = j.value("control", false);
    r.notes = j.value("notes", std::string());
  } catch (const ojson::exception& e) {
    throw Error(ErrorKind::parse_error, e.what());
  }
  return r;
}

void write_limit_report_json(const std::string& path, const LimitReport& r) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::io_error, "cannot write " + path);
  os << limit_report_to_json(r);
}

}  // namespace heatlab
