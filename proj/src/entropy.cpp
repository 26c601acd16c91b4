#include "heatlab/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include "heatlab/error.hpp"
#include "heatlab/soliton.hpp"
#include "numerics.hpp"

namespace heatlab {

namespace {

constexpr double kUnderflow = 1e-300;
constexpr double kMassTol = 1e-6;
constexpr double pi = std::numbers::pi;

std::vector<double> weights_or_default(const WarpedProfile& p, std::span<const double> dmu) {
  if (dmu.empty()) return quadrature_weights(p);
  require(dmu.size() == p.nodes(), ErrorKind::invalid_parameter, "measure size mismatch");
  return {dmu.begin(), dmu.end()};
}

void check_density_values(std::span<const double> u) {
  double umax = 0.0;
  for (double v : u) umax = std::max(umax, v);
  require(umax > 0.0, ErrorKind::positivity_violation, "density has no positive value");
  for (double v : u)
    require(v >= -1e-10 * umax, ErrorKind::positivity_violation, "density is negative at a node");
}

void check_mass(double mass) {
  require(mass <= 1.0 + kMassTol, ErrorKind::invalid_density,
          "mass " + detail::format_double(mass) + " exceeds 1");
}

double log_density(double u) { return std::log(std::max(u, kUnderflow)); }

// Torus axis integrals: mass, int u'^2/u, -int u ln u.
struct AxisIntegrals {
  double m = 0.0, fisher = 0.0, ent = 0.0;
};

AxisIntegrals axis_integrals(std::span<const double> u, double h) {
  AxisIntegrals r;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double ui = std::max(u[i], 0.0);
    const double du = detail::periodic_d1(u, i, h);
    r.m += h * ui;
    r.fisher += h * du * du / std::max(ui, kUnderflow);
    if (ui > 0.0) r.ent -= h * ui * std::log(ui);
  }
  return r;
}

double product_except(const std::vector<AxisIntegrals>& ax, std::size_t skip) {
  double p = 1.0;
  for (std::size_t e = 0; e < ax.size(); ++e)
    if (e != skip) p *= ax[e].m;
  return p;
}

}  // namespace

std::vector<double> f_from_u(std::span<const double> u, int n, double s) {
  require(s > 0.0, ErrorKind::invalid_parameter, "s must be positive");
  const double c = 0.5 * n * std::log(4.0 * pi * s);
  std::vector<double> f(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    require(u[i] > 0.0, ErrorKind::positivity_violation, "u <= 0 at node " + std::to_string(i));
    f[i] = -std::log(u[i]) - c;
  }
  return f;
}

double w_entropy(const WarpedProfile& p, std::span<const double> u, double s, std::span<const double> dmu) {
  require(!p.is_torus(), ErrorKind::invalid_parameter, "use w_entropy_torus for tori");
  require(s > 0.0, ErrorKind::invalid_parameter, "s must be positive");
  require(u.size() == p.nodes(), ErrorKind::invalid_parameter, "density size mismatch");
  check_density_values(u);
  const auto w = weights_or_default(p, dmu);
  double mass = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) mass += w[i] * std::max(u[i], 0.0);
  check_mass(mass);

  const auto R = curvature(p).R;
  const auto du = radial_derivatives(p, u).d1;
  const double c = 0.5 * p.n * std::log(4.0 * pi * s);
  double W = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double ui = std::max(u[i], 0.0);
    const double grad = du[i] * du[i] / std::max(ui, kUnderflow);
    const double fu = ui > 0.0 ? (-std::log(ui) - c) * ui : 0.0;
    W += w[i] * (s * (grad + R[i] * ui) + fu - p.n * ui);
  }
  return W;
}

double w_entropy_torus(const WarpedProfile& p, const std::vector<std::vector<double>>& axis_u, double s) {
  require(p.is_torus(), ErrorKind::invalid_parameter, "separable densities live on tori");
  require(s > 0.0, ErrorKind::invalid_parameter, "s must be positive");
  require(static_cast<int>(axis_u.size()) == p.n, ErrorKind::invalid_parameter, "one factor per axis");
  std::vector<AxisIntegrals> ax;
  for (int d = 0; d < p.n; ++d) {
    check_density_values(axis_u[d]);
    ax.push_back(axis_integrals(axis_u[d], p.axis_spacing(d)));
  }
  const double mass = product_except(ax, ax.size());
  check_mass(mass);
  double W = 0.0;
  for (std::size_t d = 0; d < ax.size(); ++d) W += (s * ax[d].fisher + ax[d].ent) * product_except(ax, d);
  return W - (0.5 * p.n * std::log(4.0 * pi * s) + p.n) * mass;
}

double w_entropy(const KernelSnapshot& snap, double s) {
  if (snap.metric.is_torus()) return w_entropy_torus(snap.metric, snap.axis_u, s);
  return w_entropy(snap.metric, snap.u, s, snap.dmu);
}

FStats f_stats(const KernelSnapshot& snap, double s) {
  const WarpedProfile& p = snap.metric;
  const double c = 0.5 * p.n * std::log(4.0 * pi * s);
  FStats st;
  if (p.is_torus()) {
    st.min = st.max = -c;
    for (int d = 0; d < p.n; ++d) {
      const auto& u = snap.axis_u[d];
      double lo = std::numeric_limits<double>::infinity(), hi = -lo, m = 0.0, m1 = 0.0, m2 = 0.0;
      for (double ui : u) {
        const double g = -log_density(ui);
        lo = std::min(lo, g);
        hi = std::max(hi, g);
        const double wu = std::max(ui, 0.0);
        m += wu;
        m1 += wu * g;
      }
      const double mean = m1 / m;
      for (double ui : u) {
        const double g = -log_density(ui) - mean;
        m2 += std::max(ui, 0.0) * g * g;
      }
      st.min += lo;
      st.max += hi;
      st.variance += m2 / m;
    }
    return st;
  }
  const auto& u = snap.u;
  const auto w = weights_or_default(p, snap.dmu);
  st.min = std::numeric_limits<double>::infinity();
  st.max = -st.min;
  double m = 0.0, m1 = 0.0;
  std::vector<double> f(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    f[i] = -log_density(u[i]) - c;
    st.min = std::min(st.min, f[i]);
    st.max = std::max(st.max, f[i]);
    const double wu = w[i] * std::max(u[i], 0.0);
    m += wu;
    m1 += wu * f[i];
  }
  const double mean = m1 / m;
  double m2 = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) m2 += w[i] * std::max(u[i], 0.0) * (f[i] - mean) * (f[i] - mean);
  st.variance = m2 / m;
  return st;
}

namespace {

double residual_integral(const KernelSnapshot& snap, double s) {
  const WarpedProfile& p = snap.metric;
  const double c = 0.5 * p.n * std::log(4.0 * pi * s);
  if (p.is_torus()) {
    std::vector<std::vector<double>> axis_f;
    for (const auto& u : snap.axis_u) {
      std::vector<double> g(u.size());
      for (std::size_t i = 0; i < u.size(); ++i) g[i] = -log_density(u[i]) - c / p.n;
      axis_f.push_back(std::move(g));
    }
    return soliton_residual_torus(p, axis_f, s, snap.axis_u);
  }
  std::vector<double> f(snap.u.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = -log_density(snap.u[i]) - c;
  return soliton_residual(p, f, s, snap.u, snap.dmu);
}

}  // namespace

EntropyTrace w_monotonicity(const FlowTrajectory& tr, const KernelField& kf, const std::vector<double>& s_grid) {
  require(kf.direction == KernelDirection::conjugate, ErrorKind::invalid_parameter,
          "entropy traces need a conjugate kernel");
  require(s_grid.size() >= 3, ErrorKind::insufficient_data, "need at least three s values");
  for (std::size_t i = 1; i < s_grid.size(); ++i)
    require(s_grid[i] > s_grid[i - 1], ErrorKind::invalid_parameter, "s_grid must increase");

  EntropyTrace et;
  et.s_grid = s_grid;
  for (double s : s_grid) {
    require(s > 0.0, ErrorKind::invalid_parameter, "s must be positive");
    require(tr.covers(kf.source_time - s), ErrorKind::out_of_domain, "trajectory does not reach s");
    const auto& snap = kf.snapshots[kf.index_of_tau(s)];
    et.W_values.push_back(w_entropy(snap, s));
    et.residuals.push_back(-2.0 * s * residual_integral(snap, s));
    const FStats st = f_stats(snap, s);
    et.f_min.push_back(st.min);
    et.f_max.push_back(st.max);
    et.f_var.push_back(st.variance);
  }

  // Three-point differences on the (possibly uneven) grid.
  const std::size_t N = s_grid.size();
  et.dW_numeric.resize(N);
  auto three_point = [&](std::size_t i0, std::size_t at) {
    const double x0 = s_grid[i0], x1 = s_grid[i0 + 1], x2 = s_grid[i0 + 2], x = s_grid[at];
    const double l0 = ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2));
    const double l1 = ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2));
    const double l2 = ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1));
    return l0 * et.W_values[i0] + l1 * et.W_values[i0 + 1] + l2 * et.W_values[i0 + 2];
  };
  for (std::size_t i = 0; i < N; ++i) et.dW_numeric[i] = three_point(std::min(i == 0 ? 0 : i - 1, N - 3), i);

  et.max_increase = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < N; ++i) et.max_increase = std::max(et.max_increase, et.W_values[i] - et.W_values[i - 1]);
  for (std::size_t i = 0; i < N; ++i) {
    const double scale = 0.02 * std::abs(et.residuals[i]) + 1e-6;
    et.derivative_defect = std::max(et.derivative_defect, std::abs(et.dW_numeric[i] - et.residuals[i]) / scale);
  }
  if (!et.monotone()) et.add_note("W increases along s");
  if (!et.derivative_match()) et.add_note("numeric dW/ds misses the residual by more than 2%; s_grid may be too coarse");
  return et;
}

void EntropyTrace::add_note(const std::string& note) {
  if (!notes.empty()) notes += "; ";
  notes += note;
}

void write_entropy_trace_csv(std::ostream& os, const EntropyTrace& tr) {
  os << "s,W,residual,dW_numeric,f_min,f_max,f_var\n";
  for (std::size_t i = 0; i < tr.s_grid.size(); ++i) {
    os << detail::format_double(tr.s_grid[i]) << ',' << detail::format_double(tr.W_values[i]) << ','
       << detail::format_double(tr.residuals[i]) << ',' << detail::format_double(tr.dW_numeric[i]) << ','
       << detail::format_double(tr.f_min[i]) << ',' << detail::format_double(tr.f_max[i]) << ','
       << detail::format_double(tr.f_var[i]) << '\n';
  }
}

void write_entropy_trace_csv(const std::string& path, const EntropyTrace& tr) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::io_error, "cannot write " + path);
  write_entropy_trace_csv(os, tr);
}

// ---- lambda0 ---------------------------------------------------------------

namespace {

// Generalized symmetric tridiagonal pencil (A, W) with A = 4K + W R.
struct Pencil {
  std::vector<double> w, diag, off;  // off[j] couples j and j+1 (and N-1 to 0 when cyclic)
  bool cyclic = false;
};

Pencil warped_pencil(const WarpedProfile& p) {
  Pencil pc;
  pc.w = measure_weights(p);
  const auto R = curvature(p).R;
  const std::size_t N = p.nodes();
  const double omega = sphere_area(p.n - 1);
  pc.diag.resize(N);
  pc.off.assign(N - 1, 0.0);
  for (std::size_t i = 0; i < N; ++i) pc.diag[i] = pc.w[i] * R[i];
  for (std::size_t j = 0; j + 1 < N; ++j) {
    const double bm = 0.5 * (p.b[j] + p.b[j + 1]);
    const double am = 0.5 * (p.a[j] + p.a[j + 1]);
    const double c = 4.0 * omega * std::pow(bm, p.n - 1) / am / p.dx();
    pc.diag[j] += c;
    pc.diag[j + 1] += c;
    pc.off[j] = -c;
  }
  return pc;
}

Pencil axis_pencil(std::size_t M, double h) {
  Pencil pc;
  pc.cyclic = true;
  pc.w.assign(M, h);
  pc.diag.assign(M, 8.0 / h);
  pc.off.assign(M, -4.0 / h);
  return pc;
}

std::vector<double> pencil_apply(const Pencil& pc, const std::vector<double>& v) {
  const std::size_t N = v.size();
  std::vector<double> y(N);
  for (std::size_t i = 0; i < N; ++i) y[i] = pc.diag[i] * v[i];
  const std::size_t links = pc.cyclic ? N : N - 1;
  for (std::size_t j = 0; j < links; ++j) {
    const std::size_t k = (j + 1) % N;
    y[j] += pc.off[j] * v[k];
    y[k] += pc.off[j] * v[j];
  }
  return y;
}

double smallest_eigenvalue(const Pencil& pc, double shift, const EigenOptions& opts) {
  const std::size_t N = pc.w.size();
  std::vector<double> lo(N, 0.0), di(N), up(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) di[i] = pc.diag[i] - shift * pc.w[i];
  if (pc.cyclic) {
    for (std::size_t j = 0; j < N; ++j) {
      up[j] = pc.off[j];
      lo[(j + 1) % N] = pc.off[j];
    }
  } else {
    for (std::size_t j = 0; j + 1 < N; ++j) {
      up[j] = pc.off[j];
      lo[j + 1] = pc.off[j];
    }
  }
  auto wnorm = [&](const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += pc.w[i] * v[i] * v[i];
    return std::sqrt(s);
  };
  std::vector<double> v(N, 1.0);
  double lambda = 0.0, res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts.max_iter; ++it) {
    const double nv = wnorm(v);
    for (double& x : v) x /= nv;
    const auto Av = pencil_apply(pc, v);
    double num = 0.0;
    for (std::size_t i = 0; i < N; ++i) num += v[i] * Av[i];
    lambda = num;
    res = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double r = Av[i] - lambda * pc.w[i] * v[i];
      res += r * r / pc.w[i];
    }
    res = std::sqrt(res);
    if (res <= opts.tol * std::max(1.0, std::abs(lambda))) return lambda;
    std::vector<double> rhs(N);
    for (std::size_t i = 0; i < N; ++i) rhs[i] = pc.w[i] * v[i];
    if (pc.cyclic)
      detail::solve_cyclic_tridiagonal(lo, di, up, rhs);
    else
      detail::solve_tridiagonal(lo, di, up, rhs);
    v = std::move(rhs);
  }
  throw Error(ErrorKind::convergence_failure, "inverse iteration stalled at residual " + detail::format_double(res));
}

}  // namespace

double lambda0(const WarpedProfile& p, const EigenOptions& opts) {
  if (p.is_torus()) {
    double lam = 0.0;
    for (int d = 0; d < p.n; ++d)
      lam += smallest_eigenvalue(axis_pencil(static_cast<std::size_t>(p.M), p.axis_spacing(d)), -1.0, opts);
    return lam;
  }
  const Pencil pc = warped_pencil(p);
  const auto R = curvature(p).R;
  const double rmin = *std::min_element(R.begin(), R.end());
  // -4 Lap is nonnegative, so the spectrum starts at or above min R.
  return smallest_eigenvalue(pc, rmin - 1.0, opts);
}

// ---- trial corpus ----------------------------------------------------------

namespace {

// Zonal eigenfunction of degree k on the round n-sphere at cos(theta) = x.
double zonal(int n, int k, double x) {
  double p0 = 1.0;
  if (k == 0) return p0;
  const double lam = 0.5 * (n - 2);
  double p1 = n == 2 ? x : 2.0 * lam * x;
  for (int j = 2; j <= k; ++j) {
    const double p2 = n == 2 ? ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j
                             : (2.0 * (j + lam - 1.0) * x * p1 - (j + 2.0 * lam - 2.0) * p0) / j;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

}  // namespace

std::vector<TrialFunction> make_trial_corpus(const WarpedProfile& p, std::uint64_t seed, int random_count) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<TrialFunction> out;

  if (p.is_torus()) {
    const auto M = static_cast<std::size_t>(p.M);
    auto axis_of = [&](auto&& g) {
      std::vector<std::vector<double>> ax(p.n, std::vector<double>(M));
      for (int d = 0; d < p.n; ++d)
        for (std::size_t i = 0; i < M; ++i) ax[d][i] = g(d, 2.0 * pi * i / M);
      return ax;
    };
    out.push_back({"constant", {}, axis_of([](int, double) { return 1.0; })});
    for (int k = 1; k <= 8; ++k)
      out.push_back({"mode_" + std::to_string(k), {}, axis_of([k](int d, double th) {
                       return 1.0 + 0.5 * std::cos((k + d) * th);
                     })});
    for (double kap : {2.0, 8.0, 32.0})
      out.push_back({"bump_" + detail::format_double(kap), {}, axis_of([kap](int d, double th) {
                       return std::exp(kap * (std::cos(th - 0.7 * d) - 1.0));
                     })});
    for (int r = 0; r < random_count; ++r) {
      std::vector<std::vector<double>> coef(p.n, std::vector<double>(13));
      for (auto& row : coef)
        for (std::size_t k = 0; k < row.size(); ++k) row[k] = normal(rng) / (1.0 + k);
      out.push_back({"random_" + std::to_string(r), {}, axis_of([&coef](int d, double th) {
                       double v = 0.0;
                       for (std::size_t k = 0; k < coef[d].size(); ++k) v += coef[d][k] * std::cos(k * th + 0.3 * k);
                       return v;
                     })});
    }
    return out;
  }

  const std::size_t N = p.nodes();
  auto of = [&](auto&& g) {
    std::vector<double> v(N);
    for (std::size_t i = 0; i < N; ++i) v[i] = g(std::cos(pi * p.x[i]), p.x[i]);
    return v;
  };
  out.push_back({"constant", of([](double, double) { return 1.0; }), {}});
  for (int k = 1; k <= 8; ++k) {
    const int n = p.n;
    out.push_back({"zonal_" + std::to_string(k), of([n, k](double c, double) { return zonal(n, k, c); }), {}});
  }
  {
    std::vector<double> c(9);
    for (double& ci : c) ci = normal(rng);
    const int n = p.n;
    out.push_back({"zonal_mix", of([&c, n](double x, double) {
                     double v = 1.0;
                     for (int k = 1; k <= 8; ++k) v += 0.5 * c[k] * zonal(n, k, x);
                     return v;
                   }),
                   {}});
  }
  for (double xc : {0.0, 0.25, 0.5, 0.75, 1.0})
    for (double width : {0.05, 0.2}) {
      const double cc = std::cos(pi * xc);
      out.push_back({"bump_" + detail::format_double(xc) + "_" + detail::format_double(width),
                     of([cc, width](double c, double) { return std::exp(-(c - cc) * (c - cc) / (2.0 * width * width)); }),
                     {}});
    }
  for (int r = 0; r < random_count; ++r) {
    std::vector<double> c(13);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] = normal(rng) / (1.0 + k);
    out.push_back({"random_" + std::to_string(r), of([&c](double, double x) {
                     double v = 0.0;
                     for (std::size_t k = 0; k < c.size(); ++k) v += c[k] * std::cos(k * pi * x);
                     return v;
                   }),
                   {}});
  }
  return out;
}

TrialFunction gaussian_trial(const WarpedProfile& torus, double sigma) {
  require(torus.is_torus(), ErrorKind::invalid_parameter, "Gaussian trials live on tori");
  require(sigma > 0.0, ErrorKind::invalid_parameter, "sigma must be positive");
  TrialFunction t;
  t.name = "gaussian";
  const auto M = static_cast<std::size_t>(torus.M);
  for (int d = 0; d < torus.n; ++d) {
    const double h = torus.axis_spacing(d), c = 0.5 * torus.sides[d];
    std::vector<double> v(M);
    for (std::size_t i = 0; i < M; ++i) {
      const double y = i * h - c;
      v[i] = std::pow(2.0 * pi * sigma * sigma, -0.25) * std::exp(-y * y / (4.0 * sigma * sigma));
    }
    t.axis_v.push_back(std::move(v));
  }
  return t;
}

// ---- inequality checks -----------------------------------------------------

namespace {

// Per-trial integrals after normalization to ||v||_2 = 1.
struct TrialIntegrals {
  double norm2 = 0.0;    // before normalization
  double ent = 0.0;      // int v^2 ln v^2
  double grad = 0.0;     // int |grad v|^2
  double curv = 0.0;     // int R v^2
  double lp = 0.0;       // int |v|^p, p = 2n/(n-2) (n >= 3)
};

double xlogx2(double v) {
  const double v2 = v * v;
  return v2 > 0.0 ? v2 * std::log(v2) : 0.0;
}

TrialIntegrals trial_integrals(const WarpedProfile& p, const TrialFunction& tf) {
  const double pexp = p.n > 2 ? 2.0 * p.n / (p.n - 2.0) : 0.0;
  TrialIntegrals ti;
  if (p.is_torus()) {
    require(static_cast<int>(tf.axis_v.size()) == p.n, ErrorKind::invalid_parameter,
            "torus trial '" + tf.name + "' needs one factor per axis");
    ti.norm2 = 1.0;
    ti.lp = 1.0;
    for (int d = 0; d < p.n; ++d) {
      const auto& v = tf.axis_v[d];
      const double h = p.axis_spacing(d);
      double n2 = 0.0;
      for (double x : v) n2 += h * x * x;
      require(n2 > 0.0, ErrorKind::degenerate_sample, "trial '" + tf.name + "' vanishes");
      const double sc = 1.0 / std::sqrt(n2);
      ti.norm2 *= n2;
      double e = 0.0, g = 0.0, lp = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double vi = sc * v[i];
        const double dv = sc * detail::periodic_d1(v, i, h);
        e += h * xlogx2(vi);
        g += h * dv * dv;
        if (pexp > 0.0) lp += h * std::pow(std::abs(vi), pexp);
      }
      ti.ent += e;
      ti.grad += g;
      ti.lp *= lp;
    }
    return ti;
  }
  require(tf.v.size() == p.nodes(), ErrorKind::invalid_parameter, "trial '" + tf.name + "' has the wrong size");
  const auto w = quadrature_weights(p);
  const auto R = curvature(p).R;
  const auto dv = radial_derivatives(p, tf.v).d1;
  for (std::size_t i = 0; i < w.size(); ++i) ti.norm2 += w[i] * tf.v[i] * tf.v[i];
  require(ti.norm2 > 0.0, ErrorKind::degenerate_sample, "trial '" + tf.name + "' vanishes");
  const double sc = 1.0 / std::sqrt(ti.norm2);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double vi = sc * tf.v[i];
    ti.ent += w[i] * xlogx2(vi);
    ti.grad += w[i] * sc * sc * dv[i] * dv[i];
    ti.curv += w[i] * R[i] * vi * vi;
    if (pexp > 0.0) ti.lp += w[i] * std::pow(std::abs(vi), pexp);
  }
  return ti;
}

}  // namespace

CheckReport log_sobolev_check(const WarpedProfile& p, double t, const std::vector<TrialFunction>& trials,
                              const LogSobolevOptions& opts) {
  require(!trials.empty(), ErrorKind::insufficient_data, "empty trial corpus");
  CheckReport rep;
  rep.name = "log_sobolev";
  rep.control = p.is_torus();
  if (p.n == 2) rep.add_note("n = 2 is an extrapolation");
  const double n = p.n;
  const double alpha_e = -n - 0.5 * n * std::log(4.0 * pi);
  const double lam = lambda0(p);
  double beta = 0.0;
  if (opts.beta) {
    beta = *opts.beta;
  } else if (lam <= 1e-12) {
    rep.add_note("lambda0 <= 0; beta = 0 assumed");
  }

  std::vector<double> sweep;
  if (opts.eps) {
    require(*opts.eps > 0.0, ErrorKind::invalid_parameter, "eps must be positive");
    sweep.push_back(*opts.eps);
  } else {
    require(opts.eps_min > 0.0 && opts.eps_max > opts.eps_min && opts.sweep >= 2, ErrorKind::invalid_parameter,
            "bad eps sweep");
    for (int k = 0; k < opts.sweep; ++k)
      sweep.push_back(opts.eps_min * std::pow(opts.eps_max / opts.eps_min, double(k) / (opts.sweep - 1)));
  }

  rep.columns = {"trial", "eps", "lhs", "quadratic", "gap"};
  double alpha_fit = -std::numeric_limits<double>::infinity();
  double gap_min = std::numeric_limits<double>::infinity();
  bool renormalized = false;
  for (std::size_t j = 0; j < trials.size(); ++j) {
    const TrialIntegrals ti = trial_integrals(p, trials[j]);
    if (std::abs(ti.norm2 - 1.0) > 1e-9) renormalized = true;
    const double Q = 4.0 * ti.grad + ti.curv;
    std::vector<double> eps_list = sweep;
    if (!opts.eps && Q + beta > 0.0) eps_list.push_back(std::sqrt(n / (2.0 * (Q + beta))));
    for (double eps : eps_list) {
      const double rhs = eps * eps * Q - n * std::log(eps) + (t + eps * eps) * beta + alpha_e;
      const double gap = ti.ent - rhs;
      alpha_fit = std::max(alpha_fit, gap);
      gap_min = std::min(gap_min, gap);
      rep.rows.push_back({double(j), eps, ti.ent, Q, gap});
      ++rep.samples;
    }
  }
  if (renormalized) rep.add_note("trials auto-normalized to unit L2 norm");
  const double alpha = opts.alpha.value_or(alpha_fit);
  rep.ratio_min = gap_min;
  rep.ratio_max = alpha_fit;
  rep.set_constant("alpha", alpha_fit);
  rep.set_constant("alpha_euclidean", alpha_e);
  rep.set_constant("beta", beta);
  rep.set_constant("lambda0", lam);
  rep.margin = alpha - alpha_fit;
  rep.pass = std::isfinite(alpha_fit) && rep.margin >= -opts.tol && alpha_fit <= opts.alpha_cap;
  return rep;
}

CheckReport sobolev_check(const WarpedProfile& p, const std::vector<TrialFunction>& trials, const SobolevOptions& opts) {
  require(p.n >= 3, ErrorKind::unsupported_dimension, "the Sobolev check needs n >= 3");
  require(!trials.empty(), ErrorKind::insufficient_data, "empty trial corpus");
  CheckReport rep;
  rep.name = "sobolev";
  rep.control = p.is_torus();
  const double n = p.n;
  if (!p.is_torus()) {
    const auto R = curvature(p).R;
    if (*std::min_element(R.begin(), R.end()) <= 0.0 && opts.B == 0.0) rep.add_note("R is not positive; B = 0 may fail");
  }
  rep.columns = {"trial", "lhs", "quadratic", "ratio"};
  double A_fit = 0.0;
  double ratio_min = std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, double>> pairs;  // (lhs, quadratic)
  bool renormalized = false;
  for (std::size_t j = 0; j < trials.size(); ++j) {
    const TrialIntegrals ti = trial_integrals(p, trials[j]);
    if (std::abs(ti.norm2 - 1.0) > 1e-9) renormalized = true;
    const double lhs = std::pow(ti.lp, (n - 2.0) / n);
    const double Q = ti.grad + 0.25 * ti.curv;
    if (Q <= 0.0) {
      rep.add_note("trial '" + trials[j].name + "' has no positive quadratic form");
      if (lhs > opts.B) A_fit = std::numeric_limits<double>::infinity();
      continue;
    }
    const double ratio = (lhs - opts.B) / Q;
    A_fit = std::max(A_fit, ratio);
    ratio_min = std::min(ratio_min, ratio);
    pairs.emplace_back(lhs, Q);
    rep.rows.push_back({double(j), lhs, Q, ratio});
    ++rep.samples;
  }
  if (renormalized) rep.add_note("trials auto-normalized to unit L2 norm");
  const double A = opts.A.value_or(A_fit);
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& [lhs, Q] : pairs) margin = std::min(margin, (A * Q + opts.B - lhs) / lhs);
  rep.ratio_min = ratio_min;
  rep.ratio_max = A_fit;
  rep.set_constant("A", A_fit);
  rep.set_constant("B", opts.B);
  rep.margin = margin;
  rep.pass = std::isfinite(A_fit) && margin >= -1e-12 && A_fit <= opts.A_cap;
  return rep;
}

}  // namespace heatlab
