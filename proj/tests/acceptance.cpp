// One PASS/FAIL line per acceptance criterion. Exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "heatlab/bounds.hpp"
#include "heatlab/entropy.hpp"
#include "heatlab/flow.hpp"
#include "heatlab/harness.hpp"
#include "heatlab/kernel.hpp"
#include "heatlab/soliton.hpp"

#include "oracles.hpp"

using namespace heatlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::vector<double> log_grid(double lo, double hi, int count) {
  std::vector<double> g;
  for (int i = 0; i < count; ++i) g.push_back(lo * std::pow(hi / lo, double(i) / (count - 1)));
  return g;
}

std::vector<double> lin_grid(double lo, double hi, int count) {
  std::vector<double> g;
  for (int i = 0; i < count; ++i) g.push_back(lo + (hi - lo) * i / (count - 1));
  return g;
}

double max_b2(const WarpedProfile& p) {
  const double b = *std::max_element(p.b.begin(), p.b.end());
  return b * b;
}

// 1. Numeric flow of round S^2 and S^3 against r^2 = r0^2 - 2(n-1)t.
void flow_oracle(Outcome& o) {
  for (int n : {2, 3}) {
    const double span = 0.5 / (2.0 * (n - 1));  // r^2: 1 -> 1/2
    FlowControl c;
    c.snapshot_every = span / 8;
    const auto tr = integrate(make_round_sphere(n, 1.0, 256), 0.0, span, c);
    double worst = 0.0;
    for (const auto& p : tr.profiles)
      worst = std::max(worst, std::abs(max_b2(p) / oracle::round_radius2(n, 1.0, p.t) - 1.0));
    o.detail << " S" << n << " rel " << fmt(worst);
    o.expect(worst < 1e-6, "S" + std::to_string(n) + " radius");

    // Temporal order from fixed steps on a coarse grid against a fine-step reference.
    auto run = [&](int steps) {
      FlowControl f;
      f.dt = span / steps;
      return max_b2(integrate(make_round_sphere(n, 1.0, 16), 0.0, span, f).profiles.back());
    };
    const int N0 = n == 2 ? 80 : 40;
    const double ref = run(16 * N0);
    const double e1 = std::abs(run(N0) - ref), e2 = std::abs(run(2 * N0) - ref), e3 = std::abs(run(4 * N0) - ref);
    const double p1 = std::log2(e1 / e2), p2 = std::log2(e2 / e3);
    o.detail << " order " << fmt(p1) << "," << fmt(p2);
    o.expect(std::abs(p1 - 4.0) < 0.3 && std::abs(p2 - 4.0) < 0.3, "RK4 order");
  }
}

// 2. FD conjugate kernel on the exact shrinking S^2 against the series.
void kernel_oracle(Outcome& o) {
  const auto tr = exact_sphere_trajectory(2, 1.0, {-1.0, 0.0}, 256);
  const double diag = oracle::sphere_kernel(2, 1.0, -1.0, 0.0, 0.0);
  const double lib = spectral_kernel_sphere(tr, -1.0, 0.0, 0.0);
  o.detail << " diag " << diag << " lib-series " << fmt(lib - diag);
  o.expect(std::abs(diag - 0.0645) < 5e-5, "on-diagonal value");
  o.expect(std::abs(lib - diag) < 1e-6, "series agreement");

  const auto kf = solve_conjugate_kernel(tr, Point::axis(0.0), 0.0, {-1.0});
  const auto& s = kf.snapshots.front();
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < s.u.size(); ++i) {
    const double ex = oracle::sphere_kernel(2, 1.0, -1.0, 0.0, std::numbers::pi * s.metric.x[i]);
    err = std::max(err, std::abs(s.u[i] - ex));
    scale = std::max(scale, std::abs(ex));
  }
  o.detail << " relLinf " << fmt(err / scale);
  o.expect(err / scale < 1e-3, "FD kernel");
}

// 3. Backward mass, forward mass r_t^2 / r_l^2 and the curvature bracket.
void mass_laws(Outcome& o) {
  const auto tr = exact_sphere_trajectory(2, 1.0, {-2.0, 0.0}, 256);
  const auto kc = solve_conjugate_kernel(tr, Point::axis(0.0), 0.0, lin_grid(-2.0, -0.1, 20));
  const double back = std::abs(backward_mass(kc) - 1.0);
  o.detail << " backward " << fmt(back);
  o.expect(back <= 1e-6, "backward mass");

  const auto kf = solve_forward_kernel(tr, Point::axis(0.0), -1.0, {-0.75, -0.5, -0.25, 0.0});
  double worst = 0.0;
  for (std::size_t k = 0; k < kf.snapshots.size(); ++k) {
    const double t = kf.snapshots[k].t;
    const double expect = oracle::round_radius2(2, std::sqrt(2.0), t) / oracle::round_radius2(2, std::sqrt(2.0), -1.0);
    worst = std::max(worst, std::abs(slice_mass(kf, k) - expect));
  }
  o.detail << " forward " << fmt(worst);
  o.expect(worst <= 1e-4, "forward mass");
  const auto br = mass_bracket_check(kf, tr);
  o.detail << " bracket margin " << fmt(br.margin);
  o.expect(br.pass, "mass bracket");
}

// 4. On-diagonal bounds over tau in [0.01, 10].
void on_diagonal(Outcome& o) {
  const auto tr = exact_sphere_trajectory(2, 1.0, {-10.0, 0.0}, 256);
  std::vector<double> ls;
  for (double tau : log_grid(0.01, 10.0, 31)) ls.push_back(-tau);
  const auto kf = solve_conjugate_kernel(tr, Point::axis(0.0), 0.0, ls);
  const auto lo = on_diag_lower_check(kf, tr);
  const auto up = on_diag_upper_check(kf);
  o.detail << " a1 " << fmt(lo.constant("a1")) << " c " << fmt(lo.constant("c")) << " B " << fmt(up.constant("B"));
  o.expect(lo.pass && lo.constant("a1") <= 100.0, "lower/a1");
  o.expect(up.pass, "upper");
}

// 5. Effective Gaussian exponents on the sphere; q -> 1/4 on the torus.
void gaussian(Outcome& o) {
  const auto tr = exact_sphere_trajectory(2, 1.0, {-1.0, 0.0}, 256);
  const auto kf = solve_forward_kernel(tr, Point::axis(0.0), -1.0, {-0.9, -0.75, -0.5, 0.0});
  const auto g = gaussian_envelope_check(kf, tr);
  o.detail << " sphere q [" << fmt(g.ratio_min) << ", " << fmt(g.ratio_max) << "]";
  o.expect(g.pass && g.ratio_min >= 1.0 / 16 && g.ratio_max <= 4.0, "sphere exponents");

  const auto torus = make_flat_torus(2, {10.0, 10.0}, 1000);
  const auto tt = static_torus_trajectory(torus, {0.0, 1.0});
  const auto kt = solve_forward_kernel(tt, Point{{5.0, 5.0}}, 0.0, {0.02});
  const auto gt = gaussian_envelope_check(kt, tt);
  const double dev = std::max(std::abs(gt.ratio_min - 0.25), std::abs(gt.ratio_max - 0.25)) / 0.25;
  o.detail << " torus q [" << fmt(gt.ratio_min) << ", " << fmt(gt.ratio_max) << "]";
  o.expect(dev < 0.05, "torus exponent");
}

// 6. Entropy monotonicity, derivative, flat and sphere values, scaling.
void entropy(Outcome& o) {
  std::vector<double> ts;
  for (double t : lin_grid(-5.0, 0.0, 41)) ts.push_back(t);
  const auto tr = exact_sphere_trajectory(2, 1.0, ts, 256);
  const auto sg = lin_grid(1.0, 4.0, 31);
  std::vector<double> ls;
  for (double s : sg) ls.push_back(-s);
  const auto kf = solve_conjugate_kernel(tr, Point::axis(0.0), 0.0, ls);
  const auto et = w_monotonicity(tr, kf, sg);
  const double wmax = *std::max_element(et.W_values.begin(), et.W_values.end());
  o.detail << " max increase " << fmt(et.max_increase) << " defect " << fmt(et.derivative_defect) << " W max "
           << fmt(wmax);
  o.expect(et.monotone(1e-8), "monotone");
  o.expect(et.derivative_match(), "dW/ds");
  o.expect(wmax < -1e-3, "sphere W");

  const auto torus = make_flat_torus(2, {40.0, 40.0}, 800);
  const auto tt = static_torus_trajectory(torus, {-1.0, 0.0});
  const auto kg = oracle_kernel_field(tt, KernelDirection::conjugate, Point{{20.0, 20.0}}, 0.0, {-1.0});
  const double wg = w_entropy(kg.snapshots.front(), 1.0);
  o.detail << " W gauss " << fmt(wg);
  o.expect(std::abs(wg) <= 1e-3, "flat W");

  const auto ko = oracle_kernel_field(tr, KernelDirection::conjugate, Point::axis(0.0), 0.0, ls);
  double worst = 0.0;
  for (double tau_k : {2.0, 3.0}) {
    const double s = 4.0 / tau_k;
    const auto rk = rescaled_kernel(tr, ko, tau_k, s);
    worst = std::max(worst, std::abs(w_entropy(rk.snap, s) - w_entropy(ko.snapshots[ko.index_of_tau(4.0)], 4.0)));
  }
  o.detail << " scaling " << fmt(worst);
  o.expect(worst <= 1e-6, "scaling identity");
}

// 7. Lowest eigenvalue of -4 Lap + R.
void lambda(Outcome& o) {
  const double l2 = lambda0(make_round_sphere(2, 1.0, 256));
  const double l3 = lambda0(make_round_sphere(3, 2.0, 256));
  const double lt = lambda0(make_flat_torus(2, {10.0, 10.0}, 200));
  o.detail << " S2 " << l2 << " S3 " << l3 << " T " << fmt(lt);
  o.expect(std::abs(l2 - oracle::round_lambda0(2, 1.0)) <= 1e-6, "S2");
  o.expect(std::abs(l3 - oracle::round_lambda0(3, 2.0)) <= 1e-6, "S3");
  o.expect(std::abs(lt) <= 1e-6, "torus");
}

// 8. Backward limit on the exact ancient S^2 and the reference residuals.
void backward_limit(Outcome& o) {
  const auto tr = exact_sphere_trajectory(2, 1.0, {0.0}, 256);
  const auto L = backward_limit_experiment(tr, {10.0, 100.0, 1000.0}, 1.0);
  const auto& r = L.residual_seq;
  bool dec = true, fdec = true, gdec = true;
  for (std::size_t k = 1; k < r.size(); ++k) {
    dec = dec && r[k] < r[k - 1];
    fdec = fdec && L.f_variance_seq[k] < L.f_variance_seq[k - 1];
    gdec = gdec && std::abs(L.W_gap_seq[k]) < std::abs(L.W_gap_seq[k - 1]);
  }
  const double ratio = r.back() / r.front();
  o.detail << " residual ratio " << fmt(ratio) << " W gap " << fmt(L.W_gap_seq.front()) << "->"
           << fmt(L.W_gap_seq.back()) << " f var " << fmt(L.f_variance_seq.back());
  o.expect(dec && ratio < 0.1, "residual");
  o.expect(fdec && L.f_variance_seq.back() < 1e-2 * L.f_variance_seq.front(), "f variance");
  o.expect(gdec && std::abs(L.W_gap_seq.back()) < 1e-2 * std::abs(L.W_gap_seq.front()), "W gap");
  o.expect(L.nonflat, "nonflat");
  o.expect(L.verdict, "verdict");

  // Round shrinking soliton r^2 = 2(n-1)s with constant f, and the flat Gaussian.
  const double s = 1.0, R2 = 2.0 * s;
  const auto p = make_round_sphere(2, std::sqrt(R2), 256);
  std::vector<double> u(p.nodes(), 1.0 / (4.0 * std::numbers::pi * R2));
  std::vector<double> f(p.nodes(), std::log(R2 / s));
  const double round_res = soliton_residual(p, f, s, u);
  const auto torus = make_flat_torus(2, {40.0, 40.0}, 800);
  std::vector<std::vector<double>> au, af;
  for (int d = 0; d < 2; ++d) {
    std::vector<double> ud(800), fd(800);
    for (int i = 0; i < 800; ++i) {
      const double y = i * 0.05 - 20.0;
      ud[i] = oracle::gaussian_1d(y, s);
      fd[i] = y * y / (4.0 * s);
    }
    au.push_back(ud);
    af.push_back(fd);
  }
  const double gauss_res = soliton_residual_torus(torus, af, s, au);
  o.detail << " refs " << fmt(round_res) << "," << fmt(gauss_res);
  o.expect(round_res < 1e-10 && gauss_res < 1e-10, "reference residuals");
}

// 9. Log-Sobolev and Sobolev on the S^3 corpus; sharp Gaussian case.
void inequalities(Outcome& o) {
  const auto p = make_round_sphere(3, 1.0, 256);
  const auto corpus = make_trial_corpus(p, 7);
  const auto lsi = log_sobolev_check(p, 0.0, corpus);
  const auto sob = sobolev_check(p, corpus);
  o.detail << " trials " << corpus.size() << " alpha " << fmt(lsi.constant("alpha")) << " A "
           << fmt(sob.constant("A"));
  o.expect(lsi.pass, "log-Sobolev");
  o.expect(sob.pass, "Sobolev");

  const auto torus = make_flat_torus(2, {40.0, 40.0}, 800);
  LogSobolevOptions opt;
  opt.alpha = 0.0;
  opt.beta = 0.0;
  const auto g = log_sobolev_check(torus, 0.0, {gaussian_trial(torus, 1.0)}, opt);
  o.detail << " gaussian margin " << fmt(g.margin);
  o.expect(std::abs(g.margin) <= 1e-3, "Gaussian margin");
}

std::vector<std::pair<std::string, std::string>> tree(const fs::path& root) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream is(e.path(), std::ios::binary);
    files.emplace_back(fs::relative(e.path(), root).string(),
                       std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()));
  }
  std::sort(files.begin(), files.end());
  return files;
}

// 10. Repeated runs, with different thread counts, give identical bytes.
void determinism(Outcome& o) {
  const fs::path base = fs::temp_directory_path() / "heatlab_acceptance";
  fs::remove_all(base);
  for (const char* name : {"s3_inequalities", "sphere_backward_limit", "sphere_entropy"}) {
    const auto sc = load_scenario(std::string(HEATLAB_SCENARIO_DIR) + "/" + name + ".json");
    std::ostringstream log;
    setenv("HEATLAB_THREADS", "1", 1);
    const auto a = run_scenario(sc, Stage::run, (base / name / "a").string(), log);
    setenv("HEATLAB_THREADS", "4", 1);
    const auto b = run_scenario(sc, Stage::run, (base / name / "b").string(), log);
    unsetenv("HEATLAB_THREADS");
    const auto ta = tree(base / name / "a"), tb = tree(base / name / "b");
    o.detail << " " << name << " " << ta.size() << " files";
    o.expect(a.exit_code == 0 && b.exit_code == 0, std::string(name) + " exit");
    o.expect(!ta.empty() && ta == tb, std::string(name) + " bytes");
  }
  fs::remove_all(base);
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"flow oracle", flow_oracle},       {"kernel oracle", kernel_oracle}, {"mass laws", mass_laws},
      {"on-diagonal bounds", on_diagonal}, {"gaussian envelopes", gaussian}, {"entropy", entropy},
      {"lambda0", lambda},                 {"backward limit", backward_limit},
      {"log-sobolev/sobolev", inequalities}, {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [error: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::printf("%s %2zu %s:%s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.str().c_str(), secs);
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
