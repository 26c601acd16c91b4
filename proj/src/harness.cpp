#include "heatlab/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "heatlab/bounds.hpp"
#include "heatlab/entropy.hpp"
#include "heatlab/flow.hpp"
#include "heatlab/kernel.hpp"
#include "heatlab/parallel.hpp"
#include "numerics.hpp"

namespace fs = std::filesystem;

namespace heatlab {

using ojson = nlohmann::ordered_json;

double CheckSpec::get(const std::string& key, double fallback) const {
  const auto it = num.find(key);
  return it == num.end() ? fallback : it->second;
}

std::optional<double> CheckSpec::maybe(const std::string& key) const {
  const auto it = num.find(key);
  if (it == num.end()) return std::nullopt;
  return it->second;
}

namespace {

// ---- source positions ------------------------------------------------------

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(offset, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

// Minimal walker over already-valid JSON text, used to turn a key path into
// the offset of the value it names.
class Locator {
 public:
  explicit Locator(const std::string& t) : t_(t) {}

  std::size_t find(const std::vector<std::string>& path) {
    std::size_t pos = skip_ws(0);
    std::size_t best = pos;
    for (const auto& key : path) {
      pos = skip_ws(pos);
      if (pos >= t_.size()) break;
      if (t_[pos] == '{') {
        if (!enter_object(pos, key)) break;
      } else if (t_[pos] == '[') {
        if (!enter_array(pos, key)) break;
      } else {
        break;
      }
      best = pos;
    }
    return best;
  }

 private:
  std::size_t skip_ws(std::size_t p) const {
    while (p < t_.size() && std::isspace(static_cast<unsigned char>(t_[p]))) ++p;
    return p;
  }
  std::size_t skip_string(std::size_t p) const {
    ++p;
    while (p < t_.size() && t_[p] != '"') p += t_[p] == '\\' ? 2 : 1;
    return p + 1;
  }
  std::size_t skip_value(std::size_t p) const {
    p = skip_ws(p);
    if (p >= t_.size()) return p;
    if (t_[p] == '"') return skip_string(p);
    if (t_[p] == '{' || t_[p] == '[') {
      int depth = 0;
      while (p < t_.size()) {
        const char c = t_[p];
        if (c == '"') {
          p = skip_string(p);
          continue;
        }
        if (c == '{' || c == '[') ++depth;
        if (c == '}' || c == ']') {
          if (--depth == 0) return p + 1;
        }
        ++p;
      }
      return p;
    }
    while (p < t_.size() && !std::strchr(",}] \t\r\n", t_[p])) ++p;
    return p;
  }
  bool enter_object(std::size_t& pos, const std::string& key) const {
    std::size_t p = skip_ws(pos + 1);
    while (p < t_.size() && t_[p] == '"') {
      const std::size_t end = skip_string(p);
      const std::string k = t_.substr(p + 1, end - p - 2);
      p = skip_ws(end);
      if (p >= t_.size() || t_[p] != ':') return false;
      const std::size_t v = skip_ws(p + 1);
      if (k == key) {
        pos = v;
        return true;
      }
      p = skip_ws(skip_value(v));
      if (p < t_.size() && t_[p] == ',') p = skip_ws(p + 1);
    }
    return false;
  }
  bool enter_array(std::size_t& pos, const std::string& key) const {
    std::size_t idx = 0;
    try {
      idx = std::stoul(key);
    } catch (const std::exception&) {
      return false;
    }
    std::size_t p = skip_ws(pos + 1);
    for (std::size_t i = 0; p < t_.size() && t_[p] != ']'; ++i) {
      if (i == idx) {
        pos = p;
        return true;
      }
      p = skip_ws(skip_value(p));
      if (p < t_.size() && t_[p] == ',') p = skip_ws(p + 1);
    }
    return false;
  }

  const std::string& t_;
};

// ---- schema reading --------------------------------------------------------

class Reader {
 public:
  explicit Reader(const std::string& text) : text_(text) {}

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const {
    std::string dotted;
    for (const auto& p : path) dotted += (dotted.empty() ? "" : ".") + p;
    const auto [line, col] = line_column(text_, Locator(text_).find(path));
    throw ScenarioError((dotted.empty() ? "" : dotted + ": ") + msg, line, col);
  }

  void only(const ojson& obj, const std::vector<std::string>& path, const std::set<std::string>& allowed) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [k, v] : obj.items()) {
      (void)v;
      if (!allowed.count(k)) {
        auto p = path;
        p.push_back(k);
        fail(p, "unknown key '" + k + "'");
      }
    }
  }

  double number(const ojson& obj, const std::vector<std::string>& path, const std::string& key, double fallback) const {
    if (!obj.contains(key)) return fallback;
    return number_at(obj.at(key), extend(path, key));
  }
  double number_at(const ojson& v, const std::vector<std::string>& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(path, "expected a finite number");
    return d;
  }
  int integer(const ojson& obj, const std::vector<std::string>& path, const std::string& key, int fallback) const {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) fail(extend(path, key), "expected an integer");
    return v.get<int>();
  }
  std::string string(const ojson& obj, const std::vector<std::string>& path, const std::string& key,
                     const std::string& fallback) const {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_string()) fail(extend(path, key), "expected a string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(const ojson& v, const std::vector<std::string>& path) const {
    if (!v.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number_at(v[i], extend(path, std::to_string(i))));
    return out;
  }
  // Either an explicit list or {"from", "to", "count", "spacing"}.
  std::vector<double> grid(const ojson& v, const std::vector<std::string>& path) const {
    if (v.is_array()) return numbers(v, path);
    only(v, path, {"from", "to", "count", "spacing"});
    for (const char* k : {"from", "to", "count"})
      if (!v.contains(k)) fail(path, std::string("range needs '") + k + "'");
    const double a = number(v, path, "from", 0.0), b = number(v, path, "to", 0.0);
    const int count = integer(v, path, "count", 2);
    const std::string spacing = string(v, path, "spacing", "linear");
    if (count < 1) fail(extend(path, "count"), "count must be positive");
    if (spacing != "linear" && spacing != "log") fail(extend(path, "spacing"), "spacing is linear or log");
    if (spacing == "log" && (a <= 0.0 || b <= 0.0)) fail(path, "log ranges need positive ends");
    std::vector<double> out;
    for (int k = 0; k < count; ++k) {
      const double f = count == 1 ? 0.0 : double(k) / (count - 1);
      out.push_back(spacing == "log" ? a * std::pow(b / a, f) : a + (b - a) * f);
    }
    return out;
  }

  static std::vector<std::string> extend(std::vector<std::string> p, const std::string& k) {
    p.push_back(k);
    return p;
  }

 private:
  const std::string& text_;
};

struct CheckKeys {
  std::set<std::string> num;
  std::set<std::string> vec;
  bool needs_kernel = true;
  bool needs_conjugate = false;
};

const std::map<std::string, CheckKeys>& check_table() {
  static const std::map<std::string, CheckKeys> t = {
      {"on_diag_upper", {{"cap", "min_samples"}, {}}},
      {"on_diag_lower", {{"floor", "a1_cap", "min_samples"}, {}}},
      {"gaussian_envelope", {{"c_lo", "c_hi", "cn_cap", "eta", "rel_floor"}, {}}},
      {"mass_bracket", {{"tol"}, {}}},
      {"backward_mass", {{"tol"}, {}}},
      {"forward_mass", {{"tol"}, {}}},
      {"mean_value", {{"tau", "r", "cap"}, {"x"}}},
      {"entropy", {{"tol"}, {"s"}, true, true}},
      {"lambda0", {{"t", "expect", "tol"}, {}, false}},
      {"log_sobolev", {{"t", "eps", "alpha", "beta", "eps_min", "eps_max", "sweep", "random_count", "tol"}, {}, false}},
      {"sobolev", {{"t", "A", "B", "random_count"}, {}, false}},
  };
  return t;
}

const std::set<std::string> kPositiveKeys = {"cap", "a1_cap", "cn_cap", "tol", "floor", "r", "tau", "eps",
                                             "eps_min", "eps_max", "sweep", "min_samples"};

}  // namespace

Scenario parse_scenario(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string msg = e.what();
    if (const auto p = msg.find("syntax error"); p != std::string::npos) msg = msg.substr(p);
    throw ScenarioError("malformed JSON: " + msg, line, col);
  }
  const Reader rd(text);
  rd.only(j, {}, {"schema", "name", "model", "flow", "kernel", "checks", "limit", "seed", "output"});
  if (!j.contains("schema")) rd.fail({}, "missing 'schema'");
  if (rd.string(j, {}, "schema", "") != kScenarioSchema)
    rd.fail({"schema"}, std::string("schema must be \"") + kScenarioSchema + "\"");

  Scenario sc;
  sc.name = rd.string(j, {}, "name", "scenario");
  if (sc.name.empty() || sc.name.find_first_of("/\\") != std::string::npos) rd.fail({"name"}, "bad scenario name");
  if (j.contains("seed")) {
    const auto& v = j.at("seed");
    if (!v.is_number_unsigned()) rd.fail({"seed"}, "seed must be a non-negative integer");
    sc.seed = v.get<std::uint64_t>();
  }
  sc.output = rd.string(j, {}, "output", "");

  if (!j.contains("model")) rd.fail({}, "missing 'model'");
  {
    const auto& m = j.at("model");
    const std::vector<std::string> P{"model"};
    if (!m.is_object()) rd.fail(P, "expected an object");
    sc.model.kind = rd.string(m, P, "kind", "");
    auto& md = sc.model;
    if (md.kind == "exact_sphere")
      rd.only(m, P, {"kind", "n", "M", "T0"});
    else if (md.kind == "warped_sphere")
      rd.only(m, P, {"kind", "n", "M", "r0", "amplitude", "mode"});
    else if (md.kind == "flat_torus")
      rd.only(m, P, {"kind", "n", "M", "sides"});
    else
      rd.fail({"model", "kind"}, "kind is exact_sphere, warped_sphere or flat_torus");
    md.n = rd.integer(m, P, "n", 2);
    md.M = rd.integer(m, P, "M", md.kind == "flat_torus" ? 400 : 256);
    md.r0 = rd.number(m, P, "r0", 1.0);
    md.T0 = rd.number(m, P, "T0", 1.0);
    md.amplitude = rd.number(m, P, "amplitude", 0.0);
    md.mode = rd.integer(m, P, "mode", 1);
    if (md.n < 2 || md.n > 8) rd.fail({"model", "n"}, "n must lie in [2, 8]");
    if (md.M < 16) rd.fail({"model", "M"}, "M must be at least 16");
    if (md.r0 <= 0.0) rd.fail({"model", "r0"}, "r0 must be positive");
    if (std::abs(md.amplitude) >= 1.0) rd.fail({"model", "amplitude"}, "|amplitude| must be below 1");
    if (md.kind == "flat_torus") {
      if (!m.contains("sides")) rd.fail(P, "flat_torus needs 'sides'");
      md.sides = rd.numbers(m.at("sides"), {"model", "sides"});
      if (static_cast<int>(md.sides.size()) != md.n) rd.fail({"model", "sides"}, "need one side per dimension");
      for (double s : md.sides)
        if (s <= 0.0) rd.fail({"model", "sides"}, "sides must be positive");
    }
  }

  if (j.contains("flow")) {
    const auto& f = j.at("flow");
    const std::vector<std::string> P{"flow"};
    rd.only(f, P, {"t0", "t1", "dt", "snapshots", "snapshot_times"});
    sc.flow.t0 = rd.number(f, P, "t0", 0.0);
    sc.flow.t1 = rd.number(f, P, "t1", sc.flow.t0);
    sc.flow.dt = rd.number(f, P, "dt", 0.0);
    sc.flow.snapshots = rd.integer(f, P, "snapshots", 2);
    if (f.contains("snapshot_times")) sc.flow.snapshot_times = rd.grid(f.at("snapshot_times"), {"flow", "snapshot_times"});
    if (sc.flow.dt < 0.0) rd.fail({"flow", "dt"}, "dt must be non-negative");
    if (sc.flow.snapshots < 1) rd.fail({"flow", "snapshots"}, "snapshots must be positive");
  }
  if (sc.model.kind == "exact_sphere") {
    const double tmax = std::max(sc.flow.t0, sc.flow.t1);
    if (tmax >= sc.model.T0) rd.fail({"flow"}, "exact spheres exist only before T0");
  }

  if (j.contains("kernel")) {
    const auto& k = j.at("kernel");
    const std::vector<std::string> P{"kernel"};
    rd.only(k, P, {"direction", "solver", "source", "source_time", "tau", "eps", "dt_max", "rel_dt"});
    KernelSpec ks;
    ks.direction = rd.string(k, P, "direction", "conjugate");
    if (ks.direction != "forward" && ks.direction != "conjugate")
      rd.fail({"kernel", "direction"}, "direction is forward or conjugate");
    ks.solver = rd.string(k, P, "solver", "fd");
    if (ks.solver != "fd" && ks.solver != "oracle") rd.fail({"kernel", "solver"}, "solver is fd or oracle");
    if (ks.solver == "oracle" && sc.model.kind == "warped_sphere")
      rd.fail({"kernel", "solver"}, "closed-form kernels need exact_sphere or flat_torus");
    if (k.contains("source")) ks.source = rd.numbers(k.at("source"), {"kernel", "source"});
    if (k.contains("source_time")) ks.source_time = rd.number(k, P, "source_time", 0.0);
    if (!k.contains("tau")) rd.fail(P, "kernel needs 'tau'");
    ks.tau = rd.grid(k.at("tau"), {"kernel", "tau"});
    for (double t : ks.tau)
      if (t <= 0.0) rd.fail({"kernel", "tau"}, "tau values must be positive");
    ks.eps = rd.number(k, P, "eps", 0.0);
    ks.dt_max = rd.number(k, P, "dt_max", 0.05);
    ks.rel_dt = rd.number(k, P, "rel_dt", 0.01);
    if (ks.eps < 0.0 || ks.dt_max <= 0.0 || ks.rel_dt <= 0.0) rd.fail(P, "solver settings must be positive");
    sc.kernel = ks;
  }

  if (j.contains("checks")) {
    const auto& cs = j.at("checks");
    if (!cs.is_array()) rd.fail({"checks"}, "expected an array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const std::vector<std::string> P{"checks", std::to_string(i)};
      const auto& c = cs[i];
      if (!c.is_object()) rd.fail(P, "expected an object");
      CheckSpec spec;
      spec.type = rd.string(c, P, "type", "");
      const auto it = check_table().find(spec.type);
      if (it == check_table().end()) rd.fail(Reader::extend(P, "type"), "unknown check type '" + spec.type + "'");
      const CheckKeys& keys = it->second;
      std::set<std::string> allowed{"type", "name"};
      allowed.insert(keys.num.begin(), keys.num.end());
      allowed.insert(keys.vec.begin(), keys.vec.end());
      rd.only(c, P, allowed);
      spec.name = rd.string(c, P, "name", spec.type);
      if (spec.name.empty() || spec.name.find_first_of("/\\") != std::string::npos)
        rd.fail(Reader::extend(P, "name"), "bad check name");
      if (!names.insert(spec.name).second) rd.fail(Reader::extend(P, "name"), "duplicate check name '" + spec.name + "'");
      for (const auto& key : keys.num)
        if (c.contains(key)) {
          const double v = rd.number(c, P, key, 0.0);
          if (kPositiveKeys.count(key) && v <= 0.0) rd.fail(Reader::extend(P, key), key + " must be positive");
          spec.num[key] = v;
        }
      for (const auto& key : keys.vec)
        if (c.contains(key)) spec.vec[key] = rd.grid(c.at(key), Reader::extend(P, key));
      if (keys.needs_kernel && !sc.kernel) rd.fail(P, "check '" + spec.type + "' needs a kernel section");
      if (keys.needs_conjugate && sc.kernel->direction != "conjugate")
        rd.fail(P, "check '" + spec.type + "' needs a conjugate kernel");
      if (spec.type == "entropy" && !spec.vec.count("s")) rd.fail(P, "entropy needs 's'");
      if (spec.type == "mean_value" && (!spec.num.count("tau") || !spec.num.count("r")))
        rd.fail(P, "mean_value needs 'tau' and 'r'");
      sc.checks.push_back(std::move(spec));
    }
  }

  if (j.contains("limit")) {
    const auto& l = j.at("limit");
    const std::vector<std::string> P{"limit"};
    rd.only(l, P, {"tau_list", "s_ref", "t_ref"});
    LimitSpec ls;
    if (!l.contains("tau_list")) rd.fail(P, "limit needs 'tau_list'");
    ls.tau_list = rd.numbers(l.at("tau_list"), {"limit", "tau_list"});
    if (ls.tau_list.empty()) rd.fail({"limit", "tau_list"}, "tau_list is empty");
    for (std::size_t i = 0; i < ls.tau_list.size(); ++i) {
      if (ls.tau_list[i] <= 0.0) rd.fail({"limit", "tau_list"}, "tau values must be positive");
      if (i && ls.tau_list[i] <= ls.tau_list[i - 1]) rd.fail({"limit", "tau_list"}, "tau_list must increase");
    }
    ls.s_ref = rd.number(l, P, "s_ref", 1.0);
    ls.t_ref = rd.number(l, P, "t_ref", 0.0);
    if (ls.s_ref <= 0.0) rd.fail({"limit", "s_ref"}, "s_ref must be positive");
    sc.limit = ls;
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::io_error, "cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_scenario(ss.str());
}

// ---- stages ----------------------------------------------------------------

namespace {

std::vector<double> snapshot_list(const FlowSpec& f) {
  if (!f.snapshot_times.empty()) {
    auto t = f.snapshot_times;
    t.push_back(f.t0);
    t.push_back(f.t1);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
  }
  if (f.t1 == f.t0 || f.snapshots == 1) return {f.t0};
  std::vector<double> t;
  const double lo = std::min(f.t0, f.t1), hi = std::max(f.t0, f.t1);
  for (int k = 0; k < f.snapshots; ++k) t.push_back(lo + (hi - lo) * k / (f.snapshots - 1));
  return t;
}

WarpedProfile initial_profile(const ModelSpec& m) {
  const double pi = std::acos(-1.0);
  std::vector<double> a(m.M + 1, m.r0 * pi), b(m.M + 1);
  for (int i = 0; i <= m.M; ++i) {
    const double x = double(i) / m.M;
    const double s = std::sin(pi * x);
    b[i] = m.r0 * s * (1.0 + m.amplitude * s * s * std::cos(2.0 * pi * m.mode * x));
  }
  b.front() = 0.0;
  b.back() = 0.0;
  return make_warped_profile(m.n, std::move(a), std::move(b));
}

FlowTrajectory build_trajectory(const Scenario& sc, std::vector<std::string>& notes) {
  const auto times = snapshot_list(sc.flow);
  const ModelSpec& m = sc.model;
  if (m.kind == "exact_sphere") return exact_sphere_trajectory(m.n, m.T0, times, m.M);
  if (m.kind == "flat_torus") return static_torus_trajectory(make_flat_torus(m.n, m.sides, m.M), times);
  FlowControl ctrl;
  ctrl.dt = sc.flow.dt;
  ctrl.snapshot_times = times;
  const WarpedProfile p0 = initial_profile(m);
  if (sc.flow.t1 == sc.flow.t0) {
    FlowTrajectory tr;
    tr.n = m.n;
    tr.profiles.push_back(p0);
    return tr;
  }
  try {
    return integrate(p0, sc.flow.t0, sc.flow.t1, ctrl);
  } catch (const SingularityDetected& e) {
    notes.push_back(std::string("flow stopped early: ") + e.what());
    return e.partial();
  }
}

Point source_point(const Scenario& sc) {
  if (sc.kernel && !sc.kernel->source.empty()) return Point{sc.kernel->source};
  if (sc.model.kind == "flat_torus") return Point{std::vector<double>(sc.model.n, 0.0)};
  return Point::axis(0.0);
}

KernelField build_kernel(const Scenario& sc, const FlowTrajectory& tr) {
  const KernelSpec& ks = *sc.kernel;
  const KernelDirection dir = kernel_direction_from_string(ks.direction);
  const bool forward = dir == KernelDirection::forward;
  const double src_t = ks.source_time.value_or(forward ? sc.flow.t0 : std::max(sc.flow.t0, sc.flow.t1));
  std::vector<double> times;
  for (double tau : ks.tau) times.push_back(forward ? src_t + tau : src_t - tau);
  const Point x0 = source_point(sc);
  if (ks.solver == "oracle") return oracle_kernel_field(tr, dir, x0, src_t, times);
  KernelSolverOptions opts;
  opts.eps = ks.eps;
  opts.dt_max = ks.dt_max;
  opts.rel_dt = ks.rel_dt;
  return forward ? solve_forward_kernel(tr, x0, src_t, times, opts) : solve_conjugate_kernel(tr, x0, src_t, times, opts);
}

struct CheckOutcome {
  CheckReport report;
  std::optional<EntropyTrace> trace;
};

CheckReport backward_mass_report(const KernelField& kf, double tol) {
  CheckReport r;
  r.name = "backward_mass";
  r.control = kf.kind == ModelKind::flat_torus;
  double worst = 0.0, lo = 1e300, hi = -1e300;
  r.columns = {"t", "backward_mass"};
  for (const auto& s : kf.snapshots) {
    worst = std::max(worst, std::abs(s.backward_mass - 1.0));
    lo = std::min(lo, s.backward_mass);
    hi = std::max(hi, s.backward_mass);
    r.rows.push_back({s.t, s.backward_mass});
  }
  r.samples = kf.snapshots.size();
  r.ratio_min = lo;
  r.ratio_max = hi;
  r.set_constant("max_deviation", worst);
  r.margin = tol - worst;
  r.pass = r.samples > 0 && r.margin >= 0.0;
  return r;
}

CheckReport forward_mass_report(const KernelField& kf, const FlowTrajectory& tr, double tol) {
  require(tr.exact, ErrorKind::invalid_state, "forward_mass compares against the exact sphere");
  CheckReport r;
  r.name = "forward_mass";
  r.columns = {"t", "forward_mass", "expected"};
  double worst = 0.0, lo = 1e300, hi = -1e300;
  for (const auto& s : kf.snapshots) {
    const double l = std::min(s.t, kf.source_time), t = std::max(s.t, kf.source_time);
    const double expected = std::pow(tr.exact_radius2(t) / tr.exact_radius2(l), 0.5 * kf.n);
    const double ratio = s.forward_mass / expected;
    worst = std::max(worst, std::abs(s.forward_mass - expected));
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    r.rows.push_back({s.t, s.forward_mass, expected});
  }
  r.samples = kf.snapshots.size();
  r.ratio_min = lo;
  r.ratio_max = hi;
  r.set_constant("max_deviation", worst);
  r.margin = tol - worst;
  r.pass = r.samples > 0 && r.margin >= 0.0;
  return r;
}

CheckOutcome run_check(const CheckSpec& c, const Scenario& sc, const FlowTrajectory& tr, const KernelField* kf) {
  CheckOutcome out;
  CheckReport& r = out.report;
  const double t_prof = c.get("t", sc.flow.t0);
  if (c.type == "on_diag_upper") {
    UpperOptions o;
    o.cap = c.get("cap", o.cap);
    o.min_samples = static_cast<std::size_t>(c.get("min_samples", double(o.min_samples)));
    r = on_diag_upper_check(*kf, o);
  } else if (c.type == "on_diag_lower") {
    LowerOptions o;
    o.floor = c.get("floor", o.floor);
    o.a1_cap = c.get("a1_cap", o.a1_cap);
    o.min_samples = static_cast<std::size_t>(c.get("min_samples", double(o.min_samples)));
    r = on_diag_lower_check(*kf, tr, o);
  } else if (c.type == "gaussian_envelope") {
    GaussianOptions o;
    o.c_lo = c.get("c_lo", o.c_lo);
    o.c_hi = c.get("c_hi", o.c_hi);
    o.cn_cap = c.get("cn_cap", o.cn_cap);
    o.eta = c.get("eta", o.eta);
    o.rel_floor = c.get("rel_floor", o.rel_floor);
    r = gaussian_envelope_check(*kf, tr, o);
  } else if (c.type == "mass_bracket") {
    r = mass_bracket_check(*kf, tr, c.get("tol", 1e-4));
  } else if (c.type == "backward_mass") {
    r = backward_mass_report(*kf, c.get("tol", 1e-6));
  } else if (c.type == "forward_mass") {
    r = forward_mass_report(*kf, tr, c.get("tol", 1e-4));
  } else if (c.type == "mean_value") {
    MeanValueOptions o;
    o.cap = c.get("cap", o.cap);
    const Point x = c.vec.count("x") ? Point{c.vec.at("x")} : source_point(sc);
    r = mean_value_check(*kf, tr, x, c.num.at("tau"), c.num.at("r"), o);
  } else if (c.type == "entropy") {
    const EntropyTrace et = w_monotonicity(tr, *kf, c.vec.at("s"));
    const double tol = c.get("tol", 1e-8);
    r.name = "entropy";
    r.control = kf->kind == ModelKind::flat_torus;
    r.samples = et.s_grid.size();
    r.ratio_min = *std::min_element(et.W_values.begin(), et.W_values.end());
    r.ratio_max = *std::max_element(et.W_values.begin(), et.W_values.end());
    r.set_constant("W_first", et.W_values.front());
    r.set_constant("W_last", et.W_values.back());
    r.set_constant("max_increase", et.max_increase);
    r.set_constant("derivative_defect", et.derivative_defect);
    r.margin = std::min(tol - et.max_increase, 1.0 - et.derivative_defect);
    r.pass = et.monotone(tol) && et.derivative_match();
    r.add_note(et.notes);
    out.trace = et;
  } else if (c.type == "lambda0") {
    const WarpedProfile p = tr.profile_at(t_prof);
    const double lam = lambda0(p);
    r.name = "lambda0";
    r.control = p.is_torus();
    r.samples = 1;
    r.ratio_min = r.ratio_max = lam;
    r.set_constant("lambda0", lam);
    if (const auto e = c.maybe("expect")) {
      const double tol = c.get("tol", 1e-6);
      r.set_constant("expected", *e);
      r.margin = tol - std::abs(lam - *e);
      r.pass = r.margin >= 0.0;
    } else {
      r.margin = lam;
      r.pass = std::isfinite(lam);
    }
  } else if (c.type == "log_sobolev") {
    const WarpedProfile p = tr.profile_at(t_prof);
    LogSobolevOptions o;
    o.eps = c.maybe("eps");
    o.alpha = c.maybe("alpha");
    o.beta = c.maybe("beta");
    o.eps_min = c.get("eps_min", o.eps_min);
    o.eps_max = c.get("eps_max", o.eps_max);
    o.sweep = static_cast<int>(c.get("sweep", o.sweep));
    o.tol = c.get("tol", o.tol);
    const auto corpus = make_trial_corpus(p, sc.seed, static_cast<int>(c.get("random_count", 16)));
    r = log_sobolev_check(p, t_prof, corpus, o);
  } else if (c.type == "sobolev") {
    const WarpedProfile p = tr.profile_at(t_prof);
    SobolevOptions o;
    o.A = c.maybe("A");
    o.B = c.get("B", 0.0);
    const auto corpus = make_trial_corpus(p, sc.seed, static_cast<int>(c.get("random_count", 16)));
    r = sobolev_check(p, corpus, o);
  } else {
    throw Error(ErrorKind::invalid_parameter, "unknown check type " + c.type);
  }
  r.name = c.name;
  return out;
}

CheckReport limit_as_check(const LimitReport& L) {
  CheckReport r;
  r.name = "backward_limit";
  r.control = L.control;
  r.samples = L.residual_seq.size();
  r.pass = L.verdict;
  r.notes = L.notes;
  if (!L.residual_seq.empty()) {
    const double ratio = L.residual_seq.back() / L.residual_seq.front();
    r.ratio_min = *std::min_element(L.residual_seq.begin(), L.residual_seq.end());
    r.ratio_max = *std::max_element(L.residual_seq.begin(), L.residual_seq.end());
    r.set_constant("residual_ratio", ratio);
    r.set_constant("W_last", L.W_seq.back());
    r.set_constant("W_gap_last", L.W_gap_seq.back());
    r.set_constant("f_variance_last", L.f_variance_seq.back());
    r.set_constant("limit_max_R", L.limit_max_R);
    r.margin = 0.1 - ratio;
  }
  return r;
}

}  // namespace

RunResult run_scenario(const Scenario& sc, Stage stage, const std::string& out_dir, std::ostream& log) {
  RunResult res;
  res.out_dir = out_dir;
  const fs::path out(out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  require(!ec, ErrorKind::io_error, "cannot create " + out_dir);

  auto fail_stage = [&](const std::string& what) {
    res.errors.push_back(what);
    log << "error: " << what << '\n';
    res.exit_code = 1;
  };

  std::vector<std::string> notes;
  FlowTrajectory tr;
  try {
    tr = build_trajectory(sc, notes);
  } catch (const Error& e) {
    fail_stage(std::string("flow: ") + e.what());
    return res;
  }
  for (const auto& n : notes) log << "note: " << n << '\n';
  if (stage != Stage::limit) {
    write_trajectory((out / "trajectory").string(), tr);
    log << "flow: " << tr.profiles.size() << " snapshots -> " << (out / "trajectory").string() << '\n';
  }

  std::optional<KernelField> kf;
  const bool want_kernel = stage == Stage::kernel || stage == Stage::check || stage == Stage::run;
  if (want_kernel && sc.kernel) {
    try {
      kf = build_kernel(sc, tr);
      write_kernel_csv((out / "kernel.csv").string(), *kf);
      write_kernel_manifest((out / "kernel.json").string(), *kf);
      log << "kernel: " << kf->snapshots.size() << " slices (" << kf->scheme << ")\n";
    } catch (const Error& e) {
      fail_stage(std::string("kernel: ") + e.what());
    }
  }

  const fs::path rdir = out / "reports";
  auto store = [&](const CheckReport& r) {
    fs::create_directories(rdir, ec);
    const fs::path jp = rdir / (r.name + ".json");
    write_report_json(jp.string(), r);
    if (!r.rows.empty()) {
      std::ofstream os(rdir / (r.name + ".csv"), std::ios::binary);
      write_report_rows_csv(os, r);
    }
    res.reports.push_back(r);
    res.report_paths.push_back(jp.string());
    log << (r.pass ? "PASS " : "FAIL ") << r.name << " margin=" << detail::format_double(r.margin)
        << (r.control ? " (control)" : "") << '\n';
    if (!r.pass && !r.control) res.exit_code = 1;
  };

  if ((stage == Stage::check || stage == Stage::run) && !sc.checks.empty()) {
    std::vector<std::optional<CheckOutcome>> outcomes(sc.checks.size());
    std::vector<std::string> errs(sc.checks.size());
    const bool have_kernel = kf.has_value();
    parallel_for(sc.checks.size(), [&](std::size_t i) {
      const CheckSpec& c = sc.checks[i];
      if (check_table().at(c.type).needs_kernel && !have_kernel) {
        errs[i] = "check " + c.name + ": no kernel available";
        return;
      }
      try {
        outcomes[i] = run_check(c, sc, tr, have_kernel ? &*kf : nullptr);
      } catch (const Error& e) {
        errs[i] = "check " + c.name + ": " + e.what();
      }
    });
    for (std::size_t i = 0; i < sc.checks.size(); ++i) {
      if (!errs[i].empty()) {
        fail_stage(errs[i]);
        continue;
      }
      store(outcomes[i]->report);
      if (outcomes[i]->trace) write_entropy_trace_csv((out / (outcomes[i]->report.name + "_trace.csv")).string(), *outcomes[i]->trace);
    }
  }

  if ((stage == Stage::limit || stage == Stage::run) && sc.limit) {
    try {
      LimitReport L = backward_limit_experiment(tr, sc.limit->tau_list, sc.limit->s_ref, {}, sc.limit->t_ref);
      write_limit_report_json((out / "limit_report.json").string(), L);
      log << "limit: verdict " << (L.verdict ? "pass" : "fail") << ", nonflat " << (L.nonflat ? "true" : "false")
          << (L.notes.empty() ? "" : " (" + L.notes + ")") << '\n';
      store(limit_as_check(L));
      res.limit = std::move(L);
    } catch (const Error& e) {
      fail_stage(std::string("limit: ") + e.what());
    }
  }

  if (res.exit_code != 0 && !res.report_paths.empty()) {
    log << "reports:\n";
    for (const auto& p : res.report_paths) log << "  " << p << '\n';
  }
  return res;
}

int write_report_table(const std::string& out_dir, const std::string& format, std::ostream& out) {
  require(format == "csv" || format == "json", ErrorKind::invalid_parameter, "format is csv or json");
  const fs::path rdir = fs::path(out_dir) / "reports";
  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_directory(rdir, ec))
    for (const auto& e : fs::directory_iterator(rdir))
      if (e.path().extension() == ".json") files.push_back(e.path());
  if (files.empty()) return 1;
  std::sort(files.begin(), files.end());
  std::vector<CheckReport> reps;
  for (const auto& f : files) reps.push_back(read_report_json(f.string()));
  std::stable_sort(reps.begin(), reps.end(), [](const CheckReport& a, const CheckReport& b) {
    return !a.pass && b.pass;
  });
  if (format == "csv") {
    out << "name,pass,control,margin,fitted_constants\n";
    for (const auto& r : reps) {
      std::string fc;
      for (const auto& [k, v] : r.fitted_constants) fc += (fc.empty() ? "" : ";") + k + "=" + detail::format_double(v);
      out << r.name << ',' << (r.pass ? "true" : "false") << ',' << (r.control ? "true" : "false") << ','
          << detail::format_double(r.margin) << ',' << fc << '\n';
    }
  } else {
    ojson arr = ojson::array();
    for (const auto& r : reps) {
      ojson row;
      row["name"] = r.name;
      row["pass"] = r.pass;
      row["control"] = r.control;
      row["margin"] = r.margin;
      ojson fc = ojson::object();
      for (const auto& [k, v] : r.fitted_constants) fc[k] = v;
      row["fitted_constants"] = fc;
      arr.push_back(row);
    }
    out << arr.dump(2) << '\n';
  }
  return 0;
}

// ---- command line ----------------------------------------------------------

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"heatlab: Ricci flow, heat kernels and entropy experiments"};
  app.require_subcommand(1);
  std::string scenario_path, out_dir, format = "csv";
  std::optional<std::uint64_t> seed;

  auto add_stage = [&](const std::string& name, const std::string& help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("scenario,--scenario", scenario_path, "Scenario file");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--seed", seed, "Override the scenario seed");
    return sub;
  };
  auto* run = add_stage("run", "Flow, kernel, checks and limit experiment");
  auto* flow = add_stage("flow", "Evolve the model and store snapshots");
  auto* kernel = add_stage("kernel", "Flow and kernel solve");
  auto* check = add_stage("check", "Flow, kernel and checks");
  auto* limit = add_stage("limit", "Backward-limit experiment only");
  auto* report = app.add_subcommand("report", "Summarize the reports of an output directory");
  report->add_option("dir,--out", out_dir, "Output directory");
  report->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (report->parsed()) {
      if (out_dir.empty()) {
        err << "usage error: report needs an output directory\n";
        return 2;
      }
      const int rc = write_report_table(out_dir, format, out);
      if (rc != 0) err << "no reports in " << out_dir << '\n';
      return rc;
    }
    if (scenario_path.empty()) {
      err << "usage error: a scenario file is required\n";
      return 2;
    }
    Scenario sc;
    try {
      sc = load_scenario(scenario_path);
    } catch (const ScenarioError& e) {
      err << scenario_path << ": " << e.what() << '\n';
      return 2;
    } catch (const Error& e) {
      err << e.what() << '\n';
      return 2;
    }
    if (seed) sc.seed = *seed;
    if (out_dir.empty()) out_dir = sc.output.empty() ? (fs::path("heatlab_out") / sc.name).string() : sc.output;
    Stage stage = Stage::run;
    if (flow->parsed()) stage = Stage::flow;
    if (kernel->parsed()) stage = Stage::kernel;
    if (check->parsed()) stage = Stage::check;
    if (limit->parsed()) stage = Stage::limit;
    (void)run;
    return run_scenario(sc, stage, out_dir, out).exit_code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace heatlab
