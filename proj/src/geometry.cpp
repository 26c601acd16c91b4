#include "heatlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "heatlab/error.hpp"
#include "numerics.hpp"

namespace heatlab {

using detail::GhostExtended;

std::string to_string(ModelKind kind) {
  return kind == ModelKind::flat_torus ? "flat_torus" : "warped_sphere";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "flat_torus") return ModelKind::flat_torus;
  if (s == "warped_sphere") return ModelKind::warped_sphere;
  throw Error(ErrorKind::invalid_parameter, "unknown model kind '" + s + "'");
}

double sphere_area(int k) {
  const double half = 0.5 * (k + 1);
  return 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
}

namespace {

std::vector<double> uniform_grid(int M) {
  std::vector<double> x(static_cast<std::size_t>(M) + 1);
  for (int i = 0; i <= M; ++i) x[i] = static_cast<double>(i) / M;
  return x;
}

}  // namespace

WarpedProfile make_round_sphere(int n, double r, int M, double t) {
  require(n >= 2, ErrorKind::invalid_parameter, "round sphere needs n >= 2");
  require(r > 0.0 && std::isfinite(r), ErrorKind::invalid_parameter, "radius must be positive");
  require(M >= 16, ErrorKind::invalid_parameter, "grid needs M >= 16");
  WarpedProfile p;
  p.n = n;
  p.M = M;
  p.t = t;
  p.x = uniform_grid(M);
  p.a.assign(p.x.size(), std::numbers::pi * r);
  p.b.resize(p.x.size());
  for (std::size_t i = 0; i < p.x.size(); ++i) p.b[i] = r * std::sin(std::numbers::pi * p.x[i]);
  p.b.front() = 0.0;
  p.b.back() = 0.0;
  return p;
}

WarpedProfile make_warped_profile(int n, std::vector<double> a, std::vector<double> b, double t) {
  require(n >= 2, ErrorKind::invalid_parameter, "warped profile needs n >= 2");
  require(a.size() == b.size() && a.size() >= 17, ErrorKind::invalid_parameter,
          "a and b must share a grid of at least 17 nodes");
  WarpedProfile p;
  p.n = n;
  p.M = static_cast<int>(a.size()) - 1;
  p.t = t;
  p.x = uniform_grid(p.M);
  p.a = std::move(a);
  p.b = std::move(b);
  validate(p);
  return p;
}

WarpedProfile make_flat_torus(int n, std::vector<double> sides, int M, double t) {
  require(n >= 1, ErrorKind::invalid_parameter, "torus needs n >= 1");
  require(static_cast<int>(sides.size()) == n, ErrorKind::invalid_parameter, "need one side length per dimension");
  for (double L : sides)
    require(L > 0.0 && std::isfinite(L), ErrorKind::invalid_parameter, "torus sides must be positive");
  require(M >= 4, ErrorKind::invalid_parameter, "torus axes need M >= 4 nodes");
  WarpedProfile p;
  p.n = n;
  p.kind = ModelKind::flat_torus;
  p.M = M;
  p.t = t;
  p.sides = std::move(sides);
  p.x.resize(static_cast<std::size_t>(M));
  for (int i = 0; i < M; ++i) p.x[i] = static_cast<double>(i) / M;
  return p;
}

double pole_regularity_defect(const WarpedProfile& p) {
  if (p.is_torus()) return 0.0;
  const GhostExtended b(p.b, -1);
  const double h = p.dx();
  const auto M = static_cast<std::ptrdiff_t>(p.M);
  const double bs0 = detail::d1_at(b, 0, h) / p.a.front();
  const double bs1 = detail::d1_at(b, M, h) / p.a.back();
  return std::max(std::abs(bs0 - 1.0), std::abs(bs1 + 1.0));
}

void validate(const WarpedProfile& p, double regularity_tol) {
  if (p.is_torus()) {
    require(static_cast<int>(p.sides.size()) == p.n, ErrorKind::invalid_parameter, "torus side count mismatch");
    return;
  }
  require(p.M >= 16 && p.a.size() == static_cast<std::size_t>(p.M) + 1 && p.b.size() == p.a.size(),
          ErrorKind::invalid_parameter, "profile arrays do not match the grid");
  for (double v : p.a) require(v > 0.0 && std::isfinite(v), ErrorKind::degenerate_metric, "a must be positive");
  for (std::size_t i = 1; i + 1 < p.b.size(); ++i)
    require(p.b[i] > 0.0 && std::isfinite(p.b[i]), ErrorKind::degenerate_metric,
            "b must be positive at interior node " + std::to_string(i));
  require(std::abs(p.b.front()) < 1e-12 && std::abs(p.b.back()) < 1e-12, ErrorKind::degenerate_metric,
          "b must vanish at the poles");
  const double defect = pole_regularity_defect(p);
  require(defect <= regularity_tol, ErrorKind::degenerate_metric,
          "pole regularity defect " + detail::format_double(defect));
}

CurvatureField curvature(const WarpedProfile& p, const CurvatureOptions& opts) {
  CurvatureField c;
  if (p.is_torus()) {
    const std::size_t N = p.nodes();
    c.R.assign(N, 0.0);
    c.ric_rad = c.ric_sph = c.rm_norm = c.k_rad = c.k_sph = c.R;
    return c;
  }
  const std::size_t N = p.nodes();
  for (std::size_t i = 1; i + 1 < N; ++i)
    require(p.b[i] > 0.0, ErrorKind::degenerate_metric, "b <= 0 at interior node " + std::to_string(i));
  const GhostExtended a(p.a, +1);
  const GhostExtended b(p.b, -1);
  const double h = p.dx();
  std::vector<double> k_rad(N), k_sph(N);
  for (std::size_t i = 1; i + 1 < N; ++i) {
    const auto j = static_cast<std::ptrdiff_t>(i);
    const double ax = detail::d1_at(a, j, h);
    const double bx = detail::d1_at(b, j, h);
    const double bxx = detail::d2_at(b, j, h);
    const double ai = p.a[i];
    const double bs = bx / ai;
    const double bss = (bxx - ax / ai * bx) / (ai * ai);
    k_rad[i] = -bss / p.b[i];
    k_sph[i] = (1.0 - bs * bs) / (p.b[i] * p.b[i]);
  }
  const int layers = std::clamp(opts.pole_layers, 1, p.M / 4);
  detail::extrapolate_even_at_poles(k_rad, layers);
  detail::extrapolate_even_at_poles(k_sph, layers);

  const int n = p.n;
  c.R.resize(N);
  c.ric_rad.resize(N);
  c.ric_sph.resize(N);
  c.rm_norm.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    c.ric_rad[i] = (n - 1) * k_rad[i];
    c.ric_sph[i] = k_rad[i] + (n - 2) * k_sph[i];
    c.R[i] = 2.0 * (n - 1) * k_rad[i] + double(n - 1) * (n - 2) * k_sph[i];
    c.rm_norm[i] = n >= 3 ? std::max(std::abs(k_rad[i]), std::abs(k_sph[i])) : std::abs(k_rad[i]);
  }
  c.k_rad = std::move(k_rad);
  c.k_sph = std::move(k_sph);
  return c;
}

double pole_scalar_curvature(const WarpedProfile& p) {
  if (p.is_torus()) return 0.0;
  return curvature(p).R.front();
}

RadialDerivatives radial_derivatives(const WarpedProfile& p, std::span<const double> u) {
  require(!p.is_torus(), ErrorKind::invalid_parameter, "radial derivatives need a warped profile");
  const std::size_t N = p.nodes();
  require(u.size() == N, ErrorKind::invalid_parameter, "field size does not match the grid");
  const GhostExtended a(p.a, +1);
  const GhostExtended f(u, +1);
  const double h = p.dx();
  RadialDerivatives d;
  d.d1.resize(N);
  d.d2.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    const auto j = static_cast<std::ptrdiff_t>(i);
    const double ai = p.a[i];
    const double fx = detail::d1_at(f, j, h);
    const double fxx = detail::d2_at(f, j, h);
    const double ax = detail::d1_at(a, j, h);
    d.d1[i] = fx / ai;
    d.d2[i] = (fxx - ax / ai * fx) / (ai * ai);
  }
  return d;
}

std::vector<double> arclength_from_pole(const WarpedProfile& p) {
  require(!p.is_torus(), ErrorKind::invalid_parameter, "arclength needs a warped profile");
  std::vector<double> s(p.nodes(), 0.0);
  const double h = p.dx();
  for (std::size_t i = 1; i < s.size(); ++i) s[i] = s[i - 1] + 0.5 * (p.a[i - 1] + p.a[i]) * h;
  return s;
}

double total_arclength(const WarpedProfile& p) { return arclength_from_pole(p).back(); }

namespace {

// Arclength from x = 0 to an arbitrary coordinate, linear in a within a cell.
double arclength_to(const WarpedProfile& p, std::span<const double> s, double x) {
  require(x >= -1e-12 && x <= 1.0 + 1e-12, ErrorKind::invalid_parameter, "axial coordinate outside [0,1]");
  x = std::clamp(x, 0.0, 1.0);
  const double h = p.dx();
  const auto i = std::min(static_cast<std::size_t>(x / h), p.nodes() - 2);
  const double w = (x - p.x[i]) / h;
  const double a_mid = p.a[i] + w * (p.a[i + 1] - p.a[i]);
  return s[i] + 0.5 * (p.a[i] + a_mid) * w * h;
}

double periodic_gap(double d, double L) {
  d = std::fmod(std::abs(d), L);
  return std::min(d, L - d);
}

}  // namespace

double geodesic_distance(const WarpedProfile& p, const Point& x, const Point& y) {
  if (p.is_torus()) {
    require(static_cast<int>(x.coord.size()) == p.n && static_cast<int>(y.coord.size()) == p.n,
            ErrorKind::invalid_parameter, "torus points need n coordinates");
    double d2 = 0.0;
    for (int d = 0; d < p.n; ++d) {
      const double g = periodic_gap(x.coord[d] - y.coord[d], p.sides[d]);
      d2 += g * g;
    }
    return std::sqrt(d2);
  }
  require(x.coord.size() == 1 && y.coord.size() == 1, ErrorKind::invalid_parameter,
          "warped points carry one axial coordinate");
  const auto s = arclength_from_pole(p);
  return std::abs(arclength_to(p, s, y.coord[0]) - arclength_to(p, s, x.coord[0]));
}

std::vector<double> measure_weights(const WarpedProfile& p) {
  require(!p.is_torus(), ErrorKind::invalid_parameter, "use torus_cell_volume for tori");
  const std::size_t N = p.nodes();
  const int n = p.n;
  const double h = p.dx();
  const double omega = sphere_area(n - 1);
  std::vector<double> w(N);
  for (std::size_t i = 1; i + 1 < N; ++i) w[i] = omega * p.a[i] * std::pow(p.b[i], n - 1) * h;
  const double b_half0 = 0.5 * p.b[1];
  const double b_half1 = 0.5 * p.b[N - 2];
  w[0] = omega * p.a[0] * std::pow(b_half0, n - 1) * (0.5 * h) / n;
  w[N - 1] = omega * p.a[N - 1] * std::pow(b_half1, n - 1) * (0.5 * h) / n;
  return w;
}

std::vector<double> quadrature_weights(const WarpedProfile& p) {
  auto w = measure_weights(p);
  const std::size_t N = w.size();
  if (p.n == 2) {
    // The integrand a b u is odd across a pole, so the trapezoid leaves
    // -h^2/12 f'(0) with f'(0) = a b_x u at the pole.
    const GhostExtended b(p.b, -1);
    const double h = p.dx();
    const auto M = static_cast<std::ptrdiff_t>(p.M);
    const double omega = sphere_area(1);
    w[0] = omega * p.a[0] * detail::d1_at(b, 0, h) * h * h / 12.0;
    w[N - 1] = -omega * p.a[N - 1] * detail::d1_at(b, M, h) * h * h / 12.0;
  } else {
    // a b^{n-1} u is even or vanishes to order n-1 at the poles.
    w[0] = 0.0;
    w[N - 1] = 0.0;
  }
  return w;
}

double torus_cell_volume(const WarpedProfile& p) {
  require(p.is_torus(), ErrorKind::invalid_parameter, "cell volume is defined for tori");
  double v = 1.0;
  for (int d = 0; d < p.n; ++d) v *= p.axis_spacing(d);
  return v;
}

double total_volume(const WarpedProfile& p) {
  if (p.is_torus()) {
    double v = 1.0;
    for (double L : p.sides) v *= L;
    return v;
  }
  const auto w = quadrature_weights(p);
  double v = 0.0;
  for (double wi : w) v += wi;
  return v;
}

namespace {

double unit_ball_volume(int n) { return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0); }

// Volume of {y : |y - center|_torus < rho} by midpoint quadrature on a product
// grid; only used for radii beyond half the shortest side.
double torus_ball_volume_quadrature(const WarpedProfile& p, double rho) {
  const int per_axis = p.n <= 2 ? 400 : (p.n == 3 ? 120 : 24);
  std::vector<int> idx(static_cast<std::size_t>(p.n), 0);
  double cell = 1.0;
  for (int d = 0; d < p.n; ++d) cell *= p.sides[d] / per_axis;
  double count = 0.0;
  const double rho2 = rho * rho;
  while (true) {
    double d2 = 0.0;
    for (int d = 0; d < p.n; ++d) {
      const double y = (idx[d] + 0.5) * p.sides[d] / per_axis;
      const double g = std::min(y, p.sides[d] - y);
      d2 += g * g;
    }
    if (d2 < rho2) count += 1.0;
    int d = 0;
    while (d < p.n && ++idx[d] == per_axis) idx[d++] = 0;
    if (d == p.n) break;
  }
  return count * cell;
}

}  // namespace

double ball_volume(const WarpedProfile& p, const Point& center, double rho) {
  require(rho >= 0.0, ErrorKind::invalid_parameter, "ball radius must be nonnegative");
  if (p.is_torus()) {
    double min_side = p.sides.front();
    double diag2 = 0.0;
    for (double L : p.sides) {
      min_side = std::min(min_side, L);
      diag2 += 0.25 * L * L;
    }
    if (rho <= 0.5 * min_side) return unit_ball_volume(p.n) * std::pow(rho, p.n);
    if (rho * rho >= diag2) return total_volume(p);
    return torus_ball_volume_quadrature(p, rho);
  }
  require(center.coord.size() == 1, ErrorKind::invalid_parameter, "warped points carry one axial coordinate");
  const double xc = center.coord[0];
  const bool north = std::abs(xc) < 1e-12;
  const bool south = std::abs(xc - 1.0) < 1e-12;
  require(north || south, ErrorKind::invalid_parameter, "warped balls must be centered at a pole");

  // Integrand F(x) = |S^{n-1}| a b^{n-1}, trapezoid with a partial last cell.
  const std::size_t N = p.nodes();
  const double omega = sphere_area(p.n - 1);
  const double h = p.dx();
  std::vector<double> F(N), s(N, 0.0);
  for (std::size_t k = 0; k < N; ++k) {
    const std::size_t i = north ? k : N - 1 - k;
    F[k] = omega * p.a[i] * std::pow(p.b[i], p.n - 1);
    if (k > 0) {
      const std::size_t ip = north ? k - 1 : N - k;
      s[k] = s[k - 1] + 0.5 * (p.a[ip] + p.a[i]) * h;
    }
  }
  double vol = 0.0;
  for (std::size_t k = 1; k < N; ++k) {
    if (rho >= s[k]) {
      vol += 0.5 * (F[k - 1] + F[k]) * h;
      continue;
    }
    const double w = (rho - s[k - 1]) / (s[k] - s[k - 1]);
    const double F_end = F[k - 1] + w * (F[k] - F[k - 1]);
    vol += 0.5 * (F[k - 1] + F_end) * w * h;
    break;
  }
  return vol;
}

double injectivity_scale(const WarpedProfile& p) {
  if (p.is_torus()) return 0.5 * *std::min_element(p.sides.begin(), p.sides.end());
  return total_arclength(p);
}

void write_profile_csv(std::ostream& os, const WarpedProfile& p) {
  using detail::format_double;
  if (p.is_torus()) {
    os << "t,index,side\n";
    for (int d = 0; d < p.n; ++d) os << format_double(p.t) << ',' << d << ',' << format_double(p.sides[d]) << '\n';
    return;
  }
  const bool g = !p.gauge.empty();
  os << (g ? "t,x,a,b,gauge\n" : "t,x,a,b\n");
  for (std::size_t i = 0; i < p.nodes(); ++i) {
    os << format_double(p.t) << ',' << format_double(p.x[i]) << ',' << format_double(p.a[i]) << ','
       << format_double(p.b[i]);
    if (g) os << ',' << format_double(p.gauge[i]);
    os << '\n';
  }
}

void write_profile_csv(const std::string& path, const WarpedProfile& p) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::io_error, "cannot write " + path);
  write_profile_csv(os, p);
}

WarpedProfile read_profile_csv(std::istream& is, int n, ModelKind kind, int torus_M) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), ErrorKind::parse_error, "empty profile file");
  const std::string expected = kind == ModelKind::flat_torus ? "t,index,side" : "t,x,a,b";
  const bool gauged = kind != ModelKind::flat_torus && line == "t,x,a,b,gauge";
  require(line == expected || gauged, ErrorKind::parse_error, "unexpected header '" + line + "'");
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorKind::parse_error, "bad number '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorKind::parse_error, "profile file has no rows");
  if (kind == ModelKind::flat_torus) {
    std::vector<double> sides;
    for (const auto& r : rows) {
      require(r.size() == 3, ErrorKind::parse_error, "torus rows need 3 columns");
      sides.push_back(r[2]);
    }
    require(static_cast<int>(sides.size()) == n, ErrorKind::parse_error, "torus side count mismatch");
    return make_flat_torus(n, std::move(sides), torus_M, rows.front()[0]);
  }
  WarpedProfile p;
  p.n = n;
  p.t = rows.front()[0];
  for (const auto& r : rows) {
    require(r.size() == (gauged ? 5u : 4u), ErrorKind::parse_error,
            gauged ? "profile rows need 5 columns" : "profile rows need 4 columns");
    p.x.push_back(r[1]);
    p.a.push_back(r[2]);
    p.b.push_back(r[3]);
    if (gauged) p.gauge.push_back(r[4]);
  }
  p.M = static_cast<int>(p.x.size()) - 1;
  validate(p);
  return p;
}

WarpedProfile read_profile_csv(const std::string& path, int n, ModelKind kind, int torus_M) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorKind::io_error, "cannot read " + path);
  return read_profile_csv(is, n, kind, torus_M);
}

}  // namespace heatlab
