#pragma once

// Reduced model metrics.
//
// A warped sphere is g = a(x)^2 dx^2 + b(x)^2 g_{S^{n-1}} on x in [0,1] with
// poles at x = 0 and x = 1 (b vanishes there). A flat torus is the product of
// n circles of lengths L_1..L_n; it stands in for Euclidean space when the
// data of interest is concentrated far from the period cell boundary.
//
// Grids: warped profiles carry M+1 uniform nodes including both poles. Torus
// axes carry M periodic nodes x_i = i/M (no duplicated end node).

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace heatlab {

enum class ModelKind { warped_sphere, flat_torus };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

// A location on a model. Warped spheres use one axial coordinate x in [0,1];
// tori use n physical coordinates (length units).
struct Point {
  std::vector<double> coord;

  static Point axis(double x) { return Point{{x}}; }
};

struct WarpedProfile {
  int n = 2;
  ModelKind kind = ModelKind::warped_sphere;
  int M = 0;
  double t = 0.0;
  std::vector<double> x;
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> sides;
  // x-component of the DeTurck field when the slice comes from a
  // Ricci-DeTurck integration: a point fixed under the flow drifts in x with
  // velocity -gauge. Empty for comoving slices.
  std::vector<double> gauge;

  bool is_torus() const { return kind == ModelKind::flat_torus; }
  std::size_t nodes() const { return x.size(); }
  double dx() const { return 1.0 / M; }
  // Physical spacing along torus axis d.
  double axis_spacing(int d) const { return sides.at(d) / M; }
};

struct CurvatureField {
  std::vector<double> R;
  std::vector<double> ric_rad;
  std::vector<double> ric_sph;
  std::vector<double> rm_norm;
  // Sectional curvatures of the radial-sphere and sphere-sphere planes.
  std::vector<double> k_rad;
  std::vector<double> k_sph;
};

struct CurvatureOptions {
  // Nodes at each pole whose singular quotients (b_ss/b, (1-b_s^2)/b^2) are
  // replaced by an even polynomial extrapolation from the next three nodes.
  int pole_layers = 3;
};

// Arclength derivatives of a radial function that is even across both poles.
struct RadialDerivatives {
  std::vector<double> d1;  // u_s
  std::vector<double> d2;  // u_ss
};

// |S^k|, the area of the unit k-sphere.
double sphere_area(int k);

WarpedProfile make_round_sphere(int n, double r, int M, double t = 0.0);
WarpedProfile make_warped_profile(int n, std::vector<double> a, std::vector<double> b, double t = 0.0);
WarpedProfile make_flat_torus(int n, std::vector<double> sides, int M, double t = 0.0);

// Throws degenerate_metric / invalid_parameter when invariants fail.
void validate(const WarpedProfile& p, double regularity_tol = 5e-2);

// max(|b_s(0) - 1|, |b_s(1) + 1|) using the parity-extended stencils.
double pole_regularity_defect(const WarpedProfile& p);

CurvatureField curvature(const WarpedProfile& p, const CurvatureOptions& opts = {});

// Scalar curvature at the pole x = 0 (warped) or 0 (torus).
double pole_scalar_curvature(const WarpedProfile& p);

RadialDerivatives radial_derivatives(const WarpedProfile& p, std::span<const double> u);

// Arclength from x = 0 to each node, by trapezoid on a.
std::vector<double> arclength_from_pole(const WarpedProfile& p);
double total_arclength(const WarpedProfile& p);

double geodesic_distance(const WarpedProfile& p, const Point& x, const Point& y);

// Riemannian measure of each warped node (unit |S^{n-1}| factor included).
// Interior nodes carry a b^{n-1} dx; the pole nodes carry the half cell of the
// tangent cone, so the mass matrix stays positive.
std::vector<double> measure_weights(const WarpedProfile& p);

// Node weights for integrals of smooth radial fields sampled on the grid:
// the trapezoid rule with its endpoint correction at the poles (exact to
// fourth order). Use measure_weights for finite-volume data instead.
std::vector<double> quadrature_weights(const WarpedProfile& p);

// Volume of one cell of a torus product grid.
double torus_cell_volume(const WarpedProfile& p);

double total_volume(const WarpedProfile& p);

// |B(center, rho)|. Warped centers must be poles.
double ball_volume(const WarpedProfile& p, const Point& center, double rho);

// Width of the domain measured in arclength: the axis length for warped
// spheres, half the shortest side for a torus.
double injectivity_scale(const WarpedProfile& p);

void write_profile_csv(std::ostream& os, const WarpedProfile& p);
void write_profile_csv(const std::string& path, const WarpedProfile& p);
// Torus snapshots do not carry n or M; pass them back in.
WarpedProfile read_profile_csv(std::istream& is, int n, ModelKind kind, int torus_M = 0);
WarpedProfile read_profile_csv(const std::string& path, int n, ModelKind kind, int torus_M = 0);

}  // namespace heatlab
