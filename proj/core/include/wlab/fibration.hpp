#pragma once

// The holomorphic fibration pi = s0/h: its omega-orthogonal connection,
// horizontal transport over the real base segment, parallel-transport
// thimble meshes, and the characteristic-foliation alignment residuals.

#include <complex>
#include <vector>

#include "wlab/geometry.hpp"
#include "wlab/scene.hpp"

namespace wlab {

// complex value and Wirtinger gradient of pi at a point
struct PiJet {
  std::complex<double> value;
  std::vector<std::complex<double>> dz;  // d(pi)/dz_j
  Mat hess_re, hess_im;                  // real Hessians of Re pi, Im pi
};

PiJet pi_jet(const Scene& scene, const ChartPoint& p);

// complex directional derivative d(pi)(v) for a real tangent vector v
std::complex<double> dpi_of(const PiJet& pj, const Vec& v);

// real orthonormal basis of ker d(pi) (2n-2 vectors); throws SingularFiber
std::vector<Vec> fiber_kernel_basis(const PiJet& pj);

// component of v in the omega-orthogonal complement of ker d(pi)
Vec horizontal_project(const Scene& scene, const ChartPoint& p, const Vec& v, double eps);

struct TransportState {
  ChartPoint point;
  double t = 0.0;               // current base value (pi is real on the path)
  double fiber_residual = 0.0;  // |pi(point) - t|
};

struct TransportOptions {
  double rel_tol = 1e-9;
  double h_floor = 1e-8;       // |h| guard along the path
  int max_fiber_newton = 3;
};

// horizontal transport along gamma(t) = t from start.t to t_target, with one
// complex-Newton fiber correction per accepted step
TransportState transport(const Scene& scene, const TransportState& start, double t_target,
                         double eps, const TransportOptions& opt = {});

struct ThimbleMesh {
  double eps = 0.0;
  double t0 = 0.0;
  double base_sign = 1.0;
  Vec base_grid;                                  // |t| values ascending, signed by base_sign
  int transverse_count = 0;
  std::vector<std::vector<ChartPoint>> points;    // [base rung][transverse]
  std::vector<bool> line_ok;                      // per transverse line
  Mat lagrangian_residual;                        // per cell |omega(T_u, T_v)|
  Mat omega_scale;                                // per cell ||omega|| * cell area
  double max_relative_residual = 0.0;
};

struct ThimbleOptions {
  int angular_seeds = 16;
  int base_steps = 16;
  double t0_factor = 1e-3;     // seeds start on the fiber t0 = t0_factor * eps
  double base_sign = 1.0;      // transport over (0, eps] (+1) or toward -eps (-1)
  double sweep_fraction = 1.0; // sweep up to sweep_fraction * eps; with the
                               // negative sign the divisor sits at -eps itself,
                               // so a partial sweep keeps evaluations finite
  TransportOptions transport;
};

// transports an angular seed circle near the stratum critical point p across
// the base grid up to eps and assembles the mesh with Lagrangian residuals
ThimbleMesh build_thimble(const Scene& scene, const ChartPoint& p, double eps,
                          const ThimbleOptions& opt = {});

struct AlignmentReport {
  double max_res_horizontal = 0.0;  // (a) |X - hor(X)| / |X|
  double max_res_radial = 0.0;      // (b) |Im(dpi(X)/(pi+eps))| / |...|
  int samples = 0;
};

// residuals of the characteristic-foliation alignment of X_eps at samples
AlignmentReport lefschetz_alignment(const Scene& scene, double eps,
                                    const std::vector<ChartPoint>& samples);

// the 1-form eta_eps (the lambda-construction applied to -log|pi+eps|^2) and
// its omega-dual X_eps at p
struct EtaSample {
  Vec eta;
  Vec x_field;
};
EtaSample eta_dual(const Scene& scene, const ChartPoint& p, double eps);

// just the covector eta_eps (no dual solve)
Vec eta_form(const Scene& scene, const ChartPoint& p, double eps);

// deterministic samples with pi(q) real in (t_min, t_max), for alignment runs
std::vector<ChartPoint> sample_fiber_points(const Scene& scene, double eps, int count,
                                            unsigned seed, double t_min = 1e-3,
                                            double t_max_factor = 0.95);

// max distance between two meshes on shared (base value, transverse index)
// pairs; +inf if nothing is shared
double mesh_agreement(const Scene& scene, const ThimbleMesh& coarse, const ThimbleMesh& fine,
                      double rung_match_tol = 1e-12);

}  // namespace wlab
