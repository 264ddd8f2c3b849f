#pragma once

// Local-model gluing (complex dimension 2): linear Darboux frame adapted to
// the thimble plane, the pair (xi_eps, psi_eps), the primitive H of
// lambda_eps - xi_eps, the quintic cutoff rho, and the glued structure
// (lambda~, phi~) with its verification suite.

#include <vector>

#include "wlab/fibration.hpp"
#include "wlab/geometry.hpp"
#include "wlab/scene.hpp"

namespace wlab {

class GluedStructure {
 public:
  GluedStructure(const Scene& scene, const ChartPoint& p, double eps0, double eps);

  const Scene& scene() const { return *scene_; }
  const ChartPoint& center() const { return p_; }
  double eps0() const { return eps0_; }
  double eps() const { return eps_; }

  // adapted frame: columns U1, V1, U2, V2; thimble = {v = 0}
  const Mat& frame() const { return frame_; }

  Vec uv_coords(const ChartPoint& q) const;   // (u1, v1, u2, v2)
  ChartPoint from_uv(const Vec& uv) const;
  double r_of(const ChartPoint& q) const;     // u1^2+v1^2+u2^2+v2^2

  double rho(double r) const;
  double drho_dr(double r) const;
  double rho_slope_bound() const { return 7.5 / eps0_; }

  // 1-forms and potentials (components on the chart dx/dy basis)
  Vec xi(const ChartPoint& q) const;
  Vec lambda(const ChartPoint& q) const;
  Vec lambda_tilde(const ChartPoint& q) const;  // exact branch identities
  Vec drho_form(const ChartPoint& q) const;     // the covector d(rho(r)) at q
  double psi(const ChartPoint& q) const;
  double phi(const ChartPoint& q) const;
  double phi_tilde(const ChartPoint& q) const;

  // primitive of lambda - xi with H(p) = 0 (fixed-panel Gauss-Legendre along
  // the radial path; panel count settled by the build-time audit)
  double primitive_H(const ChartPoint& q) const;
  // the same integral along a two-leg path, for the independence audit
  double primitive_H_alt(const ChartPoint& q) const;

  // omega-duals
  Vec liouville_of(const Vec& one_form, const ChartPoint& q) const;
  Vec y_field(const ChartPoint& q) const;       // dual of xi
  Vec z_tilde(const ChartPoint& q) const;       // dual of lambda_tilde

  // full jet of phi_tilde (for the critical point search)
  Jet2 phi_tilde_jet(const ChartPoint& q) const;
  Vec grad_psi(const ChartPoint& q) const;

  const Mat& omega() const { return omega_; }   // constant in the local model

 private:
  const Scene* scene_;
  ChartPoint p_;
  double eps0_, eps_;
  double phi_at_p_ = 0.0;
  Mat frame_;      // columns U1, V1, U2, V2 (chart coordinates)
  Mat dual_;       // rows du1, dv1, du2, dv2
  Mat omega_;
  int quad_panels_ = 1;

  Vec lambda_minus_xi(const ChartPoint& q) const;
  friend GluedStructure build_glued(const Scene&, const ChartPoint&, double, double);
};

// constructs the glued structure; NotLocalModel / FrameFailure /
// PathDependence as specified
GluedStructure build_glued(const Scene& scene, const ChartPoint& p, double eps0, double eps);

struct GluedVerification {
  double branch_inner_max = 0.0;    // |lambda~ - xi| on r < eps0/4 (exact 0)
  double branch_outer_max = 0.0;    // |lambda~ - lambda| on r > eps0/2 (exact 0)
  double dlambda_residual = 0.0;    // max |d(lambda~) - omega|, numeric
  double dxi_residual = 0.0;        // max |d(xi) - omega|, numeric
  double c_H = 0.0;                 // max |H| / sqrt(r) on the annulus
  double c_rho = 0.0;               // max eps0 |drho| / sqrt(r) on the annulus
  double max_H_drho = 0.0;          // max |H| |drho|
  bool h_drho_bounded = false;      // max_H_drho <= C/2, C = max(c_H, c_rho)
  double min_gradlike = 0.0;        // min dphi~(Z~) outside the 1e-3 ball
  bool gradlike_positive = false;
  double min_interp_gradlike = 0.0; // min over t-interpolation family, annulus
  bool interp_positive = false;
  // raw interpolation margin inside r < eps0/4, reported but never asserted:
  // the interpolated pair is not a Weinstein structure there in general
  double min_interp_inner = 0.0;
  double dH_residual = 0.0;         // max |dH - (lambda - xi)|, numeric
  double path_independence = 0.0;   // max |H_radial - H_twoleg|
  int samples = 0;
};

GluedVerification verify_glued(const GluedStructure& gs, int n_samples, unsigned seed);

struct GluedUnstableReport {
  int critical_points_found = 0;
  double dist_to_p = 0.0;           // distance of the nearest found point to p
  bool unique_at_p = false;
  double mesh_tangency_residual = 0.0;  // max |Z~ off mesh tangent| / |Z~|
  bool tangency_ok = false;
  double min_margin = 0.0;          // min |dpsi(Y)| / (|Y|^2 + |dpsi|^2) on thimble
  bool sign_consistent = false;
  int sign = 0;
};

GluedUnstableReport glued_unstable_check(const GluedStructure& gs, const ThimbleMesh& mesh,
                                         unsigned seed = 1, double inner_box_only = 0.0);

}  // namespace wlab
