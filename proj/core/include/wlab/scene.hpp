#pragma once

// Degeneration scenarios: chart atlases over X, the pencil s_eps = s0 + eps*h,
// the metric potential of the local trivialization, and parametrizations of
// the singular stratum S, the divisor branches of D_0, and the base locus B.
//
// Built-in scenes:
//   local_nc    X = C^n,        s0 = z0*z1, h = 1
//   cpn_o2h     X = CP^n,       s0 = z0*z1, h = a2*z2^2 + ... + an*zn^2
//   cpn_x_cpn   X = CP^n x CP^n, s0 = z0*z0', h = a1*z1*z1' + ... + an*zn*zn'
// plus custom affine scenes assembled from expression primitives (JSON).

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "wlab/ad.hpp"
#include "wlab/expr.hpp"
#include "wlab/types.hpp"

namespace wlab {

enum class AtlasKind { Affine, Projective, BiProjective };

struct ChartData {
  Poly s0, h;   // holomorphic evaluators in the chart's complex coordinates
  RealExpr g;   // metric potential -log||"1"||^2 of the local trivialization
};

// analytic expectations carried for tests and limit classification
struct KnownTruth {
  enum class Phi0Set { None, Point, ModulusTorus, EqualModulusCircle };
  Phi0Set phi0 = Phi0Set::None;
  ChartPoint phi0_point;                  // for Phi0Set::Point
  bool phi0_derived_differs_from_stated = false;
  int stratum_crit_count = -1;            // expected |Crit(S-bar)|, -1 unknown
  std::vector<ChartPoint> stratum_crit_points;
};

struct SceneParams {
  int n = 2;                                   // local_nc/cpn_o2h: n; cpn_x_cpn: factor n
  std::vector<std::complex<double>> a;         // pencil coefficients; default a_j = 1 + j/10
  std::vector<double> psi;                     // local_nc: quadratic psi coefficients, 2(n-2) reals
};

class Scene {
 public:
  std::string name;
  AtlasKind atlas = AtlasKind::Affine;
  int n = 1;           // complex dimension of X
  int factor_n = 0;    // CP^factor_n factor size for projective atlases
  std::vector<ChartData> charts;
  std::vector<AffineSubspace> stratum;    // chart-local patches of S
  std::vector<AffineSubspace> branches;   // chart-local patches of the two D_0 branches
  std::vector<int> branch_tag;            // which branch (0/1) each patch belongs to
  double box_radius = 1.0;                // per-chart seed box half-width
  double dc_sign = 1.0;                   // d^c sign calibration (set at load)
  KnownTruth truth;

  int dim_real() const { return 2 * n; }
  int num_charts() const { return static_cast<int>(charts.size()); }

  bool in_domain(const ChartPoint& p) const;
  void require_domain(const ChartPoint& p) const;  // throws BadChart

  // ---- potential family -------------------------------------------------
  // derivative-free value of phi_eps (throws OnDivisor when ||s_eps||^2 underflows)
  double phi(const ChartPoint& p, double eps) const;
  // full 2-jet of phi_eps via forward AD over the 2n real coordinates
  ad::Dual2 phi_jet_raw(const ChartPoint& p, double eps) const;

  // metric potential g and the holomorphic pieces
  double g_value(const ChartPoint& p) const;
  ad::Dual2 g_jet_raw(const ChartPoint& p) const;
  std::complex<double> s0_value(const ChartPoint& p) const;
  std::complex<double> h_value(const ChartPoint& p) const;
  std::complex<double> seps_value(const ChartPoint& p, double eps) const;
  ad::CDual2 s0_jet_raw(const ChartPoint& p) const;
  ad::CDual2 h_jet_raw(const ChartPoint& p) const;

  // -log||h||^2 (the restricted-potential metric term), as value and jet
  double log_h_norm2(const ChartPoint& p) const;      // log ||h(p)||^2
  ad::Dual2 neg_log_h_norm2_jet(const ChartPoint& p) const;

  // ---- atlas ------------------------------------------------------------
  // homogeneous coordinates of p (factor 0 or 1; Affine scenes: factor 0 = coords)
  std::vector<std::complex<double>> homogeneous(const ChartPoint& p, int factor = 0) const;
  int owning_chart(const ChartPoint& p) const;
  ChartPoint to_chart(const ChartPoint& p, int target) const;  // throws BadChart
  ChartPoint canonical(const ChartPoint& p) const { return to_chart(p, owning_chart(p)); }
  // Jacobian d(target coords)/d(source coords) at p, 2n x 2n
  Mat transition_jacobian(const ChartPoint& p, int target) const;
  // chart distance between two points (compared in a common chart)
  double distance(const ChartPoint& p, const ChartPoint& q) const;

  // ---- structure distances (classification + escape evidence) -----------
  double dist_to_stratum(const ChartPoint& p) const;
  double dist_to_crit_phi0(const ChartPoint& p) const;
  // distance to the base locus B = {s0 = h = 0}; +inf sentinel when h
  // vanishes nowhere (constant h)
  double dist_to_base_locus(const ChartPoint& p, int multistarts = 8, unsigned seed = 1) const;
  // distance to the part of D_0 at stratum-distance >= exclusion_radius
  double dist_to_divisor_off_stratum(const ChartPoint& p, double exclusion_radius = 0.1) const;

  bool has_base_locus() const;

  // complex-variable count of a chart point's chart (== n for every atlas here)
  int nvars() const { return n; }
};

// registry of built-in scenes; params supply n and pencil coefficients
Scene builtin_scene(const std::string& name, const SceneParams& params = {});

// fixes scene.dc_sign so that omega(e, Je) > 0 at probe points
void calibrate_dc_sign(Scene& scene);

// custom affine scene assembled from expression primitives (see README for
// the JSON grammar); also accepts {"builtin": name, ...params}
Scene scene_from_json(const std::string& json_text);

// deterministic samples on the open stratum with omega-adapted bases
std::vector<StratumPoint> sample_stratum(const Scene& scene, int count, unsigned seed);

// Normal-crossing certificate at a stratum sample: the complex Hessian of s0
// must have rank exactly 2 (4 real dimensions transverse to S) with its
// kernel containing the stratum tangent.
struct NormalCrossingCheck {
  Vec singular_values;       // of the complex Hessian of s0, descending
  bool rank_is_two = false;  // sigma_2 > tol, sigma_3 < tol (relative)
  double kernel_tangency = 0.0;  // max |Hess(s0) . t| over tangent directions
  double grad_s0 = 0.0;          // |d s0| at the sample (should vanish on S)
};

NormalCrossingCheck normal_crossing_check(const Scene& scene, const StratumPoint& sp,
                                          double rel_tol = 1e-8);

// 2-jet of phi_eps restricted to the stratum, in the patch's intrinsic
// coordinates (chain rule through the affine parametrization)
Jet2 restricted_potential(const Scene& scene, const StratumPoint& sp, double eps);

namespace detail {
std::vector<std::complex<double>> to_cvec(const Vec& coords);
Vec to_rvec(const std::vector<std::complex<double>>& z);
}  // namespace detail

}  // namespace wlab
