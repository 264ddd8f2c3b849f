#pragma once

// Locate, deduplicate, and classify critical points of phi_eps: damped Newton
// multistart over deterministic seed plans, Morse index / nullity via the
// Jacobi spectrum, Morse-Bott detection, and the Liouville-flow plane check.

#include <optional>
#include <string>
#include <vector>

#include "wlab/geometry.hpp"
#include "wlab/scene.hpp"

namespace wlab {

enum class OriginTag { NearCritPhi0, NearStratum, Unresolved };

struct CritRecord {
  ChartPoint point;
  double eps = 0.0;
  double value = 0.0;      // phi_eps at the point
  double grad_norm = 0.0;
  Vec spectrum;            // Hessian eigenvalues, ascending
  int index = 0;           // eigenvalues < -tau * scale
  int nullity = 0;         // eigenvalues within +-tau * scale
  OriginTag origin_tag = OriginTag::Unresolved;
  bool morse_bott = false;
  std::vector<Vec> degenerate_basis;  // estimated kernel when nullity > 0
};

struct SeedPlan {
  int grid_per_axis = 5;
  int grid_dims = -1;       // -1: min(2n, 6)
  int random_count = 200;   // per chart
  unsigned seed = 1;
  double box_scale = 1.0;   // multiplies the scene's chart box radius
  std::optional<double> box_radius;  // absolute half-width override
};

struct FindStats {
  long seeds = 0;
  long converged = 0;
  long no_convergence = 0;
  long divisor_hits = 0;
};

// damped Newton on dphi from one seed; near-singular Hessians fall back to a
// truncated-spectrum step, then to gradient descent. nullopt on no convergence.
std::optional<ChartPoint> newton_refine(const Scene& scene, ChartPoint seed, double eps,
                                        int max_iter = 60, double grad_tol = 1e-10);

// classification of a converged point (total: never throws on valid input)
CritRecord classify(const Scene& scene, const ChartPoint& p, double eps, double tau_deg = 1e-5);

std::vector<CritRecord> find_critical_points(const Scene& scene, double eps, const SeedPlan& plan,
                                             FindStats* stats = nullptr);

// merge records closer than tol (cross-chart, canonical coordinates)
std::vector<CritRecord> deduplicate(const Scene& scene, std::vector<CritRecord> records,
                                    double tol = 1e-6);

struct PlaneCheckReport {
  double max_drift = 0.0;     // max distance from the plane over all trajectories
  bool phi_monotone = true;   // phi strictly increasing along the flow
  double min_phi_increment = 0.0;
  int trajectories = 0;
  int escaped = 0;            // reached the divisor guard (reported, not failure)
  double reached_radius = 0.0;
};

// integrates the Liouville flow from seeds on the plane near rec and reports
// the invariance drift and the monotonicity of phi
PlaneCheckReport unstable_plane_check(const Scene& scene, const CritRecord& rec,
                                      const AffineSubspace& plane, int n_flow,
                                      double stop_radius = 0.9, double seed_offset = 1e-3);

}  // namespace wlab
