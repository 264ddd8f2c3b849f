#pragma once

// eps-ladder tracking of critical points: warm-started continuation down a
// descending ladder, limit classification, index-shift verification,
// eigenvalue divergence-rate fits, value asymptotics, escape evidence, and
// the stratum tangency checks.

#include <optional>
#include <vector>

#include "wlab/critfind.hpp"
#include "wlab/scene.hpp"

namespace wlab {

enum class LimitClass { ToCritPhi0, ToStratum, ToBoundaryUnresolved };

// a critical point of the restricted potential phi|_S with its stratum data
struct StratumCrit {
  StratumPoint location;
  int index = 0;    // Morse index within the stratum
  int nullity = 0;
  Vec spectrum;     // restricted Hessian eigenvalues, ascending
};

struct SlopeFit {
  int position = 0;      // eigenvalue position in the ascending spectrum
  double slope = 0.0;    // least-squares slope of log|eig| vs log eps
  double residual = 0.0;
  bool diverging = false;  // |slope + 1| < tolerance
  int sign = 0;            // sign of the eigenvalue at the bottom rung
};

struct Track {
  std::vector<double> ladder;        // continued eps values, descending
  std::vector<CritRecord> records;   // one per rung
  LimitClass limit_class = LimitClass::ToBoundaryUnresolved;
  ChartPoint limit_point;
  std::optional<int> matched_stratum;  // index into the StratumCrit list
  std::vector<SlopeFit> slope_fits;
  double max_step = 0.0;               // max consecutive-rung displacement
  bool lost = false;                   // continuation failed mid-ladder
  bool split = false;                  // step-bound violation, track closed
  bool index_changed_mid_ladder = false;
  int threshold_rung = 0;              // first rung with the final index
};

struct LadderOptions {
  std::vector<double> ladder{1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3};
  SeedPlan seeds;
  double slope_tol = 0.05;
  double match_radius = 1e-2;
};

// critical points of the restricted potential on every stratum patch,
// deduplicated across patches
std::vector<StratumCrit> find_stratum_critical_points(const Scene& scene, unsigned seed = 1);

std::vector<Track> run_ladder(const Scene& scene, const LadderOptions& opt,
                              FindStats* stats = nullptr);

enum class CheckStatus { Pass, Fail, NotApplicable };

struct IndexShiftResult {
  CheckStatus status = CheckStatus::NotApplicable;
  int track_index_at_bottom = 0;
  int stratum_index = 0;
  double threshold_eps = 0.0;  // empirical threshold rung
};

IndexShiftResult verify_index_shift(const Track& track, const Scene& scene,
                                    const std::vector<StratumCrit>& stratum_crits,
                                    double match_radius = 1e-2);

struct ValueAsymptoticsResult {
  CheckStatus status = CheckStatus::NotApplicable;
  double limit = 0.0;       // fitted limit of phi_eps(p_eps) + 2 log eps
  double deviation = 0.0;   // max deviation from the limit across rungs
  double target = 0.0;      // -log ||h(limit point)||^2
  double mismatch = 0.0;    // |limit - target|
};

ValueAsymptoticsResult value_asymptotics(const Track& track, const Scene& scene);

struct EscapeRow {
  int track = 0;
  double min_divisor_distance = 0.0;  // to D_0 away from a stratum tube
  double min_base_locus_distance = 0.0;  // +inf sentinel when B is empty
  double threshold = 0.0;             // 10 * observed step bound (floored)
  bool violated = false;
};

std::vector<EscapeRow> escape_evidence(const Scene& scene, const std::vector<Track>& tracks,
                                       double stratum_exclusion = 0.1);

enum class TangencyStatus { Pass, Fail, NotImplied };

struct StratumTangencyReport {
  double max_dg_on_E = 0.0;            // hypothesis residual (a)
  double max_liouville_normal = 0.0;   // tangency residual (b)
  double max_grad_at_stratum_crit = 0.0;  // (c)
  bool hypothesis_holds = true;
  TangencyStatus conclusion_b = TangencyStatus::Pass;
  TangencyStatus conclusion_c = TangencyStatus::Pass;
  int samples = 0;
};

StratumTangencyReport stratum_tangency_checks(const Scene& scene, double eps, const std::vector<StratumPoint>& samples,
                           double hypothesis_gate = 1e-8, double res_b_tol = 1e-8,
                           double res_c_tol = 1e-10);

struct BijectionCheck {
  int to_stratum_tracks = 0;
  int stratum_crit_count = 0;
  bool one_to_one = false;
  double threshold_eps = 0.0;  // first rung where the expected count holds
};

BijectionCheck bijection_check(const Scene& scene, const std::vector<Track>& tracks,
                               const std::vector<StratumCrit>& stratum_crits,
                               double match_radius = 1e-2);

// per-eigenvalue-position Richardson extrapolation of the middle spectrum at
// the ladder bottom (positions excluding the four diverging extremes)
std::vector<double> middle_spectrum_limits(const Track& track);

}  // namespace wlab
