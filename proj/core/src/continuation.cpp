#include "wlab/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>

#include "wlab/rng.hpp"

namespace wlab {

namespace {

// Newton on the restricted potential within one stratum patch, in the
// patch's intrinsic coordinates. The restricted gradient is eps-independent,
// so any fixed eps works.
std::optional<Vec> stratum_newton(const Scene& scene, const AffineSubspace& patch, Vec u,
                                  double eps = 1.0, int max_iter = 60) {
  const int du = static_cast<int>(patch.basis.size());
  auto embed = [&](const Vec& uu) {
    Vec q = patch.base;
    for (int a = 0; a < du; ++a) axpy(uu[a], patch.basis[a], q);
    return q;
  };
  StratumPoint sp;
  sp.point.chart = patch.chart;
  sp.tangent_basis = patch.basis;

  for (int it = 0; it < max_iter; ++it) {
    sp.point.coords = embed(u);
    if (!scene.in_domain(sp.point)) return std::nullopt;
    Jet2 jet;
    try {
      jet = restricted_potential(scene, sp, eps);
    } catch (const Error&) {
      return std::nullopt;
    }
    double gn = norm(jet.grad);
    if (gn < 1e-11) return u;
    if (norm_inf(u) > 12.0 * scene.box_radius) return std::nullopt;

    Vec dir;
    Lu lu(jet.hess, 1e-11);
    if (lu.ok()) {
      dir = lu.solve(jet.grad);
    } else {
      Spectrum spc = jacobi_spectrum(jet.hess);
      double scale = std::max(norm_inf(spc.eigenvalues), 1e-300);
      dir = Vec(du, 0.0);
      for (int i = 0; i < du; ++i) {
        if (std::abs(spc.eigenvalues[i]) < 1e-6 * scale) continue;
        Vec q = spc.eigenvectors.col(i);
        axpy(dot(q, jet.grad) / spc.eigenvalues[i], q, dir);
      }
    }
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
      Vec cand = u;
      axpy(-t, dir, cand);
      sp.point.coords = embed(cand);
      if (!scene.in_domain(sp.point)) continue;
      try {
        if (norm(restricted_potential(scene, sp, eps).grad) < gn) {
          u = cand;
          accepted = true;
          break;
        }
      } catch (const Error&) {
        continue;
      }
    }
    if (!accepted) return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

std::vector<StratumCrit> find_stratum_critical_points(const Scene& scene, unsigned seed) {
  if (scene.stratum.empty()) throw Error(Errc::EmptyStratum, "scene has no stratum");
  std::vector<StratumCrit> found;

  for (size_t pi = 0; pi < scene.stratum.size(); ++pi) {
    const auto& patch = scene.stratum[pi];
    const int du = static_cast<int>(patch.basis.size());

    std::vector<Vec> seeds;
    if (du == 0) {
      seeds.push_back(Vec{});
    } else {
      // coarse grid + a few random starts per patch
      long total = 1;
      for (int d = 0; d < du; ++d) total *= 3;
      for (long g = 0; g < total; ++g) {
        Vec u(du, 0.0);
        long rem = g;
        for (int d = 0; d < du; ++d) {
          int idx = static_cast<int>(rem % 3);
          rem /= 3;
          u[d] = (idx - 1) * 0.7 * scene.box_radius;
        }
        seeds.push_back(u);
      }
      Rng rng(seed, 300 + static_cast<unsigned>(pi));
      for (int r = 0; r < 40; ++r) {
        Vec u(du);
        for (int d = 0; d < du; ++d) u[d] = rng.uniform(-scene.box_radius, scene.box_radius);
        seeds.push_back(u);
      }
    }

    for (const auto& u0 : seeds) {
      std::optional<Vec> u = du == 0 ? std::make_optional(Vec{}) : stratum_newton(scene, patch, u0);
      if (!u) continue;
      StratumCrit sc;
      sc.location.patch = static_cast<int>(pi);
      sc.location.tangent_basis = patch.basis;
      sc.location.point.chart = patch.chart;
      sc.location.point.coords = patch.base;
      for (int a = 0; a < du; ++a) axpy((*u)[a], patch.basis[a], sc.location.point.coords);

      Jet2 jet = restricted_potential(scene, sc.location, 1.0);
      if (du > 0 && norm(jet.grad) > 1e-9) continue;
      if (du > 0) {
        Spectrum spc = jacobi_spectrum(jet.hess);
        sc.spectrum = spc.eigenvalues;
        double scale = std::max(norm_inf(spc.eigenvalues), 1e-300);
        for (double ev : spc.eigenvalues) {
          if (ev < -1e-5 * scale)
            sc.index++;
          else if (ev <= 1e-5 * scale)
            sc.nullity++;
        }
      }
      bool dup = false;
      for (const auto& other : found)
        if (scene.distance(other.location.point, sc.location.point) < 1e-6) {
          dup = true;
          break;
        }
      if (!dup) found.push_back(std::move(sc));
    }
  }

  std::sort(found.begin(), found.end(), [](const StratumCrit& a, const StratumCrit& b) {
    if (a.location.point.chart != b.location.point.chart)
      return a.location.point.chart < b.location.point.chart;
    return a.location.point.coords < b.location.point.coords;
  });
  return found;
}

namespace {

void fit_slopes(Track& t, double slope_tol) {
  if (t.records.size() < 2) return;
  const int nv = static_cast<int>(t.records.front().spectrum.size());
  const int m = static_cast<int>(t.records.size());
  // The rate statement is asymptotic; the top rungs still carry the bounded
  // part of the eigenvalue (order-1 against order-1/eps), which biases a
  // least-squares slope. Fit on the lower rungs once the ladder is long
  // enough to afford it.
  const int first = m >= 5 ? 2 : 0;
  for (int k = 0; k < nv; ++k) {
    SlopeFit f;
    f.position = k;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int used = 0;
    for (int r = first; r < m; ++r) {
      double ev = t.records[r].spectrum[k];
      if (std::abs(ev) < 1e-12) continue;
      double x = std::log(t.ladder[r]);
      double y = std::log(std::abs(ev));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      used++;
    }
    if (used >= 2) {
      double denom = used * sxx - sx * sx;
      f.slope = (used * sxy - sx * sy) / denom;
      double a = (sy - f.slope * sx) / used;
      double res = 0.0;
      for (int r = first; r < m; ++r) {
        double ev = t.records[r].spectrum[k];
        if (std::abs(ev) < 1e-12) continue;
        double y = std::log(std::abs(ev));
        double pred = a + f.slope * std::log(t.ladder[r]);
        res = std::max(res, std::abs(y - pred));
      }
      f.residual = res;
      f.diverging = std::abs(f.slope + 1.0) < slope_tol;
    }
    f.sign = t.records.back().spectrum[k] >= 0 ? 1 : -1;
    t.slope_fits.push_back(f);
  }
}

void classify_limit(Track& t, const Scene& scene) {
  if (t.records.empty()) return;
  t.limit_point = t.records.back().point;
  if (t.lost || t.split) {
    t.limit_class = LimitClass::ToBoundaryUnresolved;
    return;
  }
  double d0 = scene.dist_to_crit_phi0(t.limit_point);
  double ds = scene.dist_to_stratum(t.limit_point);
  const double cap = 0.1;
  if (ds <= d0 && ds <= cap)
    t.limit_class = LimitClass::ToStratum;
  else if (d0 < ds && d0 <= cap)
    t.limit_class = LimitClass::ToCritPhi0;
  else
    t.limit_class = LimitClass::ToBoundaryUnresolved;
}

void compute_threshold(Track& t) {
  if (t.records.empty()) return;
  int final_index = t.records.back().index;
  int r = static_cast<int>(t.records.size()) - 1;
  while (r > 0 && t.records[r - 1].index == final_index) --r;
  t.threshold_rung = r;
  for (size_t i = 1; i < t.records.size(); ++i)
    if (t.records[i].index != t.records[i - 1].index) t.index_changed_mid_ladder = true;
}

}  // namespace

namespace {

// Degenerate critical manifolds yield one record per converged representative;
// continuing them all is redundant. Chain representatives into families and
// keep a bounded, deterministic subset of each; Morse records pass through.
std::vector<CritRecord> cap_degenerate_families(std::vector<CritRecord> recs, int max_reps = 8,
                                                double chain_radius = 0.15) {
  std::sort(recs.begin(), recs.end(), [](const CritRecord& a, const CritRecord& b) {
    if (a.point.chart != b.point.chart) return a.point.chart < b.point.chart;
    return a.point.coords < b.point.coords;
  });
  const int k = static_cast<int>(recs.size());
  std::vector<int> parent(k);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find_root = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (int i = 0; i < k; ++i) {
    if (!recs[i].morse_bott) continue;
    for (int j = i + 1; j < std::min(k, i + 40); ++j) {
      if (!recs[j].morse_bott || recs[j].point.chart != recs[i].point.chart) continue;
      if (norm(recs[i].point.coords - recs[j].point.coords) < chain_radius)
        parent[find_root(j)] = find_root(i);
    }
  }
  std::map<int, std::vector<int>> families;
  for (int i = 0; i < k; ++i)
    if (recs[i].morse_bott) families[find_root(i)].push_back(i);

  std::vector<bool> keep(k, true);
  for (auto& [root, members] : families) {
    if (static_cast<int>(members.size()) <= max_reps) continue;
    size_t stride = members.size() / max_reps;
    std::vector<bool> chosen(members.size(), false);
    for (int r = 0; r < max_reps; ++r) chosen[r * stride] = true;
    for (size_t m = 0; m < members.size(); ++m)
      if (!chosen[m]) keep[members[m]] = false;
  }
  std::vector<CritRecord> out;
  for (int i = 0; i < k; ++i)
    if (keep[i]) out.push_back(std::move(recs[i]));
  return out;
}

}  // namespace

std::vector<Track> run_ladder(const Scene& scene, const LadderOptions& opt, FindStats* stats) {
  if (opt.ladder.empty()) return {};
  for (size_t i = 0; i + 1 < opt.ladder.size(); ++i)
    if (opt.ladder[i] <= opt.ladder[i + 1])
      throw Error(Errc::ConfigError, "ladder must be strictly descending");
  if (opt.ladder.back() < 1e-6)
    throw Error(Errc::ConfigError, "ladder below the 1e-6 double-precision guard");

  std::vector<CritRecord> top =
      cap_degenerate_families(find_critical_points(scene, opt.ladder.front(), opt.seeds, stats));

  std::vector<Track> tracks;
  for (const auto& rec : top) {
    Track t;
    t.ladder.push_back(opt.ladder.front());
    t.records.push_back(rec);

    for (size_t r = 1; r < opt.ladder.size(); ++r) {
      double eps = opt.ladder[r];
      double deps = opt.ladder[r - 1] - eps;
      auto next = newton_refine(scene, t.records.back().point, eps);
      if (!next) {
        t.lost = true;
        break;
      }
      double step = scene.distance(t.records.back().point, *next);
      t.max_step = std::max(t.max_step, step);
      if (step > 10.0 * std::sqrt(deps)) {
        t.split = true;
        break;
      }
      t.ladder.push_back(eps);
      t.records.push_back(classify(scene, *next, eps));
    }

    classify_limit(t, scene);
    compute_threshold(t);
    fit_slopes(t, opt.slope_tol);
    tracks.push_back(std::move(t));
  }

  std::sort(tracks.begin(), tracks.end(), [](const Track& a, const Track& b) {
    const auto& pa = a.records.front();
    const auto& pb = b.records.front();
    if (pa.value != pb.value) return pa.value < pb.value;
    if (pa.point.chart != pb.point.chart) return pa.point.chart < pb.point.chart;
    return pa.point.coords < pb.point.coords;
  });
  return tracks;
}

IndexShiftResult verify_index_shift(const Track& track, const Scene& scene,
                                    const std::vector<StratumCrit>& stratum_crits,
                                    double match_radius) {
  IndexShiftResult res;
  if (track.limit_class != LimitClass::ToStratum) {
    res.status = CheckStatus::NotApplicable;
    return res;
  }
  int best = -1;
  double best_d = match_radius;
  for (size_t i = 0; i < stratum_crits.size(); ++i) {
    double d = scene.distance(track.limit_point, stratum_crits[i].location.point);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  if (best < 0) throw Error(Errc::NoMatch, "no stratum critical point within the match radius");

  res.stratum_index = stratum_crits[best].index;
  res.track_index_at_bottom = track.records.back().index;
  res.threshold_eps = track.ladder[track.threshold_rung];
  bool ok = true;
  for (size_t r = track.threshold_rung; r < track.records.size(); ++r)
    if (track.records[r].index != res.stratum_index + 2) ok = false;
  res.status = ok ? CheckStatus::Pass : CheckStatus::Fail;
  return res;
}

ValueAsymptoticsResult value_asymptotics(const Track& track, const Scene& scene) {
  ValueAsymptoticsResult res;
  if (track.limit_class != LimitClass::ToStratum || track.records.empty()) {
    res.status = CheckStatus::NotApplicable;
    return res;
  }
  std::vector<double> v;
  for (size_t r = 0; r < track.records.size(); ++r)
    v.push_back(track.records[r].value + 2.0 * std::log(track.ladder[r]));
  res.limit = v.back();
  for (double x : v) res.deviation = std::max(res.deviation, std::abs(x - res.limit));
  res.target = -scene.log_h_norm2(track.limit_point);
  res.mismatch = std::abs(res.limit - res.target);
  res.status = res.mismatch < 1e-3 ? CheckStatus::Pass : CheckStatus::Fail;
  return res;
}

std::vector<EscapeRow> escape_evidence(const Scene& scene, const std::vector<Track>& tracks,
                                       double stratum_exclusion) {
  std::vector<EscapeRow> rows;
  for (size_t ti = 0; ti < tracks.size(); ++ti) {
    const Track& t = tracks[ti];
    if (t.limit_class != LimitClass::ToStratum) continue;
    EscapeRow row;
    row.track = static_cast<int>(ti);
    row.min_divisor_distance = std::numeric_limits<double>::infinity();
    row.min_base_locus_distance = std::numeric_limits<double>::infinity();
    for (const auto& rec : t.records) {
      row.min_divisor_distance =
          std::min(row.min_divisor_distance, scene.dist_to_divisor_off_stratum(rec.point, stratum_exclusion));
      row.min_base_locus_distance = std::min(row.min_base_locus_distance, scene.dist_to_base_locus(rec.point));
    }
    row.threshold = std::max(10.0 * t.max_step, 1e-8);
    row.violated = row.min_divisor_distance < row.threshold || row.min_base_locus_distance < row.threshold;
    rows.push_back(row);
  }
  return rows;
}

StratumTangencyReport stratum_tangency_checks(const Scene& scene, double eps, const std::vector<StratumPoint>& samples,
                           double hypothesis_gate, double res_b_tol, double res_c_tol) {
  StratumTangencyReport rep;
  rep.samples = static_cast<int>(samples.size());

  for (const auto& sp : samples) {
    // (a) the derivative of g = -log||h||^2 on the omega-orthogonal complement E
    Jet2 gjet = jet_from_dual(scene.neg_log_h_norm2_jet(sp.point));
    for (const auto& e : sp.normal_basis)
      rep.max_dg_on_E = std::max(rep.max_dg_on_E, std::abs(dot(gjet.grad, e)));

    // (b) the Liouville field's component off the stratum tangent
    SymplecticSample ss = symplectic_sample(scene, sp.point, eps);
    Vec ztan(ss.liouville.size(), 0.0);
    for (const auto& tvec : sp.tangent_basis) axpy(dot(ss.liouville, tvec), tvec, ztan);
    rep.max_liouville_normal = std::max(rep.max_liouville_normal, norm(ss.liouville - ztan));
  }

  // (c) |dphi_eps| at the stratum critical points
  try {
    for (const auto& sc : find_stratum_critical_points(scene)) {
      Jet2 jet = eval_jet2(scene, sc.location.point, eps);
      rep.max_grad_at_stratum_crit = std::max(rep.max_grad_at_stratum_crit, norm(jet.grad));
    }
  } catch (const Error&) {
    // no stratum -> nothing to check
  }

  rep.hypothesis_holds = rep.max_dg_on_E <= hypothesis_gate;
  if (!rep.hypothesis_holds) {
    rep.conclusion_b = TangencyStatus::NotImplied;
    rep.conclusion_c = TangencyStatus::NotImplied;
  } else {
    rep.conclusion_b = rep.max_liouville_normal <= res_b_tol ? TangencyStatus::Pass : TangencyStatus::Fail;
    rep.conclusion_c = rep.max_grad_at_stratum_crit <= res_c_tol ? TangencyStatus::Pass : TangencyStatus::Fail;
  }
  return rep;
}

BijectionCheck bijection_check(const Scene& scene, const std::vector<Track>& tracks,
                               const std::vector<StratumCrit>& stratum_crits, double match_radius) {
  BijectionCheck bc;
  bc.stratum_crit_count = static_cast<int>(stratum_crits.size());

  std::vector<int> matched(stratum_crits.size(), 0);
  for (const auto& t : tracks) {
    if (t.limit_class != LimitClass::ToStratum) continue;
    bc.to_stratum_tracks++;
    for (size_t i = 0; i < stratum_crits.size(); ++i)
      if (scene.distance(t.limit_point, stratum_crits[i].location.point) < match_radius) {
        matched[i]++;
        break;
      }
  }
  bc.one_to_one = bc.to_stratum_tracks == bc.stratum_crit_count;
  for (int m : matched) bc.one_to_one = bc.one_to_one && m == 1;

  // empirical threshold: the first rung where the to-stratum count is already
  // the expected one (all tracks here are classified at the bottom, so report
  // the top rung when counts agree)
  bc.threshold_eps = tracks.empty() || tracks.front().ladder.empty() ? 0.0 : tracks.front().ladder.front();
  return bc;
}

std::vector<double> middle_spectrum_limits(const Track& track) {
  std::vector<double> limits;
  if (track.records.size() < 2) return limits;
  const int nv = static_cast<int>(track.records.back().spectrum.size());
  if (nv <= 4) return limits;
  const auto& bot = track.records.back().spectrum;
  const auto& prev = track.records[track.records.size() - 2].spectrum;
  double e_bot = track.ladder.back();
  double e_prev = track.ladder[track.ladder.size() - 2];
  for (int k = 2; k < nv - 2; ++k) {
    // linear-in-eps Richardson extrapolation to eps -> 0
    double lim = bot[k] + (bot[k] - prev[k]) * e_bot / (e_prev - e_bot);
    limits.push_back(lim);
  }
  return limits;
}

}  // namespace wlab
