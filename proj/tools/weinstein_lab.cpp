// weinstein-lab: configuration, orchestration, and reporting front-end.
// Everything is reproducible from one JSON config and one seed; reports are
// bit-identical for identical (config, seed, platform).
//
//   weinstein-lab <command> --config <path> [--seed N] [--out DIR]
//   commands: crit | ladder | thimble | glue | checkall
//
// Exit codes: 0 all enabled assertions pass, 1 numerical assertion failed,
// 2 configuration error.

#include <algorithm>
#include <chrono>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "wlab/continuation.hpp"
#include "wlab/critfind.hpp"
#include "wlab/fibration.hpp"
#include "wlab/gluing.hpp"
#include "wlab/report.hpp"
#include "wlab/rng.hpp"

using nlohmann::json;
using namespace wlab;

namespace {

struct Tolerances {
  double grad_norm = 1e-8;
  double ad_fd_grad = 1e-6;
  double ad_fd_hess = 1e-4;
  double omega_eps_independence = 1e-10;
  double liouville_identity = 1e-10;
  double dc_identity = 1e-12;
  double lagrangian_residual = 1e-6;
  double mesh_match = 1e-6;
  double nesting = 1e-8;
  double alignment = 1e-8;
  double slope = 0.05;
  double middle_spectrum = 1e-3;
  double value_asym = 1e-3;
  double match_radius = 1e-2;
  double tangency_hypothesis = 1e-10;
  double tangency_liouville = 1e-8;
  double tangency_crit = 1e-10;
  double dlambda = 1e-6;
  double dxi = 1e-9;
  double crit_at_p = 1e-8;
  double tangency = 1e-6;
  double unstable_drift = 1e-8;
};

struct RunConfig {
  std::string command;
  json scene_json;
  unsigned seed = 1;
  double eps = 0.05;
  std::vector<double> eps_ladder{1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3};
  double eps0 = 0.25;
  double base_sign = 1.0;
  SeedPlan seeds;
  int thimble_angular = 16;
  int thimble_base_steps = 16;
  double thimble_t0_factor = 1e-3;
  double thimble_sweep_fraction = 1.0;
  Tolerances tol;
  std::vector<std::string> formats{"json", "csv"};
  std::string out_dir = "out";
};

void ensure_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) throw Error(Errc::ConfigError, "unknown key '" + it.key() + "' in " + where);
  }
}

RunConfig parse_config(const json& j) {
  ensure_keys(j,
              {"schema_version", "command", "scene", "seed", "eps", "eps_ladder", "eps0",
               "base_sign", "seeds", "thimble", "tolerances", "reports", "out_dir"},
              "config");
  RunConfig cfg;
  if (j.contains("schema_version") && j.at("schema_version").get<int>() != 1)
    throw Error(Errc::ConfigError, "unsupported schema_version");
  if (j.contains("command")) cfg.command = j.at("command").get<std::string>();
  if (!j.contains("scene")) throw Error(Errc::ConfigError, "config needs a scene");
  cfg.scene_json = j.at("scene");
  cfg.seed = j.value("seed", 1u);
  cfg.eps = j.value("eps", 0.05);
  if (j.contains("eps_ladder")) {
    cfg.eps_ladder.clear();
    for (const auto& e : j.at("eps_ladder")) cfg.eps_ladder.push_back(e.get<double>());
    if (cfg.eps_ladder.empty()) throw Error(Errc::ConfigError, "eps_ladder must not be empty");
  }
  cfg.eps0 = j.value("eps0", 0.25);
  cfg.base_sign = j.value("base_sign", 1.0);
  if (j.contains("seeds")) {
    const json& s = j.at("seeds");
    ensure_keys(s, {"grid_per_axis", "grid_dims", "random_count", "box_radius", "box_scale"},
                "config.seeds");
    cfg.seeds.grid_per_axis = s.value("grid_per_axis", 5);
    cfg.seeds.grid_dims = s.value("grid_dims", -1);
    cfg.seeds.random_count = s.value("random_count", 200);
    if (s.contains("box_radius")) cfg.seeds.box_radius = s.at("box_radius").get<double>();
    cfg.seeds.box_scale = s.value("box_scale", 1.0);
  }
  if (j.contains("thimble")) {
    const json& t = j.at("thimble");
    ensure_keys(t, {"angular_seeds", "base_steps", "t0_factor", "sweep_fraction"},
                "config.thimble");
    cfg.thimble_angular = t.value("angular_seeds", 16);
    cfg.thimble_base_steps = t.value("base_steps", 16);
    cfg.thimble_t0_factor = t.value("t0_factor", 1e-3);
    cfg.thimble_sweep_fraction = t.value("sweep_fraction", 1.0);
  }
  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    ensure_keys(t,
                {"grad_norm", "ad_fd_grad", "ad_fd_hess", "omega_eps_independence",
                 "liouville_identity", "dc_identity", "lagrangian_residual", "mesh_match",
                 "nesting", "alignment", "slope", "middle_spectrum", "value_asym", "match_radius",
                 "tangency_hypothesis", "tangency_liouville", "tangency_crit", "dlambda", "dxi", "crit_at_p", "tangency",
                 "unstable_drift"},
                "config.tolerances");
    auto get = [&](const char* k, double d) { return t.value(k, d); };
    cfg.tol.grad_norm = get("grad_norm", cfg.tol.grad_norm);
    cfg.tol.ad_fd_grad = get("ad_fd_grad", cfg.tol.ad_fd_grad);
    cfg.tol.ad_fd_hess = get("ad_fd_hess", cfg.tol.ad_fd_hess);
    cfg.tol.omega_eps_independence = get("omega_eps_independence", cfg.tol.omega_eps_independence);
    cfg.tol.liouville_identity = get("liouville_identity", cfg.tol.liouville_identity);
    cfg.tol.dc_identity = get("dc_identity", cfg.tol.dc_identity);
    cfg.tol.lagrangian_residual = get("lagrangian_residual", cfg.tol.lagrangian_residual);
    cfg.tol.mesh_match = get("mesh_match", cfg.tol.mesh_match);
    cfg.tol.nesting = get("nesting", cfg.tol.nesting);
    cfg.tol.alignment = get("alignment", cfg.tol.alignment);
    cfg.tol.slope = get("slope", cfg.tol.slope);
    cfg.tol.middle_spectrum = get("middle_spectrum", cfg.tol.middle_spectrum);
    cfg.tol.value_asym = get("value_asym", cfg.tol.value_asym);
    cfg.tol.match_radius = get("match_radius", cfg.tol.match_radius);
    cfg.tol.tangency_hypothesis = get("tangency_hypothesis", cfg.tol.tangency_hypothesis);
    cfg.tol.tangency_liouville = get("tangency_liouville", cfg.tol.tangency_liouville);
    cfg.tol.tangency_crit = get("tangency_crit", cfg.tol.tangency_crit);
    cfg.tol.dlambda = get("dlambda", cfg.tol.dlambda);
    cfg.tol.dxi = get("dxi", cfg.tol.dxi);
    cfg.tol.crit_at_p = get("crit_at_p", cfg.tol.crit_at_p);
    cfg.tol.tangency = get("tangency", cfg.tol.tangency);
    cfg.tol.unstable_drift = get("unstable_drift", cfg.tol.unstable_drift);
  }
  if (j.contains("reports")) {
    cfg.formats.clear();
    for (const auto& f : j.at("reports")) {
      std::string s = f.get<std::string>();
      if (s != "json" && s != "csv") throw Error(Errc::ConfigError, "unknown report format " + s);
      cfg.formats.push_back(s);
    }
  }
  cfg.out_dir = j.value("out_dir", std::string("out"));
  return cfg;
}

json resolved_config_json(const RunConfig& cfg) {
  json j;
  j["schema_version"] = 1;
  j["command"] = cfg.command;
  j["scene"] = cfg.scene_json;
  j["seed"] = cfg.seed;
  j["eps"] = cfg.eps;
  j["eps_ladder"] = cfg.eps_ladder;
  j["eps0"] = cfg.eps0;
  j["base_sign"] = cfg.base_sign;
  j["seeds"] = {{"grid_per_axis", cfg.seeds.grid_per_axis},
                {"grid_dims", cfg.seeds.grid_dims},
                {"random_count", cfg.seeds.random_count},
                {"box_scale", cfg.seeds.box_scale}};
  if (cfg.seeds.box_radius) j["seeds"]["box_radius"] = *cfg.seeds.box_radius;
  j["thimble"] = {{"angular_seeds", cfg.thimble_angular},
                  {"base_steps", cfg.thimble_base_steps},
                  {"t0_factor", cfg.thimble_t0_factor},
                  {"sweep_fraction", cfg.thimble_sweep_fraction}};
  j["tolerances"] = {{"grad_norm", cfg.tol.grad_norm},
                     {"ad_fd_grad", cfg.tol.ad_fd_grad},
                     {"ad_fd_hess", cfg.tol.ad_fd_hess},
                     {"omega_eps_independence", cfg.tol.omega_eps_independence},
                     {"liouville_identity", cfg.tol.liouville_identity},
                     {"dc_identity", cfg.tol.dc_identity},
                     {"lagrangian_residual", cfg.tol.lagrangian_residual},
                     {"mesh_match", cfg.tol.mesh_match},
                     {"nesting", cfg.tol.nesting},
                     {"alignment", cfg.tol.alignment},
                     {"slope", cfg.tol.slope},
                     {"middle_spectrum", cfg.tol.middle_spectrum},
                     {"value_asym", cfg.tol.value_asym},
                     {"match_radius", cfg.tol.match_radius},
                     {"tangency_hypothesis", cfg.tol.tangency_hypothesis},
                     {"tangency_liouville", cfg.tol.tangency_liouville},
                     {"tangency_crit", cfg.tol.tangency_crit},
                     {"dlambda", cfg.tol.dlambda},
                     {"dxi", cfg.tol.dxi},
                     {"crit_at_p", cfg.tol.crit_at_p},
                     {"tangency", cfg.tol.tangency},
                     {"unstable_drift", cfg.tol.unstable_drift}};
  j["reports"] = cfg.formats;
  j["out_dir"] = cfg.out_dir;
  j["dc_sign_calibration"] = "omega(v, Jv) > 0";
  return j;
}

bool wants(const RunConfig& cfg, const std::string& fmt) {
  return std::find(cfg.formats.begin(), cfg.formats.end(), fmt) != cfg.formats.end();
}

// calibration + provenance rows carried by every scene-bound report
void add_scene_provenance(Report& report, const Scene& scene) {
  report.add_flag("dc_sign", "dc_sign_calibration_record", true,
                  "dc_sign=" + format_double(scene.dc_sign) + " scene=" + scene.name);
  if (scene.truth.phi0_derived_differs_from_stated)
    report.add_flag("phi0_set_provenance", "derived_critical_set_flag", true,
                    "recorded critical set of phi_0 is chart-derived and differs from the"
                    " commonly stated one; no reading is asserted");
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

void run_crit(const RunConfig& cfg, const Scene& scene, Report& report) {
  add_scene_provenance(report, scene);
  SeedPlan plan = cfg.seeds;
  plan.seed = cfg.seed;
  FindStats stats;
  auto recs = find_critical_points(scene, cfg.eps, plan, &stats);

  double worst_grad = 0.0;
  for (const auto& r : recs) worst_grad = std::max(worst_grad, r.grad_norm);
  report.add("crit_grad_norm", "critical_point_convergence", worst_grad, cfg.tol.grad_norm,
             "records=" + std::to_string(recs.size()) + " seeds=" + std::to_string(stats.seeds) +
                 " no_convergence=" + std::to_string(stats.no_convergence));
  report.add_flag("crit_found_any", "critical_point_existence", !recs.empty());

  if (wants(cfg, "csv")) write_crit_csv(cfg.out_dir + "/crit_records.csv", scene, recs);
  if (wants(cfg, "json")) write_crit_json(cfg.out_dir + "/crit_records.json", scene, recs);
}

void add_ladder_checks(const RunConfig& cfg, const Scene& scene, const std::vector<Track>& tracks,
                       const std::vector<StratumCrit>& crits, Report& report,
                       const std::string& prefix) {
  // index shift
  int shift_fail = 0, shift_pass = 0;
  for (const auto& t : tracks) {
    try {
      auto res = verify_index_shift(t, scene, crits, cfg.tol.match_radius);
      if (res.status == CheckStatus::Pass) shift_pass++;
      if (res.status == CheckStatus::Fail) shift_fail++;
    } catch (const Error&) {
      shift_fail++;
    }
  }
  report.add_flag(prefix + "_index_shift", "index_shift_plus_two", shift_fail == 0,
                  "pass=" + std::to_string(shift_pass) + " fail=" + std::to_string(shift_fail));

  // slopes and middle spectrum
  double worst_slope = 0.0;
  bool counts_ok = true;
  double worst_middle = 0.0;
  for (const auto& t : tracks) {
    if (t.limit_class != LimitClass::ToStratum) continue;
    int diverging = 0, neg = 0, pos = 0;
    for (const auto& f : t.slope_fits)
      if (f.diverging) {
        diverging++;
        (f.sign < 0 ? neg : pos)++;
        worst_slope = std::max(worst_slope, std::abs(f.slope + 1.0));
      }
    if (!(diverging == 4 && neg == 2 && pos == 2)) counts_ok = false;

    auto limits = middle_spectrum_limits(t);
    if (!limits.empty()) {
      int best = -1;
      double bd = 1e300;
      for (size_t i = 0; i < crits.size(); ++i) {
        double d = scene.distance(t.limit_point, crits[i].location.point);
        if (d < bd) {
          bd = d;
          best = static_cast<int>(i);
        }
      }
      if (best >= 0 && crits[best].spectrum.size() == limits.size())
        for (size_t k = 0; k < limits.size(); ++k)
          worst_middle = std::max(worst_middle, std::abs(limits[k] - crits[best].spectrum[k]) /
                                                    std::max(1.0, std::abs(crits[best].spectrum[k])));
    }
  }
  report.add_flag(prefix + "_divergence_count", "four_eigenvalues_diverge", counts_ok);
  report.add(prefix + "_divergence_slope", "eigenvalue_divergence_rate", worst_slope, cfg.tol.slope);
  report.add(prefix + "_middle_spectrum", "middle_spectrum_limits", worst_middle,
             cfg.tol.middle_spectrum);

  // value asymptotics
  double worst_value = 0.0;
  for (const auto& t : tracks) {
    auto res = value_asymptotics(t, scene);
    if (res.status != CheckStatus::NotApplicable)
      worst_value = std::max(worst_value, std::max(res.mismatch, res.deviation));
  }
  report.add(prefix + "_value_asymptotics", "restricted_value_limit", worst_value,
             cfg.tol.value_asym);

  // escape evidence
  bool escape_ok = true;
  double min_b = std::numeric_limits<double>::infinity();
  for (const auto& row : escape_evidence(scene, tracks)) {
    if (row.violated) escape_ok = false;
    min_b = std::min(min_b, row.min_base_locus_distance);
  }
  report.add_flag(prefix + "_escape", "no_escape_to_divisor_or_base_locus", escape_ok,
                  std::isinf(min_b) ? "base_locus=empty" : "min_b_dist=" + format_double(min_b));

  // bijection at the bottom rung
  auto bc = bijection_check(scene, tracks, crits, cfg.tol.match_radius);
  report.add_flag(prefix + "_bijection", "stratum_track_bijection", bc.one_to_one,
                  "tracks=" + std::to_string(bc.to_stratum_tracks) +
                      " stratum_crits=" + std::to_string(bc.stratum_crit_count));
}

void run_ladder_cmd(const RunConfig& cfg, const Scene& scene, Report& report) {
  add_scene_provenance(report, scene);
  LadderOptions opt;
  opt.ladder = cfg.eps_ladder;
  opt.seeds = cfg.seeds;
  opt.seeds.seed = cfg.seed;
  opt.slope_tol = cfg.tol.slope;
  opt.match_radius = cfg.tol.match_radius;
  auto tracks = run_ladder(scene, opt);
  report.add_flag("ladder_tracks", "continuation_tracks_exist", !tracks.empty(),
                  "tracks=" + std::to_string(tracks.size()));
  std::vector<StratumCrit> crits;
  if (!scene.stratum.empty()) crits = find_stratum_critical_points(scene, cfg.seed);
  add_ladder_checks(cfg, scene, tracks, crits, report, "ladder");
  if (wants(cfg, "csv")) write_tracks_csv(cfg.out_dir + "/tracks.csv", tracks);
  if (wants(cfg, "json")) write_tracks_json(cfg.out_dir + "/tracks.json", tracks);
}

void run_thimble_cmd(const RunConfig& cfg, const Scene& scene, Report& report) {
  if (scene.truth.stratum_crit_points.empty())
    throw Error(Errc::ConfigError, "thimble needs a scene with a stratum critical point");
  ChartPoint p = scene.truth.stratum_crit_points.front();
  add_scene_provenance(report, scene);
  ThimbleOptions opt;
  opt.angular_seeds = cfg.thimble_angular;
  opt.base_steps = cfg.thimble_base_steps;
  opt.t0_factor = cfg.thimble_t0_factor;
  opt.base_sign = cfg.base_sign;
  opt.sweep_fraction = cfg.thimble_sweep_fraction;
  ThimbleMesh mesh = build_thimble(scene, p, cfg.eps, opt);

  int bad_lines = 0;
  for (bool ok : mesh.line_ok)
    if (!ok) bad_lines++;
  report.add_flag("thimble_lines", "transport_lines_complete", bad_lines == 0,
                  "failed_lines=" + std::to_string(bad_lines));
  report.add("thimble_lagrangian", "thimble_lagrangian_residual", mesh.max_relative_residual,
             cfg.tol.lagrangian_residual);

  auto samples = sample_fiber_points(scene, cfg.eps, 100, cfg.seed);
  auto rep = lefschetz_alignment(scene, cfg.eps, samples);
  report.add("alignment_horizontal", "characteristic_alignment_horizontal", rep.max_res_horizontal,
             cfg.tol.alignment);
  report.add("alignment_radial", "characteristic_alignment_radial", rep.max_res_radial,
             cfg.tol.alignment);

  if (wants(cfg, "csv")) write_mesh_csv(cfg.out_dir + "/mesh.csv", mesh);
}

void run_glue_cmd(const RunConfig& cfg, const Scene& scene, Report& report) {
  if (scene.truth.stratum_crit_points.empty())
    throw Error(Errc::ConfigError, "glue needs the local-model stratum critical point");
  ChartPoint p = scene.truth.stratum_crit_points.front();
  add_scene_provenance(report, scene);
  GluedStructure gs = build_glued(scene, p, cfg.eps0, cfg.eps);
  GluedVerification v = verify_glued(gs, 240, cfg.seed);

  report.add("glue_branch_inner", "glued_branch_identity_inner", v.branch_inner_max, 0.0);
  report.add("glue_branch_outer", "glued_branch_identity_outer", v.branch_outer_max, 0.0);
  report.add("glue_dlambda", "glued_primitive_of_omega", v.dlambda_residual, cfg.tol.dlambda);
  report.add("glue_dxi", "adapted_primitive_of_omega", v.dxi_residual, cfg.tol.dxi);
  report.add("glue_dH", "primitive_gradient_identity", v.dH_residual, 1e-9);
  report.add("glue_H_path", "primitive_path_independence", v.path_independence, 1e-9);
  report.add_flag("glue_H_drho", "cutoff_correction_bounded", v.h_drho_bounded,
                  "C_H=" + format_double(v.c_H) + " C_rho=" + format_double(v.c_rho));
  report.add_flag("glue_gradlike", "glued_gradient_like_positivity", v.gradlike_positive,
                  "min=" + format_double(v.min_gradlike));
  report.add_flag("glue_interp", "interpolation_gradient_like", v.interp_positive,
                  "min=" + format_double(v.min_interp_gradlike) +
                      " inner_raw_min=" + format_double(v.min_interp_inner));

  ThimbleOptions topt;
  topt.angular_seeds = cfg.thimble_angular;
  topt.base_steps = cfg.thimble_base_steps;
  topt.t0_factor = cfg.thimble_t0_factor;
  ThimbleMesh mesh = build_thimble(scene, p, cfg.eps, topt);
  GluedUnstableReport u = glued_unstable_check(gs, mesh, cfg.seed);
  report.add("glue_unique_crit", "glued_unique_critical_point", u.dist_to_p, cfg.tol.crit_at_p,
             "found=" + std::to_string(u.critical_points_found));
  report.add_flag("glue_crit_count", "glued_critical_point_count", u.critical_points_found == 1);
  report.add("glue_tangency", "glued_field_thimble_tangency", u.mesh_tangency_residual,
             cfg.tol.tangency);
  report.add_flag("glue_margin_sign", "adapted_margin_sign_consistent",
                  u.sign_consistent && u.min_margin > 0.0,
                  "sign=" + std::to_string(u.sign) + " min=" + format_double(u.min_margin));
}

// the full invariant suite across the built-in scenes
void run_checkall(const RunConfig& cfg, Report& report) {
  Rng rng(cfg.seed, 99);

  struct SceneCfg {
    const char* name;
    int n;
  };

  // --- kernel invariants on every builtin scene --------------------------
  for (SceneCfg scfg : {SceneCfg{"local_nc", 2}, SceneCfg{"cpn_o2h", 2}, SceneCfg{"cpn_x_cpn", 2}}) {
    Scene sc = builtin_scene(scfg.name, {.n = scfg.n});
    double worst_g = 0.0, worst_h = 0.0, worst_omega = 0.0, worst_liouville = 0.0, worst_dc = 0.0;
    bool positivity = true;
    int checked = 0;
    while (checked < 100) {
      ChartPoint p{rng.uniform_int(sc.num_charts()), Vec(sc.dim_real())};
      for (auto& c : p.coords) c = rng.uniform(-0.7, 0.7);
      double eps = 0.1;
      if (std::norm(sc.seps_value(p, eps)) < 1e-3 || std::norm(sc.seps_value(p, 0.05)) < 1e-3)
        continue;
      Jet2 jet, fd;
      try {
        jet = eval_jet2(sc, p, eps);
        const int nv = sc.dim_real();
        const double h = 1e-5;
        fd.grad.resize(nv);
        fd.hess = Mat(nv, nv);
        double f0 = sc.phi(p, eps);
        auto at = [&](int k, double dk, int l, double dl) {
          ChartPoint q = p;
          q.coords[k] += dk;
          if (l >= 0) q.coords[l] += dl;
          return sc.phi(q, eps);
        };
        for (int k = 0; k < nv; ++k) {
          fd.grad[k] = (at(k, h, -1, 0) - at(k, -h, -1, 0)) / (2 * h);
          fd.hess(k, k) = (at(k, h, -1, 0) - 2 * f0 + at(k, -h, -1, 0)) / (h * h);
          for (int l = k + 1; l < nv; ++l) {
            double v =
                (at(k, h, l, h) - at(k, h, l, -h) - at(k, -h, l, h) + at(k, -h, l, -h)) / (4 * h * h);
            fd.hess(k, l) = fd.hess(l, k) = v;
          }
        }
      } catch (const Error&) {
        continue;
      }
      double gsc = std::max(1.0, norm_inf(fd.grad));
      for (int k = 0; k < sc.dim_real(); ++k)
        worst_g = std::max(worst_g, std::abs(jet.grad[k] - fd.grad[k]) / gsc);
      double hsc = std::max(1.0, fd.hess.max_abs());
      for (int a = 0; a < sc.dim_real(); ++a)
        for (int b = 0; b < sc.dim_real(); ++b)
          worst_h = std::max(worst_h, std::abs(jet.hess(a, b) - fd.hess(a, b)) / hsc);

      Mat w1 = omega_from_hess(jet.hess, sc.dc_sign);
      Mat w2 = omega_from_hess(eval_jet2(sc, p, 0.05).hess, sc.dc_sign);
      for (int a = 0; a < sc.dim_real(); ++a)
        for (int b = 0; b < sc.dim_real(); ++b)
          worst_omega = std::max(worst_omega, std::abs(w1(a, b) - w2(a, b)));

      SymplecticSample ss;
      try {
        ss = symplectic_sample(sc, p, eps);
      } catch (const Error&) {
        continue;
      }
      Vec resid = mat_vec(ss.omega.transposed(), ss.liouville) - ss.lambda;
      worst_liouville = std::max(worst_liouville, norm(resid) / std::max(norm(ss.lambda), 1e-30));
      const int nv = sc.dim_real();
      double dscale = std::max(1.0, norm_inf(jet.grad));
      for (int k = 0; k < nv; ++k) {
        Vec e(nv, 0.0);
        e[k] = 1.0;
        if (dot(e, mat_vec(ss.omega, apply_J(e))) <= 0.0) positivity = false;
        worst_dc = std::max(
            worst_dc, std::abs(ss.lambda[k] + sc.dc_sign * dot(jet.grad, apply_J(e))) / dscale);
      }
      ++checked;
    }
    std::string nm(scfg.name);
    report.add(nm + "_ad_fd_grad", "jet_gradient_vs_finite_differences", worst_g, cfg.tol.ad_fd_grad);
    report.add(nm + "_ad_fd_hess", "jet_hessian_vs_finite_differences", worst_h, cfg.tol.ad_fd_hess);
    report.add(nm + "_omega_eps", "two_form_eps_independence", worst_omega,
               cfg.tol.omega_eps_independence);
    report.add(nm + "_liouville", "liouville_duality_identity", worst_liouville,
               cfg.tol.liouville_identity);
    report.add_flag(nm + "_positivity", "kahler_positivity", positivity);
    report.add(nm + "_dc_identity", "dc_sign_identity", worst_dc, cfg.tol.dc_identity);
  }

  // --- Morse-Bott circle detection ----------------------------------------
  {
    Scene sc = builtin_scene("cpn_o2h", {.n = 2});
    SeedPlan plan;
    plan.grid_per_axis = 3;
    plan.random_count = 120;
    plan.seed = cfg.seed;
    auto recs = find_critical_points(sc, 0.0, plan);
    bool mb_ok = !recs.empty();
    for (const auto& r : recs)
      if (r.nullity != 1 || !r.morse_bott) mb_ok = false;
    report.add_flag("morse_bott_circle", "degenerate_circle_detection", mb_ok,
                    "representatives=" + std::to_string(recs.size()));
  }

  // --- product scene critical indices -------------------------------------
  {
    Scene sc = builtin_scene("cpn_x_cpn", {.n = 2});
    SeedPlan plan = cfg.seeds;
    plan.seed = cfg.seed;
    auto recs = find_critical_points(sc, 0.05, plan);
    std::vector<int> idx;
    for (const auto& r : recs) idx.push_back(r.index);
    std::sort(idx.begin(), idx.end());
    bool ok = idx == std::vector<int>{0, 2, 4};
    double worst_grad = 0.0;
    for (const auto& r : recs) worst_grad = std::max(worst_grad, r.grad_norm);
    report.add_flag("product_scene_indices", "product_scene_critical_indices", ok,
                    "count=" + std::to_string(recs.size()));
    report.add("product_scene_grad", "critical_point_convergence", worst_grad, cfg.tol.grad_norm);
  }

  // --- ladders with the index-shift / slope / value / escape checks -------
  for (SceneCfg lcfg : {SceneCfg{"cpn_o2h", 2}, SceneCfg{"cpn_o2h", 3}, SceneCfg{"cpn_x_cpn", 2}}) {
    Scene sc = builtin_scene(lcfg.name, {.n = lcfg.n});
    LadderOptions opt;
    opt.ladder = cfg.eps_ladder;
    opt.seeds = cfg.seeds;
    opt.seeds.seed = cfg.seed;
    opt.slope_tol = cfg.tol.slope;
    opt.match_radius = cfg.tol.match_radius;
    auto tracks = run_ladder(sc, opt);
    auto crits = find_stratum_critical_points(sc, cfg.seed);
    std::string prefix = std::string(lcfg.name) + "_n" + std::to_string(lcfg.n);
    add_ladder_checks(cfg, sc, tracks, crits, report, prefix);
  }

  // --- stratum tangency checks on the product scene ------------------------
  {
    Scene sc = builtin_scene("cpn_x_cpn", {.n = 2});
    auto samples = sample_stratum(sc, 10, cfg.seed);
    auto rep = stratum_tangency_checks(sc, 0.05, samples, 1e-8, cfg.tol.tangency_liouville, cfg.tol.tangency_crit);
    report.add("stratum_tangency_hypothesis", "metric_derivative_on_normal_complement", rep.max_dg_on_E,
               cfg.tol.tangency_hypothesis);
    report.add_flag("stratum_tangency_liouville", "liouville_tangent_to_stratum",
                    rep.conclusion_b == TangencyStatus::Pass,
                    "residual=" + format_double(rep.max_liouville_normal));
    report.add_flag("stratum_tangency_crit", "stratum_critical_points_persist",
                    rep.conclusion_c == TangencyStatus::Pass,
                    "residual=" + format_double(rep.max_grad_at_stratum_crit));
  }

  // --- characteristic alignment on all scenes ------------------------------
  for (SceneCfg scfg : {SceneCfg{"local_nc", 2}, SceneCfg{"cpn_o2h", 2}, SceneCfg{"cpn_x_cpn", 2}}) {
    Scene sc = builtin_scene(scfg.name, {.n = scfg.n});
    auto samples = sample_fiber_points(sc, 0.1, 100, cfg.seed);
    auto rep = lefschetz_alignment(sc, 0.1, samples);
    std::string nm(scfg.name);
    report.add(nm + "_align_h", "characteristic_alignment_horizontal", rep.max_res_horizontal,
               cfg.tol.alignment);
    report.add(nm + "_align_r", "characteristic_alignment_radial", rep.max_res_radial,
               cfg.tol.alignment);
  }

  // --- thimble geometry -----------------------------------------------------
  {
    Scene sc = builtin_scene("local_nc", {.n = 2});
    ChartPoint p{0, Vec(4, 0.0)};
    ThimbleOptions opt;
    opt.angular_seeds = cfg.thimble_angular;
    opt.base_steps = cfg.thimble_base_steps;
    opt.t0_factor = cfg.thimble_t0_factor;
    ThimbleMesh mesh = build_thimble(sc, p, 0.04, opt);
    double analytic = 0.0;
    for (size_t j = 0; j < mesh.points.size(); ++j)
      for (int k = 0; k < mesh.transverse_count; ++k) {
        const auto& c = mesh.points[j][k].coords;
        std::complex<double> z0{c[0], c[1]}, z1{c[2], c[3]};
        analytic = std::max(analytic, std::abs(z1 - std::conj(z0)));
      }
    report.add("thimble_analytic", "thimble_matches_conjugate_plane", analytic, cfg.tol.mesh_match);
    report.add("thimble_lagrangian", "thimble_lagrangian_residual", mesh.max_relative_residual,
               cfg.tol.lagrangian_residual);
    ThimbleMesh small = build_thimble(sc, p, 0.01, opt);
    report.add("thimble_nesting", "thimble_nesting", mesh_agreement(sc, mesh, small, 1e-15),
               cfg.tol.nesting);
  }

  // --- gluing suite with the scaling matrix ---------------------------------
  {
    Scene sc = builtin_scene("local_nc", {.n = 2});
    ChartPoint p{0, Vec(4, 0.0)};
    ThimbleOptions topt;
    topt.angular_seeds = 12;
    topt.base_steps = 12;
    struct GCfg {
      double eps0, eps;
      const char* tag;
    };
    for (GCfg g :
         {GCfg{0.25, 0.02, "ref"}, GCfg{0.25, 0.01, "half_eps"}, GCfg{0.125, 0.01, "half_both"}}) {
      GluedStructure gs = build_glued(sc, p, g.eps0, g.eps);
      GluedVerification v = verify_glued(gs, 200, cfg.seed);
      std::string nm = std::string("glue_") + g.tag;
      report.add(nm + "_branch", "glued_branch_identity_inner",
                 std::max(v.branch_inner_max, v.branch_outer_max), 0.0);
      report.add(nm + "_dlambda", "glued_primitive_of_omega", v.dlambda_residual, cfg.tol.dlambda);
      report.add_flag(nm + "_H_drho", "cutoff_correction_bounded", v.h_drho_bounded);
      report.add_flag(nm + "_gradlike", "glued_gradient_like_positivity", v.gradlike_positive,
                      "min=" + format_double(v.min_gradlike));
      report.add_flag(nm + "_interp", "interpolation_gradient_like", v.interp_positive,
                      "inner_raw_min=" + format_double(v.min_interp_inner));
      ThimbleMesh mesh = build_thimble(sc, p, g.eps, topt);
      GluedUnstableReport u = glued_unstable_check(gs, mesh, cfg.seed);
      report.add(nm + "_unique_crit", "glued_unique_critical_point", u.dist_to_p, cfg.tol.crit_at_p);
      report.add(nm + "_tangency", "glued_field_thimble_tangency", u.mesh_tangency_residual,
                 cfg.tol.tangency);
    }
  }

  // --- unstable plane example ------------------------------------------------
  {
    Scene sc = builtin_scene("local_nc", {.n = 2});
    CritRecord rec = classify(sc, ChartPoint{0, Vec(4, 0.0)}, 1.0);
    AffineSubspace plane;
    plane.chart = 0;
    plane.base = Vec(4, 0.0);
    plane.basis = orthonormalize({Vec{1, 0, -1, 0}, Vec{0, 1, 0, 1}});
    auto rep = unstable_plane_check(sc, rec, plane, 8, 0.9);
    report.add("unstable_plane_drift", "unstable_plane_invariance", rep.max_drift,
               cfg.tol.unstable_drift);
    report.add_flag("unstable_plane_monotone", "potential_increases_along_flow", rep.phi_monotone);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weinstein-lab: numerical laboratory for Weinstein structures on divisor complements"};
  app.require_subcommand(1);

  std::string config_path;
  unsigned seed_val = 0;
  std::string out_val;
  bool have_seed = false, have_out = false;

  for (const char* name : {"crit", "ladder", "thimble", "glue", "checkall"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config path")->required();
    sub->add_option("--seed", seed_val, "seed override")->each([&](const std::string&) {
      have_seed = true;
    });
    sub->add_option("--out", out_val, "output directory override")->each([&](const std::string&) {
      have_out = true;
    });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    std::ifstream in(config_path);
    if (!in) throw Error(Errc::ConfigError, "cannot open config: " + config_path);
    json j;
    try {
      j = json::parse(in);
    } catch (const std::exception& e) {
      throw Error(Errc::ConfigError, std::string("config parse error: ") + e.what());
    }

    RunConfig cfg = parse_config(j);
    std::string command = app.get_subcommands().front()->get_name();
    if (!cfg.command.empty() && cfg.command != command)
      throw Error(Errc::ConfigError,
                  "config command '" + cfg.command + "' does not match '" + command + "'");
    cfg.command = command;
    if (have_seed) cfg.seed = seed_val;
    if (have_out) {
      cfg.out_dir = out_val;
    } else if (const char* env = std::getenv("WEINSTEIN_LAB_OUT")) {
      cfg.out_dir = env;
    }

    std::filesystem::create_directories(cfg.out_dir);

    Report report;
    auto t0 = std::chrono::steady_clock::now();
    if (command == "checkall") {
      run_checkall(cfg, report);
    } else {
      Scene scene = scene_from_json(cfg.scene_json.dump());
      if (command == "crit")
        run_crit(cfg, scene, report);
      else if (command == "ladder")
        run_ladder_cmd(cfg, scene, report);
      else if (command == "thimble")
        run_thimble_cmd(cfg, scene, report);
      else
        run_glue_cmd(cfg, scene, report);
    }
    auto t1 = std::chrono::steady_clock::now();

    if (wants(cfg, "json"))
      write_summary_json(cfg.out_dir + "/summary.json", resolved_config_json(cfg).dump(), report);

    int failed = 0;
    for (const auto& row : report.checks) {
      if (!row.pass) {
        failed++;
        std::cerr << "FAIL " << row.name << " residual=" << format_double(row.residual)
                  << " threshold=" << format_double(row.threshold) << "\n";
      }
    }
    std::cerr << command << ": " << report.checks.size() - failed << "/" << report.checks.size()
              << " checks passed, "
              << std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count() << " ms\n";
    return failed == 0 ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error (" << errc_name(e.code()) << "): " << e.what() << "\n";
    return e.code() == Errc::ConfigError || e.code() == Errc::UnknownScene ||
                   e.code() == Errc::BadParams
               ? 2
               : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
