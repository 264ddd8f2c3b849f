#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "wlab/continuation.hpp"

using namespace wlab;

namespace {

LadderOptions light_ladder(unsigned seed = 1) {
  LadderOptions opt;
  opt.seeds.grid_per_axis = 3;
  opt.seeds.random_count = 60;
  opt.seeds.seed = seed;
  return opt;
}

}  // namespace

TEST_CASE("stratum critical points: counts and indices per scene") {
  {
    Scene sc = builtin_scene("cpn_x_cpn", {.n = 2});
    auto crits = find_stratum_critical_points(sc);
    REQUIRE(crits.size() == 2);  // the two coordinate points
    std::vector<int> idx{crits[0].index, crits[1].index};
    std::sort(idx.begin(), idx.end());
    CHECK(idx == std::vector<int>{0, 2});
    for (const auto& c : crits) {
      CHECK(c.nullity == 0);
      double best = 1e300;
      for (const auto& expect : sc.truth.stratum_crit_points)
        best = std::min(best, sc.distance(c.location.point, expect));
      CHECK(best < 1e-9);
    }
  }
  {
    Scene sc = builtin_scene("cpn_o2h", {.n = 2});
    auto crits = find_stratum_critical_points(sc);
    REQUIRE(crits.size() == 1);  // S-bar is the single point [0:0:1]
    CHECK(crits[0].index == 0);
    CHECK(crits[0].spectrum.empty());
  }
  {
    Scene sc = builtin_scene("cpn_o2h", {.n = 3});
    auto crits = find_stratum_critical_points(sc);
    REQUIRE(crits.size() == 2);
    std::vector<int> idx{crits[0].index, crits[1].index};
    std::sort(idx.begin(), idx.end());
    CHECK(idx == std::vector<int>{0, 1});  // 4(1 - |a3/a2|) < 0 at one of them
  }
  {
    Scene sc = builtin_scene("local_nc", {.n = 2});
    auto crits = find_stratum_critical_points(sc);
    REQUIRE(crits.size() == 1);
    CHECK(crits[0].index == 0);
  }
}

TEST_CASE("ladder guards: empty input and bad ladders") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  LadderOptions opt = light_ladder();
  opt.ladder = {};
  CHECK(run_ladder(sc, opt).empty());

  opt.ladder = {0.1, 0.2};
  CHECK_THROWS_AS(run_ladder(sc, opt), Error);

  opt.ladder = {1e-5, 1e-7};
  CHECK_THROWS_AS(run_ladder(sc, opt), Error);
}

TEST_CASE("cpn_x_cpn ladder: three tracks, one constant, two to the stratum") {
  Scene sc = builtin_scene("cpn_x_cpn", {.n = 2});
  auto tracks = run_ladder(sc, light_ladder());
  REQUIRE(tracks.size() == 3);

  int to_phi0 = 0, to_stratum = 0;
  for (const auto& t : tracks) {
    CHECK_FALSE(t.lost);
    CHECK_FALSE(t.split);
    CHECK_FALSE(t.index_changed_mid_ladder);
    CHECK(t.records.size() == 7);
    if (t.limit_class == LimitClass::ToCritPhi0) {
      to_phi0++;
      // the phi_0 minimum stays put along the whole ladder
      CHECK(t.max_step < 1e-8);
      CHECK(t.records.back().index == 0);
    }
    if (t.limit_class == LimitClass::ToStratum) to_stratum++;
  }
  CHECK(to_phi0 == 1);
  CHECK(to_stratum == 2);

  auto crits = find_stratum_critical_points(sc);
  auto bc = bijection_check(sc, tracks, crits);
  CHECK(bc.to_stratum_tracks == 2);
  CHECK(bc.stratum_crit_count == 2);
  CHECK(bc.one_to_one);
}

TEST_CASE("index shift: stratum indices {0, 2} continue to {2, 4}") {
  Scene sc = builtin_scene("cpn_x_cpn", {.n = 2});
  auto tracks = run_ladder(sc, light_ladder());
  auto crits = find_stratum_critical_points(sc);
  int shifted = 0, skipped = 0;
  for (const auto& t : tracks) {
    auto res = verify_index_shift(t, sc, crits);
    if (res.status == CheckStatus::NotApplicable) {
      skipped++;
      continue;
    }
    CHECK(res.status == CheckStatus::Pass);
    CHECK(res.track_index_at_bottom == res.stratum_index + 2);
    shifted++;
  }
  CHECK(shifted == 2);
  CHECK(skipped == 1);
}

TEST_CASE("local model ladder: one stationary track at the origin, index 2 = 0 + 2") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  LadderOptions opt = light_ladder();
  opt.seeds.box_radius = 0.5;
  auto tracks = run_ladder(sc, opt);
  REQUIRE(tracks.size() == 1);
  const Track& t = tracks[0];
  CHECK(t.limit_class == LimitClass::ToStratum);
  CHECK(t.max_step < 1e-9);  // the origin is critical for every eps
  for (const auto& rec : t.records) CHECK(norm(rec.point.coords) < 1e-9);

  auto crits = find_stratum_critical_points(sc);
  auto res = verify_index_shift(t, sc, crits);
  CHECK(res.status == CheckStatus::Pass);
  CHECK(res.track_index_at_bottom == 2);
  CHECK(res.stratum_index == 0);
}

TEST_CASE("eigenvalue slope fits: exactly four diverging at rate 1/eps, signs 2+2") {
  Scene sc = builtin_scene("cpn_x_cpn", {.n = 2});
  auto tracks = run_ladder(sc, light_ladder());
  auto crits = find_stratum_critical_points(sc);

  for (const auto& t : tracks) {
    if (t.limit_class != LimitClass::ToStratum) continue;
    int diverging = 0, neg = 0, pos = 0;
    for (const auto& f : t.slope_fits)
      if (f.diverging) {
        diverging++;
        (f.sign < 0 ? neg : pos)++;
      }
    CHECK(diverging == 4);
    CHECK(neg == 2);
    CHECK(pos == 2);

    // the remaining eigenvalues converge to the stratum Hessian spectrum
    auto limits = middle_spectrum_limits(t);
    REQUIRE(limits.size() == 4);
    int best = -1;
    double bd = 1e300;
    for (size_t i = 0; i < crits.size(); ++i) {
      double d = sc.distance(t.limit_point, crits[i].location.point);
      if (d < bd) {
        bd = d;
        best = static_cast<int>(i);
      }
    }
    REQUIRE(best >= 0);
    const Vec& strat = crits[best].spectrum;
    REQUIRE(strat.size() == 4);
    for (int k = 0; k < 4; ++k)
      CHECK(std::abs(limits[k] - strat[k]) < 1e-3 * std::max(1.0, std::abs(strat[k])));

    // Cauchy along the last ladder decade: relative change < 1e-3
    const auto& bot = t.records.back().spectrum;
    const auto& dec = t.records[t.records.size() - 4].spectrum;  // eps 1e-2 vs 1e-3
    for (int k = 2; k < 6; ++k)
      CHECK(std::abs(bot[k] - dec[k]) < 1e-3 * std::max(1.0, std::abs(bot[k])));
  }
}

TEST_CASE("value asymptotics: phi_eps(p_eps) + 2 log eps converges to -log ||h(p)||^2") {
  Scene sc = builtin_scene("cpn_x_cpn", {.n = 2});
  auto tracks = run_ladder(sc, light_ladder());
  int applicable = 0;
  for (const auto& t : tracks) {
    auto res = value_asymptotics(t, sc);
    if (res.status == CheckStatus::NotApplicable) continue;
    applicable++;
    CHECK(res.status == CheckStatus::Pass);
    CHECK(res.mismatch < 1e-3);
    CHECK(res.deviation < 1e-3);
  }
  CHECK(applicable == 2);

  // the local model is exact: phi_eps(0) + 2 log eps = 0
  Scene lc = builtin_scene("local_nc", {.n = 2});
  LadderOptions opt = light_ladder();
  opt.seeds.box_radius = 0.5;
  auto ltracks = run_ladder(lc, opt);
  REQUIRE(ltracks.size() == 1);
  auto res = value_asymptotics(ltracks[0], lc);
  CHECK(res.status == CheckStatus::Pass);
  CHECK(std::abs(res.limit) < 1e-12);
  CHECK(res.deviation < 1e-12);
}

TEST_CASE("escape evidence: stratum tracks stay far from D_0 off S and from B") {
  Scene sc = builtin_scene("cpn_x_cpn", {.n = 2});
  auto tracks = run_ladder(sc, light_ladder());
  auto rows = escape_evidence(sc, tracks);
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    CHECK_FALSE(row.violated);
    CHECK(row.min_base_locus_distance > 0.1);
    CHECK(row.min_divisor_distance > 0.05);
  }

  // local model: B is empty, sentinel +inf
  Scene lc = builtin_scene("local_nc", {.n = 2});
  LadderOptions opt = light_ladder();
  opt.seeds.box_radius = 0.5;
  auto lrows = escape_evidence(lc, run_ladder(lc, opt));
  REQUIRE(lrows.size() == 1);
  CHECK(std::isinf(lrows[0].min_base_locus_distance));
  CHECK_FALSE(lrows[0].violated);
}

TEST_CASE("escape evidence flags a synthetic track resting on the divisor") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  Track fake;
  fake.limit_class = LimitClass::ToStratum;
  // a point on the branch {z0 = 0} at distance 0.5 from the stratum
  ChartPoint q{0, Vec{0.0, 0.0, 0.5, 0.0}};
  fake.ladder = {0.1, 0.05};
  CritRecord rec;
  rec.point = q;
  fake.records = {rec, rec};
  fake.limit_point = q;
  auto rows = escape_evidence(sc, {fake});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].min_divisor_distance < 1e-12);
  CHECK(rows[0].violated);
}

TEST_CASE("tangency checks (a)-(c) on the product scene") {
  Scene sc = builtin_scene("cpn_x_cpn", {.n = 2});
  auto samples = sample_stratum(sc, 10, 5);
  auto rep = stratum_tangency_checks(sc, 0.05, samples);
  CHECK(rep.hypothesis_holds);
  CHECK(rep.max_dg_on_E < 1e-10);
  CHECK(rep.conclusion_b == TangencyStatus::Pass);
  CHECK(rep.max_liouville_normal < 1e-8);
  CHECK(rep.conclusion_c == TangencyStatus::Pass);
  CHECK(rep.max_grad_at_stratum_crit < 1e-10);
}

TEST_CASE("tangency checks: h = 1 zeroes the hypothesis residual on the local model") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  auto samples = sample_stratum(sc, 3, 5);
  auto rep = stratum_tangency_checks(sc, 0.1, samples);
  // -log||h||^2 = g here and dg vanishes identically on the stratum
  CHECK(rep.max_dg_on_E == 0.0);
  CHECK(rep.hypothesis_holds);
}

TEST_CASE("tangency checks gate on the hypothesis: a perturbed metric reports NotImplied") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  // break dg|_E = 0 at the stratum with a linear term in x_0
  sc.charts[0].g = RealExpr::sum({sc.charts[0].g, RealExpr::scale(0.2, RealExpr::coordinate(0))});
  calibrate_dc_sign(sc);
  auto samples = sample_stratum(sc, 3, 5);
  auto rep = stratum_tangency_checks(sc, 0.1, samples);
  CHECK_FALSE(rep.hypothesis_holds);
  CHECK(rep.max_dg_on_E > 0.1);
  CHECK(rep.conclusion_b == TangencyStatus::NotImplied);
  CHECK(rep.conclusion_c == TangencyStatus::NotImplied);
}

TEST_CASE("index shift with no stratum match raises NoMatch") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  LadderOptions opt = light_ladder();
  opt.seeds.box_radius = 0.5;
  auto tracks = run_ladder(sc, opt);
  REQUIRE(!tracks.empty());
  CHECK_THROWS_AS(verify_index_shift(tracks[0], sc, {}), Error);  // empty crit list
}

TEST_CASE("threshold rung: index constant from the top of the ladder here") {
  Scene sc = builtin_scene("cpn_x_cpn", {.n = 2});
  auto tracks = run_ladder(sc, light_ladder());
  for (const auto& t : tracks) CHECK(t.threshold_rung == 0);
}
