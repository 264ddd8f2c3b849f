#include <doctest.h>

#include <cmath>

#include "wlab/gluing.hpp"
#include "wlab/rng.hpp"

using namespace wlab;

namespace {

struct Setup {
  Scene scene = builtin_scene("local_nc", {.n = 2});
  ChartPoint p{0, Vec(4, 0.0)};
};

}  // namespace

TEST_CASE("build guards: scene and scale preconditions") {
  Setup s;
  CHECK_THROWS_AS(build_glued(builtin_scene("cpn_o2h", {.n = 2}), s.p, 0.25, 0.02), Error);
  CHECK_THROWS_AS(build_glued(s.scene, s.p, 0.25, 0.05), Error);  // eps/eps0 > 0.1
}

TEST_CASE("frame, cutoff, and primitive basics") {
  Setup s;
  GluedStructure gs = build_glued(s.scene, s.p, 0.25, 0.02);

  // H(p) = 0 exactly
  CHECK(gs.primitive_H(s.p) == 0.0);

  // rho: 0 below eps0/4, 1 above eps0/2, slope bounded by 7.5 / eps0
  CHECK(gs.rho(0.25 / 8.0) == 0.0);
  CHECK(gs.rho(0.25) == 1.0);
  double max_slope = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    double r = 0.25 / 4.0 + (0.25 / 4.0) * i / 1000.0;
    max_slope = std::max(max_slope, std::abs(gs.drho_dr(r)));
  }
  CHECK(max_slope <= 7.5 / 0.25 + 1e-9);
  // the quintic smoothstep attains the bound at the window midpoint
  CHECK(gs.drho_dr(0.25 * 0.375) == doctest::Approx(7.5 / 0.25).epsilon(1e-12));
  CHECK(7.5 / 0.25 < 10.0 / 0.25);  // inside the required slope budget

  // frame omega-relations to 1e-12
  Jet2 jet = eval_jet2(s.scene, s.p, 0.02);
  Mat w = omega_from_hess(jet.hess, s.scene.dc_sign);
  const Mat& f = gs.frame();
  auto col = [&](int c) {
    Vec v(4);
    for (int k = 0; k < 4; ++k) v[k] = f(k, c);
    return v;
  };
  double want[4][4] = {{0, 1, 0, 0}, {-1, 0, 0, 0}, {0, 0, 0, 1}, {0, 0, -1, 0}};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(std::abs(dot(col(i), mat_vec(w, col(j))) - want[i][j]) < 1e-12);

  // the u-plane is the thimble plane {z1 = conj z0}
  Vec uv{0.1, 0.0, -0.07, 0.0};
  ChartPoint q = gs.from_uv(uv);
  std::complex<double> z0{q.coords[0], q.coords[1]}, z1{q.coords[2], q.coords[3]};
  CHECK(std::abs(z1 - std::conj(z0)) < 1e-13);
}

TEST_CASE("verification suite at the reference configuration (0.25, 0.02)") {
  Setup s;
  GluedStructure gs = build_glued(s.scene, s.p, 0.25, 0.02);
  GluedVerification rep = verify_glued(gs, 240, 3);

  // exact branch identities
  CHECK(rep.branch_inner_max == 0.0);
  CHECK(rep.branch_outer_max == 0.0);

  // numeric exterior derivatives
  CHECK(rep.dxi_residual < 1e-9);
  CHECK(rep.dlambda_residual < 1e-6);
  CHECK(rep.dH_residual < 1e-9);
  CHECK(rep.path_independence < 1e-9);

  // |H d(rho)| within the measured constant
  CHECK(rep.h_drho_bounded);
  CHECK(rep.max_H_drho <= 0.5 * std::max(rep.c_H, rep.c_rho));

  // gradient-like positivity, plain and along the interpolation family
  CHECK(rep.gradlike_positive);
  CHECK(rep.min_gradlike > 0.0);
  CHECK(rep.interp_positive);
  CHECK(rep.min_interp_gradlike > 0.0);
}

TEST_CASE("glued structure scales: (eps/2, eps0) and (eps/2, eps0/2)") {
  Setup s;
  for (auto [e0, e] : {std::pair{0.25, 0.01}, std::pair{0.125, 0.01}}) {
    GluedStructure gs = build_glued(s.scene, s.p, e0, e);
    GluedVerification rep = verify_glued(gs, 160, 5);
    CAPTURE(e0);
    CAPTURE(e);
    CHECK(rep.branch_inner_max == 0.0);
    CHECK(rep.branch_outer_max == 0.0);
    CHECK(rep.dlambda_residual < 1e-6);
    CHECK(rep.h_drho_bounded);
    CHECK(rep.gradlike_positive);
  }
}

TEST_CASE("unique critical point of phi~ at p and tangency of Z~ to the thimble") {
  Setup s;
  GluedStructure gs = build_glued(s.scene, s.p, 0.25, 0.02);
  ThimbleOptions topt;
  topt.angular_seeds = 12;
  topt.base_steps = 12;
  ThimbleMesh mesh = build_thimble(s.scene, s.p, 0.02, topt);

  GluedUnstableReport rep = glued_unstable_check(gs, mesh, 1);
  CHECK(rep.critical_points_found == 1);
  CHECK(rep.unique_at_p);
  CHECK(rep.dist_to_p < 1e-8);

  CHECK(rep.tangency_ok);
  CHECK(rep.mesh_tangency_residual < 1e-6);

  // gradient-like margin of (xi, psi) along the punctured thimble: one sign
  CHECK(rep.sign_consistent);
  CHECK(rep.sign == 1);
  CHECK(rep.min_margin > 0.0);
}

TEST_CASE("restricting the search to r < eps0/4 still finds the same unique point") {
  Setup s;
  GluedStructure gs = build_glued(s.scene, s.p, 0.25, 0.02);
  ThimbleOptions topt;
  topt.angular_seeds = 6;
  topt.base_steps = 6;
  ThimbleMesh mesh = build_thimble(s.scene, s.p, 0.02, topt);
  GluedUnstableReport rep = glued_unstable_check(gs, mesh, 1, /*inner_box_only=*/0.25 / 4.0 * 0.9);
  CHECK(rep.critical_points_found == 1);
  CHECK(rep.dist_to_p < 1e-8);
}

TEST_CASE("phi~ jet matches finite differences of the phi~ evaluator") {
  Setup s;
  GluedStructure gs = build_glued(s.scene, s.p, 0.25, 0.02);
  Rng rng(17);
  for (int i = 0; i < 10; ++i) {
    Vec uv(4);
    for (int c = 0; c < 4; ++c) uv[c] = rng.uniform(-0.3, 0.3) * std::sqrt(0.25);
    ChartPoint q = gs.from_uv(uv);
    if (std::abs(gs.scene().seps_value(q, 0.02)) < 0.1 * 0.02) continue;
    Jet2 jet = gs.phi_tilde_jet(q);
    CHECK(jet.value == doctest::Approx(gs.phi_tilde(q)).epsilon(1e-12));
    const double h = 1e-6;
    for (int k = 0; k < 4; ++k) {
      ChartPoint qp = q, qm = q;
      qp.coords[k] += h;
      qm.coords[k] -= h;
      double fd = (gs.phi_tilde(qp) - gs.phi_tilde(qm)) / (2 * h);
      CHECK(jet.grad[k] == doctest::Approx(fd).epsilon(5e-5));
    }
  }
}
