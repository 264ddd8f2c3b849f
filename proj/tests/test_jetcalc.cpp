#include <doctest.h>

#include <cmath>
#include <complex>

#include "wlab/geometry.hpp"
#include "wlab/rng.hpp"
#include "wlab/scene.hpp"

using namespace wlab;

namespace {

// independent oracle: central finite differences of the derivative-free phi
Jet2 fd_jet(const Scene& sc, const ChartPoint& p, double eps, double h = 1e-5) {
  const int nv = sc.dim_real();
  Jet2 out;
  out.value = sc.phi(p, eps);
  out.grad.resize(nv);
  out.hess = Mat(nv, nv);
  auto at = [&](int k, double dk, int l, double dl) {
    ChartPoint q = p;
    q.coords[k] += dk;
    if (l >= 0) q.coords[l] += dl;
    return sc.phi(q, eps);
  };
  for (int k = 0; k < nv; ++k) {
    out.grad[k] = (at(k, h, -1, 0) - at(k, -h, -1, 0)) / (2 * h);
    out.hess(k, k) = (at(k, h, -1, 0) - 2 * out.value + at(k, -h, -1, 0)) / (h * h);
    for (int l = k + 1; l < nv; ++l) {
      double v = (at(k, h, l, h) - at(k, h, l, -h) - at(k, -h, l, h) + at(k, -h, l, -h)) / (4 * h * h);
      out.hess(k, l) = out.hess(l, k) = v;
    }
  }
  return out;
}

// analytic oracle for the local-model origin: the second-order expansion of
// -log|z0 z1 + eps|^2 + |z0|^2 + |z1|^2 has eigenvalues 2(1 -+ 1/eps) (x2 each)
Vec local_origin_spectrum(double eps) {
  return Vec{2 * (1 - 1 / eps), 2 * (1 - 1 / eps), 2 * (1 + 1 / eps), 2 * (1 + 1 / eps)};
}

const char* kC1SceneJson = R"({"custom": {
  "name": "c1_model", "n": 1,
  "s0": [{"c": [1, 0], "powers": [0]}],
  "h": [],
  "g": {"abs2": [{"c": [1, 0], "powers": [1]}]}
}})";

ChartPoint random_point(const Scene& sc, Rng& rng, double box) {
  ChartPoint p{0, Vec(sc.dim_real())};
  for (auto& c : p.coords) c = rng.uniform(-box, box);
  return p;
}

}  // namespace

TEST_CASE("local model origin: eps = 1 gives grad 0 and spectrum {0,0,4,4}") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  ChartPoint origin{0, Vec(4, 0.0)};

  // trust chain: the analytic expansion is first checked against finite
  // differences, then the AD jet against both
  Jet2 fd = fd_jet(sc, origin, 1.0);
  Spectrum fd_sp = jacobi_spectrum(fd.hess, 1e-4);
  Vec expect = local_origin_spectrum(1.0);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(fd_sp.eigenvalues[i] - expect[i]) < 1e-4);

  Jet2 jet = eval_jet2(sc, origin, 1.0);
  CHECK(norm(jet.grad) < 1e-14);
  Spectrum sp = jacobi_spectrum(jet.hess);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(sp.eigenvalues[i] - expect[i]) < 1e-12);
}

TEST_CASE("local model origin: eps = 0.1 gives spectrum {-18,-18,22,22}") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  ChartPoint origin{0, Vec(4, 0.0)};
  Jet2 jet = eval_jet2(sc, origin, 0.1);
  Spectrum sp = jacobi_spectrum(jet.hess);
  Vec expect = local_origin_spectrum(0.1);  // {-18, -18, 22, 22}
  CHECK(expect[0] == doctest::Approx(-18.0));
  CHECK(expect[3] == doctest::Approx(22.0));
  for (int i = 0; i < 4; ++i) CHECK(sp.eigenvalues[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("jet value equals the derivative-free path exactly") {
  Rng rng(21);
  for (const char* name : {"local_nc", "cpn_o2h", "cpn_x_cpn"}) {
    Scene sc = builtin_scene(name, {.n = 2});
    int checked = 0;
    while (checked < 25) {
      ChartPoint p = random_point(sc, rng, 0.8);
      p.chart = rng.uniform_int(sc.num_charts());
      double eps = rng.uniform(0.01, 0.5);
      try {
        double direct = sc.phi(p, eps);
        Jet2 jet = eval_jet2(sc, p, eps);
        CHECK(jet.value == direct);  // bitwise: same op sequence on the value slot
        ++checked;
      } catch (const Error&) {
        continue;
      }
    }
  }
}

TEST_CASE("C^1 model: lambda, omega, Z, margin at (1, 0)") {
  Scene sc = scene_from_json(kC1SceneJson);
  ChartPoint p{0, Vec{1.0, 0.0}};

  SymplecticSample s = symplectic_sample(sc, p, 0.3);  // eps irrelevant: h = 0
  CHECK(s.lambda[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(s.lambda[1] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(s.omega(0, 1) == doctest::Approx(4.0).epsilon(1e-14));  // omega = 4 dx ^ dy
  CHECK(s.omega(1, 0) == doctest::Approx(-4.0).epsilon(1e-14));
  CHECK(s.liouville[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(std::abs(s.liouville[1]) < 1e-14);

  // dphi(Z) = 1, margin = 1 / (0.25 + 4)
  double margin = gradient_like_margin(sc, p, 0.3);
  CHECK(margin == doctest::Approx(1.0 / 4.25).epsilon(1e-13));
}

TEST_CASE("margin is exactly 0 at critical points") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  ChartPoint origin{0, Vec(4, 0.0)};
  CHECK(gradient_like_margin(sc, origin, 0.1) == 0.0);
}

TEST_CASE("margin is positive off critical points in the local model") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  Rng rng(31);
  int checked = 0;
  while (checked < 1000) {
    ChartPoint p = random_point(sc, rng, 0.5);
    double r = 0.0;
    for (double c : p.coords) r += c * c;
    if (r < 1e-6 || r > 0.25) continue;  // 1e-3 < |z| < 0.5
    double m = gradient_like_margin(sc, p, 0.1);
    CHECK(m > 0.0);
    ++checked;
  }
}

TEST_CASE("omega is eps-independent off the divisor") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  Rng rng(41);
  int checked = 0;
  while (checked < 100) {
    ChartPoint p = random_point(sc, rng, 0.5);
    double e1 = 0.1, e2 = 0.05;
    if (std::norm(sc.seps_value(p, e1)) < 1e-6 || std::norm(sc.seps_value(p, e2)) < 1e-6) continue;
    Jet2 j1 = eval_jet2(sc, p, e1);
    Jet2 j2 = eval_jet2(sc, p, e2);
    Mat w1 = omega_from_hess(j1.hess, sc.dc_sign);
    Mat w2 = omega_from_hess(j2.hess, sc.dc_sign);
    double diff = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) diff = std::max(diff, std::abs(w1(a, b) - w2(a, b)));
    CHECK(diff < 1e-10);
    ++checked;
  }
}

TEST_CASE("Kahler positivity and the Liouville identity hold at random samples") {
  Rng rng(51);
  for (const char* name : {"local_nc", "cpn_o2h", "cpn_x_cpn"}) {
    Scene sc = builtin_scene(name, {.n = 2});
    int checked = 0;
    while (checked < 60) {
      ChartPoint p = random_point(sc, rng, 0.7);
      p.chart = rng.uniform_int(sc.num_charts());
      double eps = 0.1;
      if (std::norm(sc.seps_value(p, eps)) < 1e-4) continue;
      SymplecticSample s;
      try {
        s = symplectic_sample(sc, p, eps);
      } catch (const Error&) {
        continue;
      }
      const int nv = sc.dim_real();
      for (int k = 0; k < nv; ++k) {
        Vec e(nv, 0.0);
        e[k] = 1.0;
        CHECK(dot(e, mat_vec(s.omega, apply_J(e))) > 0.0);
      }
      Vec resid = mat_vec(s.omega.transposed(), s.liouville) - s.lambda;
      CHECK(norm(resid) <= 1e-10 * std::max(norm(s.lambda), 1e-30));
      ++checked;
    }
  }
}

TEST_CASE("d^c identity: lambda(v) + dphi(Jv) = 0 against an independent jet") {
  Scene sc = builtin_scene("cpn_o2h", {.n = 2});
  Rng rng(61);
  int checked = 0;
  while (checked < 50) {
    ChartPoint p = random_point(sc, rng, 0.8);
    p.chart = rng.uniform_int(sc.num_charts());
    if (std::norm(sc.seps_value(p, 0.2)) < 1e-4) continue;
    SymplecticSample s;
    try {
      s = symplectic_sample(sc, p, 0.2);
    } catch (const Error&) {
      continue;
    }
    Jet2 jet = eval_jet2(sc, p, 0.2);  // independent call
    const int nv = sc.dim_real();
    double scale = std::max(1.0, norm_inf(jet.grad));
    for (int k = 0; k < nv; ++k) {
      Vec e(nv, 0.0);
      e[k] = 1.0;
      double lam_v = s.lambda[k];
      double dphi_jv = dot(jet.grad, apply_J(e));
      CHECK(std::abs(lam_v + sc.dc_sign * dphi_jv) < 1e-12 * scale);
    }
    ++checked;
  }
}

TEST_CASE("AD gradient and Hessian match finite differences on every builtin scene") {
  Rng rng(71);
  for (const char* name : {"local_nc", "cpn_o2h", "cpn_x_cpn"}) {
    Scene sc = builtin_scene(name, {.n = 2});
    int checked = 0;
    while (checked < 100) {
      ChartPoint p = random_point(sc, rng, 0.7);
      p.chart = rng.uniform_int(sc.num_charts());
      double eps = rng.uniform(0.05, 0.5);
      if (std::norm(sc.seps_value(p, eps)) < 1e-3) continue;  // FD needs room
      Jet2 ad_jet, fd = {};
      try {
        ad_jet = eval_jet2(sc, p, eps);
        fd = fd_jet(sc, p, eps);
      } catch (const Error&) {
        continue;
      }
      double gscale = std::max(1.0, norm_inf(fd.grad));
      for (int k = 0; k < sc.dim_real(); ++k)
        CHECK(std::abs(ad_jet.grad[k] - fd.grad[k]) < 1e-6 * gscale);
      double hscale = std::max(1.0, fd.hess.max_abs());
      for (int a = 0; a < sc.dim_real(); ++a)
        for (int b = 0; b < sc.dim_real(); ++b)
          CHECK(std::abs(ad_jet.hess(a, b) - fd.hess(a, b)) < 1e-4 * hscale);
      ++checked;
    }
  }
}

TEST_CASE("symplectic_sample raises Degenerate when omega vanishes") {
  // a pluriharmonic potential: phi = -log|z|^2 has dd^c(phi) = 0 off zero
  const char* degenerate = R"({"custom": {
    "name": "flat", "n": 1,
    "s0": [{"c": [1, 0], "powers": [1]}],
    "h": [],
    "g": {"const": 0.0}
  }})";
  Scene sc = scene_from_json(degenerate);
  ChartPoint p{0, Vec{0.8, 0.3}};
  CHECK_THROWS_AS(symplectic_sample(sc, p, 0.1), Error);
  try {
    symplectic_sample(sc, p, 0.1);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::Degenerate);
  }
}

TEST_CASE("eval_jet2 raises OnDivisor and BadChart") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  // z0 z1 + eps = 0 at z0 = z1 = sqrt(-eps) is complex; use z0=1, z1=-eps
  ChartPoint on_div{0, Vec{1.0, 0.0, -0.25, 0.0}};
  CHECK_THROWS_AS(eval_jet2(sc, on_div, 0.25), Error);

  ChartPoint bad{7, Vec(4, 0.0)};
  CHECK_THROWS_AS(eval_jet2(sc, bad, 0.1), Error);
}
