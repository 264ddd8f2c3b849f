#include <doctest.h>

#include <cmath>
#include <complex>

#include "wlab/fibration.hpp"
#include "wlab/rng.hpp"

using namespace wlab;

namespace {

ChartPoint local_point(double x0, double y0, double x1, double y1) {
  return {0, Vec{x0, y0, x1, y1}};
}

std::complex<double> z0_of(const ChartPoint& p) { return {p.coords[0], p.coords[1]}; }
std::complex<double> z1_of(const ChartPoint& p) { return {p.coords[2], p.coords[3]}; }

}  // namespace

TEST_CASE("horizontal space at (0.3, 0.3) is the complex span of (conj z1, conj z0)") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  ChartPoint p = local_point(0.3, 0.0, 0.3, 0.0);

  Vec v{1.0, 0.0, 0.0, 0.0};
  Vec h = horizontal_project(sc, p, v, 0.1);

  // residual of omega-orthogonality to ker d(pi)
  PiJet pj = pi_jet(sc, p);
  auto kernel = fiber_kernel_basis(pj);
  Jet2 jet = eval_jet2(sc, p, 0.1);
  Mat w = omega_from_hess(jet.hess, sc.dc_sign);
  for (const auto& k : kernel) CHECK(std::abs(dot(h, mat_vec(w, k))) < 1e-12);

  // membership in the complex span of (conj z1, conj z0) = (0.3, 0.3) here:
  // the span is { (a, b) : a = b } over C, i.e. z-components equal
  std::complex<double> h0{h[0], h[1]}, h1{h[2], h[3]};
  CHECK(std::abs(h0 - h1) < 1e-12);

  // idempotence and vertical annihilation
  Vec hh = horizontal_project(sc, p, h, 0.1);
  CHECK(norm(hh - h) < 1e-12);
  Vec kv = kernel[0];
  CHECK(norm(horizontal_project(sc, p, kv, 0.1)) < 1e-12);
}

TEST_CASE("horizontal projection rejects singular fibers") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  ChartPoint origin = local_point(0, 0, 0, 0);
  Vec v{1, 0, 0, 0};
  CHECK_THROWS_AS(horizontal_project(sc, origin, v, 0.1), Error);
}

TEST_CASE("transport along the thimble: (sqrt t0, sqrt t0) to t = 0.04") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  double t0 = 1e-3;
  double s = std::sqrt(t0);
  TransportState start{local_point(s, 0, s, 0), t0, 0.0};

  TransportState end = transport(sc, start, 0.04, 0.04);
  CHECK(end.fiber_residual < 1e-9);
  CHECK(std::abs(z1_of(end.point) - std::conj(z0_of(end.point))) < 1e-6);
  CHECK(std::abs(std::abs(z0_of(end.point)) - 0.2) < 1e-6);

  // identity transport
  TransportState same = transport(sc, start, t0, 0.04);
  CHECK(norm(same.point.coords - start.point.coords) == 0.0);

  // round trip back down
  TransportState back = transport(sc, end, t0, 0.04);
  CHECK(norm(back.point.coords - start.point.coords) < 1e-7);
}

TEST_CASE("thimble mesh matches the analytic thimble and is Lagrangian") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  ChartPoint p{0, Vec(4, 0.0)};
  ThimbleOptions opt;
  opt.angular_seeds = 16;
  opt.base_steps = 16;
  ThimbleMesh mesh = build_thimble(sc, p, 0.04, opt);

  for (bool ok : mesh.line_ok) CHECK(ok);
  for (size_t j = 0; j < mesh.points.size(); ++j)
    for (int k = 0; k < mesh.transverse_count; ++k) {
      const ChartPoint& q = mesh.points[j][k];
      CHECK(std::abs(z1_of(q) - std::conj(z0_of(q))) < 1e-6);  // {z1 = conj z0}
      CHECK(std::abs(std::norm(z0_of(q)) - mesh.base_grid[j]) < 1e-9);  // |z0|^2 = t
      CHECK(std::abs(z0_of(q)) <= 0.2 + 1e-6);
    }
  CHECK(mesh.max_relative_residual < 1e-6);
}

TEST_CASE("meshes nest: the eps = 0.01 mesh agrees with eps = 0.04 on shared rungs") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  ChartPoint p{0, Vec(4, 0.0)};
  ThimbleOptions opt;
  opt.angular_seeds = 8;
  opt.base_steps = 16;
  ThimbleMesh big = build_thimble(sc, p, 0.04, opt);
  ThimbleMesh small = build_thimble(sc, p, 0.01, opt);
  // shared base values: 0.01 * j/16 vs 0.04 * k/16 coincide at j = 4k
  double agree = mesh_agreement(sc, big, small, 1e-15);
  CHECK(agree < 1e-8);
}

TEST_CASE("a single-seed mesh is a single transport line") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  ChartPoint p{0, Vec(4, 0.0)};
  ThimbleOptions opt;
  opt.angular_seeds = 1;
  opt.base_steps = 5;
  ThimbleMesh mesh = build_thimble(sc, p, 0.02, opt);
  CHECK(mesh.transverse_count == 1);
  CHECK(mesh.points.size() == 5);
  CHECK(mesh.line_ok[0]);
  CHECK(mesh.max_relative_residual == 0.0);  // no cells to measure
}

TEST_CASE("the mirrored base segment transports the plane {z1 = -conj z0}") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  ChartPoint p{0, Vec(4, 0.0)};
  ThimbleOptions opt;
  opt.angular_seeds = 8;
  opt.base_steps = 8;
  opt.base_sign = -1.0;
  opt.sweep_fraction = 0.5;  // the divisor sits at pi = -eps itself
  ThimbleMesh mesh = build_thimble(sc, p, 0.04, opt);
  for (bool ok : mesh.line_ok) CHECK(ok);
  for (size_t j = 0; j < mesh.points.size(); ++j)
    for (int k = 0; k < mesh.transverse_count; ++k) {
      const ChartPoint& q = mesh.points[j][k];
      CHECK(std::abs(z1_of(q) + std::conj(z0_of(q))) < 1e-6);
      CHECK(std::abs(std::norm(z0_of(q)) + mesh.base_grid[j]) < 1e-9);  // |z0|^2 = -t
    }
  CHECK(mesh.max_relative_residual < 1e-6);
}

TEST_CASE("halving the seed fiber t0 moves the top rung by less than 1e-7") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  ChartPoint p{0, Vec(4, 0.0)};
  ThimbleOptions a, b;
  a.angular_seeds = b.angular_seeds = 8;
  a.base_steps = b.base_steps = 8;
  a.t0_factor = 1e-3;
  b.t0_factor = 5e-4;
  ThimbleMesh ma = build_thimble(sc, p, 0.04, a);
  ThimbleMesh mb = build_thimble(sc, p, 0.04, b);
  double worst = 0.0;
  for (int k = 0; k < 8; ++k)
    worst = std::max(worst, norm(ma.points.back()[k].coords - mb.points.back()[k].coords));
  CHECK(worst < 1e-7);
}

TEST_CASE("characteristic alignment residuals on all builtin scenes") {
  struct Cfg {
    const char* name;
    int n;
    double eps;
  };
  for (Cfg cfg : {Cfg{"local_nc", 2, 0.1}, Cfg{"cpn_o2h", 2, 0.1}, Cfg{"cpn_x_cpn", 2, 0.1}}) {
    Scene sc = builtin_scene(cfg.name, {.n = cfg.n});
    auto samples = sample_fiber_points(sc, cfg.eps, 100, 7);
    REQUIRE(samples.size() == 100);
    auto rep = lefschetz_alignment(sc, cfg.eps, samples);
    CHECK(rep.max_res_horizontal < 1e-8);
    CHECK(rep.max_res_radial < 1e-8);
  }
}

TEST_CASE("a vertical vector fails the alignment residual (negative control)") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  auto samples = sample_fiber_points(sc, 0.1, 5, 11);
  REQUIRE(!samples.empty());
  const ChartPoint& p = samples[0];
  PiJet pj = pi_jet(sc, p);
  Vec vertical = fiber_kernel_basis(pj)[0];
  Vec hor = horizontal_project(sc, p, vertical, 0.1);
  double res = norm(vertical - hor) / norm(vertical);
  CHECK(res > 0.99);  // fully vertical: the projection removes everything
}

TEST_CASE("transport is symplectic on in-fiber 2-cells") {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  double t0 = 4e-3, t1 = 0.03, eps = 0.03;
  // base point on the fiber, away from the thimble plane
  ChartPoint c0{0, Vec{std::sqrt(t0) * 1.3, 0.01, std::sqrt(t0) / 1.3, -0.01}};
  TransportOptions topt;
  topt.rel_tol = 1e-11;
  // correct onto the fiber exactly
  TransportState base = transport(sc, TransportState{c0, t0, 0.0}, t0 * 1.0000001, eps, topt);

  // in-fiber directions: z0 -> z0 + delta, z1 = t0/z0 (exact fiber param)
  auto fiber_point = [&](std::complex<double> dz) {
    std::complex<double> z0 = z0_of(base.point) + dz;
    std::complex<double> z1 = t0 / z0;
    return ChartPoint{0, Vec{z0.real(), z0.imag(), z1.real(), z1.imag()}};
  };
  const double h = 1e-4;
  ChartPoint cpx = fiber_point({h, 0}), cmx = fiber_point({-h, 0});
  ChartPoint cpy = fiber_point({0, h}), cmy = fiber_point({0, -h});

  auto omega_area = [&](const ChartPoint& a, const ChartPoint& px, const ChartPoint& mx,
                        const ChartPoint& py, const ChartPoint& my) {
    Jet2 jet = eval_jet2(sc, a, eps);
    Mat w = omega_from_hess(jet.hess, sc.dc_sign);
    Vec d1 = 0.5 * (px.coords - mx.coords);
    Vec d2 = 0.5 * (py.coords - my.coords);
    return dot(d1, mat_vec(w, d2));
  };

  double area0 = omega_area(base.point, cpx, cmx, cpy, cmy);

  auto lift = [&](const ChartPoint& q) {
    return transport(sc, TransportState{q, t0, 0.0}, t1, eps, topt).point;
  };
  ChartPoint b1 = lift(base.point), b2 = lift(cpx), b3 = lift(cmx), b4 = lift(cpy), b5 = lift(cmy);
  double area1 = omega_area(b1, b2, b3, b4, b5);

  CHECK(std::abs(area1 - area0) < 1e-6 * std::abs(area0));
}
