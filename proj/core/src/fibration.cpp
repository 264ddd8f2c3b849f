#include "wlab/fibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wlab/ode.hpp"
#include "wlab/rng.hpp"

namespace wlab {

namespace {

constexpr double kSingularFiberTol = 1e-10;

std::complex<double> cval(const ad::CDual2& c) { return c.value(); }

Vec real_form(const std::vector<std::complex<double>>& a) {
  Vec v(2 * a.size());
  for (size_t j = 0; j < a.size(); ++j) {
    v[2 * j] = a[j].real();
    v[2 * j + 1] = a[j].imag();
  }
  return v;
}

}  // namespace

PiJet pi_jet(const Scene& scene, const ChartPoint& p) {
  ad::CDual2 P = scene.s0_jet_raw(p);
  ad::CDual2 Q = scene.h_jet_raw(p);
  if (std::abs(cval(Q)) < 1e-12) throw Error(Errc::SingularFiber, "h vanishes at the sample");
  ad::CDual2 pi = P / Q;

  PiJet pj;
  pj.value = cval(pi);
  const int n = scene.n;
  const int nv = 2 * n;
  pj.dz.resize(n);
  for (int j = 0; j < n; ++j)
    pj.dz[j] = {pi.re.grad(2 * j), pi.im.grad(2 * j)};  // holomorphic: d/dz = d/dx
  pj.hess_re = Mat(nv, nv);
  pj.hess_im = Mat(nv, nv);
  for (int a = 0; a < nv; ++a)
    for (int b = 0; b < nv; ++b) {
      pj.hess_re(a, b) = pi.re.hess(a, b);
      pj.hess_im(a, b) = pi.im.hess(a, b);
    }
  return pj;
}

std::complex<double> dpi_of(const PiJet& pj, const Vec& v) {
  std::complex<double> s = 0.0;
  for (size_t j = 0; j < pj.dz.size(); ++j) s += pj.dz[j] * std::complex<double>(v[2 * j], v[2 * j + 1]);
  return s;
}

std::vector<Vec> fiber_kernel_basis(const PiJet& pj) {
  const int n = static_cast<int>(pj.dz.size());
  double scale = 0.0;
  for (const auto& d : pj.dz) scale = std::max(scale, std::abs(d));
  if (scale < kSingularFiberTol) throw Error(Errc::SingularFiber, "d(pi) drops rank");

  // kernel of the complex-linear functional u -> sum dz_j u_j is the
  // Hermitian orthocomplement of conj(dz)
  std::vector<std::complex<double>> a(n);
  double nrm = 0.0;
  for (int j = 0; j < n; ++j) {
    a[j] = std::conj(pj.dz[j]);
    nrm += std::norm(a[j]);
  }
  nrm = std::sqrt(nrm);
  for (auto& c : a) c /= nrm;

  std::vector<std::vector<std::complex<double>>> cbasis;
  for (int j = 0; j < n && static_cast<int>(cbasis.size()) < n - 1; ++j) {
    std::vector<std::complex<double>> e(n, 0.0);
    e[j] = 1.0;
    // project out a, then previous basis vectors (complex Gram-Schmidt)
    std::complex<double> ip = 0.0;
    for (int k = 0; k < n; ++k) ip += e[k] * std::conj(a[k]);
    for (int k = 0; k < n; ++k) e[k] -= ip * a[k];
    for (const auto& b : cbasis) {
      std::complex<double> ib = 0.0;
      for (int k = 0; k < n; ++k) ib += e[k] * std::conj(b[k]);
      for (int k = 0; k < n; ++k) e[k] -= ib * b[k];
    }
    double en = 0.0;
    for (int k = 0; k < n; ++k) en += std::norm(e[k]);
    en = std::sqrt(en);
    if (en > 1e-8) {
      for (int k = 0; k < n; ++k) e[k] /= en;
      cbasis.push_back(e);
    }
  }

  std::vector<Vec> real_basis;
  for (const auto& u : cbasis) {
    real_basis.push_back(real_form(u));
    std::vector<std::complex<double>> iu(n);
    for (int k = 0; k < n; ++k) iu[k] = std::complex<double>(0.0, 1.0) * u[k];
    real_basis.push_back(real_form(iu));
  }
  return real_basis;
}

Vec horizontal_project(const Scene& scene, const ChartPoint& p, const Vec& v, double eps) {
  PiJet pj = pi_jet(scene, p);
  auto kernel = fiber_kernel_basis(pj);
  Jet2 jet = eval_jet2(scene, p, eps);
  Mat w = omega_from_hess(jet.hess, scene.dc_sign);

  // solve omega(v - sum_j c_j k_j, k_i) = 0: rows are G(i, j) = omega(k_j, k_i)
  const int dk = static_cast<int>(kernel.size());
  Mat gram(dk, dk);
  Vec rhs(dk);
  for (int i = 0; i < dk; ++i) {
    Vec wk = mat_vec(w, kernel[i]);
    rhs[i] = dot(v, wk);
    for (int j = 0; j < dk; ++j) gram(i, j) = dot(kernel[j], wk);
  }
  Lu lu(gram);
  if (!lu.ok()) throw Error(Errc::SingularFiber, "fiber omega-Gram is singular");
  Vec c = lu.solve(rhs);
  Vec out = v;
  for (int j = 0; j < dk; ++j) axpy(-c[j], kernel[j], out);
  return out;
}

namespace {

// one complex-Newton correction moving q along the steepest pi direction so
// that pi(q) = t; returns the new residual
double fiber_correct(const Scene& scene, ChartPoint& q, double t, int max_iter) {
  for (int it = 0; it < max_iter; ++it) {
    PiJet pj = pi_jet(scene, q);
    std::complex<double> r = std::complex<double>(t, 0.0) - pj.value;
    if (std::abs(r) < 1e-13) return std::abs(r);
    // steepest direction: d_j = conj(dz_j) normalized
    std::vector<std::complex<double>> d(pj.dz.size());
    double nrm = 0.0;
    for (size_t j = 0; j < d.size(); ++j) {
      d[j] = std::conj(pj.dz[j]);
      nrm += std::norm(d[j]);
    }
    if (nrm < kSingularFiberTol) throw Error(Errc::FiberLost, "fiber correction at singular point");
    nrm = std::sqrt(nrm);
    for (auto& c : d) c /= nrm;
    Vec dir = real_form(d);
    std::complex<double> g = dpi_of(pj, dir);
    if (std::abs(g) < kSingularFiberTol) throw Error(Errc::FiberLost, "fiber correction stalled");
    std::complex<double> delta = r / g;
    for (size_t j = 0; j < d.size(); ++j) {
      q.coords[2 * j] += (delta * d[j]).real() - 0.0;
      q.coords[2 * j + 1] += (delta * d[j]).imag();
    }
  }
  PiJet pj = pi_jet(scene, q);
  return std::abs(std::complex<double>(t, 0.0) - pj.value);
}

// horizontal lift of d/dt at q: V in the horizontal space with dpi(V) = 1
Vec horizontal_lift(const Scene& scene, const ChartPoint& q, double eps) {
  PiJet pj = pi_jet(scene, q);
  std::vector<std::complex<double>> d(pj.dz.size());
  for (size_t j = 0; j < d.size(); ++j) d[j] = std::conj(pj.dz[j]);
  Vec w = real_form(d);
  Vec wh = horizontal_project(scene, q, w, eps);
  std::complex<double> dw = dpi_of(pj, wh);
  if (std::abs(dw) < kSingularFiberTol) throw Error(Errc::SingularFiber, "horizontal lift undefined");
  std::complex<double> gamma = 1.0 / dw;
  Vec jwh = apply_J(wh);
  Vec out(wh.size());
  for (size_t k = 0; k < wh.size(); ++k) out[k] = gamma.real() * wh[k] + gamma.imag() * jwh[k];
  return out;
}

}  // namespace

TransportState transport(const Scene& scene, const TransportState& start, double t_target,
                         double eps, const TransportOptions& opt) {
  TransportState st = start;
  if (t_target == st.t) return st;

  auto rhs = [&](double, const Vec& y, Vec& dy) {
    ChartPoint q{st.point.chart, y};
    if (!scene.in_domain(q)) return false;
    if (std::abs(scene.h_value(q)) < opt.h_floor) return false;
    try {
      dy = horizontal_lift(scene, q, eps);
    } catch (const Error&) {
      return false;
    }
    return true;
  };

  Vec y = st.point.coords;
  double residual = 0.0;
  auto after = [&](double t, Vec& state) {
    ChartPoint q{st.point.chart, state};
    residual = fiber_correct(scene, q, t, opt.max_fiber_newton);
    if (residual > 1e-9) throw Error(Errc::FiberLost, "fiber residual above 1e-9");
    state = q.coords;
    return true;
  };

  OdeOptions oopt;
  oopt.rel_tol = opt.rel_tol;
  oopt.abs_tol = 1e-13;
  oopt.h_init = std::min(1e-3, std::abs(t_target - st.t) * 0.1);
  OdeOutcome oc = integrate_rk4(rhs, st.t, t_target, y, oopt, after);
  if (oc == OdeOutcome::StepCollapse) throw Error(Errc::StepCollapse, "transport step underflow");
  if (oc == OdeOutcome::RhsFailed) throw Error(Errc::FiberLost, "transport left the fibration domain");

  st.point.coords = y;
  st.t = t_target;
  st.fiber_residual = residual;
  return st;
}

ThimbleMesh build_thimble(const Scene& scene, const ChartPoint& p, double eps,
                          const ThimbleOptions& opt) {
  ThimbleMesh mesh;
  mesh.eps = eps;
  mesh.base_sign = opt.base_sign;
  mesh.t0 = opt.t0_factor * eps * opt.base_sign;
  mesh.transverse_count = opt.angular_seeds;

  // complex normal directions of the two divisor branches through p
  // (one per branch tag)
  std::vector<Vec> branch_normals(2);
  std::vector<bool> have_tag(2, false);
  for (size_t bi = 0; bi < scene.branches.size(); ++bi) {
    const auto& br = scene.branches[bi];
    int tag = scene.branch_tag[bi];
    if (have_tag[tag] || br.chart != p.chart) continue;
    if (br.distance_to(p.coords) > 1e-8) continue;
    // orthogonal complement of the branch within the chart is a complex line
    const int nv = scene.dim_real();
    for (int k = 0; k < nv; ++k) {
      Vec e(nv, 0.0);
      e[k] = 1.0;
      for (const auto& b : br.basis) axpy(-dot(e, b), b, e);
      double en = norm(e);
      if (en > 1e-8) {
        branch_normals[tag] = (1.0 / en) * e;
        have_tag[tag] = true;
        break;
      }
    }
  }
  if (!have_tag[0] || !have_tag[1])
    throw Error(Errc::BadParams, "thimble seeding needs the two divisor branches at p");

  const Vec& du = branch_normals[0];
  const Vec& dv = branch_normals[1];

  // mixed complex second derivative kappa = D^2 pi(du, dv)
  PiJet pj = pi_jet(scene, p);
  Vec djv = dv;
  std::complex<double> kappa(dot(du, mat_vec(pj.hess_re, djv)), dot(du, mat_vec(pj.hess_im, djv)));
  if (std::abs(kappa) < 1e-10) throw Error(Errc::SingularFiber, "degenerate quadratic model at p");

  const double tau = mesh.t0;
  const double r = std::sqrt(std::abs(tau) / std::abs(kappa));

  mesh.base_grid.resize(opt.base_steps);
  for (int j = 0; j < opt.base_steps; ++j)
    mesh.base_grid[j] = opt.base_sign * eps * opt.sweep_fraction * (j + 1) / opt.base_steps;

  mesh.points.assign(opt.base_steps, std::vector<ChartPoint>(opt.angular_seeds));
  mesh.line_ok.assign(opt.angular_seeds, true);

  for (int k = 0; k < opt.angular_seeds; ++k) {
    double theta = 2.0 * 3.14159265358979323846 * k / opt.angular_seeds;
    std::complex<double> uc = std::polar(r, theta);
    std::complex<double> vc = tau / (uc * kappa);
    ChartPoint seed = p;
    Vec jdu = apply_J(du), jdv = apply_J(dv);
    axpy(uc.real(), du, seed.coords);
    axpy(uc.imag(), jdu, seed.coords);
    axpy(vc.real(), dv, seed.coords);
    axpy(vc.imag(), jdv, seed.coords);

    try {
      ChartPoint q = seed;
      fiber_correct(scene, q, tau, 8);
      TransportState st{q, tau, 0.0};
      for (int j = 0; j < opt.base_steps; ++j) {
        st = transport(scene, st, mesh.base_grid[j], eps, opt.transport);
        mesh.points[j][k] = st.point;
      }
    } catch (const Error&) {
      mesh.line_ok[k] = false;  // flagged, the rest of the mesh stands
    }
  }

  // Lagrangian residuals per cell (transverse index wraps around the circle)
  if (opt.base_steps >= 2) {
    mesh.lagrangian_residual = Mat(opt.base_steps - 1, opt.angular_seeds);
    mesh.omega_scale = Mat(opt.base_steps - 1, opt.angular_seeds);
    for (int j = 0; j + 1 < opt.base_steps; ++j)
      for (int k = 0; k < opt.angular_seeds; ++k) {
        int k2 = (k + 1) % opt.angular_seeds;
        if (!mesh.line_ok[k] || !mesh.line_ok[k2]) continue;
        const Vec& base = mesh.points[j][k].coords;
        Vec tu = mesh.points[j + 1][k].coords - base;
        Vec tv = mesh.points[j][k2].coords - base;
        Jet2 jet = eval_jet2(scene, mesh.points[j][k], eps);
        Mat w = omega_from_hess(jet.hess, scene.dc_sign);
        double res = std::abs(dot(tu, mat_vec(w, tv)));
        double scl = w.max_abs() * norm(tu) * norm(tv);
        mesh.lagrangian_residual(j, k) = res;
        mesh.omega_scale(j, k) = scl;
        if (scl > 0) mesh.max_relative_residual = std::max(mesh.max_relative_residual, res / scl);
      }
  }
  return mesh;
}

Vec eta_form(const Scene& scene, const ChartPoint& p, double eps) {
  // jet of f = -log|pi + eps|^2 = log|h|^2 - log|s0 + eps h|^2
  ad::CDual2 P = scene.s0_jet_raw(p);
  ad::CDual2 Q = scene.h_jet_raw(p);
  ad::Dual2 h2 = ad::abs2(Q);
  if (h2.value() < 1e-24) throw Error(Errc::SingularFiber, "h vanishes at the sample");
  ad::CDual2 s = P + Q * eps;
  ad::Dual2 s2 = ad::abs2(s);
  if (s2.value() < 1e-300) throw Error(Errc::OnDivisor, "sample on the eps-divisor");
  ad::Dual2 f = log(h2) - log(s2);
  Jet2 fj = jet_from_dual(f);
  return lambda_from_grad(fj.grad, scene.dc_sign);
}

EtaSample eta_dual(const Scene& scene, const ChartPoint& p, double eps) {
  EtaSample out;
  out.eta = eta_form(scene, p, eps);
  Jet2 phij = eval_jet2(scene, p, eps);
  Mat w = omega_from_hess(phij.hess, scene.dc_sign);
  Lu lu(w.transposed());
  if (!lu.ok()) throw Error(Errc::Degenerate, "omega degenerate at the sample");
  out.x_field = lu.solve(out.eta);
  return out;
}

AlignmentReport lefschetz_alignment(const Scene& scene, double eps,
                                    const std::vector<ChartPoint>& samples) {
  AlignmentReport rep;
  rep.samples = static_cast<int>(samples.size());
  for (const auto& p : samples) {
    EtaSample es = eta_dual(scene, p, eps);
    double xn = norm(es.x_field);
    if (xn == 0.0) continue;
    Vec hor = horizontal_project(scene, p, es.x_field, eps);
    rep.max_res_horizontal = std::max(rep.max_res_horizontal, norm(es.x_field - hor) / xn);

    PiJet pj = pi_jet(scene, p);
    std::complex<double> ratio = dpi_of(pj, es.x_field) / (pj.value + eps);
    double mag = std::abs(ratio);
    if (mag > 0) rep.max_res_radial = std::max(rep.max_res_radial, std::abs(ratio.imag()) / mag);
  }
  return rep;
}

std::vector<ChartPoint> sample_fiber_points(const Scene& scene, double eps, int count,
                                            unsigned seed, double t_min, double t_max_factor) {
  Rng rng(seed, 42);
  std::vector<ChartPoint> out;
  // sample around a stratum patch when one exists, else around chart 0
  int chart = scene.stratum.empty() ? 0 : scene.stratum.front().chart;
  const int nv = scene.dim_real();
  int guard = 0;
  while (static_cast<int>(out.size()) < count && guard++ < 50 * count) {
    ChartPoint q{chart, Vec(nv)};
    for (int k = 0; k < nv; ++k) q.coords[k] = rng.uniform(-0.6, 0.6);
    double t = rng.uniform(std::max(t_min, 0.02 * eps), t_max_factor * eps);
    try {
      if (std::abs(scene.h_value(q)) < 1e-6) continue;
      if (fiber_correct(scene, q, t, 12) > 1e-10) continue;
      if (std::abs(scene.h_value(q)) < 1e-6) continue;
      out.push_back(q);
    } catch (const Error&) {
      continue;
    }
  }
  return out;
}

double mesh_agreement(const Scene& scene, const ThimbleMesh& coarse, const ThimbleMesh& fine,
                      double rung_match_tol) {
  double worst = -1.0;
  for (size_t jf = 0; jf < fine.base_grid.size(); ++jf) {
    for (size_t jc = 0; jc < coarse.base_grid.size(); ++jc) {
      if (std::abs(fine.base_grid[jf] - coarse.base_grid[jc]) > rung_match_tol) continue;
      int kt = std::min(fine.transverse_count, coarse.transverse_count);
      for (int k = 0; k < kt; ++k) {
        if (!fine.line_ok[k] || !coarse.line_ok[k]) continue;
        worst = std::max(worst, scene.distance(fine.points[jf][k], coarse.points[jc][k]));
      }
    }
  }
  return worst < 0 ? std::numeric_limits<double>::infinity() : worst;
}

}  // namespace wlab
