#include "wlab/gluing.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "wlab/rng.hpp"

namespace wlab {

namespace {

// 16-node Gauss-Legendre abscissae/weights on [0, 1]
constexpr int kGL = 16;
const double kGLx[kGL] = {
    0.0052995325041750337, 0.0277124884633837046, 0.0671843988060841224, 0.1222977958224984868,
    0.1910618777986781147, 0.2709916111713863151, 0.3591982246103705422, 0.4524937450811812866,
    0.5475062549188187134, 0.6408017753896294578, 0.7290083888286136849, 0.8089381222013218853,
    0.8777022041775015132, 0.9328156011939158776, 0.9722875115366162954, 0.9947004674958249663};
const double kGLw[kGL] = {
    0.0135762297058770482, 0.0311267619693239468, 0.0475792558412463928, 0.0623144856277669384,
    0.0747979944082883680, 0.0845782596975012679, 0.0913017075224617919, 0.0947253052275342510,
    0.0947253052275342510, 0.0913017075224617919, 0.0845782596975012679, 0.0747979944082883680,
    0.0623144856277669384, 0.0475792558412463928, 0.0311267619693239468, 0.0135762297058770482};

double quintic_smoothstep(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

double quintic_smoothstep_d(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return x * x * (30.0 + x * (-60.0 + 30.0 * x));
}

}  // namespace

GluedStructure::GluedStructure(const Scene& scene, const ChartPoint& p, double eps0, double eps)
    : scene_(&scene), p_(p), eps0_(eps0), eps_(eps) {}

Vec GluedStructure::uv_coords(const ChartPoint& q) const {
  Vec d = q.coords - p_.coords;
  return mat_vec(dual_, d);
}

ChartPoint GluedStructure::from_uv(const Vec& uv) const {
  ChartPoint q = p_;
  for (int c = 0; c < 4; ++c)
    for (int k = 0; k < frame_.rows(); ++k) q.coords[k] += frame_(k, c) * uv[c];
  return q;
}

double GluedStructure::r_of(const ChartPoint& q) const {
  Vec uv = uv_coords(q);
  return dot(uv, uv);
}

double GluedStructure::rho(double r) const {
  return quintic_smoothstep((r - eps0_ / 4.0) / (eps0_ / 4.0));
}

double GluedStructure::drho_dr(double r) const {
  return quintic_smoothstep_d((r - eps0_ / 4.0) / (eps0_ / 4.0)) / (eps0_ / 4.0);
}

Vec GluedStructure::lambda(const ChartPoint& q) const {
  Jet2 jet = eval_jet2(*scene_, q, eps_);
  return lambda_from_grad(jet.grad, scene_->dc_sign);
}

Vec GluedStructure::xi(const ChartPoint& q) const {
  Vec uv = uv_coords(q);
  Vec out = eta_form(*scene_, q, eps_);
  // xi = eta - v1 du1 - v2 du2
  for (int k = 0; k < dual_.cols(); ++k) {
    out[k] -= uv[1] * dual_(0, k);
    out[k] -= uv[3] * dual_(2, k);
  }
  return out;
}

double GluedStructure::psi(const ChartPoint& q) const {
  // psi = phi(p) - log(|pi + eps|^2 / eps^2) + (v1^2 + v2^2)/2.
  // The -log|pi+eps|^2 term is normalized to vanish at p so that
  // phi - psi is finite with value 0 there (the boundedness of
  // (phi - psi) d(rho) depends on it).
  std::complex<double> P = scene_->s0_value(q);
  std::complex<double> Q = scene_->h_value(q);
  std::complex<double> s = P + Q * eps_;
  double f = std::log(std::norm(Q)) - std::log(std::norm(s)) + 2.0 * std::log(eps_);
  Vec uv = uv_coords(q);
  return phi_at_p_ + f + 0.5 * (uv[1] * uv[1] + uv[3] * uv[3]);
}

double GluedStructure::phi(const ChartPoint& q) const { return scene_->phi(q, eps_); }

Vec GluedStructure::lambda_minus_xi(const ChartPoint& q) const {
  Vec l = lambda(q);
  Vec x = xi(q);
  return l - x;
}

double GluedStructure::primitive_H(const ChartPoint& q) const {
  // composite Gauss-Legendre along the radial path s -> p + s (q - p)
  Vec dir = q.coords - p_.coords;
  double total = 0.0;
  for (int panel = 0; panel < quad_panels_; ++panel) {
    double a = static_cast<double>(panel) / quad_panels_;
    double w = 1.0 / quad_panels_;
    for (int i = 0; i < kGL; ++i) {
      double s = a + w * kGLx[i];
      ChartPoint qs = p_;
      axpy(s, dir, qs.coords);
      total += w * kGLw[i] * dot(lambda_minus_xi(qs), dir);
    }
  }
  return total;
}

double GluedStructure::primitive_H_alt(const ChartPoint& q) const {
  // two straight legs: p -> m (the u-part of the displacement) -> q
  Vec uv = uv_coords(q);
  Vec uv_mid(4, 0.0);
  uv_mid[0] = uv[0];
  uv_mid[2] = uv[2];
  ChartPoint m = from_uv(uv_mid);

  auto leg = [&](const ChartPoint& a, const ChartPoint& b) {
    Vec dir = b.coords - a.coords;
    double total = 0.0;
    for (int panel = 0; panel < quad_panels_; ++panel) {
      double a0 = static_cast<double>(panel) / quad_panels_;
      double w = 1.0 / quad_panels_;
      for (int i = 0; i < kGL; ++i) {
        double s = a0 + w * kGLx[i];
        ChartPoint qs = a;
        axpy(s, dir, qs.coords);
        total += w * kGLw[i] * dot(lambda_minus_xi(qs), dir);
      }
    }
    return total;
  };
  return leg(p_, m) + leg(m, q);
}

Vec GluedStructure::drho_form(const ChartPoint& q) const {
  Vec uv = uv_coords(q);
  double r = dot(uv, uv);
  double dr = drho_dr(r);
  Vec out(dual_.cols(), 0.0);
  if (dr == 0.0) return out;
  // d(rho) = rho'(r) * 2 (u1 du1 + v1 dv1 + u2 du2 + v2 dv2)
  for (int c = 0; c < 4; ++c)
    for (int k = 0; k < dual_.cols(); ++k) out[k] += dr * 2.0 * uv[c] * dual_(c, k);
  return out;
}

Vec GluedStructure::lambda_tilde(const ChartPoint& q) const {
  double r = r_of(q);
  double rr = rho(r);
  if (rr == 0.0) return xi(q);
  if (rr == 1.0) return lambda(q);
  Vec out = xi(q);
  Vec l = lambda(q);
  for (size_t k = 0; k < out.size(); ++k) out[k] = (1.0 - rr) * out[k] + rr * l[k];
  double H = primitive_H(q);
  Vec dp = drho_form(q);
  axpy(H, dp, out);
  return out;
}

double GluedStructure::phi_tilde(const ChartPoint& q) const {
  double rr = rho(r_of(q));
  if (rr == 0.0) return psi(q);
  if (rr == 1.0) return phi(q);
  return (1.0 - rr) * psi(q) + rr * phi(q);
}

Vec GluedStructure::liouville_of(const Vec& one_form, const ChartPoint& q) const {
  Jet2 jet = eval_jet2(*scene_, q, eps_);
  Mat w = omega_from_hess(jet.hess, scene_->dc_sign);
  Lu lu(w.transposed());
  if (!lu.ok()) throw Error(Errc::Degenerate, "omega degenerate");
  return lu.solve(one_form);
}

Vec GluedStructure::y_field(const ChartPoint& q) const { return liouville_of(xi(q), q); }

Vec GluedStructure::z_tilde(const ChartPoint& q) const { return liouville_of(lambda_tilde(q), q); }

Vec GluedStructure::grad_psi(const ChartPoint& q) const {
  const int nv = scene_->dim_real();
  ad::CDual2 P = scene_->s0_jet_raw(q);
  ad::CDual2 Q = scene_->h_jet_raw(q);
  ad::CDual2 s = P + Q * eps_;
  ad::Dual2 f = log(ad::abs2(Q)) - log(ad::abs2(s));
  Jet2 fj = jet_from_dual(f);
  Vec uv = uv_coords(q);
  Vec g = fj.grad;
  for (int k = 0; k < nv; ++k) g[k] += uv[1] * dual_(1, k) + uv[3] * dual_(3, k);
  return g;
}

Jet2 GluedStructure::phi_tilde_jet(const ChartPoint& q) const {
  const int nv = scene_->dim_real();
  // all pieces share the coordinate seeding, so their jets combine freely
  ad::Dual2 phi_j = scene_->phi_jet_raw(q, eps_);
  ad::CDual2 P = scene_->s0_jet_raw(q);
  ad::CDual2 Q = scene_->h_jet_raw(q);
  ad::CDual2 s = P + Q * eps_;
  ad::Dual2 f = log(ad::abs2(Q)) - log(ad::abs2(s));

  // linear frame coordinates as jets
  ad::Dual2 uv_j[4];
  for (int c = 0; c < 4; ++c) {
    ad::Dual2 acc = ad::Dual2::constant(0.0, nv);
    for (int k = 0; k < nv; ++k)
      acc = acc + ad::Dual2::variable(q.coords[k] - p_.coords[k], k, nv) * dual_(c, k);
    uv_j[c] = acc;
  }

  ad::Dual2 psi_j =
      f + (uv_j[1] * uv_j[1] + uv_j[3] * uv_j[3]) * 0.5 + (phi_at_p_ + 2.0 * std::log(eps_));

  ad::Dual2 r_j = uv_j[0] * uv_j[0] + uv_j[1] * uv_j[1] + uv_j[2] * uv_j[2] + uv_j[3] * uv_j[3];
  double r = r_j.value();
  double x = (r - eps0_ / 4.0) / (eps0_ / 4.0);
  double sx = quintic_smoothstep(x);
  double dsx = quintic_smoothstep_d(x) / (eps0_ / 4.0);
  double d2sx = 0.0;
  if (x > 0.0 && x < 1.0) {
    double xx = x;
    d2sx = (60.0 * xx + xx * xx * (-180.0 + 120.0 * xx)) / ((eps0_ / 4.0) * (eps0_ / 4.0));
  }
  ad::Dual2 rho_j = r_j.chain(sx, dsx, d2sx);

  ad::Dual2 one = ad::Dual2::constant(1.0, nv);
  return jet_from_dual((one - rho_j) * psi_j + rho_j * phi_j);
}

GluedStructure build_glued(const Scene& scene, const ChartPoint& p, double eps0, double eps) {
  if (scene.name != "local_nc" || scene.n != 2)
    throw Error(Errc::NotLocalModel, "gluing is built for the n=2 local model only");
  if (eps / eps0 > 0.1 + 1e-12) throw Error(Errc::BadParams, "needs eps/eps0 <= 0.1");

  GluedStructure gs(scene, p, eps0, eps);
  gs.phi_at_p_ = scene.phi(p, eps);

  // thimble tangent plane at p from the branch normals and the quadratic
  // model of pi (same construction the transport seeding uses)
  Vec du, dv;
  {
    std::vector<Vec> normals(2);
    std::vector<bool> have(2, false);
    for (size_t bi = 0; bi < scene.branches.size(); ++bi) {
      const auto& br = scene.branches[bi];
      int tag = scene.branch_tag[bi];
      if (have[tag] || br.chart != p.chart || br.distance_to(p.coords) > 1e-8) continue;
      const int nv = scene.dim_real();
      for (int k = 0; k < nv; ++k) {
        Vec e(nv, 0.0);
        e[k] = 1.0;
        for (const auto& b : br.basis) axpy(-dot(e, b), b, e);
        double en = norm(e);
        if (en > 1e-8) {
          normals[tag] = (1.0 / en) * e;
          have[tag] = true;
          break;
        }
      }
    }
    if (!have[0] || !have[1]) throw Error(Errc::FrameFailure, "branch normals not found at p");
    du = normals[0];
    dv = normals[1];
  }

  PiJet pj = pi_jet(scene, p);
  std::complex<double> kappa(dot(du, mat_vec(pj.hess_re, dv)), dot(du, mat_vec(pj.hess_im, dv)));
  if (std::abs(kappa) < 1e-10) throw Error(Errc::FrameFailure, "degenerate quadratic model at p");
  // thimble tangent plane: radial and angular directions of the seed circle
  // u = r e^{i theta}, v = r e^{-i(theta + arg kappa)}
  const double ap = std::arg(kappa);

  Vec jdu = apply_J(du), jdv = apply_J(dv);
  Vec b1 = du;
  axpy(std::cos(ap), dv, b1);
  axpy(-std::sin(ap), jdv, b1);
  Vec b2 = jdu;
  axpy(-std::sin(ap), dv, b2);
  axpy(-std::cos(ap), jdv, b2);

  // omega at p (constant across the flat local model)
  Jet2 jet = eval_jet2(scene, p, eps);
  gs.omega_ = omega_from_hess(jet.hess, scene.dc_sign);

  auto omega_pair = [&](const Vec& x, const Vec& y) { return dot(x, mat_vec(gs.omega_, y)); };
  auto metric = [&](const Vec& x, const Vec& y) { return omega_pair(x, apply_J(y)); };

  // g-orthonormal basis of the plane, then V_i = J U_i
  Vec u1 = b1;
  double n1 = std::sqrt(metric(u1, u1));
  if (!(n1 > 0)) throw Error(Errc::FrameFailure, "thimble plane degenerate");
  u1 = (1.0 / n1) * u1;
  Vec u2 = b2;
  axpy(-metric(u2, u1), u1, u2);
  double n2 = std::sqrt(metric(u2, u2));
  if (!(n2 > 1e-12)) throw Error(Errc::FrameFailure, "Gram-Schmidt degenerated");
  u2 = (1.0 / n2) * u2;
  Vec v1 = apply_J(u1), v2 = apply_J(u2);

  const int nv = scene.dim_real();
  gs.frame_ = Mat(nv, 4);
  for (int k = 0; k < nv; ++k) {
    gs.frame_(k, 0) = u1[k];
    gs.frame_(k, 1) = v1[k];
    gs.frame_(k, 2) = u2[k];
    gs.frame_(k, 3) = v2[k];
  }

  // frame relations: omega(U_i, V_j) = delta_ij, omega(U,U) = omega(V,V) = 0
  const Vec* cols[4] = {&u1, &v1, &u2, &v2};
  double want[4][4] = {{0, 1, 0, 0}, {-1, 0, 0, 0}, {0, 0, 0, 1}, {0, 0, -1, 0}};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (std::abs(omega_pair(*cols[i], *cols[j]) - want[i][j]) > 1e-9)
        throw Error(Errc::FrameFailure, "frame omega-relations violated");

  // dual basis rows
  Mat f4(4, 4);
  // the frame spans a 4-dimensional chart here (n = 2), so invert directly
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) f4(i, j) = gs.frame_(i, j);
  Lu lu(f4);
  if (!lu.ok()) throw Error(Errc::FrameFailure, "frame not invertible");
  // rows of F^{-1} are the coordinate functionals du1, dv1, du2, dv2
  gs.dual_ = Mat(4, 4);
  Lu lut(f4.transposed());
  for (int k = 0; k < 4; ++k) {
    Vec e(4, 0.0);
    e[k] = 1.0;
    Vec row = lut.solve(e);
    for (int c = 0; c < 4; ++c) gs.dual_(k, c) = row[c];
  }

  // H normalization and the path-independence audit; refine panels if needed
  Rng rng(7, 5);
  for (int attempt = 0; attempt < 4; ++attempt) {
    double worst = 0.0;
    for (int s = 0; s < 6; ++s) {
      Vec uv(4);
      for (int c = 0; c < 4; ++c) uv[c] = rng.uniform(-0.4, 0.4) * std::sqrt(eps0);
      ChartPoint q = gs.from_uv(uv);
      if (std::norm(scene.seps_value(q, eps)) < 1e-12) continue;
      worst = std::max(worst, std::abs(gs.primitive_H(q) - gs.primitive_H_alt(q)));
    }
    if (worst < 1e-9) break;
    gs.quad_panels_ *= 2;
    if (attempt == 3) throw Error(Errc::PathDependence, "primitive H failed the two-path audit");
  }

  if (std::abs(gs.primitive_H(p)) > 1e-14) throw Error(Errc::PathDependence, "H(p) != 0");
  return gs;
}

// ---------------------------------------------------------------------------
// verification
// ---------------------------------------------------------------------------

namespace {

// numeric exterior derivative of a covector field at q: central differences
// with one Richardson extrapolation (h and h/2) to kill the h^2 term
Mat exterior_derivative(const std::function<Vec(const ChartPoint&)>& form, const ChartPoint& q,
                        double step = 3e-5) {
  const int nv = static_cast<int>(q.coords.size());
  auto jacobian_rows = [&](double h) {
    std::vector<Vec> dk(nv);
    for (int k = 0; k < nv; ++k) {
      ChartPoint qp = q, qm = q;
      qp.coords[k] += h;
      qm.coords[k] -= h;
      Vec fp = form(qp), fm = form(qm);
      dk[k] = (1.0 / (2.0 * h)) * (fp - fm);
    }
    return dk;
  };
  auto coarse = jacobian_rows(step);
  auto fine = jacobian_rows(0.5 * step);
  Mat d(nv, nv);
  for (int k = 0; k < nv; ++k)
    for (int l = 0; l < nv; ++l) {
      double jkl = (4.0 * fine[k][l] - coarse[k][l]) / 3.0;
      double jlk = (4.0 * fine[l][k] - coarse[l][k]) / 3.0;
      d(k, l) = jkl - jlk;
    }
  return d;
}

struct UvSampler {
  const GluedStructure& gs;
  Rng rng;
  double delta;

  UvSampler(const GluedStructure& g, unsigned seed)
      : gs(g), rng(seed, 17), delta(0.45 * std::sqrt(g.eps0())) {}

  // a sample with r in [r_lo, r_hi), |v_i| <= delta, and |pi + eps| at least
  // `divisor_margin` * eps (finite-difference subchecks need extra room: the
  // third derivatives of lambda grow like |pi + eps|^-3)
  ChartPoint draw(double r_lo, double r_hi, double divisor_margin = 0.05) {
    for (int tries = 0; tries < 1000; ++tries) {
      Vec dir(4);
      double nn = 0.0;
      for (int c = 0; c < 4; ++c) {
        dir[c] = rng.uniform(-1.0, 1.0);
        nn += dir[c] * dir[c];
      }
      if (nn < 1e-12) continue;
      nn = std::sqrt(nn);
      double r = rng.uniform(r_lo, r_hi);
      double s = std::sqrt(r) / nn;
      Vec uv = s * dir;
      if (std::abs(uv[1]) > delta || std::abs(uv[3]) > delta) continue;
      ChartPoint q = gs.from_uv(uv);
      std::complex<double> se = gs.scene().seps_value(q, gs.eps());
      if (std::abs(se) < divisor_margin * gs.eps()) continue;
      return q;
    }
    throw Error(Errc::BadParams, "sampler exhausted (region too thin)");
  }
};

}  // namespace

GluedVerification verify_glued(const GluedStructure& gs, int n_samples, unsigned seed) {
  GluedVerification rep;
  UvSampler sampler(gs, seed);
  const double e0 = gs.eps0();
  rep.samples = n_samples;

  int n_inner = n_samples / 4;
  int n_ann = n_samples / 3;
  int n_outer = n_samples - n_inner - n_ann;

  // (a) exact branch identities
  for (int i = 0; i < n_inner; ++i) {
    ChartPoint q = sampler.draw(1e-6, e0 / 4.0 * 0.999);
    Vec d = gs.lambda_tilde(q) - gs.xi(q);
    rep.branch_inner_max = std::max(rep.branch_inner_max, norm_inf(d));
    double phid = std::abs(gs.phi_tilde(q) - gs.psi(q));
    rep.branch_inner_max = std::max(rep.branch_inner_max, phid);
  }
  for (int i = 0; i < n_outer; ++i) {
    ChartPoint q = sampler.draw(e0 / 2.0 * 1.001, e0);
    Vec d = gs.lambda_tilde(q) - gs.lambda(q);
    rep.branch_outer_max = std::max(rep.branch_outer_max, norm_inf(d));
    double phid = std::abs(gs.phi_tilde(q) - gs.phi(q));
    rep.branch_outer_max = std::max(rep.branch_outer_max, phid);
  }

  // (b) d(lambda~) = omega and d(xi) = omega, numeric exterior derivatives
  auto lt = [&](const ChartPoint& q) { return gs.lambda_tilde(q); };
  auto xif = [&](const ChartPoint& q) { return gs.xi(q); };
  auto dH = [&](const ChartPoint& q) {
    // numeric gradient of H vs lambda - xi
    const int nv = static_cast<int>(q.coords.size());
    Vec g(nv);
    double step = 1e-5;
    for (int k = 0; k < nv; ++k) {
      ChartPoint qp = q, qm = q;
      qp.coords[k] += step;
      qm.coords[k] -= step;
      g[k] = (gs.primitive_H(qp) - gs.primitive_H(qm)) / (2.0 * step);
    }
    return g;
  };

  int n_ext = std::min(n_samples, 200);  // FD exterior derivatives are costly
  for (int i = 0; i < n_ext; ++i) {
    // stronger divisor margin: the FD truncation error grows like
    // |pi + eps|^-5 near the divisor. Also keep the stencil clear of the
    // cutoff seams r = eps0/4 and eps0/2, where rho''' jumps and central
    // differences cannot resolve the (still C^1) form.
    ChartPoint q;
    for (int tries = 0;; ++tries) {
      q = sampler.draw(1e-4, e0, 0.5);
      double r = gs.r_of(q);
      double band = 1e-2 * e0;
      if (std::abs(r - e0 / 4.0) > band && std::abs(r - e0 / 2.0) > band) break;
      if (tries > 200) break;
    }
    Mat dl = exterior_derivative(lt, q);
    Mat dx = exterior_derivative(xif, q);
    Jet2 jet = eval_jet2(gs.scene(), q, gs.eps());
    Mat w = omega_from_hess(jet.hess, gs.scene().dc_sign);
    for (int k = 0; k < w.rows(); ++k)
      for (int l = 0; l < w.cols(); ++l) {
        rep.dlambda_residual = std::max(rep.dlambda_residual, std::abs(dl(k, l) - w(k, l)));
        rep.dxi_residual = std::max(rep.dxi_residual, std::abs(dx(k, l) - w(k, l)));
      }
    Vec lmx = gs.lambda(q) - gs.xi(q);
    rep.dH_residual = std::max(rep.dH_residual, norm_inf(dH(q) - lmx));
    rep.path_independence =
        std::max(rep.path_independence, std::abs(gs.primitive_H(q) - gs.primitive_H_alt(q)));
  }

  // (c) the empirical constant C and |H d(rho)| <= C/2 on the annulus
  for (int i = 0; i < n_ann; ++i) {
    ChartPoint q = sampler.draw(e0 / 4.0 * 1.001, e0 / 2.0 * 0.999);
    double r = gs.r_of(q);
    double H = gs.primitive_H(q);
    double dp = norm(gs.drho_form(q));
    rep.c_H = std::max(rep.c_H, std::abs(H) / std::sqrt(r));
    rep.c_rho = std::max(rep.c_rho, e0 * dp / std::sqrt(r));
    rep.max_H_drho = std::max(rep.max_H_drho, std::abs(H) * dp);
  }
  double C = std::max(rep.c_H, rep.c_rho);
  rep.h_drho_bounded = rep.max_H_drho <= 0.5 * C;

  // (d) gradient-like positivity of (lambda~, phi~) outside the 1e-3 ball
  rep.min_gradlike = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_samples; ++i) {
    ChartPoint q = sampler.draw(1e-5, e0);
    if (norm(q.coords - gs.center().coords) <= 1e-3) continue;
    Jet2 pj = gs.phi_tilde_jet(q);
    Vec zt = gs.z_tilde(q);
    rep.min_gradlike = std::min(rep.min_gradlike, dot(pj.grad, zt));
  }
  rep.gradlike_positive = rep.min_gradlike > 0.0;

  // (e) interpolation family on the annulus, t in {0, 1/4, 1/2, 3/4, 1}
  rep.min_interp_gradlike = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_ann; ++i) {
    ChartPoint q = sampler.draw(e0 / 4.0 * 1.001, e0 / 2.0 * 0.999);
    Jet2 pjt = gs.phi_tilde_jet(q);
    Jet2 pj = eval_jet2(gs.scene(), q, gs.eps());
    Vec lt_q = gs.lambda_tilde(q);
    Vec l_q = gs.lambda(q);
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      Vec form(l_q.size());
      for (size_t k = 0; k < form.size(); ++k) form[k] = (1.0 - t) * l_q[k] + t * lt_q[k];
      Vec z = gs.liouville_of(form, q);
      Vec grad(pj.grad.size());
      for (size_t k = 0; k < grad.size(); ++k) grad[k] = (1.0 - t) * pj.grad[k] + t * pjt.grad[k];
      rep.min_interp_gradlike = std::min(rep.min_interp_gradlike, dot(grad, z));
    }
  }
  rep.interp_positive = rep.min_interp_gradlike > 0.0;

  // raw interpolation margins inside r < eps0/4 (informational only)
  rep.min_interp_inner = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_inner; ++i) {
    ChartPoint q = sampler.draw(1e-5, e0 / 4.0 * 0.999);
    if (norm(q.coords - gs.center().coords) <= 1e-3) continue;
    Jet2 pjt = gs.phi_tilde_jet(q);
    Jet2 pj = eval_jet2(gs.scene(), q, gs.eps());
    Vec lt_q = gs.lambda_tilde(q);
    Vec l_q = gs.lambda(q);
    for (double t : {0.25, 0.5, 0.75}) {
      Vec form(l_q.size());
      for (size_t k = 0; k < form.size(); ++k) form[k] = (1.0 - t) * l_q[k] + t * lt_q[k];
      Vec z = gs.liouville_of(form, q);
      Vec grad(pj.grad.size());
      for (size_t k = 0; k < grad.size(); ++k) grad[k] = (1.0 - t) * pj.grad[k] + t * pjt.grad[k];
      rep.min_interp_inner = std::min(rep.min_interp_inner, dot(grad, z));
    }
  }
  return rep;
}

GluedUnstableReport glued_unstable_check(const GluedStructure& gs, const ThimbleMesh& mesh,
                                         unsigned seed, double inner_box_only) {
  GluedUnstableReport rep;
  const Scene& scene = gs.scene();
  const double e0 = gs.eps0();

  // (a) multistart critical point search of phi~ in the glued neighborhood
  Rng rng(seed, 23);
  double box_r = inner_box_only > 0.0 ? inner_box_only : e0;
  std::vector<ChartPoint> found;
  for (int s = 0; s < 160; ++s) {
    Vec uv(4);
    double nn = 0.0;
    for (int c = 0; c < 4; ++c) {
      uv[c] = rng.uniform(-1.0, 1.0);
      nn += uv[c] * uv[c];
    }
    double r = rng.uniform(0.0, box_r);
    double scale = std::sqrt(r / std::max(nn, 1e-12));
    for (int c = 0; c < 4; ++c) uv[c] *= scale;
    ChartPoint q = gs.from_uv(uv);

    bool ok = true;
    for (int it = 0; it < 60; ++it) {
      Jet2 jet;
      try {
        jet = gs.phi_tilde_jet(q);
      } catch (const Error&) {
        ok = false;
        break;
      }
      double gn = norm(jet.grad);
      if (gn < 1e-11) break;
      Lu lu(jet.hess, 1e-11);
      Vec dir;
      if (lu.ok())
        dir = lu.solve(jet.grad);
      else
        dir = (1.0 / std::max(jet.hess.max_abs(), 1.0)) * jet.grad;
      double t = 1.0;
      bool step_ok = false;
      for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
        ChartPoint cand = q;
        axpy(-t, dir, cand.coords);
        if (gs.r_of(cand) > box_r * 1.2) continue;
        if (std::norm(scene.seps_value(cand, gs.eps())) < 1e-12) continue;
        try {
          if (norm(gs.phi_tilde_jet(cand).grad) < gn) {
            q = cand;
            step_ok = true;
            break;
          }
        } catch (const Error&) {
          continue;
        }
      }
      if (!step_ok) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    try {
      if (norm(gs.phi_tilde_jet(q).grad) > 1e-9) continue;
    } catch (const Error&) {
      continue;
    }
    bool dup = false;
    for (const auto& f : found)
      if (norm(f.coords - q.coords) < 1e-6) {
        dup = true;
        break;
      }
    if (!dup) found.push_back(q);
  }
  rep.critical_points_found = static_cast<int>(found.size());
  rep.dist_to_p = std::numeric_limits<double>::infinity();
  for (const auto& f : found)
    rep.dist_to_p = std::min(rep.dist_to_p, norm(f.coords - gs.center().coords));
  rep.unique_at_p = found.size() == 1 && rep.dist_to_p < 1e-8;

  // (b) Z~ tangency to the transported mesh
  for (size_t j = 0; j + 1 < mesh.points.size(); ++j)
    for (int k = 0; k < mesh.transverse_count; ++k) {
      int k2 = (k + 1) % mesh.transverse_count;
      if (!mesh.line_ok[k] || !mesh.line_ok[k2]) continue;
      const ChartPoint& q = mesh.points[j][k];
      Vec tu = mesh.points[j + 1][k].coords - q.coords;
      Vec tv = mesh.points[j][k2].coords - q.coords;
      auto tb = orthonormalize({tu, tv});
      if (tb.size() < 2) continue;
      Vec z;
      try {
        z = gs.z_tilde(q);
      } catch (const Error&) {
        continue;
      }
      double zn = norm(z);
      if (zn < 1e-14) continue;
      Vec proj(z.size(), 0.0);
      for (const auto& b : tb) axpy(dot(z, b), b, proj);
      rep.mesh_tangency_residual = std::max(rep.mesh_tangency_residual, norm(z - proj) / zn);
    }
  rep.tangency_ok = rep.mesh_tangency_residual < 1e-6;

  // (c) gradient-like margin of (xi, psi) along the punctured thimble
  rep.min_margin = std::numeric_limits<double>::infinity();
  int pos = 0, neg = 0;
  for (size_t j = 0; j < mesh.points.size(); ++j)
    for (int k = 0; k < mesh.transverse_count; ++k) {
      if (!mesh.line_ok[k]) continue;
      const ChartPoint& q = mesh.points[j][k];
      if (norm(q.coords - gs.center().coords) < 1e-6) continue;
      Vec y;
      try {
        y = gs.y_field(q);
      } catch (const Error&) {
        continue;
      }
      Vec gpsi = gs.grad_psi(q);
      double num = dot(gpsi, y);
      double den = dot(y, y) + dot(gpsi, gpsi);
      if (den <= 0) continue;
      (num > 0 ? pos : neg)++;
      rep.min_margin = std::min(rep.min_margin, std::abs(num) / den);
    }
  rep.sign_consistent = (pos == 0) != (neg == 0);
  rep.sign = pos > 0 ? 1 : (neg > 0 ? -1 : 0);
  return rep;
}

}  // namespace wlab
