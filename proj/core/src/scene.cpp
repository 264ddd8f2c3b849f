#include "wlab/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wlab/geometry.hpp"
#include "wlab/rng.hpp"

namespace wlab {

namespace detail {

std::vector<std::complex<double>> to_cvec(const Vec& coords) {
  std::vector<std::complex<double>> z(coords.size() / 2);
  for (size_t j = 0; j < z.size(); ++j) z[j] = {coords[2 * j], coords[2 * j + 1]};
  return z;
}

Vec to_rvec(const std::vector<std::complex<double>>& z) {
  Vec r(2 * z.size());
  for (size_t j = 0; j < z.size(); ++j) {
    r[2 * j] = z[j].real();
    r[2 * j + 1] = z[j].imag();
  }
  return r;
}

std::vector<ad::CDual2> seed_variables(const Vec& coords, int nv) {
  std::vector<ad::CDual2> z(coords.size() / 2);
  for (size_t j = 0; j < z.size(); ++j)
    z[j] = {ad::Dual2::variable(coords[2 * j], static_cast<int>(2 * j), nv),
            ad::Dual2::variable(coords[2 * j + 1], static_cast<int>(2 * j + 1), nv)};
  return z;
}

std::vector<ad::Dual2> seed_real_variables(const Vec& coords, int nv) {
  std::vector<ad::Dual2> x(coords.size());
  for (size_t k = 0; k < coords.size(); ++k)
    x[k] = ad::Dual2::variable(coords[k], static_cast<int>(k), nv);
  return x;
}

}  // namespace detail

static constexpr double kDomainBoundProjective = 1e4;
static constexpr double kDomainBoundAffine = 1e6;
static constexpr double kDivisorFloor = 1e-300;

bool Scene::in_domain(const ChartPoint& p) const {
  if (p.chart < 0 || p.chart >= num_charts()) return false;
  if (static_cast<int>(p.coords.size()) != dim_real()) return false;
  double bound = atlas == AtlasKind::Affine ? kDomainBoundAffine : kDomainBoundProjective;
  for (double c : p.coords)
    if (!std::isfinite(c) || std::abs(c) > bound) return false;
  return true;
}

void Scene::require_domain(const ChartPoint& p) const {
  if (!in_domain(p)) throw Error(Errc::BadChart, "point outside chart domain");
}

double Scene::phi(const ChartPoint& p, double eps) const {
  require_domain(p);
  const auto& cd = charts[p.chart];
  auto z = detail::to_cvec(p.coords);
  std::complex<double> P = cd.s0.eval(z);
  std::complex<double> Q = cd.h.eval(z);
  std::complex<double> s = P + Q * eps;
  double S2 = s.real() * s.real() + s.imag() * s.imag();
  if (S2 < kDivisorFloor) throw Error(Errc::OnDivisor, "||s_eps||^2 underflow");
  double gv = cd.g.eval(p.coords, z);
  return gv - std::log(S2);
}

ad::Dual2 Scene::phi_jet_raw(const ChartPoint& p, double eps) const {
  require_domain(p);
  const auto& cd = charts[p.chart];
  const int nv = dim_real();
  auto z = detail::seed_variables(p.coords, nv);
  auto x = detail::seed_real_variables(p.coords, nv);
  ad::CDual2 P = cd.s0.eval(z, nv);
  ad::CDual2 Q = cd.h.eval(z, nv);
  ad::CDual2 s = P + Q * eps;
  ad::Dual2 S2 = ad::abs2(s);
  if (S2.value() < kDivisorFloor) throw Error(Errc::OnDivisor, "||s_eps||^2 underflow");
  ad::Dual2 gv = cd.g.eval(x, z, nv);
  return gv - log(S2);
}

double Scene::g_value(const ChartPoint& p) const {
  require_domain(p);
  auto z = detail::to_cvec(p.coords);
  return charts[p.chart].g.eval(p.coords, z);
}

ad::Dual2 Scene::g_jet_raw(const ChartPoint& p) const {
  require_domain(p);
  const int nv = dim_real();
  auto z = detail::seed_variables(p.coords, nv);
  auto x = detail::seed_real_variables(p.coords, nv);
  return charts[p.chart].g.eval(x, z, nv);
}

std::complex<double> Scene::s0_value(const ChartPoint& p) const {
  return charts[p.chart].s0.eval(detail::to_cvec(p.coords));
}

std::complex<double> Scene::h_value(const ChartPoint& p) const {
  return charts[p.chart].h.eval(detail::to_cvec(p.coords));
}

std::complex<double> Scene::seps_value(const ChartPoint& p, double eps) const {
  auto z = detail::to_cvec(p.coords);
  return charts[p.chart].s0.eval(z) + charts[p.chart].h.eval(z) * eps;
}

ad::CDual2 Scene::s0_jet_raw(const ChartPoint& p) const {
  const int nv = dim_real();
  auto z = detail::seed_variables(p.coords, nv);
  return charts[p.chart].s0.eval(z, nv);
}

ad::CDual2 Scene::h_jet_raw(const ChartPoint& p) const {
  const int nv = dim_real();
  auto z = detail::seed_variables(p.coords, nv);
  return charts[p.chart].h.eval(z, nv);
}

double Scene::log_h_norm2(const ChartPoint& p) const {
  std::complex<double> hv = h_value(p);
  double a2 = std::norm(hv);
  if (a2 < kDivisorFloor) throw Error(Errc::OnDivisor, "||h||^2 underflow");
  return std::log(a2) - g_value(p);
}

ad::Dual2 Scene::neg_log_h_norm2_jet(const ChartPoint& p) const {
  const int nv = dim_real();
  auto z = detail::seed_variables(p.coords, nv);
  auto x = detail::seed_real_variables(p.coords, nv);
  const auto& cd = charts[p.chart];
  ad::Dual2 H2 = ad::abs2(cd.h.eval(z, nv));
  if (H2.value() < kDivisorFloor) throw Error(Errc::OnDivisor, "||h||^2 underflow");
  return cd.g.eval(x, z, nv) - log(H2);
}

// ---------------------------------------------------------------------------
// atlas plumbing
// ---------------------------------------------------------------------------

namespace {

// projective chart index helpers: chart i of CP^m drops coordinate i
int local_index(int chart, int global_j) { return global_j < chart ? global_j : global_j - 1; }

std::vector<std::complex<double>> proj_homogeneous(const std::vector<std::complex<double>>& w, int chart, int m) {
  std::vector<std::complex<double>> z(m + 1);
  for (int j = 0; j <= m; ++j) z[j] = (j == chart) ? 1.0 : w[local_index(chart, j)];
  return z;
}

int argmax_modulus(const std::vector<std::complex<double>>& z) {
  int best = 0;
  double bm = -1.0;
  for (size_t j = 0; j < z.size(); ++j) {
    double m = std::abs(z[j]);
    if (m > bm) {
      bm = m;
      best = static_cast<int>(j);
    }
  }
  return best;
}

}  // namespace

std::vector<std::complex<double>> Scene::homogeneous(const ChartPoint& p, int factor) const {
  auto w = detail::to_cvec(p.coords);
  switch (atlas) {
    case AtlasKind::Affine:
      return w;
    case AtlasKind::Projective:
      return proj_homogeneous(w, p.chart, factor_n);
    case AtlasKind::BiProjective: {
      const int m = factor_n;
      int i = p.chart / (m + 1), i2 = p.chart % (m + 1);
      std::vector<std::complex<double>> wf(w.begin(), w.begin() + m);
      std::vector<std::complex<double>> ws(w.begin() + m, w.end());
      return factor == 0 ? proj_homogeneous(wf, i, m) : proj_homogeneous(ws, i2, m);
    }
  }
  return w;
}

int Scene::owning_chart(const ChartPoint& p) const {
  switch (atlas) {
    case AtlasKind::Affine:
      return 0;
    case AtlasKind::Projective:
      return argmax_modulus(homogeneous(p, 0));
    case AtlasKind::BiProjective: {
      int i = argmax_modulus(homogeneous(p, 0));
      int i2 = argmax_modulus(homogeneous(p, 1));
      return i * (factor_n + 1) + i2;
    }
  }
  return 0;
}

namespace {

std::vector<std::complex<double>> proj_rechart(const std::vector<std::complex<double>>& z, int target) {
  std::complex<double> zk = z[target];
  if (std::abs(zk) < 1e-14)
    throw Error(Errc::BadChart, "target chart coordinate vanishes");
  std::vector<std::complex<double>> w;
  w.reserve(z.size() - 1);
  for (size_t j = 0; j < z.size(); ++j)
    if (static_cast<int>(j) != target) w.push_back(z[j] / zk);
  return w;
}

}  // namespace

ChartPoint Scene::to_chart(const ChartPoint& p, int target) const {
  if (target < 0 || target >= num_charts()) throw Error(Errc::BadChart, "invalid target chart");
  if (target == p.chart) return p;
  switch (atlas) {
    case AtlasKind::Affine:
      return p;
    case AtlasKind::Projective: {
      auto w = proj_rechart(homogeneous(p, 0), target);
      return {target, detail::to_rvec(w)};
    }
    case AtlasKind::BiProjective: {
      const int m = factor_n;
      int ti = target / (m + 1), ti2 = target % (m + 1);
      auto wf = proj_rechart(homogeneous(p, 0), ti);
      auto ws = proj_rechart(homogeneous(p, 1), ti2);
      wf.insert(wf.end(), ws.begin(), ws.end());
      return {target, detail::to_rvec(wf)};
    }
  }
  return p;
}

Mat Scene::transition_jacobian(const ChartPoint& p, int target) const {
  const int nv = dim_real();
  if (target == p.chart || atlas == AtlasKind::Affine) return Mat::identity(nv);

  auto z = detail::seed_variables(p.coords, nv);
  std::vector<ad::CDual2> out;
  out.reserve(n);

  auto rechart_ad = [&](const std::vector<ad::CDual2>& w, int source, int tgt, int m) {
    std::vector<ad::CDual2> zh(m + 1);
    for (int j = 0; j <= m; ++j)
      zh[j] = (j == source) ? ad::CDual2::constant(1.0, nv) : w[local_index(source, j)];
    ad::CDual2 zk = zh[tgt];
    if (std::abs(zk.value()) < 1e-14) throw Error(Errc::BadChart, "target chart coordinate vanishes");
    for (int j = 0; j <= m; ++j)
      if (j != tgt) out.push_back(zh[j] / zk);
  };

  if (atlas == AtlasKind::Projective) {
    rechart_ad(z, p.chart, target, factor_n);
  } else {
    const int m = factor_n;
    int i = p.chart / (m + 1), i2 = p.chart % (m + 1);
    int ti = target / (m + 1), ti2 = target % (m + 1);
    std::vector<ad::CDual2> wf(z.begin(), z.begin() + m);
    std::vector<ad::CDual2> ws(z.begin() + m, z.end());
    rechart_ad(wf, i, ti, m);
    // second-factor variables live at offset m in the AD seeding above, which
    // is already the case since z was seeded over all 2n reals
    rechart_ad(ws, i2, ti2, m);
  }

  Mat jac(nv, nv);
  for (int cj = 0; cj < n; ++cj)
    for (int k = 0; k < nv; ++k) {
      jac(2 * cj, k) = out[cj].re.grad(k);
      jac(2 * cj + 1, k) = out[cj].im.grad(k);
    }
  return jac;
}

double Scene::distance(const ChartPoint& p, const ChartPoint& q) const {
  if (p.chart == q.chart) return norm(p.coords - q.coords);
  double best = std::numeric_limits<double>::infinity();
  for (int c : {p.chart, q.chart, owning_chart(p)}) {
    try {
      ChartPoint a = to_chart(p, c), b = to_chart(q, c);
      best = std::min(best, norm(a.coords - b.coords));
    } catch (const Error&) {
      // not representable in that chart; try the others
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// structure distances
// ---------------------------------------------------------------------------

double Scene::dist_to_stratum(const ChartPoint& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& patch : stratum) {
    try {
      ChartPoint q = to_chart(p, patch.chart);
      best = std::min(best, patch.distance_to(q.coords));
    } catch (const Error&) {
    }
  }
  return best;
}

double Scene::dist_to_crit_phi0(const ChartPoint& p) const {
  switch (truth.phi0) {
    case KnownTruth::Phi0Set::None:
      return std::numeric_limits<double>::infinity();
    case KnownTruth::Phi0Set::Point:
      return distance(p, truth.phi0_point);
    case KnownTruth::Phi0Set::ModulusTorus: {
      // local model: Crit(phi_0) = {|z_0| = 1, |z_1| = 1, psi-critical rest}
      auto z = detail::to_cvec(p.coords);
      double d2 = 0.0;
      for (int j = 0; j < 2; ++j) {
        double dm = std::abs(z[j]) - 1.0;
        d2 += dm * dm;
      }
      for (int j = 2; j < n; ++j) d2 += std::norm(z[j]);
      return std::sqrt(d2);
    }
    case KnownTruth::Phi0Set::EqualModulusCircle: {
      // chart-derived set {|z_0| = |z_1|, z_{>=2} = 0}, unit-normalized
      auto z = homogeneous(p, 0);
      double nz = 0.0;
      for (const auto& c : z) nz += std::norm(c);
      nz = std::sqrt(nz);
      double inv = 1.0 / nz;
      double target = 1.0 / std::sqrt(2.0);
      double d2 = 0.0;
      double m0 = std::abs(z[0]) * inv - target;
      double m1 = std::abs(z[1]) * inv - target;
      d2 = m0 * m0 + m1 * m1;
      for (size_t j = 2; j < z.size(); ++j) d2 += std::norm(z[j] * inv);
      return std::sqrt(d2);
    }
  }
  return std::numeric_limits<double>::infinity();
}

bool Scene::has_base_locus() const {
  // B is empty iff h never vanishes; for the scenes here that means h is a
  // nonzero constant polynomial
  for (const auto& cd : charts) {
    bool constant = true;
    for (const auto& t : cd.h.terms)
      for (int e : t.powers)
        if (e > 0) constant = false;
    if (!constant) return true;
  }
  return false;
}

namespace {

// minimize |q - p|^2 over q in (affine patch) with h(q) = 0, by Newton on the
// KKT system in the patch's intrinsic coordinates; returns distance or +inf
double branch_h_distance(const Scene& scene, const AffineSubspace& patch, const ChartPoint& p_in,
                         Rng& rng, int multistarts) {
  ChartPoint p;
  try {
    p = scene.to_chart(p_in, patch.chart);
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
  const int du = static_cast<int>(patch.basis.size());
  if (du == 0) {
    // isolated point: distance if h vanishes there
    ChartPoint q{patch.chart, patch.base};
    return std::abs(scene.h_value(q)) < 1e-10 ? norm(p.coords - patch.base)
                                              : std::numeric_limits<double>::infinity();
  }

  auto embed = [&](const Vec& u) {
    Vec q = patch.base;
    for (int a = 0; a < du; ++a) axpy(u[a], patch.basis[a], q);
    return q;
  };

  double best = std::numeric_limits<double>::infinity();
  Vec u0(du, 0.0);
  {  // warm start: projection of p onto the patch
    for (int a = 0; a < du; ++a) u0[a] = dot(p.coords - patch.base, patch.basis[a]);
  }

  for (int s = 0; s < multistarts; ++s) {
    Vec u = u0;
    if (s > 0)
      for (int a = 0; a < du; ++a) u[a] = u0[a] + rng.uniform(-1.0, 1.0);
    Vec mu(2, 0.0);  // multipliers for Re h = Im h = 0

    bool converged = false;
    for (int it = 0; it < 60; ++it) {
      ChartPoint q{patch.chart, embed(u)};
      if (!scene.in_domain(q)) break;
      ad::CDual2 hj = scene.h_jet_raw(q);
      const int nv = scene.dim_real();

      // constraint values, gradients, Hessians in intrinsic coordinates
      Vec c(2);
      c[0] = hj.re.value();
      c[1] = hj.im.value();
      Mat cg(2, du);
      std::vector<Mat> ch(2, Mat(du, du));
      for (int a = 0; a < du; ++a) {
        double gre = 0.0, gim = 0.0;
        for (int k = 0; k < nv; ++k) {
          gre += hj.re.grad(k) * patch.basis[a][k];
          gim += hj.im.grad(k) * patch.basis[a][k];
        }
        cg(0, a) = gre;
        cg(1, a) = gim;
        for (int b = 0; b < du; ++b) {
          double hre = 0.0, him = 0.0;
          for (int k = 0; k < nv; ++k)
            for (int l = 0; l < nv; ++l) {
              hre += hj.re.hess(k, l) * patch.basis[a][k] * patch.basis[b][l];
              him += hj.im.hess(k, l) * patch.basis[a][k] * patch.basis[b][l];
            }
          ch[0](a, b) = hre;
          ch[1](a, b) = him;
        }
      }

      // KKT residual: u - u_p + sum mu_i grad c_i ; c(u)
      Vec up(du);
      for (int a = 0; a < du; ++a) up[a] = dot(p.coords - patch.base, patch.basis[a]);
      Vec r(du + 2, 0.0);
      for (int a = 0; a < du; ++a) {
        r[a] = u[a] - up[a];
        for (int i = 0; i < 2; ++i) r[a] += mu[i] * cg(i, a);
      }
      r[du] = c[0];
      r[du + 1] = c[1];

      if (norm(r) < 1e-11) {
        converged = true;
        break;
      }

      Mat k(du + 2, du + 2);
      for (int a = 0; a < du; ++a) {
        k(a, a) += 1.0;
        for (int b = 0; b < du; ++b)
          for (int i = 0; i < 2; ++i) k(a, b) += mu[i] * ch[i](a, b);
        for (int i = 0; i < 2; ++i) {
          k(a, du + i) = cg(i, a);
          k(du + i, a) = cg(i, a);
        }
      }
      Lu lu(k);
      if (!lu.ok()) break;
      Vec step = lu.solve(r);
      for (int a = 0; a < du; ++a) u[a] -= step[a];
      for (int i = 0; i < 2; ++i) mu[i] -= step[du + i];
    }

    if (converged) {
      Vec q = embed(u);
      ChartPoint qc{patch.chart, q};
      if (std::abs(scene.h_value(qc)) < 1e-8) best = std::min(best, norm(q - p.coords));
    }
  }
  return best;
}

}  // namespace

double Scene::dist_to_base_locus(const ChartPoint& p, int multistarts, unsigned seed) const {
  if (!has_base_locus()) return std::numeric_limits<double>::infinity();
  Rng rng(seed, 77);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& patch : branches) best = std::min(best, branch_h_distance(*this, patch, p, rng, multistarts));
  return best;
}

double Scene::dist_to_divisor_off_stratum(const ChartPoint& p, double exclusion_radius) const {
  // The divisor branches and the stratum are affine in every chart here, so
  // the nearest divisor point at stratum-distance >= r admits a direct
  // computation: project onto the branch, then push the projection out of the
  // stratum tube if it landed inside.
  double best = std::numeric_limits<double>::infinity();
  for (const auto& patch : branches) {
    ChartPoint q;
    try {
      q = to_chart(p, patch.chart);
    } catch (const Error&) {
      continue;
    }
    Vec proj = patch.project(q.coords);
    double d_perp = norm(q.coords - proj);
    double dS = dist_to_stratum({patch.chart, proj});
    double d = dS >= exclusion_radius
                   ? d_perp
                   : std::sqrt(d_perp * d_perp + (exclusion_radius - dS) * (exclusion_radius - dS));
    best = std::min(best, d);
  }
  return best;
}

// ---------------------------------------------------------------------------
// built-in scenes
// ---------------------------------------------------------------------------

namespace {

std::vector<std::complex<double>> default_coeffs(int lo, int hi) {
  std::vector<std::complex<double>> a;
  for (int j = lo; j <= hi; ++j) a.push_back(1.0 + 0.1 * j);
  return a;
}

void check_generic(const std::vector<std::complex<double>>& a) {
  for (size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i]) == 0.0) throw Error(Errc::BadParams, "pencil coefficient a_j = 0");
    for (size_t j = i + 1; j < a.size(); ++j)
      if (std::abs(std::abs(a[i]) - std::abs(a[j])) < 1e-12)
        throw Error(Errc::BadParams, "repeated pencil coefficient moduli |a_i| = |a_j|");
  }
}

// basis vectors e_{2j}, e_{2j+1} for the complex coordinates in `which`
std::vector<Vec> complex_axes(int dim_real, const std::vector<int>& which) {
  std::vector<Vec> basis;
  for (int j : which)
    for (int r = 0; r < 2; ++r) {
      Vec e(dim_real, 0.0);
      e[2 * j + r] = 1.0;
      basis.push_back(e);
    }
  return basis;
}

Scene make_local_nc(const SceneParams& params) {
  const int n = params.n;
  if (n < 2 || n > 6) throw Error(Errc::BadParams, "local_nc needs 2 <= n <= 6");
  std::vector<double> psi = params.psi;
  if (psi.empty()) psi.assign(2 * (n - 2), 1.0);
  if (static_cast<int>(psi.size()) != 2 * (n - 2))
    throw Error(Errc::BadParams, "psi needs 2(n-2) coefficients");
  for (int j = 0; j + 1 < static_cast<int>(psi.size()); j += 2)
    if (psi[j] + psi[j + 1] <= 0.0)
      throw Error(Errc::BadParams, "psi signature breaks positivity (a_j + b_j <= 0)");

  Scene sc;
  sc.name = "local_nc";
  sc.atlas = AtlasKind::Affine;
  sc.n = n;
  sc.box_radius = 1.5;

  ChartData cd;
  cd.s0 = Poly::coordinate(0, n) * Poly::coordinate(1, n);
  cd.h = Poly::constant(1.0, n);
  std::vector<RealExpr> gparts;
  gparts.push_back(RealExpr::abs2(Poly::coordinate(0, n)));
  gparts.push_back(RealExpr::abs2(Poly::coordinate(1, n)));
  for (int j = 2; j < n; ++j) {
    int kx = 2 * j, ky = 2 * j + 1;
    gparts.push_back(RealExpr::scale(psi[2 * (j - 2)],
                                     RealExpr::prod(RealExpr::coordinate(kx), RealExpr::coordinate(kx))));
    gparts.push_back(RealExpr::scale(psi[2 * (j - 2) + 1],
                                     RealExpr::prod(RealExpr::coordinate(ky), RealExpr::coordinate(ky))));
  }
  cd.g = RealExpr::sum(std::move(gparts));
  sc.charts.push_back(std::move(cd));

  // S = {z_0 = z_1 = 0}
  AffineSubspace s;
  s.chart = 0;
  s.base = Vec(2 * n, 0.0);
  std::vector<int> rest;
  for (int j = 2; j < n; ++j) rest.push_back(j);
  s.basis = complex_axes(2 * n, rest);
  sc.stratum.push_back(s);

  for (int b = 0; b < 2; ++b) {
    AffineSubspace br;
    br.chart = 0;
    br.base = Vec(2 * n, 0.0);
    std::vector<int> keep;
    for (int j = 0; j < n; ++j)
      if (j != b) keep.push_back(j);
    br.basis = complex_axes(2 * n, keep);
    sc.branches.push_back(br);
    sc.branch_tag.push_back(b);
  }

  sc.truth.phi0 = KnownTruth::Phi0Set::ModulusTorus;
  sc.truth.stratum_crit_count = 1;
  sc.truth.stratum_crit_points.push_back({0, Vec(2 * n, 0.0)});
  return sc;
}

Scene make_cpn_o2h(const SceneParams& params) {
  const int n = params.n;
  if (n < 2 || n > 6) throw Error(Errc::BadParams, "cpn_o2h needs 2 <= n <= 6");
  auto a = params.a.empty() ? default_coeffs(2, n) : params.a;
  if (static_cast<int>(a.size()) != n - 1) throw Error(Errc::BadParams, "cpn_o2h needs n-1 coefficients a_2..a_n");
  check_generic(a);

  Scene sc;
  sc.name = "cpn_o2h";
  sc.atlas = AtlasKind::Projective;
  sc.n = n;
  sc.factor_n = n;
  sc.box_radius = 1.05;

  for (int i = 0; i <= n; ++i) {
    ChartData cd;
    // s0 = z0 z1 / z_i^2
    if (i == 0)
      cd.s0 = Poly::coordinate(local_index(0, 1), n);
    else if (i == 1)
      cd.s0 = Poly::coordinate(local_index(1, 0), n);
    else
      cd.s0 = Poly::coordinate(local_index(i, 0), n) * Poly::coordinate(local_index(i, 1), n);
    // h = sum_{j>=2} a_j z_j^2 / z_i^2
    Poly hp = Poly::zero();
    for (int j = 2; j <= n; ++j) {
      std::complex<double> aj = a[j - 2];
      if (j == i) {
        hp = hp + Poly::constant(aj, n);
      } else {
        Poly w = Poly::coordinate(local_index(i, j), n);
        hp = hp + aj * (w * w);
      }
    }
    cd.h = hp;
    // g = 2 log(1 + sum |w_j|^2)
    std::vector<RealExpr> parts;
    parts.push_back(RealExpr::constant(1.0));
    for (int k = 0; k < n; ++k) parts.push_back(RealExpr::abs2(Poly::coordinate(k, n)));
    cd.g = RealExpr::scale(2.0, RealExpr::log_of(RealExpr::sum(std::move(parts))));
    sc.charts.push_back(std::move(cd));
  }

  // S = {z_0 = z_1 = 0}, visible in charts i >= 2
  for (int i = 2; i <= n; ++i) {
    AffineSubspace s;
    s.chart = i;
    s.base = Vec(2 * n, 0.0);
    std::vector<int> rest;
    for (int j = 2; j <= n; ++j)
      if (j != i) rest.push_back(local_index(i, j));
    s.basis = complex_axes(2 * n, rest);
    sc.stratum.push_back(s);
  }

  // divisor branches {z_0 = 0} and {z_1 = 0}
  for (int b = 0; b < 2; ++b)
    for (int i = 0; i <= n; ++i) {
      if (i == b) continue;
      AffineSubspace br;
      br.chart = i;
      br.base = Vec(2 * n, 0.0);
      std::vector<int> keep;
      for (int j = 0; j <= n; ++j)
        if (j != i && j != b) keep.push_back(local_index(i, j));
      br.basis = complex_axes(2 * n, keep);
      sc.branches.push_back(br);
      sc.branch_tag.push_back(b);
    }

  sc.truth.phi0 = KnownTruth::Phi0Set::EqualModulusCircle;
  sc.truth.phi0_derived_differs_from_stated = true;
  sc.truth.stratum_crit_count = n - 1;
  for (int i = 2; i <= n; ++i) sc.truth.stratum_crit_points.push_back({i, Vec(2 * n, 0.0)});
  return sc;
}

Scene make_cpn_x_cpn(const SceneParams& params) {
  const int fn = params.n;
  if (fn < 1 || fn > 3) throw Error(Errc::BadParams, "cpn_x_cpn needs 1 <= n <= 3");
  auto a = params.a.empty() ? default_coeffs(1, fn) : params.a;
  if (static_cast<int>(a.size()) != fn) throw Error(Errc::BadParams, "cpn_x_cpn needs n coefficients a_1..a_n");
  check_generic(a);

  Scene sc;
  sc.name = "cpn_x_cpn";
  sc.atlas = AtlasKind::BiProjective;
  sc.n = 2 * fn;
  sc.factor_n = fn;
  sc.box_radius = 1.05;
  const int nv = sc.n;  // complex chart variables: fn + fn

  for (int i = 0; i <= fn; ++i)
    for (int i2 = 0; i2 <= fn; ++i2) {
      ChartData cd;
      // variable layout: first factor w_j (j != i) at [0, fn), second factor
      // w'_j (j != i2) at [fn, 2 fn)
      auto var1 = [&](int j) { return Poly::coordinate(local_index(i, j), nv); };
      auto var2 = [&](int j) { return Poly::coordinate(fn + local_index(i2, j), nv); };
      auto factor1 = [&](int j) { return j == i ? Poly::constant(1.0, nv) : var1(j); };
      auto factor2 = [&](int j) { return j == i2 ? Poly::constant(1.0, nv) : var2(j); };

      cd.s0 = factor1(0) * factor2(0);
      Poly hp = Poly::zero();
      for (int j = 1; j <= fn; ++j) hp = hp + a[j - 1] * (factor1(j) * factor2(j));
      cd.h = hp;

      std::vector<RealExpr> p1{RealExpr::constant(1.0)};
      for (int k = 0; k < fn; ++k) p1.push_back(RealExpr::abs2(Poly::coordinate(k, nv)));
      std::vector<RealExpr> p2{RealExpr::constant(1.0)};
      for (int k = 0; k < fn; ++k) p2.push_back(RealExpr::abs2(Poly::coordinate(fn + k, nv)));
      cd.g = RealExpr::sum({RealExpr::log_of(RealExpr::sum(std::move(p1))),
                            RealExpr::log_of(RealExpr::sum(std::move(p2)))});
      sc.charts.push_back(std::move(cd));
    }

  auto chart_id = [&](int i, int i2) { return i * (fn + 1) + i2; };

  // S = {z_0 = z'_0 = 0}, visible when i != 0 and i2 != 0
  for (int i = 1; i <= fn; ++i)
    for (int i2 = 1; i2 <= fn; ++i2) {
      AffineSubspace s;
      s.chart = chart_id(i, i2);
      s.base = Vec(2 * nv, 0.0);
      std::vector<int> rest;
      for (int j = 1; j <= fn; ++j)
        if (j != i) rest.push_back(local_index(i, j));
      for (int j = 1; j <= fn; ++j)
        if (j != i2) rest.push_back(fn + local_index(i2, j));
      s.basis = complex_axes(2 * nv, rest);
      sc.stratum.push_back(s);
    }

  // branches {z_0 = 0} (tag 0) and {z'_0 = 0} (tag 1)
  for (int b = 0; b < 2; ++b)
    for (int i = 0; i <= fn; ++i)
      for (int i2 = 0; i2 <= fn; ++i2) {
        if ((b == 0 && i == 0) || (b == 1 && i2 == 0)) continue;
        AffineSubspace br;
        br.chart = chart_id(i, i2);
        br.base = Vec(2 * nv, 0.0);
        std::vector<int> keep;
        for (int j = 0; j <= fn; ++j)
          if (j != i && !(b == 0 && j == 0)) keep.push_back(local_index(i, j));
        for (int j = 0; j <= fn; ++j)
          if (j != i2 && !(b == 1 && j == 0)) keep.push_back(fn + local_index(i2, j));
        br.basis = complex_axes(2 * nv, keep);
        sc.branches.push_back(br);
        sc.branch_tag.push_back(b);
      }

  sc.truth.phi0 = KnownTruth::Phi0Set::Point;
  sc.truth.phi0_point = {chart_id(0, 0), Vec(2 * nv, 0.0)};
  sc.truth.stratum_crit_count = fn;
  for (int i = 1; i <= fn; ++i) sc.truth.stratum_crit_points.push_back({chart_id(i, i), Vec(2 * nv, 0.0)});
  return sc;
}

}  // namespace

void calibrate_dc_sign(Scene& sc) {
  // The d^c sign is fixed by requiring omega(e, Je) > 0; probe a few generic
  // points and flip if the default comes out negative everywhere.
  sc.dc_sign = 1.0;
  for (int c = 0; c < sc.num_charts(); ++c) {
    Vec coords(sc.dim_real());
    for (int k = 0; k < sc.dim_real(); ++k) coords[k] = 0.11 + 0.013 * k;
    ChartPoint p{c, coords};
    try {
      Jet2 jet = eval_jet2(sc, p, 0.37);
      Mat w = omega_from_hess(jet.hess, 1.0);
      int pos = 0, neg = 0;
      for (int k = 0; k < sc.dim_real(); ++k) {
        Vec e(sc.dim_real(), 0.0);
        e[k] = 1.0;
        double v = dot(e, mat_vec(w, apply_J(e)));
        (v > 0 ? pos : neg)++;
      }
      if (neg == sc.dim_real()) sc.dc_sign = -1.0;
      return;
    } catch (const Error&) {
      continue;  // probe hit the divisor; try the next chart
    }
  }
}

Scene builtin_scene(const std::string& name, const SceneParams& params) {
  Scene sc;
  if (name == "local_nc")
    sc = make_local_nc(params);
  else if (name == "cpn_o2h")
    sc = make_cpn_o2h(params);
  else if (name == "cpn_x_cpn")
    sc = make_cpn_x_cpn(params);
  else
    throw Error(Errc::UnknownScene, "unknown scene: " + name);
  calibrate_dc_sign(sc);
  return sc;
}

// ---------------------------------------------------------------------------
// stratum sampling and restriction
// ---------------------------------------------------------------------------

std::vector<StratumPoint> sample_stratum(const Scene& scene, int count, unsigned seed) {
  if (scene.stratum.empty()) throw Error(Errc::EmptyStratum, "scene has no stratum");
  Rng rng(seed, 11);
  std::vector<StratumPoint> out;
  const double b_floor = 1e-3;
  int attempts = 0;
  const int max_attempts = 10 * count;

  while (static_cast<int>(out.size()) < count) {
    if (attempts++ >= max_attempts) {
      if (out.empty()) throw Error(Errc::AllNearB, "rejection sampling exhausted near B");
      break;
    }
    int pi = rng.uniform_int(static_cast<int>(scene.stratum.size()));
    const auto& patch = scene.stratum[pi];
    Vec q = patch.base;
    for (const auto& bv : patch.basis) axpy(rng.uniform(-0.8, 0.8) * scene.box_radius, bv, q);
    ChartPoint p{patch.chart, q};

    if (std::abs(scene.h_value(p)) < 1e-8) continue;
    if (scene.has_base_locus() && scene.dist_to_base_locus(p, 4, seed) <= b_floor) continue;

    StratumPoint sp;
    sp.point = p;
    sp.patch = pi;
    sp.tangent_basis = patch.basis;

    // E = omega-orthogonal complement of T(S-bar): start from the coordinate
    // directions transverse to the patch and remove their omega-components
    // along the tangent (symplectic Gram-Schmidt), then orthonormalize.
    Jet2 jet = eval_jet2(scene, p, 1.0);
    Mat w = omega_from_hess(jet.hess, scene.dc_sign);
    const int nv = scene.dim_real();
    const int dt = static_cast<int>(patch.basis.size());

    std::vector<Vec> normals;
    if (dt == 0) {
      for (int k = 0; k < nv; ++k) {
        Vec e(nv, 0.0);
        e[k] = 1.0;
        normals.push_back(e);
      }
    } else {
      // Gram matrix G_ab = omega(t_a, t_b) is invertible on the symplectic patch
      Mat gram(dt, dt);
      for (int a2 = 0; a2 < dt; ++a2)
        for (int b2 = 0; b2 < dt; ++b2) gram(a2, b2) = dot(patch.basis[a2], mat_vec(w, patch.basis[b2]));
      Lu glu(gram);
      if (!glu.ok()) continue;
      for (int k = 0; k < nv; ++k) {
        Vec v(nv, 0.0);
        v[k] = 1.0;
        // subtract the tangential part T c with omega(t_a, v - T c) = 0;
        // the result lies in E = {v : omega(t, v) = 0 for all tangents t}
        Vec r(dt);
        for (int a2 = 0; a2 < dt; ++a2) r[a2] = dot(patch.basis[a2], mat_vec(w, v));
        Vec cvec = glu.solve(r);
        for (int a2 = 0; a2 < dt; ++a2) axpy(-cvec[a2], patch.basis[a2], v);
        normals.push_back(v);
      }
    }
    auto on = orthonormalize(normals);
    if (static_cast<int>(on.size()) < 4) continue;
    sp.normal_basis.assign(on.begin(), on.begin() + 4);
    out.push_back(std::move(sp));
  }
  return out;
}

NormalCrossingCheck normal_crossing_check(const Scene& scene, const StratumPoint& sp, double rel_tol) {
  const int n = scene.n;
  ad::CDual2 s0 = scene.s0_jet_raw(sp.point);
  NormalCrossingCheck out;

  double g2 = 0.0;
  for (int k = 0; k < 2 * n; ++k) {
    double gr = s0.re.grad(k), gi = s0.im.grad(k);
    g2 += gr * gr + gi * gi;
  }
  out.grad_s0 = std::sqrt(g2);

  // complex Hessian H_jk = d^2 s0 / dz_j dz_k (x-x slots of the real jets)
  std::vector<std::vector<std::complex<double>>> H(n, std::vector<std::complex<double>>(n));
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) H[j][k] = {s0.re.hess(2 * j, 2 * k), s0.im.hess(2 * j, 2 * k)};

  // singular values via the real embedding of M = H H^dagger
  std::vector<std::vector<std::complex<double>>> M(n, std::vector<std::complex<double>>(n, 0.0));
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) M[j][k] += H[j][l] * std::conj(H[k][l]);
  Mat emb(2 * n, 2 * n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      emb(j, k) = M[j][k].real();
      emb(j, n + k) = -M[j][k].imag();
      emb(n + j, k) = M[j][k].imag();
      emb(n + j, n + k) = M[j][k].real();
    }
  Spectrum sp2 = jacobi_spectrum(emb, 1e-6);
  // eigenvalues come doubled; collapse pairs and convert to singular values
  for (int i = 2 * n - 1; i >= 0; i -= 2)
    out.singular_values.push_back(std::sqrt(std::max(sp2.eigenvalues[i], 0.0)));

  double s1 = out.singular_values[0];
  double s2 = n >= 2 ? out.singular_values[1] : 0.0;
  double s3 = n >= 3 ? out.singular_values[2] : 0.0;
  out.rank_is_two = s1 > 0 && s2 > rel_tol * s1 && s3 < rel_tol * s1;

  // kernel must contain the stratum tangent: H . t = 0 for tangent complex parts
  for (const auto& t : sp.tangent_basis) {
    std::vector<std::complex<double>> tc(n);
    for (int j = 0; j < n; ++j) tc[j] = {t[2 * j], t[2 * j + 1]};
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
      std::complex<double> row = 0.0;
      for (int k = 0; k < n; ++k) row += H[j][k] * tc[k];
      acc += std::norm(row);
    }
    out.kernel_tangency = std::max(out.kernel_tangency, std::sqrt(acc));
  }
  return out;
}

Jet2 restricted_potential(const Scene& scene, const StratumPoint& sp, double eps) {
  Jet2 full = eval_jet2(scene, sp.point, eps);
  const int dt = static_cast<int>(sp.tangent_basis.size());
  Jet2 r;
  r.value = full.value;
  r.grad = Vec(dt, 0.0);
  r.hess = Mat(dt, dt);
  for (int a = 0; a < dt; ++a) {
    r.grad[a] = dot(full.grad, sp.tangent_basis[a]);
    for (int b = 0; b < dt; ++b) r.hess(a, b) = dot(sp.tangent_basis[a], mat_vec(full.hess, sp.tangent_basis[b]));
  }
  return r;
}

}  // namespace wlab
