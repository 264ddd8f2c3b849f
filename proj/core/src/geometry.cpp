#include "wlab/geometry.hpp"

#include <cmath>

namespace wlab {

Vec apply_J(const Vec& v) {
  Vec r(v.size());
  for (size_t j = 0; j + 1 < v.size(); j += 2) {
    r[j] = -v[j + 1];
    r[j + 1] = v[j];
  }
  return r;
}

Mat omega_from_hess(const Mat& hess, double dc_sign) {
  const int nv = hess.rows();
  // A = H * J: column x_j of A is H's column y_j, column y_j is -H's column x_j
  Mat a(nv, nv);
  for (int k = 0; k < nv; ++k)
    for (int j = 0; j + 1 < nv; j += 2) {
      a(k, j) = hess(k, j + 1);
      a(k, j + 1) = -hess(k, j);
    }
  Mat w(nv, nv);
  for (int k = 0; k < nv; ++k)
    for (int l = 0; l < nv; ++l) w(k, l) = dc_sign * (a(l, k) - a(k, l));
  return w;
}

Vec lambda_from_grad(const Vec& grad, double dc_sign) {
  const size_t nv = grad.size();
  Vec l(nv);
  for (size_t j = 0; j + 1 < nv; j += 2) {
    l[j] = -dc_sign * grad[j + 1];
    l[j + 1] = dc_sign * grad[j];
  }
  return l;
}

Jet2 jet_from_dual(const ad::Dual2& d) {
  const int nv = d.nvars();
  Jet2 j;
  j.value = d.value();
  j.grad.resize(nv);
  for (int i = 0; i < nv; ++i) j.grad[i] = d.grad(i);
  j.hess = Mat(nv, nv);
  for (int i = 0; i < nv; ++i)
    for (int k = 0; k < nv; ++k) j.hess(i, k) = 0.5 * (d.hess(i, k) + d.hess(k, i));
  return j;
}

Jet2 eval_jet2(const Scene& scene, const ChartPoint& p, double eps) {
  return jet_from_dual(scene.phi_jet_raw(p, eps));
}

SymplecticSample symplectic_sample(const Scene& scene, const ChartPoint& p, double eps) {
  Jet2 jet = eval_jet2(scene, p, eps);
  SymplecticSample s;
  s.point = p;
  s.lambda = lambda_from_grad(jet.grad, scene.dc_sign);
  s.omega = omega_from_hess(jet.hess, scene.dc_sign);
  Lu lu(s.omega.transposed());
  if (!lu.ok() || std::abs(lu.det()) <= 1e-12)
    throw Error(Errc::Degenerate, "omega fails the nondegeneracy threshold");
  s.liouville = lu.solve(s.lambda);
  return s;
}

double gradient_like_margin(const Scene& scene, const ChartPoint& p, double eps) {
  SymplecticSample s = symplectic_sample(scene, p, eps);
  Jet2 jet = eval_jet2(scene, p, eps);
  double num = dot(jet.grad, s.liouville);
  double den = dot(s.liouville, s.liouville) + dot(jet.grad, jet.grad);
  if (den == 0.0) return 0.0;
  return num / den;
}

}  // namespace wlab
