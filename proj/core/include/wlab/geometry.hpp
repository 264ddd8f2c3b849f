#pragma once

// Differential-geometry kernel: 2-jets of the potential family and the
// pointwise symplectic objects derived from them.
//
// Conventions (calibrated, see README):
//   J dx_j = dy_j in every holomorphic chart,
//   lambda(v) = -dphi(J v)            (components: l_x = -phi_y, l_y = +phi_x),
//   omega = d(lambda), stored as the Gram matrix  W_kl = omega(e_k, e_l),
//   assembled from the Hessian H of phi as W = (HJ)^T - HJ,
//   Z solves omega(Z, .) = lambda, i.e. W^T Z = lambda.
// With these signs omega(v, Jv) > 0 on Kahler scenes (checked at load).

#include "wlab/scene.hpp"
#include "wlab/types.hpp"

namespace wlab {

// apply the standard complex structure to a tangent vector (2n reals)
Vec apply_J(const Vec& v);

// W = (HJ)^T - HJ, times the scene's d^c sign calibration
Mat omega_from_hess(const Mat& hess, double dc_sign);

// lambda components from the gradient of phi: l = -sign * J^T grad
Vec lambda_from_grad(const Vec& grad, double dc_sign);

// 2-jet of phi_eps at p (forward AD; OnDivisor / BadChart as in Scene)
Jet2 eval_jet2(const Scene& scene, const ChartPoint& p, double eps);

// lambda, omega, Z at p; throws Degenerate if |det omega| <= 1e-12
SymplecticSample symplectic_sample(const Scene& scene, const ChartPoint& p, double eps);

// dphi(Z) / (|Z|^2 + |dphi|^2) in the Euclidean chart norm; exactly 0 at
// critical points by convention
double gradient_like_margin(const Scene& scene, const ChartPoint& p, double eps);

// convert a raw AD jet to Jet2 (symmetrizes the Hessian)
Jet2 jet_from_dual(const ad::Dual2& d);

}  // namespace wlab
