#pragma once

// Domain types shared across modules.

#include <vector>

#include "wlab/linalg.hpp"

namespace wlab {

// A location as (chart id, 2n real coordinates); z_j = coords[2j] + i*coords[2j+1].
struct ChartPoint {
  int chart = 0;
  Vec coords;
};

// value / gradient / symmetric Hessian of a scalar field at a point
struct Jet2 {
  double value = 0.0;
  Vec grad;
  Mat hess;
};

// pointwise symplectic data derived from the potential
struct SymplecticSample {
  ChartPoint point;
  Vec lambda;     // the 1-form lambda = -d^c(phi), components on dx/dy basis
  Mat omega;      // Gram matrix omega(e_k, e_l) of the 2-form d(lambda)
  Vec liouville;  // Z with omega(Z, .) = lambda
};

// chart-local affine subspace: q = base + span(basis), basis orthonormal
struct AffineSubspace {
  int chart = 0;
  Vec base;
  std::vector<Vec> basis;

  Vec project(const Vec& q) const {
    Vec r = base;
    for (const auto& b : basis) axpy(dot(q - base, b), b, r);
    return r;
  }

  double distance_to(const Vec& q) const { return norm(q - project(q)); }
};

// a sample on the open stratum with adapted bases: tangent_basis spans the
// stratum tangent, normal_basis spans its omega-orthogonal complement E
struct StratumPoint {
  ChartPoint point;
  std::vector<Vec> tangent_basis;
  std::vector<Vec> normal_basis;
  int patch = 0;  // index of the stratum patch the sample came from
};

}  // namespace wlab
