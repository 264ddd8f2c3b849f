#include "wlab/critfind.hpp"

#include <algorithm>
#include <cmath>

#include "wlab/ode.hpp"
#include "wlab/parallel.hpp"
#include "wlab/rng.hpp"

namespace wlab {

namespace {

constexpr double kDivisorGuard = 1e-12;  // reject steps with ||s_eps||^2 below

bool divisor_safe(const Scene& scene, const ChartPoint& p, double eps) {
  return std::norm(scene.seps_value(p, eps)) >= kDivisorGuard;
}

// Newton direction with a truncated-spectrum fallback for near-singular H
Vec newton_direction(const Jet2& jet) {
  Lu lu(jet.hess, 1e-11);
  if (lu.ok()) return lu.solve(jet.grad);
  Spectrum sp = jacobi_spectrum(jet.hess);
  const int nv = static_cast<int>(jet.grad.size());
  double scale = std::max(norm_inf(sp.eigenvalues), 1e-300);
  Vec dir(nv, 0.0);
  for (int i = 0; i < nv; ++i) {
    if (std::abs(sp.eigenvalues[i]) < 1e-6 * scale) continue;
    Vec q = sp.eigenvectors.col(i);
    axpy(dot(q, jet.grad) / sp.eigenvalues[i], q, dir);
  }
  return dir;
}

}  // namespace

std::optional<ChartPoint> newton_refine(const Scene& scene, ChartPoint p, double eps,
                                        int max_iter, double grad_tol) {
  if (!scene.in_domain(p)) return std::nullopt;
  const double escape_bound = 12.0 * scene.box_radius;

  Jet2 jet;
  try {
    jet = eval_jet2(scene, p, eps);
  } catch (const Error&) {
    return std::nullopt;
  }

  for (int it = 0; it < max_iter; ++it) {
    double gn = norm(jet.grad);
    if (gn < grad_tol) return p;
    if (norm_inf(p.coords) > escape_bound) return std::nullopt;

    Vec dir = newton_direction(jet);
    bool accepted = false;
    for (int pass = 0; pass < 2 && !accepted; ++pass) {
      if (pass == 1) dir = (1.0 / std::max(jet.hess.max_abs(), 1.0)) * jet.grad;  // gradient descent
      double t = 1.0;
      for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
        ChartPoint cand = p;
        axpy(-t, dir, cand.coords);
        if (!scene.in_domain(cand) || !divisor_safe(scene, cand, eps)) continue;
        Jet2 cand_jet;
        try {
          cand_jet = eval_jet2(scene, cand, eps);
        } catch (const Error&) {
          continue;
        }
        if (norm(cand_jet.grad) < gn) {
          p = cand;
          jet = std::move(cand_jet);  // reuse for the next iteration
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) return std::nullopt;

    // keep projective coordinates bounded: move to the owning chart when the
    // iterate drifts out of its box
    if (scene.atlas != AtlasKind::Affine && norm_inf(p.coords) > 1.2) {
      try {
        p = scene.canonical(p);
        jet = eval_jet2(scene, p, eps);
      } catch (const Error&) {
        return std::nullopt;
      }
    }
  }
  // accept a slightly looser tail if the last iterate is essentially converged
  if (norm(jet.grad) < 10.0 * grad_tol) return p;
  return std::nullopt;
}

CritRecord classify(const Scene& scene, const ChartPoint& p, double eps, double tau_deg) {
  Jet2 jet = eval_jet2(scene, p, eps);
  CritRecord rec;
  rec.point = p;
  rec.eps = eps;
  rec.value = jet.value;
  rec.grad_norm = norm(jet.grad);

  Spectrum sp = jacobi_spectrum(jet.hess);
  rec.spectrum = sp.eigenvalues;
  double scale = std::max(norm_inf(sp.eigenvalues), 1e-300);
  const int nv = static_cast<int>(sp.eigenvalues.size());
  for (int i = 0; i < nv; ++i) {
    double ev = sp.eigenvalues[i];
    if (ev < -tau_deg * scale)
      rec.index++;
    else if (ev <= tau_deg * scale) {
      rec.nullity++;
      rec.degenerate_basis.push_back(sp.eigenvectors.col(i));
    }
  }
  rec.morse_bott = rec.nullity > 0;
  if (!rec.morse_bott) rec.degenerate_basis.clear();

  double d0 = scene.dist_to_crit_phi0(p);
  double ds = scene.dist_to_stratum(p);
  const double cap = 0.3;
  if (d0 <= ds && d0 <= cap)
    rec.origin_tag = OriginTag::NearCritPhi0;
  else if (ds < d0 && ds <= cap)
    rec.origin_tag = OriginTag::NearStratum;
  else
    rec.origin_tag = OriginTag::Unresolved;
  return rec;
}

std::vector<CritRecord> deduplicate(const Scene& scene, std::vector<CritRecord> records, double tol) {
  for (auto& r : records) {
    try {
      r.point = scene.canonical(r.point);
    } catch (const Error&) {
    }
  }
  // Sort by (chart, first coordinate): canonical duplicates share the chart
  // and sit within tol in every coordinate, so a sliding window over the
  // first coordinate sees them. Degenerate critical manifolds can produce
  // tens of thousands of records; the all-pairs scan is not an option.
  std::sort(records.begin(), records.end(), [](const CritRecord& a, const CritRecord& b) {
    if (a.point.chart != b.point.chart) return a.point.chart < b.point.chart;
    if (a.point.coords[0] != b.point.coords[0]) return a.point.coords[0] < b.point.coords[0];
    return a.point.coords < b.point.coords;
  });

  std::vector<CritRecord> out;
  std::vector<size_t> boundary;  // kept records near a chart-ownership tie
  for (auto& r : records) {
    long merged = -1;
    for (long k = static_cast<long>(out.size()) - 1; k >= 0; --k) {
      if (out[k].point.chart != r.point.chart ||
          out[k].point.coords[0] < r.point.coords[0] - tol)
        break;
      if (norm(out[k].point.coords - r.point.coords) < tol) {
        merged = k;
        break;
      }
    }
    if (merged < 0 && scene.atlas != AtlasKind::Affine && norm_inf(r.point.coords) > 0.999) {
      // ownership ties can canonicalize twins into different charts
      for (size_t bi : boundary) {
        if (out[bi].point.chart == r.point.chart) continue;
        if (scene.distance(out[bi].point, r.point) < tol) {
          merged = static_cast<long>(bi);
          break;
        }
      }
    }
    if (merged >= 0) {
      if (r.grad_norm < out[merged].grad_norm) out[merged] = r;
    } else {
      if (scene.atlas != AtlasKind::Affine && norm_inf(r.point.coords) > 0.999)
        boundary.push_back(out.size());
      out.push_back(std::move(r));
    }
  }

  std::sort(out.begin(), out.end(), [](const CritRecord& a, const CritRecord& b) {
    if (a.value != b.value) return a.value < b.value;
    if (a.point.chart != b.point.chart) return a.point.chart < b.point.chart;
    return a.point.coords < b.point.coords;
  });
  return out;
}

std::vector<CritRecord> find_critical_points(const Scene& scene, double eps, const SeedPlan& plan,
                                             FindStats* stats) {
  const int nv = scene.dim_real();
  const int gd = plan.grid_dims > 0 ? std::min(plan.grid_dims, nv) : std::min(nv, 6);
  const double box = plan.box_radius.value_or(scene.box_radius * plan.box_scale);

  std::vector<ChartPoint> seeds;
  for (int c = 0; c < scene.num_charts(); ++c) {
    // regular grid over the first gd real coordinates, zero elsewhere
    long total = 1;
    for (int d = 0; d < gd; ++d) total *= plan.grid_per_axis;
    for (long g = 0; g < total; ++g) {
      Vec coords(nv, 0.0);
      long rem = g;
      for (int d = 0; d < gd; ++d) {
        int idx = static_cast<int>(rem % plan.grid_per_axis);
        rem /= plan.grid_per_axis;
        coords[d] = plan.grid_per_axis == 1
                        ? 0.0
                        : -0.9 * box + 1.8 * box * idx / (plan.grid_per_axis - 1);
      }
      seeds.push_back({c, coords});
    }
    Rng rng(plan.seed, 1000 + static_cast<unsigned>(c));
    for (int r = 0; r < plan.random_count; ++r) {
      Vec coords(nv);
      for (int k = 0; k < nv; ++k) coords[k] = rng.uniform(-box, box);
      seeds.push_back({c, coords});
    }
  }

  if (stats) stats->seeds = static_cast<long>(seeds.size());

  std::vector<std::optional<ChartPoint>> results(seeds.size());
  parallel_for(static_cast<int>(seeds.size()), [&](int i) {
    results[i] = newton_refine(scene, seeds[i], eps);
  });

  std::vector<CritRecord> records;
  long converged = 0, failed = 0;
  for (auto& r : results) {
    if (!r) {
      failed++;
      continue;
    }
    converged++;
    // the seed plan's box is also the search domain: converged points that
    // left it belong to another run's box (or another chart's)
    if (norm_inf(r->coords) > box * (1.0 + 1e-9)) continue;
    CritRecord rec = classify(scene, *r, eps);
    if (rec.grad_norm < 1e-8) records.push_back(std::move(rec));
  }
  if (stats) {
    stats->converged = converged;
    stats->no_convergence = failed;
  }
  return deduplicate(scene, std::move(records));
}

PlaneCheckReport unstable_plane_check(const Scene& scene, const CritRecord& rec,
                                      const AffineSubspace& plane, int n_flow,
                                      double stop_radius, double seed_offset) {
  PlaneCheckReport rep;
  rep.trajectories = n_flow;
  const double eps = rec.eps;
  const int nv = scene.dim_real();

  auto rhs = [&](double, const Vec& y, Vec& dy) {
    ChartPoint q{rec.point.chart, y};
    if (!scene.in_domain(q) || std::norm(scene.seps_value(q, eps)) < kDivisorGuard) return false;
    dy = symplectic_sample(scene, q, eps).liouville;
    return true;
  };

  for (int k = 0; k < n_flow; ++k) {
    // seed on the plane at seed_offset from the critical point
    Vec dirv(nv, 0.0);
    if (plane.basis.size() >= 2) {
      double a = 2.0 * M_PI * k / n_flow;
      dirv = std::cos(a) * plane.basis[0] + std::sin(a) * plane.basis[1];
      for (size_t b = 2; b < plane.basis.size(); ++b)
        axpy(std::sin(a * (1.0 + 0.37 * static_cast<double>(b))), plane.basis[b], dirv);
      double nd = norm(dirv);
      if (nd > 0) dirv = (1.0 / nd) * dirv;
    } else if (plane.basis.size() == 1) {
      dirv = (k % 2 == 0 ? 1.0 : -1.0) * plane.basis[0];
    }
    Vec y = plane.project(rec.point.coords);
    axpy(seed_offset, dirv, y);

    if (seed_offset == 0.0) {
      // seeded exactly at the critical point: the trajectory is a point
      continue;
    }

    double phi_prev;
    try {
      phi_prev = scene.phi({rec.point.chart, y}, eps);
    } catch (const Error&) {
      rep.escaped++;
      continue;
    }

    OdeOptions opt;
    opt.h_init = 1e-4;
    opt.h_max = 0.05;
    auto complex_radius = [&](const Vec& state) {
      double r = 0.0;
      for (size_t j = 0; j + 1 < state.size(); j += 2) {
        double dx = state[j] - rec.point.coords[j];
        double dy = state[j + 1] - rec.point.coords[j + 1];
        r = std::max(r, std::hypot(dx, dy));
      }
      return r;
    };
    auto after = [&](double, Vec& state) {
      ChartPoint q{rec.point.chart, state};
      rep.max_drift = std::max(rep.max_drift, plane.distance_to(state));
      double phi_now = scene.phi(q, eps);
      double inc = phi_now - phi_prev;
      // nondecreasing up to the integrator tolerance per step
      if (inc < -1e-9 * std::max(1.0, std::abs(phi_now))) {
        rep.phi_monotone = false;
        rep.min_phi_increment = std::min(rep.min_phi_increment, inc);
      }
      phi_prev = phi_now;
      double radius = complex_radius(state);
      rep.reached_radius = std::max(rep.reached_radius, radius);
      return radius < stop_radius;
    };

    OdeOutcome oc = integrate_rk4(rhs, 0.0, 50.0, y, opt, after);
    if (oc == OdeOutcome::RhsFailed) rep.escaped++;  // divisor guard, reported not raised
  }
  return rep;
}

}  // namespace wlab
