#pragma once

// Small dense linear algebra for chart-coordinate computations (dim <= 12).
// Row-major matrices, plain std::vector storage; robustness over speed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "wlab/errors.hpp"

namespace wlab {

using Vec = std::vector<double>;

class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols, 0.0) {}

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<size_t>(i) * cols_ + j]; }

  Vec col(int j) const {
    Vec v(rows_);
    for (int i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
    return v;
  }

  Mat transposed() const {
    Mat t(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  double max_abs() const {
    double m = 0.0;
    for (double x : a_) m = std::max(m, std::abs(x));
    return m;
  }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

inline Vec operator+(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline Vec operator-(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Vec operator*(double s, const Vec& a) {
  Vec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = s * a[i];
  return r;
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const Vec& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

inline void axpy(double s, const Vec& x, Vec& y) {
  for (size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

inline Vec mat_vec(const Mat& m, const Vec& v) {
  Vec r(m.rows(), 0.0);
  for (int i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < m.cols(); ++j) s += m(i, j) * v[j];
    r[i] = s;
  }
  return r;
}

inline Mat mat_mul(const Mat& a, const Mat& b) {
  Mat r(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.cols(); ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) r(i, j) += aik * b(k, j);
    }
  return r;
}

// LU with partial pivoting. Returns false if a pivot falls below
// `pivot_floor` times the largest initial entry (treated as singular).
class Lu {
 public:
  explicit Lu(const Mat& m, double pivot_floor = 1e-13) : lu_(m), piv_(m.rows()) {
    const int n = m.rows();
    std::iota(piv_.begin(), piv_.end(), 0);
    double scale = std::max(m.max_abs(), 1e-300);
    ok_ = true;
    det_sign_ = 1.0;
    for (int k = 0; k < n; ++k) {
      int p = k;
      for (int i = k + 1; i < n; ++i)
        if (std::abs(lu_(i, k)) > std::abs(lu_(p, k))) p = i;
      if (p != k) {
        for (int j = 0; j < n; ++j) std::swap(lu_(p, j), lu_(k, j));
        std::swap(piv_[p], piv_[k]);
        det_sign_ = -det_sign_;
      }
      if (std::abs(lu_(k, k)) < pivot_floor * scale) {
        ok_ = false;
        return;
      }
      for (int i = k + 1; i < n; ++i) {
        lu_(i, k) /= lu_(k, k);
        double lik = lu_(i, k);
        for (int j = k + 1; j < n; ++j) lu_(i, j) -= lik * lu_(k, j);
      }
    }
  }

  bool ok() const { return ok_; }

  double det() const {
    if (!ok_) return 0.0;
    double d = det_sign_;
    for (int i = 0; i < lu_.rows(); ++i) d *= lu_(i, i);
    return d;
  }

  Vec solve(const Vec& b) const {
    const int n = lu_.rows();
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = b[piv_[i]];
    for (int i = 1; i < n; ++i)
      for (int j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
    for (int i = n - 1; i >= 0; --i) {
      for (int j = i + 1; j < n; ++j) x[i] -= lu_(i, j) * x[j];
      x[i] /= lu_(i, i);
    }
    return x;
  }

 private:
  Mat lu_;
  std::vector<int> piv_;
  bool ok_ = false;
  double det_sign_ = 1.0;
};

struct Spectrum {
  Vec eigenvalues;   // ascending
  Mat eigenvectors;  // columns, orthonormal, matching order
};

// Cyclic Jacobi for small symmetric matrices. Sweeps until the off-diagonal
// Frobenius norm drops below 1e-12 * ||m||, at most 64 sweeps.
inline Spectrum jacobi_spectrum(const Mat& m, double sym_tol = 1e-9) {
  const int n = m.rows();
  if (m.cols() != n) throw Error(Errc::NotSymmetric, "jacobi_spectrum: matrix not square");
  double scale = std::max(m.max_abs(), 1e-300);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(m(i, j) - m(j, i)) > sym_tol * scale)
        throw Error(Errc::NotSymmetric, "jacobi_spectrum: symmetry violated");

  Mat a = m;
  // symmetrize the rounding-level part
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = a(j, i) = v;
    }
  Mat q = Mat::identity(n);

  auto off_norm = [&]() {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return std::sqrt(2.0 * s);
  };

  const double target = 1e-12 * scale;
  for (int sweep = 0; sweep < 64 && off_norm() > target; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int r = p + 1; r < n; ++r) {
        double apq = a(p, r);
        if (std::abs(apq) <= 1e-300) continue;
        double theta = 0.5 * (a(r, r) - a(p, p)) / apq;
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = t * c;
        for (int k = 0; k < n; ++k) {
          double akp = a(k, p), akq = a(k, r);
          a(k, p) = c * akp - s * akq;
          a(k, r) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = a(p, k), aqk = a(r, k);
          a(p, k) = c * apk - s * aqk;
          a(r, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double qkp = q(k, p), qkq = q(k, r);
          q(k, p) = c * qkp - s * qkq;
          q(k, r) = s * qkp + c * qkq;
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) < a(j, j); });

  Spectrum sp;
  sp.eigenvalues.resize(n);
  sp.eigenvectors = Mat(n, n);
  for (int j = 0; j < n; ++j) {
    sp.eigenvalues[j] = a(order[j], order[j]);
    for (int i = 0; i < n; ++i) sp.eigenvectors(i, j) = q(i, order[j]);
  }
  return sp;
}

// Euclidean Gram-Schmidt; drops near-dependent remainders, measured against
// the collection scale so that roundoff-sized inputs never get normalized up.
inline std::vector<Vec> orthonormalize(std::vector<Vec> vs, double tol = 1e-10) {
  double scale = 0.0;
  for (const auto& v : vs) scale = std::max(scale, norm(v));
  if (scale <= 0.0) return {};
  std::vector<Vec> basis;
  for (auto& v : vs) {
    for (const auto& b : basis) axpy(-dot(v, b), b, v);
    // second pass for numerical orthogonality
    for (const auto& b : basis) axpy(-dot(v, b), b, v);
    double n1 = norm(v);
    if (n1 > tol * scale) basis.push_back((1.0 / n1) * v);
  }
  return basis;
}

}  // namespace wlab
