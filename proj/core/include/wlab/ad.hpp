#pragma once

// Forward-mode automatic differentiation carrying the full 2-jet
// (value, gradient, symmetric Hessian) over the real chart coordinates.
// Fixed-capacity storage, runtime variable count; dimension <= 12 covers
// every scene at desk scale. Arithmetic on the value slot is the same
// floating-point sequence as a plain double evaluation, so value-only
// paths agree bit for bit.

#include <array>
#include <cassert>
#include <cmath>
#include <complex>

namespace wlab::ad {

inline constexpr int kMaxVars = 12;

class Dual2 {
 public:
  Dual2() = default;

  static Dual2 constant(double v, int nvars) {
    Dual2 d;
    d.nv_ = nvars;
    d.f_ = v;
    d.g_.fill(0.0);
    d.h_.fill(0.0);
    return d;
  }

  static Dual2 variable(double v, int index, int nvars) {
    Dual2 d = constant(v, nvars);
    d.g_[index] = 1.0;
    return d;
  }

  int nvars() const { return nv_; }
  double value() const { return f_; }
  double grad(int i) const { return g_[i]; }
  double hess(int i, int j) const { return h_[static_cast<size_t>(i) * kMaxVars + j]; }

  friend Dual2 operator+(const Dual2& a, const Dual2& b) {
    assert(a.nv_ == b.nv_);
    Dual2 r;
    r.nv_ = a.nv_;
    r.f_ = a.f_ + b.f_;
    for (int i = 0; i < a.nv_; ++i) r.g_[i] = a.g_[i] + b.g_[i];
    for (int i = 0; i < a.nv_; ++i) {
      const size_t row = static_cast<size_t>(i) * kMaxVars;
      for (int j = 0; j < a.nv_; ++j) r.h_[row + j] = a.h_[row + j] + b.h_[row + j];
    }
    return r;
  }

  friend Dual2 operator-(const Dual2& a, const Dual2& b) {
    assert(a.nv_ == b.nv_);
    Dual2 r;
    r.nv_ = a.nv_;
    r.f_ = a.f_ - b.f_;
    for (int i = 0; i < a.nv_; ++i) r.g_[i] = a.g_[i] - b.g_[i];
    for (int i = 0; i < a.nv_; ++i) {
      const size_t row = static_cast<size_t>(i) * kMaxVars;
      for (int j = 0; j < a.nv_; ++j) r.h_[row + j] = a.h_[row + j] - b.h_[row + j];
    }
    return r;
  }

  friend Dual2 operator-(const Dual2& a) {
    Dual2 r;
    r.nv_ = a.nv_;
    r.f_ = -a.f_;
    for (int i = 0; i < a.nv_; ++i) r.g_[i] = -a.g_[i];
    for (int i = 0; i < a.nv_; ++i) {
      const size_t row = static_cast<size_t>(i) * kMaxVars;
      for (int j = 0; j < a.nv_; ++j) r.h_[row + j] = -a.h_[row + j];
    }
    return r;
  }

  // product rule through second order
  friend Dual2 operator*(const Dual2& a, const Dual2& b) {
    assert(a.nv_ == b.nv_);
    Dual2 r;
    r.nv_ = a.nv_;
    r.f_ = a.f_ * b.f_;
    for (int i = 0; i < a.nv_; ++i) r.g_[i] = a.f_ * b.g_[i] + b.f_ * a.g_[i];
    for (int i = 0; i < a.nv_; ++i) {
      const size_t row = static_cast<size_t>(i) * kMaxVars;
      const double agi = a.g_[i], bgi = b.g_[i];
      for (int j = 0; j < a.nv_; ++j)
        r.h_[row + j] = a.f_ * b.h_[row + j] + b.f_ * a.h_[row + j] + agi * b.g_[j] + bgi * a.g_[j];
    }
    return r;
  }

  friend Dual2 operator+(const Dual2& a, double c) {
    Dual2 r = a;
    r.f_ += c;
    return r;
  }
  friend Dual2 operator+(double c, const Dual2& a) { return a + c; }
  friend Dual2 operator-(const Dual2& a, double c) { return a + (-c); }
  friend Dual2 operator-(double c, const Dual2& a) { return -a + c; }

  friend Dual2 operator*(const Dual2& a, double c) {
    Dual2 r;
    r.nv_ = a.nv_;
    r.f_ = a.f_ * c;
    for (int i = 0; i < a.nv_; ++i) r.g_[i] = a.g_[i] * c;
    for (int i = 0; i < a.nv_; ++i) {
      const size_t row = static_cast<size_t>(i) * kMaxVars;
      for (int j = 0; j < a.nv_; ++j) r.h_[row + j] = a.h_[row + j] * c;
    }
    return r;
  }
  friend Dual2 operator*(double c, const Dual2& a) { return a * c; }
  friend Dual2 operator/(const Dual2& a, double c) { return a * (1.0 / c); }

  // composition with a scalar function u: value u0, first/second derivative d1, d2
  Dual2 chain(double u0, double d1, double d2) const {
    Dual2 r;
    r.nv_ = nv_;
    r.f_ = u0;
    for (int i = 0; i < nv_; ++i) r.g_[i] = d1 * g_[i];
    for (int i = 0; i < nv_; ++i) {
      const size_t row = static_cast<size_t>(i) * kMaxVars;
      const double gi = g_[i];
      for (int j = 0; j < nv_; ++j) r.h_[row + j] = d1 * h_[row + j] + d2 * gi * g_[j];
    }
    return r;
  }

  friend Dual2 recip(const Dual2& x) {
    const double u = 1.0 / x.f_;
    return x.chain(u, -u * u, 2.0 * u * u * u);
  }

  friend Dual2 operator/(const Dual2& a, const Dual2& b) { return a * recip(b); }
  friend Dual2 operator/(double c, const Dual2& b) { return recip(b) * c; }

  friend Dual2 log(const Dual2& x) {
    const double u = 1.0 / x.f_;
    return x.chain(std::log(x.f_), u, -u * u);
  }

  friend Dual2 exp(const Dual2& x) {
    const double e = std::exp(x.f_);
    return x.chain(e, e, e);
  }

  friend Dual2 sqrt(const Dual2& x) {
    const double s = std::sqrt(x.f_);
    return x.chain(s, 0.5 / s, -0.25 / (s * x.f_));
  }

  friend Dual2 pow_int(const Dual2& x, int k) {
    assert(k >= 0);
    Dual2 r = Dual2::constant(1.0, x.nv_);
    Dual2 base = x;
    int e = k;
    while (e > 0) {
      if (e & 1) r = r * base;
      e >>= 1;
      if (e) base = base * base;
    }
    return r;
  }

 private:
  int nv_ = 0;
  double f_ = 0.0;
  std::array<double, kMaxVars> g_{};
  std::array<double, static_cast<size_t>(kMaxVars) * kMaxVars> h_{};
};

// complex number with Dual2 components; holomorphic scene data is
// evaluated in this type
struct CDual2 {
  Dual2 re, im;

  static CDual2 constant(std::complex<double> c, int nvars) {
    return {Dual2::constant(c.real(), nvars), Dual2::constant(c.imag(), nvars)};
  }

  std::complex<double> value() const { return {re.value(), im.value()}; }

  friend CDual2 operator+(const CDual2& a, const CDual2& b) { return {a.re + b.re, a.im + b.im}; }
  friend CDual2 operator-(const CDual2& a, const CDual2& b) { return {a.re - b.re, a.im - b.im}; }
  friend CDual2 operator-(const CDual2& a) { return {-a.re, -a.im}; }

  friend CDual2 operator*(const CDual2& a, const CDual2& b) {
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
  }

  friend CDual2 operator*(const CDual2& a, std::complex<double> c) {
    return {a.re * c.real() - a.im * c.imag(), a.re * c.imag() + a.im * c.real()};
  }
  friend CDual2 operator*(std::complex<double> c, const CDual2& a) { return a * c; }
  friend CDual2 operator*(const CDual2& a, double c) { return {a.re * c, a.im * c}; }
  friend CDual2 operator*(double c, const CDual2& a) { return a * c; }

  friend CDual2 conj(const CDual2& a) { return {a.re, -a.im}; }

  friend Dual2 abs2(const CDual2& a) { return a.re * a.re + a.im * a.im; }

  friend CDual2 operator/(const CDual2& a, const CDual2& b) {
    Dual2 inv = recip(abs2(b));
    CDual2 num = a * conj(b);
    return {num.re * inv, num.im * inv};
  }
};

// namespace-scope declarations so qualified calls work alongside ADL
Dual2 recip(const Dual2&);
Dual2 log(const Dual2&);
Dual2 exp(const Dual2&);
Dual2 sqrt(const Dual2&);
Dual2 pow_int(const Dual2&, int);
CDual2 conj(const CDual2&);
Dual2 abs2(const CDual2&);

}  // namespace wlab::ad
