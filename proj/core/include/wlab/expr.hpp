#pragma once

// Scene building blocks: holomorphic polynomials (lists of monomials in the
// chart's complex coordinates) and real-valued expression trees composed of
// the primitives const, coordinate, |poly|^2, log, sum, scale, product.
// Both evaluate in plain doubles or in 2-jets through the same code path.

#include <complex>
#include <utility>
#include <vector>

#include "wlab/ad.hpp"
#include "wlab/errors.hpp"

namespace wlab {

struct Monomial {
  std::complex<double> coeff;
  std::vector<int> powers;  // one exponent per complex chart coordinate
};

struct Poly {
  std::vector<Monomial> terms;

  bool is_zero() const { return terms.empty(); }

  static Poly zero() { return {}; }

  static Poly constant(std::complex<double> c, int nvars) {
    if (c == std::complex<double>(0.0, 0.0)) return {};
    return {{Monomial{c, std::vector<int>(nvars, 0)}}};
  }

  // the coordinate z_j as a polynomial
  static Poly coordinate(int j, int nvars) {
    Monomial m{std::complex<double>(1.0, 0.0), std::vector<int>(nvars, 0)};
    m.powers[j] = 1;
    return {{m}};
  }

  friend Poly operator+(Poly a, const Poly& b) {
    a.terms.insert(a.terms.end(), b.terms.begin(), b.terms.end());
    return a;
  }

  friend Poly operator*(const Poly& a, const Poly& b) {
    Poly r;
    for (const auto& ma : a.terms)
      for (const auto& mb : b.terms) {
        Monomial m;
        m.coeff = ma.coeff * mb.coeff;
        m.powers.resize(ma.powers.size());
        for (size_t k = 0; k < m.powers.size(); ++k) m.powers[k] = ma.powers[k] + mb.powers[k];
        r.terms.push_back(std::move(m));
      }
    return r;
  }

  friend Poly operator*(std::complex<double> c, Poly p) {
    for (auto& m : p.terms) m.coeff *= c;
    return p;
  }

  // Mirrors the jet path op-for-op (same powering scheme, same complex
  // product formula) so both paths produce bit-identical values.
  std::complex<double> eval(const std::vector<std::complex<double>>& z) const {
    std::complex<double> s = 0.0;
    for (const auto& m : terms) {
      std::complex<double> t = m.coeff;
      for (size_t j = 0; j < m.powers.size(); ++j)
        if (m.powers[j] > 0) {
          std::complex<double> base = z[j];
          std::complex<double> acc = 1.0;
          int e = m.powers[j];
          while (e > 0) {
            if (e & 1) acc = cmul(acc, base);
            e >>= 1;
            if (e) base = cmul(base, base);
          }
          t = cmul(t, acc);
        }
      s += t;
    }
    return s;
  }

  static std::complex<double> cmul(std::complex<double> a, std::complex<double> b) {
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
  }

  ad::CDual2 eval(const std::vector<ad::CDual2>& z, int nvars) const {
    ad::CDual2 s = ad::CDual2::constant(0.0, nvars);
    for (const auto& m : terms) {
      ad::CDual2 t = ad::CDual2::constant(m.coeff, nvars);
      for (size_t j = 0; j < m.powers.size(); ++j)
        if (m.powers[j] > 0) {
          ad::CDual2 base = z[j];
          ad::CDual2 acc = ad::CDual2::constant(1.0, nvars);
          int e = m.powers[j];
          while (e > 0) {
            if (e & 1) acc = acc * base;
            e >>= 1;
            if (e) base = base * base;
          }
          t = t * acc;
        }
      s = s + t;
    }
    return s;
  }
};

struct RealExpr {
  enum class Kind { Const, Coord, Abs2, Log, Sum, Scale, Prod };

  Kind kind = Kind::Const;
  double c = 0.0;               // Const value / Scale factor
  int coord = -1;               // Coord: real coordinate index
  Poly poly;                    // Abs2 operand
  std::vector<RealExpr> kids;   // Log: 1, Sum: any, Scale: 1, Prod: 2

  static RealExpr constant(double v) {
    RealExpr e;
    e.kind = Kind::Const;
    e.c = v;
    return e;
  }
  static RealExpr coordinate(int k) {
    RealExpr e;
    e.kind = Kind::Coord;
    e.coord = k;
    return e;
  }
  static RealExpr abs2(Poly p) {
    RealExpr e;
    e.kind = Kind::Abs2;
    e.poly = std::move(p);
    return e;
  }
  static RealExpr log_of(RealExpr inner) {
    RealExpr e;
    e.kind = Kind::Log;
    e.kids.push_back(std::move(inner));
    return e;
  }
  static RealExpr sum(std::vector<RealExpr> parts) {
    RealExpr e;
    e.kind = Kind::Sum;
    e.kids = std::move(parts);
    return e;
  }
  static RealExpr scale(double s, RealExpr inner) {
    RealExpr e;
    e.kind = Kind::Scale;
    e.c = s;
    e.kids.push_back(std::move(inner));
    return e;
  }
  static RealExpr prod(RealExpr a, RealExpr b) {
    RealExpr e;
    e.kind = Kind::Prod;
    e.kids.push_back(std::move(a));
    e.kids.push_back(std::move(b));
    return e;
  }

  double eval(const std::vector<double>& x, const std::vector<std::complex<double>>& z) const {
    switch (kind) {
      case Kind::Const: return c;
      case Kind::Coord: return x[coord];
      case Kind::Abs2: return std::norm(poly.eval(z));
      case Kind::Log: return std::log(kids[0].eval(x, z));
      case Kind::Sum: {
        double s = 0.0;
        for (const auto& k : kids) s += k.eval(x, z);
        return s;
      }
      case Kind::Scale: return c * kids[0].eval(x, z);
      case Kind::Prod: return kids[0].eval(x, z) * kids[1].eval(x, z);
    }
    return 0.0;
  }

  ad::Dual2 eval(const std::vector<ad::Dual2>& x, const std::vector<ad::CDual2>& z, int nvars) const {
    switch (kind) {
      case Kind::Const: return ad::Dual2::constant(c, nvars);
      case Kind::Coord: return x[coord];
      case Kind::Abs2: return abs2_impl(z, nvars);
      case Kind::Log: return ad::log(kids[0].eval(x, z, nvars));
      case Kind::Sum: {
        ad::Dual2 s = ad::Dual2::constant(0.0, nvars);
        for (const auto& k : kids) s = s + k.eval(x, z, nvars);
        return s;
      }
      case Kind::Scale: return kids[0].eval(x, z, nvars) * c;
      case Kind::Prod: return kids[0].eval(x, z, nvars) * kids[1].eval(x, z, nvars);
    }
    return ad::Dual2::constant(0.0, nvars);
  }

 private:
  ad::Dual2 abs2_impl(const std::vector<ad::CDual2>& z, int nvars) const {
    return ad::abs2(poly.eval(z, nvars));
  }
};

}  // namespace wlab
