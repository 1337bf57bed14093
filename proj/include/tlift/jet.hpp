#pragma once

#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <string>

#include "tlift/error.hpp"
#include "tlift/tensor.hpp"

namespace tlift {

/// Second-order forward jet of a scalar function of n coordinates: value,
/// gradient and Hessian at a point.
///
/// Every operation writes the Hessian's upper triangle once and mirrors it, so
/// `hess(b, c) == hess(c, b)` holds bit-for-bit.
struct Jet2 {
  double value = 0.0;
  Vector grad;
  Matrix hess;

  Jet2() = default;
  explicit Jet2(std::size_t n, double v = 0.0) : value(v), grad(n), hess(n) {}

  std::size_t dim() const noexcept { return grad.dim(); }

  static Jet2 constant(std::size_t n, double v) { return Jet2(n, v); }

  static Jet2 variable(std::size_t n, std::size_t index, double v) {
    Jet2 j(n, v);
    j.grad(index) = 1.0;
    return j;
  }
};

namespace detail {

/// f(u) given f, f', f'' evaluated at u.value.
inline Jet2 chain(const Jet2& u, double f0, double f1, double f2) {
  const std::size_t n = u.dim();
  Jet2 r(n, f0);
  for (std::size_t b = 0; b < n; ++b) r.grad(b) = f1 * u.grad(b);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t c = b; c < n; ++c) {
      const double h = f2 * (u.grad(b) * u.grad(c)) + f1 * u.hess(b, c);
      r.hess(b, c) = h;
      r.hess(c, b) = h;
    }
  }
  return r;
}

}  // namespace detail

inline Jet2 operator+(const Jet2& u, const Jet2& v) {
  Jet2 r = u;
  r.value += v.value;
  r.grad += v.grad;
  r.hess += v.hess;
  return r;
}

inline Jet2 operator-(const Jet2& u, const Jet2& v) {
  Jet2 r = u;
  r.value -= v.value;
  r.grad -= v.grad;
  r.hess -= v.hess;
  return r;
}

inline Jet2 operator-(const Jet2& u) {
  Jet2 r = u;
  r.value = -r.value;
  r.grad *= -1.0;
  r.hess *= -1.0;
  return r;
}

inline Jet2 operator*(const Jet2& u, const Jet2& v) {
  const std::size_t n = u.dim();
  Jet2 r(n, u.value * v.value);
  for (std::size_t b = 0; b < n; ++b) r.grad(b) = u.value * v.grad(b) + v.value * u.grad(b);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t c = b; c < n; ++c) {
      const double h = u.value * v.hess(b, c) + v.value * u.hess(b, c) +
                       (u.grad(b) * v.grad(c) + u.grad(c) * v.grad(b));
      r.hess(b, c) = h;
      r.hess(c, b) = h;
    }
  }
  return r;
}

inline Jet2 operator*(double s, const Jet2& u) {
  Jet2 r = u;
  r.value *= s;
  r.grad *= s;
  r.hess *= s;
  return r;
}

inline Jet2 reciprocal(const Jet2& u) {
  if (u.value == 0.0) throw DomainError("division by zero");
  const double inv = 1.0 / u.value;
  return detail::chain(u, inv, -inv * inv, 2.0 * inv * inv * inv);
}

inline Jet2 operator/(const Jet2& u, const Jet2& v) { return u * reciprocal(v); }

inline Jet2 sin(const Jet2& u) {
  const double s = std::sin(u.value), c = std::cos(u.value);
  return detail::chain(u, s, c, -s);
}

inline Jet2 cos(const Jet2& u) {
  const double s = std::sin(u.value), c = std::cos(u.value);
  return detail::chain(u, c, -s, -c);
}

inline Jet2 tan(const Jet2& u) {
  const double c = std::cos(u.value);
  if (c == 0.0) throw DomainError("tan evaluated at a pole");
  const double t = std::tan(u.value);
  const double d = 1.0 + t * t;
  return detail::chain(u, t, d, 2.0 * t * d);
}

inline Jet2 exp(const Jet2& u) {
  const double e = std::exp(u.value);
  return detail::chain(u, e, e, e);
}

inline Jet2 log(const Jet2& u) {
  if (!(u.value > 0.0)) throw DomainError("log of non-positive value " + std::to_string(u.value));
  const double inv = 1.0 / u.value;
  return detail::chain(u, std::log(u.value), inv, -inv * inv);
}

inline Jet2 sqrt(const Jet2& u) {
  if (!(u.value > 0.0)) throw DomainError("sqrt of non-positive value " + std::to_string(u.value));
  const double s = std::sqrt(u.value);
  return detail::chain(u, s, 0.5 / s, -0.25 / (s * u.value));
}

inline Jet2 sinh(const Jet2& u) {
  const double s = std::sinh(u.value), c = std::cosh(u.value);
  return detail::chain(u, s, c, s);
}

inline Jet2 cosh(const Jet2& u) {
  const double s = std::sinh(u.value), c = std::cosh(u.value);
  return detail::chain(u, c, s, c);
}

inline Jet2 tanh(const Jet2& u) {
  const double t = std::tanh(u.value);
  const double d = 1.0 - t * t;
  return detail::chain(u, t, d, -2.0 * t * d);
}

/// u^k for integer k by repeated squaring; exact at u <= 0.
inline Jet2 pow_int(const Jet2& u, long k) {
  if (k < 0) return reciprocal(pow_int(u, -k));
  Jet2 result = Jet2::constant(u.dim(), 1.0);
  Jet2 base = u;
  bool first = true;
  while (k > 0) {
    if (k & 1) {
      result = first ? base : result * base;
      first = false;
    }
    k >>= 1;
    if (k > 0) base = base * base;
  }
  return result;
}

/// u^c for real constant c; requires u > 0.
inline Jet2 pow_real(const Jet2& u, double c) {
  if (!(u.value > 0.0)) throw DomainError("non-integer power of non-positive base");
  const double p = std::pow(u.value, c);
  return detail::chain(u, p, c * p / u.value, c * (c - 1.0) * p / (u.value * u.value));
}

}  // namespace tlift
