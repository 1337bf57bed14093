#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>

namespace tlift {

/// Largest supported manifold dimension.
inline constexpr std::size_t kMaxDim = 4;

namespace detail {
constexpr std::size_t ipow(std::size_t base, std::size_t exp) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < exp; ++i) r *= base;
  return r;
}
}  // namespace detail

/// Dense component array of a rank-`Rank` tensor on an n-manifold, n <= kMaxDim.
///
/// Storage is inline (no allocation); components are laid out row-major with
/// stride n, so index (i0, i1, ...) maps to ((i0*n + i1)*n + ...). Index
/// placement (up/down) is a convention of the caller, documented where each
/// tensor is produced.
template <std::size_t Rank>
class Tensor {
 public:
  static constexpr std::size_t kCapacity = detail::ipow(kMaxDim, Rank);

  Tensor() = default;

  explicit Tensor(std::size_t n) : n_(n) {
    if (n > kMaxDim) throw std::invalid_argument("tensor dimension exceeds kMaxDim");
    data_.fill(0.0);
  }

  Tensor(std::size_t n, std::initializer_list<double> values) : Tensor(n) {
    if (values.size() != size()) throw std::invalid_argument("tensor initializer has wrong length");
    std::copy(values.begin(), values.end(), data_.begin());
  }

  std::size_t dim() const noexcept { return n_; }
  std::size_t size() const noexcept { return detail::ipow(n_, Rank); }

  template <class... I>
    requires(sizeof...(I) == Rank)
  double& operator()(I... idx) noexcept {
    return data_[offset(static_cast<std::size_t>(idx)...)];
  }

  template <class... I>
    requires(sizeof...(I) == Rank)
  double operator()(I... idx) const noexcept {
    return data_[offset(static_cast<std::size_t>(idx)...)];
  }

  std::span<const double> span() const noexcept { return {data_.data(), size()}; }

  /// Flat access over the n^Rank live components.
  double& flat(std::size_t i) noexcept { return data_[i]; }
  double flat(std::size_t i) const noexcept { return data_[i]; }

  double max_abs() const noexcept {
    double m = 0.0;
    for (std::size_t i = 0; i < size(); ++i) m = std::max(m, std::abs(data_[i]));
    return m;
  }

  Tensor& operator+=(const Tensor& o) noexcept {
    assert(o.n_ == n_);
    for (std::size_t i = 0; i < size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator-=(const Tensor& o) noexcept {
    assert(o.n_ == n_);
    for (std::size_t i = 0; i < size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Tensor& operator*=(double s) noexcept {
    for (std::size_t i = 0; i < size(); ++i) data_[i] *= s;
    return *this;
  }

  friend Tensor operator+(Tensor a, const Tensor& b) noexcept { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) noexcept { return a -= b; }
  friend Tensor operator-(Tensor a) noexcept { return a *= -1.0; }
  friend Tensor operator*(double s, Tensor a) noexcept { return a *= s; }
  friend Tensor operator*(Tensor a, double s) noexcept { return a *= s; }

  friend bool operator==(const Tensor& a, const Tensor& b) noexcept {
    if (a.n_ != b.n_) return false;
    return std::equal(a.data_.begin(), a.data_.begin() + a.size(), b.data_.begin());
  }

 private:
  template <class... I>
  std::size_t offset(I... idx) const noexcept {
    std::size_t off = 0;
    ((off = off * n_ + idx), ...);
    return off;
  }

  std::size_t n_ = 0;
  std::array<double, kCapacity> data_{};
};

using Vector = Tensor<1>;
using Matrix = Tensor<2>;
using Tensor3 = Tensor<3>;
using Tensor4 = Tensor<4>;

template <std::size_t R>
double max_abs_diff(const Tensor<R>& a, const Tensor<R>& b) {
  return (a - b).max_abs();
}

inline Matrix identity(std::size_t n) {
  Matrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

/// (M v)^a = M^a_b v^b
inline Vector apply(const Matrix& m, const Vector& v) {
  const std::size_t n = m.dim();
  Vector r(n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) r(a) += m(a, b) * v(b);
  return r;
}

inline Matrix matmul(const Matrix& x, const Matrix& y) {
  const std::size_t n = x.dim();
  Matrix r(n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t b = 0; b < n; ++b) r(a, b) += x(a, c) * y(c, b);
  return r;
}

inline Matrix transpose(const Matrix& m) {
  const std::size_t n = m.dim();
  Matrix r(n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) r(a, b) = m(b, a);
  return r;
}

/// Tensor commutator [X, Y] = XY - YX.
inline Matrix commutator(const Matrix& x, const Matrix& y) { return matmul(x, y) - matmul(y, x); }

/// Symmetric part with weight 1/2.
inline Matrix sym(const Matrix& m) { return 0.5 * (m + transpose(m)); }

/// Antisymmetric part with weight 1/2.
inline Matrix skew(const Matrix& m) { return 0.5 * (m - transpose(m)); }

inline double trace(const Matrix& m) {
  double t = 0.0;
  for (std::size_t a = 0; a < m.dim(); ++a) t += m(a, a);
  return t;
}

/// g(u, v) for a symmetric bilinear form given as a matrix.
inline double bilinear(const Matrix& g, const Vector& u, const Vector& v) {
  double s = 0.0;
  for (std::size_t a = 0; a < g.dim(); ++a)
    for (std::size_t b = 0; b < g.dim(); ++b) s += g(a, b) * u(a) * v(b);
  return s;
}

}  // namespace tlift
