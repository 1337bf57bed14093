#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "tlift/geometry.hpp"

namespace tlift {

/// Point (x, p) of the tangent bundle: base point and tangent-vector components.
struct PhasePoint {
  Vector x;
  Vector p;

  std::size_t dim() const noexcept { return x.dim(); }
};

/// Components of a bundle vector. Read as (X^a, P^a) in the coordinate basis
/// {d/dx^a, d/dp^a} or as (h^a, v^a) in the connection basis {H_a, V_a},
/// depending on where the value came from.
struct BundleVector {
  Vector horizontal;
  Vector vertical;

  explicit BundleVector(std::size_t n = 0) : horizontal(n), vertical(n) {}
  BundleVector(Vector h, Vector v) : horizontal(std::move(h)), vertical(std::move(v)) {}

  std::size_t dim() const noexcept { return horizontal.dim(); }
  double max_abs() const noexcept { return std::max(horizontal.max_abs(), vertical.max_abs()); }

  /// Euclidean inner product over the 2n components.
  double dot(const BundleVector& o) const noexcept {
    double s = 0.0;
    for (std::size_t a = 0; a < dim(); ++a) s += horizontal(a) * o.horizontal(a) + vertical(a) * o.vertical(a);
    return s;
  }

  friend BundleVector operator+(const BundleVector& a, const BundleVector& b) {
    return {a.horizontal + b.horizontal, a.vertical + b.vertical};
  }
  friend BundleVector operator-(const BundleVector& a, const BundleVector& b) {
    return {a.horizontal - b.horizontal, a.vertical - b.vertical};
  }
  friend BundleVector operator*(double s, const BundleVector& a) { return {s * a.horizontal, s * a.vertical}; }
};

/// Coordinate-basis components of a bundle field at a point together with
/// their first partial derivatives in all 2n phase coordinates.
/// dx_dx(a, e) = d X^a / d x^e, dx_dp(a, e) = d X^a / d p^e, and likewise for P.
struct BundleJet {
  BundleVector value;
  Matrix dx_dx, dx_dp, dp_dx, dp_dp;

  explicit BundleJet(std::size_t n = 0) : value(n), dx_dx(n), dx_dp(n), dp_dx(n), dp_dp(n) {}
};

/// A vector field on TM, evaluated through its coordinate-basis jet.
class BundleField {
 public:
  using Evaluator = std::function<BundleJet(const PhasePoint&)>;

  BundleField() = default;
  BundleField(std::string label, Evaluator eval) : label_(std::move(label)), eval_(std::move(eval)) {}

  const std::string& label() const noexcept { return label_; }
  BundleJet jet(const PhasePoint& pt) const { return eval_(pt); }
  BundleVector operator()(const PhasePoint& pt) const { return eval_(pt).value; }

 private:
  std::string label_;
  Evaluator eval_;
};

/// (X, P) -> (h, v): h = X, v^a = P^a + Gamma^a_bc p^b X^c.
inline BundleVector to_connection_basis(const GeometryPoint& gp, const BundleVector& coord, const Vector& p) {
  const std::size_t n = gp.dim();
  BundleVector r = coord;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c) r.vertical(a) += gp.gamma(a, b, c) * p(b) * coord.horizontal(c);
  return r;
}

/// (h, v) -> (X, P): X = h, P^a = v^a - Gamma^a_bc p^b h^c.
inline BundleVector to_coordinate_basis(const GeometryPoint& gp, const BundleVector& conn, const Vector& p) {
  const std::size_t n = gp.dim();
  BundleVector r = conn;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c) r.vertical(a) -= gp.gamma(a, b, c) * p(b) * conn.horizontal(c);
  return r;
}

inline BundleVector to_connection_basis(const MetricSpec& m, const BundleVector& coord, const PhasePoint& pt) {
  return to_connection_basis(geometry_at(m, pt.x.span()), coord, pt.p);
}

inline BundleVector to_coordinate_basis(const MetricSpec& m, const BundleVector& conn, const PhasePoint& pt) {
  return to_coordinate_basis(geometry_at(m, pt.x.span()), conn, pt.p);
}

/// Base data of a field Y^a H_a + (A^a_b p^b + k^a) V_a at a point, to first
/// order. dy(a, e) = d_e Y^a, da(a, b, e) = d_e A^a_b, dk(a, e) = d_e k^a.
struct AffineData {
  Vector y;
  Matrix dy;
  Matrix a;
  Tensor3 da;
  Vector k;
  Matrix dk;

  explicit AffineData(std::size_t n = 0) : y(n), dy(n), a(n), da(n), k(n), dk(n) {}
};

/// Coordinate jet of the affine field described by `d` at fibre coordinate p:
///   X^a = Y^a,  P^a = A^a_b p^b + k^a - Gamma^a_bc p^b Y^c.
inline BundleJet affine_jet(const GeometryPoint& gp, const AffineData& d, const Vector& p) {
  const std::size_t n = gp.dim();
  BundleJet j(n);
  j.value.horizontal = d.y;
  j.dx_dx = d.dy;
  for (std::size_t a = 0; a < n; ++a) {
    double v = d.k(a);
    for (std::size_t b = 0; b < n; ++b) {
      v += d.a(a, b) * p(b);
      for (std::size_t c = 0; c < n; ++c) v -= gp.gamma(a, b, c) * p(b) * d.y(c);
    }
    j.value.vertical(a) = v;
    for (std::size_t e = 0; e < n; ++e) {
      double s = d.dk(a, e);
      for (std::size_t b = 0; b < n; ++b) {
        s += d.da(a, b, e) * p(b);
        for (std::size_t c = 0; c < n; ++c)
          s -= gp.dgamma(a, b, c, e) * p(b) * d.y(c) + gp.gamma(a, b, c) * p(b) * d.dy(c, e);
      }
      j.dp_dx(a, e) = s;
      double t = d.a(a, e);
      for (std::size_t c = 0; c < n; ++c) t -= gp.gamma(a, e, c) * d.y(c);
      j.dp_dp(a, e) = t;
    }
  }
  return j;
}

/// Geodesic spray p^a H_a: coordinate components (p^a, -Gamma^a_bc p^b p^c).
inline BundleJet spray_jet(const GeometryPoint& gp, const Vector& p) {
  const std::size_t n = gp.dim();
  BundleJet j(n);
  j.value.horizontal = p;
  j.dx_dp = identity(n);
  for (std::size_t a = 0; a < n; ++a) {
    double v = 0.0;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c) v -= gp.gamma(a, b, c) * p(b) * p(c);
    j.value.vertical(a) = v;
    for (std::size_t e = 0; e < n; ++e) {
      double s = 0.0, t = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        t -= 2.0 * gp.gamma(a, e, b) * p(b);
        for (std::size_t c = 0; c < n; ++c) s -= gp.dgamma(a, b, c, e) * p(b) * p(c);
      }
      j.dp_dx(a, e) = s;
      j.dp_dp(a, e) = t;
    }
  }
  return j;
}

/// Spray value at a point, in the coordinate basis.
inline BundleVector spray_at(const MetricSpec& m, const PhasePoint& pt) {
  return spray_jet(geometry_at(m, pt.x.span()), pt.p).value;
}

inline BundleField geodesic_spray(std::shared_ptr<const MetricSpec> m) {
  return BundleField("spray", [m](const PhasePoint& pt) { return spray_jet(geometry_at(*m, pt.x.span()), pt.p); });
}

/// H_a = d/dx^a - Gamma^b_ca p^c d/dp^b.
inline BundleField horizontal_basis_field(std::shared_ptr<const MetricSpec> m, std::size_t index) {
  return BundleField("H" + std::to_string(index), [m, index](const PhasePoint& pt) {
    AffineData d(pt.dim());
    d.y(index) = 1.0;
    return affine_jet(geometry_at(*m, pt.x.span()), d, pt.p);
  });
}

/// V_a = d/dp^a.
inline BundleField vertical_basis_field(std::size_t index) {
  return BundleField("V" + std::to_string(index), [index](const PhasePoint& pt) {
    BundleJet j(pt.dim());
    j.value.vertical(index) = 1.0;
    return j;
  });
}

/// [F, G]^I = F^J d_J G^I - G^J d_J F^I over the 2n phase coordinates, from
/// the jets of both fields at the same point.
inline BundleVector lie_bracket(const BundleJet& f, const BundleJet& g) {
  const std::size_t n = f.value.dim();
  BundleVector r(n);
  for (std::size_t a = 0; a < n; ++a) {
    double h = 0.0, v = 0.0;
    for (std::size_t e = 0; e < n; ++e) {
      h += f.value.horizontal(e) * g.dx_dx(a, e) + f.value.vertical(e) * g.dx_dp(a, e);
      h -= g.value.horizontal(e) * f.dx_dx(a, e) + g.value.vertical(e) * f.dx_dp(a, e);
      v += f.value.horizontal(e) * g.dp_dx(a, e) + f.value.vertical(e) * g.dp_dp(a, e);
      v -= g.value.horizontal(e) * f.dp_dx(a, e) + g.value.vertical(e) * f.dp_dp(a, e);
    }
    r.horizontal(a) = h;
    r.vertical(a) = v;
  }
  return r;
}

/// Lie bracket of two bundle fields at `pt`, coordinate basis.
inline BundleVector lie_bracket_numeric(const BundleField& f, const BundleField& g, const PhasePoint& pt) {
  return lie_bracket(f.jet(pt), g.jet(pt));
}

/// Max-abs residuals of the three connection-basis bracket identities.
struct BasisBracketResiduals {
  double vertical_vertical = 0.0;      // [V_a, V_b] = 0
  double horizontal_vertical = 0.0;    // [H_a, V_b] = Gamma^c_ab V_c
  double horizontal_horizontal = 0.0;  // [H_a, H_b] = -R^d_cab p^c V_d

  double max() const { return std::max({vertical_vertical, horizontal_vertical, horizontal_horizontal}); }
};

/// Evaluates [V_a, V_b], [H_a, V_b] and [H_a, H_b] with the numeric bracket and
/// compares them with their closed forms in terms of Gamma and R.
inline BasisBracketResiduals verify_basis_brackets(const MetricSpec& m, const PhasePoint& pt) {
  const std::size_t n = m.dimension;
  const GeometryPoint gp = geometry_at(m, pt.x.span());
  std::vector<BundleJet> h, v;
  for (std::size_t a = 0; a < n; ++a) {
    AffineData d(n);
    d.y(a) = 1.0;
    h.push_back(affine_jet(gp, d, pt.p));
    BundleJet vj(n);
    vj.value.vertical(a) = 1.0;
    v.push_back(vj);
  }
  BasisBracketResiduals r;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      r.vertical_vertical = std::max(r.vertical_vertical, lie_bracket(v[a], v[b]).max_abs());

      BundleVector expected_hv(n);
      for (std::size_t c = 0; c < n; ++c) expected_hv.vertical(c) = gp.gamma(c, a, b);
      r.horizontal_vertical =
          std::max(r.horizontal_vertical, (lie_bracket(h[a], v[b]) - expected_hv).max_abs());

      BundleVector expected_hh(n);
      for (std::size_t d = 0; d < n; ++d)
        for (std::size_t c = 0; c < n; ++c) expected_hh.vertical(d) -= gp.riemann(d, c, a, b) * pt.p(c);
      r.horizontal_horizontal =
          std::max(r.horizontal_horizontal, (lie_bracket(h[a], h[b]) - expected_hh).max_abs());
    }
  }
  return r;
}

}  // namespace tlift
