#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tlift/error.hpp"
#include "tlift/expr.hpp"
#include "tlift/tensor.hpp"

namespace tlift {

/// One inequality of an admitted region, stored as `expr > 0` (or `>= 0`).
struct RegionConstraint {
  std::string text;
  Expression expr;
  bool strict = true;

  bool holds(std::span<const double> x) const {
    double v = 0.0;
    try {
      v = expr.evaluate(x);
    } catch (const DomainError&) {
      return false;
    }
    return strict ? v > 0.0 : v >= 0.0;
  }
};

/// Parses "lhs > rhs", "lhs >= rhs", "lhs < rhs" or "lhs <= rhs".
inline RegionConstraint parse_constraint(const std::string& text, const SymbolTable& symbols) {
  const auto pos = text.find_first_of("<>");
  if (pos == std::string::npos) throw ParseError("region constraint needs '<' or '>'", 0);
  const bool greater = text[pos] == '>';
  const bool inclusive = pos + 1 < text.size() && text[pos + 1] == '=';
  const std::string lhs = text.substr(0, pos);
  const std::string rhs = text.substr(pos + (inclusive ? 2 : 1));
  Expression l = parse(lhs, symbols);
  Expression r = parse(rhs, symbols);
  RegionConstraint c;
  c.text = text;
  c.expr = greater ? l - r : r - l;
  c.strict = !inclusive;
  return c;
}

/// A metric declared by closed-form components on a single chart.
struct MetricSpec {
  std::string name;
  std::size_t dimension = 0;
  std::vector<std::string> coordinates;
  std::map<std::string, double> parameters;
  /// Upper triangle a <= b, row-major: (0,0), (0,1), ..., (1,1), ...
  std::vector<Expression> upper;
  std::vector<RegionConstraint> region;
  /// Default coordinate box used for sampling, one [lo, hi] per coordinate.
  std::vector<std::pair<double, double>> sample_box;
  double singular_tol = 1e-12;

  SymbolTable symbols() const {
    SymbolTable s;
    s.dimension = dimension;
    s.coordinate_names = coordinates;
    s.constants = parameters;
    return s;
  }

  const Expression& component(std::size_t a, std::size_t b) const {
    if (a > b) std::swap(a, b);
    // offset of row a in the packed upper triangle
    const std::size_t row = a * dimension - a * (a - 1) / 2;
    return upper[row + (b - a)];
  }

  bool admits(std::span<const double> x) const {
    return std::all_of(region.begin(), region.end(), [&](const RegionConstraint& c) { return c.holds(x); });
  }

  /// Builds a metric from the full n x n matrix of component strings. Only the
  /// upper triangle is parsed; the lower one must be textually identical or "".
  static MetricSpec from_strings(std::string name, std::vector<std::string> coordinates,
                                 std::map<std::string, double> parameters,
                                 const std::vector<std::vector<std::string>>& components,
                                 const std::vector<std::string>& region,
                                 std::vector<std::pair<double, double>> box = {}) {
    MetricSpec m;
    m.name = std::move(name);
    m.dimension = coordinates.size();
    if (m.dimension < 2 || m.dimension > kMaxDim)
      throw GeometryError("metric dimension must be between 2 and " + std::to_string(kMaxDim));
    m.coordinates = std::move(coordinates);
    m.parameters = std::move(parameters);
    const SymbolTable symbols = m.symbols();
    if (components.size() != m.dimension) throw GeometryError("metric must have n rows");
    for (std::size_t a = 0; a < m.dimension; ++a) {
      if (components[a].size() != m.dimension) throw GeometryError("metric must have n columns");
      for (std::size_t b = a; b < m.dimension; ++b) {
        const std::string& lower = components[b][a];
        if (a != b && !lower.empty() && lower != components[a][b])
          throw GeometryError("metric components (" + std::to_string(a) + "," + std::to_string(b) +
                              ") are not symmetric");
        m.upper.push_back(parse(components[a][b], symbols));
      }
    }
    for (const auto& r : region) m.region.push_back(parse_constraint(r, symbols));
    if (box.empty()) box.assign(m.dimension, {-1.0, 1.0});
    if (box.size() != m.dimension) throw GeometryError("sample box must have one interval per coordinate");
    m.sample_box = std::move(box);
    return m;
  }
};

/// Vector field Y^a(x).
struct VectorFieldSpec {
  std::vector<Expression> components;

  std::size_t dimension() const { return components.size(); }

  static VectorFieldSpec parse(const std::vector<std::string>& texts, const SymbolTable& symbols) {
    if (texts.size() != symbols.dimension) throw GeometryError("vector field needs n components");
    VectorFieldSpec y;
    for (const auto& t : texts) y.components.push_back(tlift::parse(t, symbols));
    return y;
  }

  static VectorFieldSpec zero(std::size_t n) {
    VectorFieldSpec y;
    y.components.assign(n, Expression::constant(n, 0.0));
    return y;
  }

  /// Constant coordinate basis field e_i.
  static VectorFieldSpec basis(std::size_t n, std::size_t i) {
    VectorFieldSpec y = zero(n);
    y.components[i] = Expression::constant(n, 1.0);
    return y;
  }
};

/// Mixed rank-2 tensor field A^a_b(x), row-major in (a, b).
struct Tensor2FieldSpec {
  std::vector<Expression> components;
  std::size_t dim = 0;

  std::size_t dimension() const { return dim; }
  const Expression& operator()(std::size_t a, std::size_t b) const { return components[a * dim + b]; }

  static Tensor2FieldSpec parse(const std::vector<std::vector<std::string>>& rows, const SymbolTable& symbols) {
    const std::size_t n = symbols.dimension;
    if (rows.size() != n) throw GeometryError("tensor field needs n rows");
    Tensor2FieldSpec t;
    t.dim = n;
    for (const auto& row : rows) {
      if (row.size() != n) throw GeometryError("tensor field needs n columns");
      for (const auto& c : row) t.components.push_back(tlift::parse(c, symbols));
    }
    return t;
  }

  static Tensor2FieldSpec zero(std::size_t n) {
    Tensor2FieldSpec t;
    t.dim = n;
    t.components.assign(n * n, Expression::constant(n, 0.0));
    return t;
  }

  /// s(x) * delta^a_b
  static Tensor2FieldSpec scalar_identity(const Expression& s) {
    const std::size_t n = s.dimension();
    Tensor2FieldSpec t = zero(n);
    for (std::size_t a = 0; a < n; ++a) t.components[a * n + a] = s;
    return t;
  }
};

/// Scalar field psi(x).
struct ScalarFieldSpec {
  Expression expr;

  static ScalarFieldSpec parse(const std::string& text, const SymbolTable& symbols) {
    return ScalarFieldSpec{tlift::parse(text, symbols)};
  }
};

/// Value and first two derivatives of a vector field at a point.
struct VectorJet {
  Vector value;
  Matrix d;    // d(a, b) = d_b Y^a
  Tensor3 dd;  // dd(a, b, c) = d_b d_c Y^a
};

/// Value and first derivative of a mixed rank-2 tensor field at a point.
struct Tensor2Jet {
  Matrix value;  // A^a_b
  Tensor3 d;     // d(a, b, c) = d_c A^a_b
};

inline VectorJet evaluate(const VectorFieldSpec& y, std::span<const double> x) {
  const std::size_t n = y.dimension();
  VectorJet j{Vector(n), Matrix(n), Tensor3(n)};
  for (std::size_t a = 0; a < n; ++a) {
    const Jet2 c = y.components[a].evaluate_jet(x);
    j.value(a) = c.value;
    for (std::size_t b = 0; b < n; ++b) {
      j.d(a, b) = c.grad(b);
      for (std::size_t e = 0; e < n; ++e) j.dd(a, b, e) = c.hess(b, e);
    }
  }
  return j;
}

inline Tensor2Jet evaluate(const Tensor2FieldSpec& t, std::span<const double> x) {
  const std::size_t n = t.dimension();
  Tensor2Jet j{Matrix(n), Tensor3(n)};
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const Jet2 c = t(a, b).evaluate_jet(x);
      j.value(a, b) = c.value;
      for (std::size_t e = 0; e < n; ++e) j.d(a, b, e) = c.grad(e);
    }
  }
  return j;
}

/// Metric and curvature data at a single point.
///
/// Index conventions: dg(a,b,c) = d_c g_ab; d2g(a,b,c,d) = d_c d_d g_ab;
/// gamma(a,b,c) = Gamma^a_bc; dgamma(a,b,c,d) = d_d Gamma^a_bc;
/// riemann(a,b,c,d) = R^a_bcd.
struct GeometryPoint {
  Vector x;
  Matrix g;
  Matrix g_inv;
  Tensor3 dg;
  Tensor4 d2g;
  Tensor3 gamma;
  Tensor4 dgamma;
  Tensor4 riemann;

  std::size_t dim() const noexcept { return x.dim(); }
};

inline std::vector<double> to_std(const Vector& v) {
  std::vector<double> out(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) out[i] = v(i);
  return out;
}

inline Vector to_vector(std::span<const double> x) {
  Vector v(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) v(i) = x[i];
  return v;
}

/// (a, d, e) = d_e g^ad = -g^af d_e g_fh g^hd; needs only g_inv and dg.
inline Tensor3 inverse_metric_derivative(const GeometryPoint& gp) {
  const std::size_t n = gp.dim();
  Tensor3 r(n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t d = 0; d < n; ++d)
      for (std::size_t e = 0; e < n; ++e) {
        double s = 0.0;
        for (std::size_t f = 0; f < n; ++f)
          for (std::size_t h = 0; h < n; ++h) s += gp.g_inv(a, f) * gp.dg(f, h, e) * gp.g_inv(h, d);
        r(a, d, e) = -s;
      }
  return r;
}

/// Evaluates g, g^-1, Christoffel symbols, their derivatives and the Riemann
/// tensor at `x`. The Riemann sign is the one for which
/// [H_a, H_b] = -R^d_cab p^c V_d holds on the tangent bundle.
inline GeometryPoint geometry_at(const MetricSpec& m, std::span<const double> x) {
  const std::size_t n = m.dimension;
  if (x.size() != n) throw GeometryError("point has wrong dimension");
  if (!m.admits(x)) throw GeometryError("point lies outside the admitted region of " + m.name);

  GeometryPoint gp{to_vector(x), Matrix(n), Matrix(n), Tensor3(n), Tensor4(n), Tensor3(n), Tensor4(n), Tensor4(n)};
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a; b < n; ++b) {
      const Jet2 j = m.component(a, b).evaluate_jet(x);
      gp.g(a, b) = gp.g(b, a) = j.value;
      for (std::size_t c = 0; c < n; ++c) {
        gp.dg(a, b, c) = gp.dg(b, a, c) = j.grad(c);
        for (std::size_t d = 0; d < n; ++d) gp.d2g(a, b, c, d) = gp.d2g(b, a, c, d) = j.hess(c, d);
      }
    }
  }

  using Small = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
  Small ge(n, n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) ge(a, b) = gp.g(a, b);
  Eigen::PartialPivLU<Small> lu(ge);
  const double det = lu.determinant();
  if (!(std::abs(det) > m.singular_tol))
    throw GeometryError("singular metric (|det g| = " + std::to_string(std::abs(det)) + ")");
  const Small inv = lu.inverse();
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) gp.g_inv(a, b) = inv(a, b);

  // Gamma_dbc = 1/2 (d_b g_dc + d_c g_db - d_d g_bc), and its derivative along e.
  Tensor3 lowered(n);
  Tensor4 dlowered(n);
  for (std::size_t d = 0; d < n; ++d)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c) {
        lowered(d, b, c) = 0.5 * (gp.dg(d, c, b) + gp.dg(d, b, c) - gp.dg(b, c, d));
        for (std::size_t e = 0; e < n; ++e)
          dlowered(d, b, c, e) = 0.5 * (gp.d2g(d, c, b, e) + gp.d2g(d, b, c, e) - gp.d2g(b, c, d, e));
      }

  const Tensor3 dginv = inverse_metric_derivative(gp);

  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = b; c < n; ++c) {
        double s = 0.0;
        for (std::size_t d = 0; d < n; ++d) s += gp.g_inv(a, d) * lowered(d, b, c);
        gp.gamma(a, b, c) = gp.gamma(a, c, b) = s;
        for (std::size_t e = 0; e < n; ++e) {
          double ds = 0.0;
          for (std::size_t d = 0; d < n; ++d)
            ds += dginv(a, d, e) * lowered(d, b, c) + gp.g_inv(a, d) * dlowered(d, b, c, e);
          gp.dgamma(a, b, c, e) = gp.dgamma(a, c, b, e) = ds;
        }
      }

  // R^a_bcd = d_c Gamma^a_db - d_d Gamma^a_cb + Gamma^a_ce Gamma^e_db - Gamma^a_de Gamma^e_cb
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c)
        for (std::size_t d = 0; d < n; ++d) {
          double s = gp.dgamma(a, d, b, c) - gp.dgamma(a, c, b, d);
          for (std::size_t e = 0; e < n; ++e)
            s += gp.gamma(a, c, e) * gp.gamma(e, d, b) - gp.gamma(a, d, e) * gp.gamma(e, c, b);
          gp.riemann(a, b, c, d) = s;
        }
  return gp;
}

/// A_ab = g_ac A^c_b
inline Matrix lower_first(const GeometryPoint& gp, const Matrix& mixed) { return matmul(gp.g, mixed); }

/// g_ab u^b
inline Vector lower(const GeometryPoint& gp, const Vector& u) { return apply(gp.g, u); }

/// R(Y, Z)^a_b = R^a_bcd Y^c Z^d
inline Matrix curvature_operator(const GeometryPoint& gp, const Vector& y, const Vector& z) {
  const std::size_t n = gp.dim();
  Matrix r(n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c)
        for (std::size_t d = 0; d < n; ++d) r(a, b) += gp.riemann(a, b, c, d) * y(c) * z(d);
  return r;
}

/// (nabla Y)(a, b) = nabla_b Y^a = d_b Y^a + Gamma^a_bc Y^c
inline Matrix covariant_derivative(const GeometryPoint& gp, const VectorJet& y) {
  const std::size_t n = gp.dim();
  Matrix r = y.d;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c) r(a, b) += gp.gamma(a, b, c) * y.value(c);
  return r;
}

/// (nabla A)(a, b, c) = nabla_c A^a_b = d_c A^a_b + Gamma^a_cd A^d_b - Gamma^d_cb A^a_d
inline Tensor3 covariant_derivative(const GeometryPoint& gp, const Tensor2Jet& t) {
  const std::size_t n = gp.dim();
  Tensor3 r = t.d;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c) {
        double s = 0.0;
        for (std::size_t d = 0; d < n; ++d)
          s += gp.gamma(a, c, d) * t.value(d, b) - gp.gamma(d, c, b) * t.value(a, d);
        r(a, b, c) += s;
      }
  return r;
}

/// nabla_Y u^a = Y^c (d_c u^a + Gamma^a_cd u^d) for a field u known to first order.
inline Vector directional_derivative(const GeometryPoint& gp, const Vector& y, const Vector& u, const Matrix& du) {
  const std::size_t n = gp.dim();
  Vector r(n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t c = 0; c < n; ++c) {
      double s = du(a, c);
      for (std::size_t d = 0; d < n; ++d) s += gp.gamma(a, c, d) * u(d);
      r(a) += y(c) * s;
    }
  return r;
}

/// Contracts a (a,b,c) tensor with Y^c in its last slot.
inline Matrix contract_last(const Tensor3& t, const Vector& y) {
  const std::size_t n = y.dim();
  Matrix r(n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c) r(a, b) += t(a, b, c) * y(c);
  return r;
}

/// The field nabla Y as a rank-2 jet: value nabla_b Y^a and its partial
/// derivatives d_c (nabla_b Y^a), assembled from d^2 Y and d Gamma.
inline Tensor2Jet covariant_derivative_jet(const GeometryPoint& gp, const VectorJet& y) {
  const std::size_t n = gp.dim();
  Tensor2Jet j{covariant_derivative(gp, y), Tensor3(n)};
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c) {
        double s = y.dd(a, b, c);
        for (std::size_t d = 0; d < n; ++d) s += gp.dgamma(a, b, d, c) * y.value(d) + gp.gamma(a, b, d) * y.d(d, c);
        j.d(a, b, c) = s;
      }
  return j;
}

/// (a, b, c) = nabla_c nabla_b Y^a
inline Tensor3 second_covariant_derivative(const GeometryPoint& gp, const VectorJet& y) {
  return covariant_derivative(gp, covariant_derivative_jet(gp, y));
}

/// (a, b, c) = L_Y Gamma^a_bc = nabla_c nabla_b Y^a - R^a_bcd Y^d.
///
/// Throws GeometryError if the result is not symmetric in (b, c) to 1e-10
/// relative to its magnitude.
inline Tensor3 lie_derivative_connection(const GeometryPoint& gp, const VectorJet& y) {
  const std::size_t n = gp.dim();
  Tensor3 r = second_covariant_derivative(gp, y);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c)
        for (std::size_t d = 0; d < n; ++d) r(a, b, c) -= gp.riemann(a, b, c, d) * y.value(d);
  double asym = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = b + 1; c < n; ++c) asym = std::max(asym, std::abs(r(a, b, c) - r(a, c, b)));
  if (asym > 1e-10 * (1.0 + r.max_abs()))
    throw GeometryError("Lie derivative of the connection is not symmetric (" + std::to_string(asym) + ")");
  return r;
}

/// S(Y, Z)^a_b = (L_Z Gamma^a_cb) Y^c
inline Matrix s_tensor(const GeometryPoint& gp, const Vector& y, const VectorJet& z) {
  const Tensor3 lz = lie_derivative_connection(gp, z);
  const std::size_t n = gp.dim();
  Matrix r(n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c) r(a, b) += lz(a, c, b) * y(c);
  return r;
}

// Pointwise wrappers taking field specs.

inline Matrix cov_deriv_vector(const MetricSpec& m, const VectorFieldSpec& y, std::span<const double> x) {
  return covariant_derivative(geometry_at(m, x), evaluate(y, x));
}

inline Tensor3 cov_deriv_tensor2(const MetricSpec& m, const Tensor2FieldSpec& t, std::span<const double> x) {
  return covariant_derivative(geometry_at(m, x), evaluate(t, x));
}

inline Tensor3 second_cov_deriv_vector(const MetricSpec& m, const VectorFieldSpec& y, std::span<const double> x) {
  return second_covariant_derivative(geometry_at(m, x), evaluate(y, x));
}

inline Tensor3 lie_deriv_connection(const MetricSpec& m, const VectorFieldSpec& y, std::span<const double> x) {
  return lie_derivative_connection(geometry_at(m, x), evaluate(y, x));
}

inline Matrix s_tensor(const MetricSpec& m, const VectorFieldSpec& y, const VectorFieldSpec& z,
                       std::span<const double> x) {
  return s_tensor(geometry_at(m, x), evaluate(y, x).value, evaluate(z, x));
}

/// Residuals of the identities every Levi-Civita geometry must satisfy.
struct GeometryIdentityResiduals {
  double metric_compatibility = 0.0;  // max |nabla_c g_ab|
  double first_bianchi = 0.0;         // max |R^a_[bcd]|
  double riemann_skew = 0.0;          // max |R^a_bcd + R^a_bdc|, |R_abcd + R_bacd|
  double pair_symmetry = 0.0;         // max |R_abcd - R_cdab|
  double inverse = 0.0;               // max |g g^-1 - 1|
};

inline GeometryIdentityResiduals identity_residuals(const GeometryPoint& gp) {
  const std::size_t n = gp.dim();
  GeometryIdentityResiduals r;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c) {
        double s = gp.dg(a, b, c);
        for (std::size_t d = 0; d < n; ++d) s -= gp.gamma(d, c, a) * gp.g(d, b) + gp.gamma(d, c, b) * gp.g(a, d);
        r.metric_compatibility = std::max(r.metric_compatibility, std::abs(s));
      }
  Tensor4 low(n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c)
        for (std::size_t d = 0; d < n; ++d)
          for (std::size_t e = 0; e < n; ++e) low(a, b, c, d) += gp.g(a, e) * gp.riemann(e, b, c, d);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c)
        for (std::size_t d = 0; d < n; ++d) {
          // Cyclic sum; equals 3 R^a_[bcd] when R^a_bcd is skew in (c, d).
          const double cyc = gp.riemann(a, b, c, d) + gp.riemann(a, c, d, b) + gp.riemann(a, d, b, c);
          r.first_bianchi = std::max(r.first_bianchi, std::abs(cyc) / 3.0);
          r.riemann_skew = std::max(r.riemann_skew, std::abs(gp.riemann(a, b, c, d) + gp.riemann(a, b, d, c)));
          r.riemann_skew = std::max(r.riemann_skew, std::abs(low(a, b, c, d) + low(b, a, c, d)));
          r.pair_symmetry = std::max(r.pair_symmetry, std::abs(low(a, b, c, d) - low(c, d, a, b)));
        }
  r.inverse = max_abs_diff(matmul(gp.g, gp.g_inv), identity(n));
  return r;
}

}  // namespace tlift
