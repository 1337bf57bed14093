#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tlift/bundle.hpp"
#include "tlift/geometry.hpp"

namespace tlift {

/// One summand of a transport generator A^a_b(x).
struct TransportTerm {
  enum class Kind {
    Explicit,                 // coefficient * T^a_b(x)
    CovariantDerivative,      // coefficient * nabla_b Y^a
    SkewCovariantDerivative,  // coefficient * g^ac nabla_[b Y_c]
    RaisedForm,               // coefficient * g^ac W_cb(x)
  };

  Kind kind = Kind::Explicit;
  double coefficient = 1.0;
  Tensor2FieldSpec tensor;  // Explicit, RaisedForm
  VectorFieldSpec field;    // CovariantDerivative, SkewCovariantDerivative
};

/// The rank-2 tensor field A of an affine transport lift, kept as a sum of
/// terms so that lifts built from nabla Y stay exact without symbolic
/// differentiation. The non-tensorial generator omega = A - Gamma Y is never
/// stored.
class TransportGenerator {
 public:
  TransportGenerator() = default;
  explicit TransportGenerator(std::size_t n) : dim_(n) {}

  static TransportGenerator zero(std::size_t n) { return TransportGenerator(n); }

  static TransportGenerator explicit_tensor(Tensor2FieldSpec t, double coefficient = 1.0) {
    TransportGenerator g(t.dimension());
    g.terms_.push_back({TransportTerm::Kind::Explicit, coefficient, std::move(t), {}});
    return g;
  }

  static TransportGenerator covariant_derivative(VectorFieldSpec y, double coefficient = 1.0) {
    TransportGenerator g(y.dimension());
    g.terms_.push_back({TransportTerm::Kind::CovariantDerivative, coefficient, {}, std::move(y)});
    return g;
  }

  static TransportGenerator skew_covariant_derivative(VectorFieldSpec y, double coefficient = 1.0) {
    TransportGenerator g(y.dimension());
    g.terms_.push_back({TransportTerm::Kind::SkewCovariantDerivative, coefficient, {}, std::move(y)});
    return g;
  }

  /// A^a_b = g^ac W_cb for a field W with lowered indices.
  static TransportGenerator raised_form(Tensor2FieldSpec w, double coefficient = 1.0) {
    TransportGenerator g(w.dimension());
    g.terms_.push_back({TransportTerm::Kind::RaisedForm, coefficient, std::move(w), {}});
    return g;
  }

  /// psi(x) delta^a_b
  static TransportGenerator scalar_identity(const Expression& psi, double coefficient = 1.0) {
    return explicit_tensor(Tensor2FieldSpec::scalar_identity(psi), coefficient);
  }

  std::size_t dimension() const noexcept { return dim_; }
  const std::vector<TransportTerm>& terms() const noexcept { return terms_; }
  bool is_zero() const noexcept { return terms_.empty(); }

  friend TransportGenerator operator+(TransportGenerator a, const TransportGenerator& b) {
    if (a.dim_ == 0) a.dim_ = b.dim_;
    a.terms_.insert(a.terms_.end(), b.terms_.begin(), b.terms_.end());
    return a;
  }

  friend TransportGenerator operator*(double s, TransportGenerator a) {
    if (s == 0.0) return TransportGenerator(a.dim_);
    for (auto& t : a.terms_) t.coefficient *= s;
    return a;
  }

  /// Value and first partial derivatives at the point described by `gp`.
  Tensor2Jet evaluate(const GeometryPoint& gp) const;

 private:
  std::size_t dim_ = 0;
  std::vector<TransportTerm> terms_;
};

inline Tensor2Jet TransportGenerator::evaluate(const GeometryPoint& gp) const {
  const std::size_t n = gp.dim();
  Tensor2Jet total{Matrix(n), Tensor3(n)};
  Tensor3 dginv;
  bool have_dginv = false;
  auto inverse_derivative = [&]() -> const Tensor3& {
    if (!have_dginv) {
      dginv = inverse_metric_derivative(gp);
      have_dginv = true;
    }
    return dginv;
  };
  // (g^-1 M)^a_b and its derivative, for a lowered-index matrix M with derivative dM.
  auto raise = [&](const Matrix& m, const Tensor3& dm) {
    const Tensor3& di = inverse_derivative();
    Tensor2Jet r{Matrix(n), Tensor3(n)};
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t c = 0; c < n; ++c) {
          r.value(a, b) += gp.g_inv(a, c) * m(c, b);
          for (std::size_t e = 0; e < n; ++e) r.d(a, b, e) += di(a, c, e) * m(c, b) + gp.g_inv(a, c) * dm(c, b, e);
        }
    return r;
  };

  const std::span<const double> x = gp.x.span();
  for (const TransportTerm& term : terms_) {
    Tensor2Jet part;
    switch (term.kind) {
      case TransportTerm::Kind::Explicit:
        part = tlift::evaluate(term.tensor, x);
        break;
      case TransportTerm::Kind::CovariantDerivative:
        part = covariant_derivative_jet(gp, tlift::evaluate(term.field, x));
        break;
      case TransportTerm::Kind::RaisedForm: {
        const Tensor2Jet w = tlift::evaluate(term.tensor, x);
        part = raise(w.value, w.d);
        break;
      }
      case TransportTerm::Kind::SkewCovariantDerivative: {
        // nabla_b Y_c = g_cd nabla_b Y^d ; skew part K_cb = 1/2 (nabla_b Y_c - nabla_c Y_b)
        const Tensor2Jet t = covariant_derivative_jet(gp, tlift::evaluate(term.field, x));
        Matrix lowered(n);
        Tensor3 dlowered(n);
        for (std::size_t c = 0; c < n; ++c)
          for (std::size_t b = 0; b < n; ++b)
            for (std::size_t d = 0; d < n; ++d) {
              lowered(c, b) += gp.g(c, d) * t.value(d, b);
              for (std::size_t e = 0; e < n; ++e)
                dlowered(c, b, e) += gp.dg(c, d, e) * t.value(d, b) + gp.g(c, d) * t.d(d, b, e);
            }
        Matrix k(n);
        Tensor3 dk(n);
        for (std::size_t c = 0; c < n; ++c)
          for (std::size_t b = 0; b < n; ++b) {
            k(c, b) = 0.5 * (lowered(c, b) - lowered(b, c));
            for (std::size_t e = 0; e < n; ++e) dk(c, b, e) = 0.5 * (dlowered(c, b, e) - dlowered(b, c, e));
          }
        part = raise(k, dk);
        break;
      }
    }
    total.value += term.coefficient * part.value;
    total.d += term.coefficient * part.d;
  }
  return total;
}

enum class LiftKind { Horizontal, VerticalVector, VerticalTensor, Euler, Complete, Iwai, Dynamical, Matter, General };

inline const char* to_string(LiftKind k) {
  switch (k) {
    case LiftKind::Horizontal: return "horizontal";
    case LiftKind::VerticalVector: return "vertical_vec";
    case LiftKind::VerticalTensor: return "vertical_tensor";
    case LiftKind::Euler: return "euler";
    case LiftKind::Complete: return "complete";
    case LiftKind::Iwai: return "iwai";
    case LiftKind::Dynamical: return "dynamical";
    case LiftKind::Matter: return "matter";
    case LiftKind::General: return "general";
  }
  return "general";
}

/// Affine transport lift Y^(A,k) = Y^a H_a + (A^a_b p^b + k^a) V_a.
struct AtlSpec {
  VectorFieldSpec base;        // Y
  TransportGenerator transport;  // A
  VectorFieldSpec offset;      // k
  LiftKind kind = LiftKind::General;

  std::size_t dimension() const { return base.dimension(); }
};

/// Y, A, k and their first derivatives at the point of `gp`.
inline AffineData evaluate(const AtlSpec& l, const GeometryPoint& gp) {
  const std::span<const double> x = gp.x.span();
  const VectorJet y = evaluate(l.base, x);
  const VectorJet k = evaluate(l.offset, x);
  const Tensor2Jet a = l.transport.evaluate(gp);
  AffineData d(gp.dim());
  d.y = y.value;
  d.dy = y.d;
  d.a = a.value;
  d.da = a.d;
  d.k = k.value;
  d.dk = k.d;
  return d;
}

/// Connection-basis value (Y^a, A^a_b p^b + k^a) of the induced field.
inline BundleVector connection_components(const AtlSpec& l, const GeometryPoint& gp, const Vector& p) {
  const AffineData d = evaluate(l, gp);
  return {d.y, apply(d.a, p) + d.k};
}

inline BundleJet atl_jet(const AtlSpec& l, const GeometryPoint& gp, const Vector& p) {
  return affine_jet(gp, evaluate(l, gp), p);
}

/// The bundle field induced by an ATL.
inline BundleField induced_field(std::shared_ptr<const MetricSpec> m, const AtlSpec& l) {
  auto spec = std::make_shared<const AtlSpec>(l);
  return BundleField(std::string(to_string(l.kind)) + "-lift", [m, spec](const PhasePoint& pt) {
    return atl_jet(*spec, geometry_at(*m, pt.x.span()), pt.p);
  });
}

namespace detail {

inline VectorFieldSpec combine(double alpha, const VectorFieldSpec& y, double beta, const VectorFieldSpec& z) {
  const std::size_t n = y.dimension();
  auto scaled = [n](double s, const Expression& e) { return s == 1.0 ? e : s * e; };
  VectorFieldSpec r;
  for (std::size_t a = 0; a < n; ++a) {
    if (beta == 0.0) {
      r.components.push_back(alpha == 0.0 ? Expression::constant(n, 0.0) : scaled(alpha, y.components[a]));
    } else if (alpha == 0.0) {
      r.components.push_back(scaled(beta, z.components[a]));
    } else {
      r.components.push_back(scaled(alpha, y.components[a]) + scaled(beta, z.components[a]));
    }
  }
  return r;
}

}  // namespace detail

// Lift constructors.

/// Y^(0): parallel transport along Y.
inline AtlSpec horizontal_lift(const VectorFieldSpec& y) {
  const std::size_t n = y.dimension();
  return {y, TransportGenerator::zero(n), VectorFieldSpec::zero(n), LiftKind::Horizontal};
}

/// 0^(0,Z) = Z^a V_a.
inline AtlSpec vertical_lift_vector(const VectorFieldSpec& z) {
  const std::size_t n = z.dimension();
  return {VectorFieldSpec::zero(n), TransportGenerator::zero(n), z, LiftKind::VerticalVector};
}

/// 0^(A) = A^a_b p^b V_a.
inline AtlSpec vertical_lift_tensor(const TransportGenerator& a) {
  const std::size_t n = a.dimension();
  return {VectorFieldSpec::zero(n), a, VectorFieldSpec::zero(n), LiftKind::VerticalTensor};
}

inline AtlSpec vertical_lift_tensor(const Tensor2FieldSpec& a) {
  return vertical_lift_tensor(TransportGenerator::explicit_tensor(a));
}

/// Euler field p^a V_a.
inline AtlSpec euler_field(std::size_t n) {
  AtlSpec l = vertical_lift_tensor(TransportGenerator::explicit_tensor(
      Tensor2FieldSpec::scalar_identity(Expression::constant(n, 1.0))));
  l.kind = LiftKind::Euler;
  return l;
}

/// Y^(nabla Y): Lie transport along Y.
inline AtlSpec complete_lift(const VectorFieldSpec& y) {
  const std::size_t n = y.dimension();
  return {y, TransportGenerator::covariant_derivative(y), VectorFieldSpec::zero(n), LiftKind::Complete};
}

/// Y^(nabla Y - 2 psi delta).
inline AtlSpec iwai_lift(const VectorFieldSpec& y, const ScalarFieldSpec& psi) {
  const std::size_t n = y.dimension();
  return {y, TransportGenerator::covariant_derivative(y) + TransportGenerator::scalar_identity(psi.expr, -2.0),
          VectorFieldSpec::zero(n), LiftKind::Iwai};
}

/// Y^(nabla Y - psi delta): the ATL form a dynamical symmetry must take, with
/// [Y^(A), spray] = -psi spray.
inline AtlSpec dynamical_atl(const VectorFieldSpec& y, const ScalarFieldSpec& psi) {
  const std::size_t n = y.dimension();
  return {y, TransportGenerator::covariant_derivative(y) + TransportGenerator::scalar_identity(psi.expr, -1.0),
          VectorFieldSpec::zero(n), LiftKind::Dynamical};
}

/// Largest |A_(ab)| (indices lowered with g) over the given base points.
inline double max_symmetric_part(const MetricSpec& m, const TransportGenerator& a, const std::vector<Vector>& points) {
  double worst = 0.0;
  for (const Vector& x : points) {
    const GeometryPoint gp = geometry_at(m, x.span());
    worst = std::max(worst, sym(lower_first(gp, a.evaluate(gp).value)).max_abs());
  }
  return worst;
}

/// Y^(A) with A_(ab) = 0: a matter symmetry (Lorentz lift).
/// Throws ConstraintError carrying max |A_(ab)| if A fails skewness at any of
/// the validation points.
inline AtlSpec matter_lift(const MetricSpec& m, const VectorFieldSpec& y, const TransportGenerator& a,
                           const std::vector<Vector>& validation_points, double tol = 1e-10) {
  const double violation = max_symmetric_part(m, a, validation_points);
  if (violation > tol)
    throw ConstraintError("matter lift generator is not skew: max |A_(ab)| = " + std::to_string(violation),
                          violation);
  return {y, a, VectorFieldSpec::zero(y.dimension()), LiftKind::Matter};
}

/// alpha L1 + beta L2, formed componentwise on (Y, A, k).
inline AtlSpec atl_combine(double alpha, const AtlSpec& l1, double beta, const AtlSpec& l2) {
  if (beta == 0.0 && alpha == 1.0) return l1;
  if (alpha == 0.0 && beta == 1.0) return l2;
  AtlSpec r;
  r.base = detail::combine(alpha, l1.base, beta, l2.base);
  r.transport = alpha * l1.transport + beta * l2.transport;
  if (r.transport.dimension() == 0) r.transport = TransportGenerator::zero(l1.dimension());
  r.offset = detail::combine(alpha, l1.offset, beta, l2.offset);
  r.kind = LiftKind::General;
  return r;
}

/// Closed-form bracket [Y^(A,k), Z^(B,l)] = [Y,Z]^(C,m) at a base point.
struct AtlBracket {
  Vector base;       // [Y, Z]
  Matrix transport;  // C
  Vector offset;     // m

  /// Connection-basis value of [Y,Z]^(C,m) at fibre coordinate p.
  BundleVector connection_value(const Vector& p) const { return {base, apply(transport, p) + offset}; }
};

/// C = nabla_Y B - nabla_Z A - [A, B] - R(Y, Z),
/// m = nabla_Y l - nabla_Z k - A(l) + B(k).
inline AtlBracket atl_bracket(const GeometryPoint& gp, const AtlSpec& l1, const AtlSpec& l2) {
  const std::size_t n = gp.dim();
  const AffineData p = evaluate(l1, gp);
  const AffineData q = evaluate(l2, gp);

  AtlBracket r{apply(q.dy, p.y) - apply(p.dy, q.y), Matrix(n), Vector(n)};

  const Tensor3 nabla_a = covariant_derivative(gp, Tensor2Jet{p.a, p.da});
  const Tensor3 nabla_b = covariant_derivative(gp, Tensor2Jet{q.a, q.da});
  r.transport = contract_last(nabla_b, p.y) - contract_last(nabla_a, q.y) - commutator(p.a, q.a) -
                curvature_operator(gp, p.y, q.y);

  r.offset = directional_derivative(gp, p.y, q.k, q.dk) - directional_derivative(gp, q.y, p.k, p.dk) -
             apply(p.a, q.k) + apply(q.a, p.k);
  return r;
}

inline AtlBracket atl_bracket(const MetricSpec& m, const AtlSpec& l1, const AtlSpec& l2, std::span<const double> x) {
  return atl_bracket(geometry_at(m, x), l1, l2);
}

/// [Y, Z]^a = Y^b d_b Z^a - Z^b d_b Y^a with its first derivatives (dd left zero).
inline VectorJet vector_bracket(const VectorJet& yj, const VectorJet& zj) {
  const std::size_t n = yj.value.dim();
  VectorJet bracket{Vector(n), Matrix(n), Tensor3(n)};
  bracket.value = apply(zj.d, yj.value) - apply(yj.d, zj.value);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c)
        bracket.d(a, b) += yj.d(c, b) * zj.d(a, c) + yj.value(c) * zj.dd(a, c, b) - zj.d(c, b) * yj.d(a, c) -
                           zj.value(c) * yj.dd(a, c, b);
  return bracket;
}

/// Residuals of the six classical lift brackets at a phase point, each the
/// max-abs difference between the numeric bracket and its closed form.
struct ClassicalBracketResiduals {
  double horizontal_horizontal = 0.0;  // [Ybar, Zbar] = [Y,Z]bar - R(Y,Z)hat
  double horizontal_vertical = 0.0;    // [Ybar, Zhat] = (nabla_Y Z)hat
  double horizontal_complete = 0.0;    // [Ybar, Ztilde] = [Y,Z]bar + S(Y,Z)hat
  double vertical_vertical = 0.0;      // [Yhat, Zhat] = 0
  double vertical_complete = 0.0;      // [Yhat, Ztilde] = [Y,Z]hat
  double complete_complete = 0.0;      // [Ytilde, Ztilde] = [Y,Z]tilde

  double max() const {
    return std::max({horizontal_horizontal, horizontal_vertical, horizontal_complete, vertical_vertical,
                     vertical_complete, complete_complete});
  }
};

inline ClassicalBracketResiduals classical_bracket_table(const MetricSpec& m, const VectorFieldSpec& y,
                                                         const VectorFieldSpec& z, const PhasePoint& pt) {
  const std::size_t n = m.dimension;
  const GeometryPoint gp = geometry_at(m, pt.x.span());
  const Vector& p = pt.p;

  const VectorJet yj = evaluate(y, pt.x.span());
  const VectorJet zj = evaluate(z, pt.x.span());

  const VectorJet bracket = vector_bracket(yj, zj);

  auto jet_of = [&](const AtlSpec& l) { return atl_jet(l, gp, p); };
  auto coords = [&](const Vector& h, const Vector& v) { return to_coordinate_basis(gp, BundleVector(h, v), p); };

  const BundleJet ybar = jet_of(horizontal_lift(y)), zbar = jet_of(horizontal_lift(z));
  const BundleJet yhat = jet_of(vertical_lift_vector(y)), zhat = jet_of(vertical_lift_vector(z));
  const BundleJet ztilde = jet_of(complete_lift(z)), ytilde = jet_of(complete_lift(y));

  const Matrix r_yz = curvature_operator(gp, yj.value, zj.value);
  const Matrix s_yz = s_tensor(gp, yj.value, zj);
  const Matrix nabla_bracket = covariant_derivative(gp, bracket);
  const Vector zero(n);

  ClassicalBracketResiduals r;
  r.horizontal_horizontal = (lie_bracket(ybar, zbar) - coords(bracket.value, -apply(r_yz, p))).max_abs();
  r.horizontal_vertical =
      (lie_bracket(ybar, zhat) - coords(zero, directional_derivative(gp, yj.value, zj.value, zj.d))).max_abs();
  r.horizontal_complete = (lie_bracket(ybar, ztilde) - coords(bracket.value, apply(s_yz, p))).max_abs();
  r.vertical_vertical = lie_bracket(yhat, zhat).max_abs();
  r.vertical_complete = (lie_bracket(yhat, ztilde) - coords(zero, bracket.value)).max_abs();
  r.complete_complete = (lie_bracket(ytilde, ztilde) - coords(bracket.value, apply(nabla_bracket, p))).max_abs();
  return r;
}

/// Residual of [Y^dagger, Z^dagger] = [Y,Z]^dagger with
/// psi_[Y,Z] = Y(psi_Z) - Z(psi_Y), at a phase point.
inline double iwai_bracket_residual(const MetricSpec& m, const VectorFieldSpec& y, const ScalarFieldSpec& psi_y,
                                    const VectorFieldSpec& z, const ScalarFieldSpec& psi_z, const PhasePoint& pt) {
  const std::size_t n = m.dimension;
  const GeometryPoint gp = geometry_at(m, pt.x.span());
  const std::span<const double> x = pt.x.span();
  const VectorJet yj = evaluate(y, x), zj = evaluate(z, x);
  const Jet2 py = psi_y.expr.evaluate_jet(x), pz = psi_z.expr.evaluate_jet(x);

  const VectorJet bracket = vector_bracket(yj, zj);
  double psi_bracket = 0.0;
  for (std::size_t c = 0; c < n; ++c) psi_bracket += yj.value(c) * pz.grad(c) - zj.value(c) * py.grad(c);

  const Matrix transport = covariant_derivative(gp, bracket) - (2.0 * psi_bracket) * identity(n);
  const BundleVector expected = to_coordinate_basis(gp, BundleVector(bracket.value, apply(transport, pt.p)), pt.p);
  const BundleVector numeric = lie_bracket(atl_jet(iwai_lift(y, psi_y), gp, pt.p), atl_jet(iwai_lift(z, psi_z), gp, pt.p));
  return (numeric - expected).max_abs();
}

}  // namespace tlift
