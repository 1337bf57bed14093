#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "tlift/bundle.hpp"
#include "tlift/error.hpp"
#include "tlift/geometry.hpp"
#include "tlift/lifts.hpp"

namespace tlift {

/// Outcome of testing [Sigma, spray] = -psi spray at one phase point.
struct DynamicalResidual {
  double psi = 0.0;       // least-squares rescaling over the 2n components
  double residual = 0.0;  // |[Sigma, spray] + psi spray|_inf
  BundleVector bracket;   // [Sigma, spray], coordinate basis
};

inline DynamicalResidual dynamical_residual(const GeometryPoint& gp, const BundleJet& sigma, const Vector& p) {
  if (p.max_abs() == 0.0) throw DomainError("spray vanishes at p = 0; rescaling is undefined");
  const BundleJet spray = spray_jet(gp, p);
  DynamicalResidual r;
  r.bracket = lie_bracket(sigma, spray);
  r.psi = -r.bracket.dot(spray.value) / spray.value.dot(spray.value);
  r.residual = (r.bracket + r.psi * spray.value).max_abs();
  return r;
}

inline DynamicalResidual dynamical_residual(const MetricSpec& m, const BundleField& sigma, const PhasePoint& pt) {
  return dynamical_residual(geometry_at(m, pt.x.span()), sigma.jet(pt), pt.p);
}

inline DynamicalResidual dynamical_residual(const MetricSpec& m, const AtlSpec& l, const PhasePoint& pt) {
  const GeometryPoint gp = geometry_at(m, pt.x.span());
  return dynamical_residual(gp, atl_jet(l, gp, pt.p), pt.p);
}

/// Pointwise residuals of the conditions an ATL must satisfy to be a
/// dynamical symmetry with rescaling psi(x).
struct AtlDynamicalConditions {
  double offset_norm = 0.0;          // |k|_inf, must vanish
  double transport_residual = 0.0;   // |A_ab - (nabla_b Y_a - psi g_ab)|_inf
  double projective_residual = 0.0;  // |L_Y Gamma^a_bc - delta^a_(b nabla_c) psi|_inf

  double max() const { return std::max({offset_norm, transport_residual, projective_residual}); }
};

/// delta^a_(b grad_c) with weight 1/2.
inline Tensor3 projective_term(const Vector& grad) {
  const std::size_t n = grad.dim();
  Tensor3 t(n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c)
        t(a, b, c) = 0.5 * ((a == b ? grad(c) : 0.0) + (a == c ? grad(b) : 0.0));
  return t;
}

inline AtlDynamicalConditions atl_dynamical_conditions(const MetricSpec& m, const AtlSpec& l,
                                                       std::span<const double> x, const ScalarFieldSpec& psi) {
  const GeometryPoint gp = geometry_at(m, x);
  const VectorJet y = evaluate(l.base, x);
  const AffineData d = evaluate(l, gp);
  const Jet2 s = psi.expr.evaluate_jet(x);

  AtlDynamicalConditions r;
  r.offset_norm = d.k.max_abs();
  const Matrix expected = lower_first(gp, covariant_derivative(gp, y)) - s.value * gp.g;
  r.transport_residual = max_abs_diff(lower_first(gp, d.a), expected);
  r.projective_residual = max_abs_diff(lie_derivative_connection(gp, y), projective_term(s.grad));
  return r;
}

/// [Y^(A), spray] in closed form for k = 0, coordinate basis:
///   (A^a_b - nabla_b Y^a) p^b H_a + (R^a_bcd Y^d - nabla_c A^a_b) p^b p^c V_a.
inline BundleVector matter_spray_bracket(const GeometryPoint& gp, const AtlSpec& l, const Vector& p) {
  const std::size_t n = gp.dim();
  const std::span<const double> x = gp.x.span();
  const VectorJet y = evaluate(l.base, x);
  const AffineData d = evaluate(l, gp);
  if (d.k.max_abs() != 0.0) throw ConstraintError("matter spray bracket needs k = 0", d.k.max_abs());

  const Matrix nabla_y = covariant_derivative(gp, y);
  const Tensor3 nabla_a = covariant_derivative(gp, Tensor2Jet{d.a, d.da});
  BundleVector conn(n);
  conn.horizontal = apply(d.a - nabla_y, p);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c) {
        double coeff = -nabla_a(a, b, c);
        for (std::size_t e = 0; e < n; ++e) coeff += gp.riemann(a, b, c, e) * d.y(e);
        conn.vertical(a) += coeff * p(b) * p(c);
      }
  return to_coordinate_basis(gp, conn, p);
}

inline BundleVector matter_spray_bracket(const MetricSpec& m, const AtlSpec& l, const PhasePoint& pt) {
  return matter_spray_bracket(geometry_at(m, pt.x.span()), l, pt.p);
}

/// Per-point residuals used by classify_vector_field.
struct PointClassification {
  Vector x;
  double killing = 0.0;            // |nabla_(a Y_b)|
  double conformal = 0.0;          // |nabla_(a Y_b) - psi g_ab|, psi = div Y / n
  double conformal_factor = 0.0;   // psi
  double affine = 0.0;             // |L_Y Gamma|
  double projective = 0.0;         // |L_Y Gamma - delta_(b grad_c) psi_p|
  Vector projective_gradient;      // fitted grad psi_p
};

/// Sampling-based classification of a base vector field. A flag means "no
/// violation found at the tolerance over the sampled points".
struct SymmetryReport {
  std::vector<PointClassification> points;
  double tolerance = 1e-8;
  double conformal_factor_spread = 0.0;  // max psi - min psi
  bool killing = false;
  bool conformal_killing = false;
  bool homothetic = false;
  bool affine_collineation = false;
  bool projective_collineation = false;
  /// Some ATL over Y (namely dynamical_atl(Y, psi_p)) is a dynamical symmetry;
  /// equivalent to projective_collineation.
  bool dynamical_symmetry = false;

  double max_killing() const { return max_of(&PointClassification::killing); }
  double max_conformal() const { return max_of(&PointClassification::conformal); }
  double max_affine() const { return max_of(&PointClassification::affine); }
  double max_projective() const { return max_of(&PointClassification::projective); }

 private:
  double max_of(double PointClassification::*field) const {
    double m = 0.0;
    for (const auto& p : points) m = std::max(m, p.*field);
    return m;
  }
};

inline PointClassification classify_point(const GeometryPoint& gp, const VectorJet& y) {
  const std::size_t n = gp.dim();
  PointClassification pc;
  pc.x = gp.x;

  const Matrix nabla = covariant_derivative(gp, y);  // nabla_b Y^a
  // nabla_b Y_a = g_ac nabla_b Y^c, symmetric part independent of slot order.
  const Matrix s = sym(lower_first(gp, nabla));
  pc.killing = s.max_abs();
  pc.conformal_factor = trace(nabla) / static_cast<double>(n);
  pc.conformal = max_abs_diff(s, pc.conformal_factor * gp.g);

  const Tensor3 lie = lie_derivative_connection(gp, y);
  pc.affine = lie.max_abs();
  Vector grad(n);
  for (std::size_t c = 0; c < n; ++c) {
    double t = 0.0;
    for (std::size_t a = 0; a < n; ++a) t += lie(a, a, c);
    grad(c) = 2.0 / static_cast<double>(n + 1) * t;
  }
  pc.projective_gradient = grad;
  pc.projective = max_abs_diff(lie, projective_term(grad));
  return pc;
}

inline SymmetryReport classify_vector_field(const MetricSpec& m, const VectorFieldSpec& y,
                                            const std::vector<Vector>& points, double tol = 1e-8) {
  if (points.size() < 2) throw GeometryError("classification needs at least two sample points");
  SymmetryReport r;
  r.tolerance = tol;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const Vector& x : points) {
    const GeometryPoint gp = geometry_at(m, x.span());
    r.points.push_back(classify_point(gp, evaluate(y, x.span())));
    lo = std::min(lo, r.points.back().conformal_factor);
    hi = std::max(hi, r.points.back().conformal_factor);
  }
  r.conformal_factor_spread = hi - lo;
  r.killing = r.max_killing() < tol;
  r.conformal_killing = r.max_conformal() < tol;
  r.homothetic = r.conformal_killing && r.conformal_factor_spread < tol;
  r.affine_collineation = r.max_affine() < tol;
  r.projective_collineation = r.max_projective() < tol;
  r.dynamical_symmetry = r.projective_collineation;
  return r;
}

/// Whether Y is homothetic, and whether its matter lift Y^(A) with
/// A_ab = nabla_[b Y_a] is a dynamical symmetry; the two should co-occur.
struct CoincidenceReport {
  SymmetryReport classification;
  std::vector<DynamicalResidual> residuals;  // one per phase point
  double max_residual = 0.0;
  std::size_t worst_index = 0;
  double tolerance = 1e-9;
  bool homothetic = false;
  bool dynamical = false;

  bool consistent() const { return homothetic == dynamical; }
};

inline AtlSpec coincidence_lift(const VectorFieldSpec& y) {
  return {y, TransportGenerator::skew_covariant_derivative(y), VectorFieldSpec::zero(y.dimension()),
          LiftKind::Matter};
}

inline CoincidenceReport coincidence_check(const MetricSpec& m, const VectorFieldSpec& y,
                                           const std::vector<PhasePoint>& points, double tol = 1e-9,
                                           double classify_tol = 1e-8) {
  std::vector<Vector> base;
  for (const auto& pt : points) base.push_back(pt.x);
  CoincidenceReport r;
  r.tolerance = tol;
  r.classification = classify_vector_field(m, y, base, classify_tol);
  r.homothetic = r.classification.homothetic;
  const AtlSpec lift = coincidence_lift(y);
  for (std::size_t i = 0; i < points.size(); ++i) {
    r.residuals.push_back(dynamical_residual(m, lift, points[i]));
    if (r.residuals.back().residual > r.max_residual) {
      r.max_residual = r.residuals.back().residual;
      r.worst_index = i;
    }
  }
  r.dynamical = r.max_residual < tol;
  return r;
}

}  // namespace tlift
