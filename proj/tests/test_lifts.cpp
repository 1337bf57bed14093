#include <gtest/gtest.h>

#include <memory>
#include <numbers>

#include "oracles.hpp"

using namespace tlift;

namespace {

constexpr double kPi = std::numbers::pi;

Vector point(std::initializer_list<double> v) { return Vector(v.size(), v); }

VectorFieldSpec field(const MetricSpec& m, std::vector<std::string> c) {
  return VectorFieldSpec::parse(c, m.symbols());
}

BundleVector induced(const MetricSpec& m, const AtlSpec& l, const PhasePoint& pt) {
  return atl_jet(l, geometry_at(m, pt.x.span()), pt.p).value;
}

// Closed-form coordinate components (Y, A p + k - Gamma p Y) from raw data.
BundleVector closed_form(const GeometryPoint& gp, const Vector& y, const Matrix& a, const Vector& k, const Vector& p) {
  return to_coordinate_basis(gp, BundleVector(y, apply(a, p) + k), p);
}

}  // namespace

TEST(Lifts, Horizontal) {
  const MetricSpec flat = catalog_metric("euclidean2");
  const PhasePoint pt{point({0.3, -0.2}), point({1, 2})};
  const BundleVector h = induced(flat, horizontal_lift(field(flat, {"1", "0"})), pt);
  EXPECT_EQ(h.horizontal, point({1, 0}));
  EXPECT_EQ(h.vertical, point({0, 0}));
  EXPECT_EQ(induced(flat, horizontal_lift(VectorFieldSpec::zero(2)), pt).max_abs(), 0.0);

  const MetricSpec sphere = catalog_metric("sphere2");
  const PhasePoint sp{point({kPi / 4, 0}), point({1, 2})};
  const BundleVector s = induced(sphere, horizontal_lift(field(sphere, {"0", "1"})), sp);
  // P^a = -Gamma^a_bc p^b Y^c with Y = d_phi.
  EXPECT_NEAR(s.vertical(0), 0.5 * 2, 1e-15);
  EXPECT_NEAR(s.vertical(1), -1.0, 1e-15);
}

TEST(Lifts, Vertical) {
  const MetricSpec flat = catalog_metric("euclidean2");
  const PhasePoint pt{point({0.3, -0.2}), point({1, 2})};
  const BundleVector v = induced(flat, vertical_lift_vector(field(flat, {"1", "0"})), pt);
  EXPECT_EQ(v.horizontal, point({0, 0}));
  EXPECT_EQ(v.vertical, point({1, 0}));
  EXPECT_EQ(induced(flat, vertical_lift_vector(VectorFieldSpec::zero(2)), pt).max_abs(), 0.0);

  const MetricSpec sphere = catalog_metric("sphere2");
  const PhasePoint sp{point({1.0, 0.5}), point({0.2, -0.7})};
  const BundleVector z = induced(sphere, vertical_lift_vector(field(sphere, {"sin(ph)", "th"})), sp);
  EXPECT_EQ(z.horizontal, point({0, 0}));
  EXPECT_EQ(z.vertical, point({std::sin(0.5), 1.0}));

  const BundleVector e = induced(sphere, euler_field(2), sp);
  EXPECT_EQ(e.vertical, sp.p);
  EXPECT_EQ(induced(sphere, vertical_lift_tensor(Tensor2FieldSpec::zero(2)), sp).max_abs(), 0.0);

  const Tensor2FieldSpec a = Tensor2FieldSpec::parse({{"th", "1"}, {"ph^2", "-2"}}, sphere.symbols());
  const BundleVector av = induced(sphere, vertical_lift_tensor(a), sp);
  EXPECT_NEAR(av.vertical(0), 1.0 * 0.2 - 0.7, 1e-15);
  EXPECT_NEAR(av.vertical(1), 0.25 * 0.2 + 1.4, 1e-15);
}

TEST(Lifts, CompleteIwaiDynamical) {
  const MetricSpec flat = catalog_metric("euclidean2");
  const PhasePoint pt{point({0.3, -0.2}), point({1, 2})};
  const BundleVector c = induced(flat, complete_lift(field(flat, {"y", "x"})), pt);
  EXPECT_EQ(c.vertical, point({2, 1}));
  EXPECT_EQ(induced(flat, complete_lift(field(flat, {"3", "-1"})), pt).vertical.max_abs(), 0.0);

  const VectorFieldSpec y = field(flat, {"x^2", "x*y"});
  const ScalarFieldSpec zero = ScalarFieldSpec::parse("0", flat.symbols());
  const ScalarFieldSpec psi = ScalarFieldSpec::parse("x + y^2", flat.symbols());
  const BundleVector complete = induced(flat, complete_lift(y), pt);
  EXPECT_EQ((induced(flat, iwai_lift(y, zero), pt) - complete).max_abs(), 0.0);
  EXPECT_EQ((induced(flat, dynamical_atl(y, zero), pt) - complete).max_abs(), 0.0);

  const double s = 0.3 + 0.04;
  const BundleVector iwai = induced(flat, iwai_lift(y, psi), pt);
  const BundleVector dyn = induced(flat, dynamical_atl(y, psi), pt);
  EXPECT_NEAR((iwai - complete).vertical(1), -2 * s * 2, 1e-15);
  EXPECT_NEAR((dyn - complete).vertical(0), -s * 1, 1e-15);

  const BundleVector pure = induced(flat, iwai_lift(VectorFieldSpec::zero(2), psi), pt);
  EXPECT_LT((pure - (-2 * s) * induced(flat, euler_field(2), pt)).max_abs(), 1e-15);

  const BundleVector horiz = induced(flat, dynamical_atl(catalog_field(flat, "dilation"),
                                                         ScalarFieldSpec::parse("1", flat.symbols())), pt);
  EXPECT_EQ(horiz.vertical.max_abs(), 0.0);
}

TEST(Lifts, InducedFieldMatchesClosedFormEverywhere) {
  for (const char* name : {"sphere2", "schwarzschild", "minkowski4"}) {
    const MetricSpec m = catalog_metric(name);
    Sampler s(31);
    for (const PhasePoint& pt : s.phase_points(m, 25)) {
      const GeometryPoint gp = geometry_at(m, pt.x.span());
      const VectorFieldSpec y = s.vector_field(m.sample_box);
      const std::size_t n = m.dimension;
      const Vector yv = evaluate(y, pt.x.span()).value;
      const Matrix nab = cov_deriv_vector(m, y, pt.x.span());
      const ScalarFieldSpec psi{s.quadratic(m.sample_box)};
      const double pv = psi.expr.evaluate(pt.x.span());
      const Vector zero(n);
      EXPECT_LT((induced(m, horizontal_lift(y), pt) - closed_form(gp, yv, Matrix(n), zero, pt.p)).max_abs(), 1e-15);
      EXPECT_LT((induced(m, complete_lift(y), pt) - closed_form(gp, yv, nab, zero, pt.p)).max_abs(), 1e-14);
      EXPECT_LT((induced(m, iwai_lift(y, psi), pt) -
                 closed_form(gp, yv, nab - (2 * pv) * identity(n), zero, pt.p)).max_abs(), 1e-14);
      EXPECT_LT((induced(m, dynamical_atl(y, psi), pt) - closed_form(gp, yv, nab - pv * identity(n), zero, pt.p))
                    .max_abs(), 1e-14);
      EXPECT_EQ((induced(m, vertical_lift_vector(y), pt) - BundleVector(zero, yv)).max_abs(), 0.0);
    }
  }
}

TEST(Lifts, MatterLiftValidation) {
  const MetricSpec flat = catalog_metric("euclidean2");
  Sampler s(3);
  const auto pts = s.base_points(flat, 32);
  const VectorFieldSpec zero = VectorFieldSpec::zero(2);
  const Tensor2FieldSpec skew = Tensor2FieldSpec::parse({{"0", "1"}, {"-1", "0"}}, flat.symbols());
  EXPECT_NO_THROW(matter_lift(flat, zero, TransportGenerator::explicit_tensor(skew), pts));

  const Tensor2FieldSpec delta = Tensor2FieldSpec::parse({{"1", "0"}, {"0", "1"}}, flat.symbols());
  try {
    matter_lift(flat, zero, TransportGenerator::explicit_tensor(delta), pts);
    FAIL();
  } catch (const ConstraintError& e) {
    EXPECT_EQ(e.violation(), 1.0);
  }

  const VectorFieldSpec rot = catalog_field(flat, "rotation");
  EXPECT_NO_THROW(matter_lift(flat, rot, TransportGenerator::covariant_derivative(rot), pts));

  // On a curved metric the raised two-form and the skew part of nabla Y are skew.
  const MetricSpec schw = catalog_metric("schwarzschild");
  const auto spts = s.base_points(schw, 32);
  EXPECT_NO_THROW(matter_lift(schw, VectorFieldSpec::zero(4),
                              TransportGenerator::raised_form(s.two_form(schw.sample_box)), spts));
  EXPECT_NO_THROW(matter_lift(schw, VectorFieldSpec::zero(4),
                              TransportGenerator::skew_covariant_derivative(s.vector_field(schw.sample_box)), spts));
  EXPECT_THROW(matter_lift(schw, VectorFieldSpec::zero(4),
                           TransportGenerator::covariant_derivative(s.vector_field(schw.sample_box)), spts),
               ConstraintError);
}

TEST(Lifts, Combination) {
  const MetricSpec m = catalog_metric("sphere2");
  Sampler s(12);
  const AtlSpec l1 = s.atl(m.sample_box), l2 = s.atl(m.sample_box);
  for (const PhasePoint& pt : s.phase_points(m, 20)) {
    const BundleVector same = induced(m, atl_combine(1, l1, 0, l2), pt) - induced(m, l1, pt);
    EXPECT_EQ(same.max_abs(), 0.0);

    const double a = s.uniform(-3, 3), b = s.uniform(-3, 3);
    const BundleVector lhs = induced(m, atl_combine(a, l1, b, l2), pt);
    const BundleVector rhs = a * induced(m, l1, pt) + b * induced(m, l2, pt);
    EXPECT_LT((lhs - rhs).max_abs(), 1e-13 * (1 + rhs.max_abs()));

    const VectorFieldSpec y = s.vector_field(m.sample_box);
    const AtlSpec decomposed =
        atl_combine(1, horizontal_lift(y), 1, vertical_lift_tensor(TransportGenerator::covariant_derivative(y)));
    EXPECT_LT((induced(m, decomposed, pt) - induced(m, complete_lift(y), pt)).max_abs(), 1e-14);
  }
}

TEST(AtlBracket, Examples) {
  const MetricSpec m = catalog_metric("sphere2");
  Sampler s(6);
  const AtlSpec l = s.atl(m.sample_box);
  const Vector x = s.base_points(m, 1).front();
  const AtlBracket self = atl_bracket(m, l, l, x.span());
  EXPECT_EQ(self.base.max_abs(), 0.0);
  EXPECT_EQ(self.transport.max_abs(), 0.0);
  EXPECT_EQ(self.offset.max_abs(), 0.0);

  const AtlBracket vv = atl_bracket(m, vertical_lift_vector(s.vector_field(m.sample_box)),
                                    vertical_lift_vector(s.vector_field(m.sample_box)), x.span());
  EXPECT_EQ(vv.base.max_abs() + vv.transport.max_abs() + vv.offset.max_abs(), 0.0);
}

TEST(AtlBracket, ClosedFormMatchesNumericBracket) {
  for (const auto& e : catalog_entries()) {
    const auto m = std::make_shared<const MetricSpec>(catalog_metric(e.name));
    Sampler s(42);
    double worst = 0.0, worst_fd = 0.0;
    const auto pts = s.phase_points(*m, 100);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const AtlSpec l1 = s.atl(m->sample_box), l2 = s.atl(m->sample_box);
      const GeometryPoint gp = geometry_at(*m, pts[i].x.span());
      const BundleVector closed = to_coordinate_basis(gp, atl_bracket(gp, l1, l2).connection_value(pts[i].p), pts[i].p);
      const BundleVector numeric = lie_bracket(atl_jet(l1, gp, pts[i].p), atl_jet(l2, gp, pts[i].p));
      worst = std::max(worst, (closed - numeric).max_abs());
      if (i < 10) {
        const BundleVector fd = oracle::fd_bracket(induced_field(m, l1), induced_field(m, l2), pts[i]);
        worst_fd = std::max(worst_fd, (closed - fd).max_abs() / (1 + closed.max_abs()));
      }
    }
    EXPECT_LT(worst, 1e-9) << e.name;
    EXPECT_LT(worst_fd, 1e-6) << e.name;
  }
}

TEST(AtlBracket, MatterClosureAndVerticalIdeal) {
  for (const char* name : {"sphere2", "schwarzschild", "minkowski4"}) {
    const MetricSpec m = catalog_metric(name);
    Sampler s(9);
    double skew = 0.0, horizontal = 0.0;
    for (const Vector& x : s.base_points(m, 50)) {
      const GeometryPoint gp = geometry_at(m, x.span());
      const AtlBracket c = atl_bracket(gp, s.matter_atl(m.sample_box), s.matter_atl(m.sample_box));
      skew = std::max(skew, sym(lower_first(gp, c.transport)).max_abs());
      const AtlBracket v = atl_bracket(gp, s.atl(m.sample_box), vertical_lift_vector(s.vector_field(m.sample_box)));
      horizontal = std::max(horizontal, v.base.max_abs() + v.transport.max_abs());
    }
    EXPECT_LT(skew, 1e-10) << name;
    EXPECT_EQ(horizontal, 0.0) << name;
  }
}

TEST(ClassicalTable, FlatLinearFields) {
  const MetricSpec flat = catalog_metric("euclidean2");
  const PhasePoint pt{point({0.4, -0.6}), point({1.5, 0.5})};
  const ClassicalBracketResiduals r =
      classical_bracket_table(flat, field(flat, {"2*x - y", "y + 1"}), field(flat, {"x + 3*y", "-x"}), pt);
  EXPECT_LT(r.max(), 1e-14);
}

TEST(ClassicalTable, CurvedManifolds) {
  for (const char* name : {"sphere2", "schwarzschild", "euclidean-polar"}) {
    const MetricSpec m = catalog_metric(name);
    Sampler s(77);
    const VectorFieldSpec y = s.vector_field(m.sample_box), z = s.vector_field(m.sample_box);
    double worst = 0.0;
    for (const PhasePoint& pt : s.phase_points(m, 50)) worst = std::max(worst, classical_bracket_table(m, y, z, pt).max());
    EXPECT_LT(worst, 1e-9) << name;
  }
}

TEST(IwaiBracket, GeneralizedRule) {
  for (const char* name : {"sphere2", "schwarzschild"}) {
    const MetricSpec m = catalog_metric(name);
    Sampler s(21);
    const VectorFieldSpec y = s.vector_field(m.sample_box), z = s.vector_field(m.sample_box);
    const ScalarFieldSpec py{s.quadratic(m.sample_box)}, pz{s.quadratic(m.sample_box)};
    double worst = 0.0;
    for (const PhasePoint& pt : s.phase_points(m, 50)) worst = std::max(worst, iwai_bracket_residual(m, y, py, z, pz, pt));
    EXPECT_LT(worst, 1e-9) << name;
  }
}
