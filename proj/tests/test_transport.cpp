#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "oracles.hpp"

using namespace tlift;

namespace {

constexpr double kPi = std::numbers::pi;

Vector point(std::initializer_list<double> v) { return Vector(v.size(), v); }

AtlSpec constant_transport(const MetricSpec& m, std::vector<std::vector<std::string>> a) {
  return vertical_lift_tensor(Tensor2FieldSpec::parse(a, m.symbols()));
}

Trajectory latitude_loop(const MetricSpec& sphere, double theta0, double step) {
  IntegratorConfig cfg;
  cfg.step = step;
  const AtlSpec l = horizontal_lift(catalog_field(sphere, "rotation_z"));
  return integrate_atl(sphere, l, {point({theta0, 0.0}), point({1.0, 0.0})}, 0.0, 2 * kPi, cfg);
}

}  // namespace

TEST(Integrate, FlatParallelTransport) {
  const MetricSpec flat = catalog_metric("euclidean2");
  const AtlSpec l = horizontal_lift(VectorFieldSpec::parse({"1", "2"}, flat.symbols()));
  const Trajectory t = integrate_atl(flat, l, {point({0, 0}), point({0.3, -0.4})}, 0.0, 1.0);
  EXPECT_FALSE(t.left_region);
  EXPECT_EQ(t.samples.size(), 1001u);
  EXPECT_EQ(t.samples.back().sigma, 1.0);
  EXPECT_LT(max_abs_diff(t.samples.back().x, point({1, 2})), 1e-13);
  for (const auto& s : t.samples) EXPECT_EQ(s.p, point({0.3, -0.4}));
}

TEST(Integrate, ConstantSkewRotation) {
  const MetricSpec flat = catalog_metric("euclidean2");
  const AtlSpec l = constant_transport(flat, {{"0", "1"}, {"-1", "0"}});
  const Vector p0 = point({0.6, 0.8});
  const Trajectory t = integrate_atl(flat, l, {point({0, 0}), p0}, 0.0, 2 * kPi);
  for (const auto& s : t.samples) {
    const double c = std::cos(s.sigma), sn = std::sin(s.sigma);
    EXPECT_NEAR(s.p(0), c * p0(0) + sn * p0(1), 1e-12);
    EXPECT_NEAR(s.p(1), -sn * p0(0) + c * p0(1), 1e-12);
  }
  EXPECT_LT(norm_drift(t).max_drift, 1e-10);
}

TEST(Integrate, MatrixExponentialOracle) {
  const MetricSpec m = catalog_metric("euclidean3");
  const AtlSpec l = constant_transport(m, {{"0.2", "-1", "0.5"}, {"0.3", "-0.1", "0.7"}, {"-0.4", "0.6", "0.1"}});
  const Matrix a(3, {0.2, -1, 0.5, 0.3, -0.1, 0.7, -0.4, 0.6, 0.1});
  const Vector p0 = point({1, -0.5, 0.25});
  const double sigma = 1.7;
  const Trajectory t = integrate_atl(m, l, {point({0, 0, 0}), p0}, 0.0, sigma);
  const Vector expected = apply(oracle::expm(sigma * a), p0);
  EXPECT_LT(max_abs_diff(t.samples.back().p, expected), 1e-9);
}

TEST(Integrate, EulerFieldGrowsNormExponentially) {
  const MetricSpec flat = catalog_metric("euclidean2");
  const Trajectory t = integrate_atl(flat, euler_field(2), {point({0, 0}), point({0.6, 0.8})}, 0.0, 1.0);
  for (const auto& s : t.samples) EXPECT_NEAR(s.gpp, std::exp(2 * s.sigma), 1e-11 * std::exp(2 * s.sigma));
}

TEST(Integrate, SkewTransportOnSchwarzschildPreservesNorm) {
  const MetricSpec m = catalog_metric("schwarzschild");
  Sampler s(42);
  const AtlSpec l = s.matter_atl(m.sample_box, 0.3);
  const PhasePoint start{point({0.0, 6.0, 1.2, 0.5}), point({1.0, 0.1, 0.05, -0.02})};
  const Trajectory t = integrate_atl(m, l, start, 0.0, 1.0);
  EXPECT_FALSE(t.left_region);
  EXPECT_LT(norm_drift(t).max_drift, 1e-9);
  double rate = 0.0;
  for (const auto& sample : t.samples) rate = std::max(rate, covariant_rate_residual(m, l, sample));
  EXPECT_LT(rate, 1e-12);
}

TEST(Integrate, SphereHolonomy) {
  const MetricSpec sphere = catalog_metric("sphere2");
  for (double theta0 : {kPi / 3, kPi / 4}) {
    const Trajectory t = latitude_loop(sphere, theta0, 1e-3);
    EXPECT_NEAR(t.samples.back().x(1), 2 * kPi, 1e-12);
    EXPECT_NEAR(holonomy_rotation(sphere, t), 2 * kPi * std::cos(theta0), 1e-6) << theta0;
    EXPECT_LT(norm_drift(t).max_drift, 1e-10);
  }
}

TEST(Integrate, RungeKuttaOrder) {
  const MetricSpec sphere = catalog_metric("sphere2");
  const double theta0 = kPi / 3;
  auto error = [&](double h) {
    const Trajectory t = latitude_loop(sphere, theta0, h);
    // Exact solution: the frame components (p^theta, sin(theta0) p^phi) rotate at rate cos(theta0).
    const double w = std::cos(theta0) * 2 * kPi;
    const Vector exact = point({std::cos(w), -std::sin(w) / std::sin(theta0)});
    return max_abs_diff(t.samples.back().p, exact);
  };
  const double coarse = error(2 * kPi / 64), fine = error(2 * kPi / 128);
  const double ratio = coarse / fine;
  EXPECT_GE(ratio, 12.0);
  EXPECT_LE(ratio, 20.0);
}

TEST(Geodesic, FlatStraightLine) {
  const MetricSpec flat = catalog_metric("minkowski4");
  const Vector x0 = point({0.1, 0.2, -0.3, 0.4}), p = point({1.0, 0.5, -0.25, 0.125});
  const Trajectory t = integrate_geodesic(flat, {x0, p}, 0.0, 2.0);
  EXPECT_LT(max_abs_diff(t.samples.back().x, x0 + 2.0 * p), 1e-12);
  EXPECT_EQ(t.samples.back().p, p);
}

TEST(Geodesic, SphereGreatCircle) {
  const MetricSpec sphere = catalog_metric("sphere2");
  const PhasePoint start{point({kPi / 2, 0.0}), point({0.0, 2.0})};
  const Trajectory t = integrate_geodesic(sphere, start, 0.0, kPi);
  EXPECT_LT(max_abs_diff(t.samples.back().x, point({kPi / 2, 2 * kPi})), 1e-10);
  EXPECT_LT(norm_drift(t).max_drift, 1e-10);

  // Tilted great circle: returns to its start after sigma = 2 pi / |p|.
  const PhasePoint tilted{point({kPi / 2, 0.0}), point({0.6, 0.8})};
  const Trajectory u = integrate_geodesic(sphere, tilted, 0.0, 2 * kPi);
  const Vector end = u.samples.back().x;
  EXPECT_NEAR(end(0), kPi / 2, 1e-10);
  EXPECT_NEAR(std::remainder(end(1), 2 * kPi), 0.0, 1e-10);
  EXPECT_LT(norm_drift(u).max_drift, 1e-10);
}

TEST(Integrate, RegionExitTruncates) {
  const MetricSpec schw = catalog_metric("schwarzschild");
  // Radial infall from r = 3 crosses the horizon.
  const PhasePoint start{point({0.0, 3.0, kPi / 2, 0.0}), point({1.0, -1.0, 0.0, 0.0})};
  const Trajectory t = integrate_geodesic(schw, start, 0.0, 50.0);
  EXPECT_TRUE(t.left_region);
  EXPECT_LT(t.samples.back().sigma, 50.0);
  for (const auto& s : t.samples) EXPECT_TRUE(schw.admits(s.x.span()));
  for (std::size_t i = 1; i < t.samples.size(); ++i) EXPECT_GT(t.samples[i].sigma, t.samples[i - 1].sigma);
}

TEST(Integrate, Errors) {
  const MetricSpec schw = catalog_metric("schwarzschild");
  const AtlSpec l = horizontal_lift(catalog_field(schw, "time_translation"));
  EXPECT_THROW(integrate_atl(schw, l, {point({0, 1.0, 1.0, 0}), point({1, 0, 0, 0})}, 0, 1), GeometryError);
  IntegratorConfig cfg;
  cfg.max_steps = 10;
  EXPECT_THROW(integrate_atl(schw, l, {point({0, 5.0, 1.0, 0}), point({1, 0, 0, 0})}, 0, 1, cfg), IntegrationError);
  cfg = {};
  cfg.step = 0.0;
  EXPECT_THROW(integrate_atl(schw, l, {point({0, 5.0, 1.0, 0}), point({1, 0, 0, 0})}, 0, 1, cfg), IntegrationError);
}

TEST(Monitors, CovariantRate) {
  const MetricSpec sphere = catalog_metric("sphere2");
  const VectorFieldSpec rot = catalog_field(sphere, "rotation_x");
  const PhasePoint start{point({1.0, 0.3}), point({0.4, -0.7})};
  for (const AtlSpec& l : {horizontal_lift(rot), complete_lift(rot), Sampler(2).atl(sphere.sample_box)}) {
    const Trajectory t = integrate_atl(sphere, l, start, 0.0, 0.5);
    for (const auto& s : t.samples) EXPECT_LT(covariant_rate_residual(sphere, l, s), 1e-13);
  }

  // Horizontal lift: Dp/dsigma = 0; complete lift: Dp/dsigma = nabla_p Y.
  const Trajectory h = integrate_atl(sphere, horizontal_lift(rot), start, 0.0, 0.5);
  const Trajectory c = integrate_atl(sphere, complete_lift(rot), start, 0.0, 0.5);
  for (std::size_t i = 0; i < h.samples.size(); i += 50) {
    const GeometryPoint gh = geometry_at(sphere, h.samples[i].x.span());
    const VectorJet yh = evaluate(rot, h.samples[i].x.span());
    Vector dp = h.samples[i].dp;
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t d = 0; d < 2; ++d) dp(a) += gh.gamma(a, b, d) * yh.value(b) * h.samples[i].p(d);
    EXPECT_LT(dp.max_abs(), 1e-15);

    const GeometryPoint gc = geometry_at(sphere, c.samples[i].x.span());
    const VectorJet yc = evaluate(rot, c.samples[i].x.span());
    Vector dpc = c.samples[i].dp;
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t d = 0; d < 2; ++d) dpc(a) += gc.gamma(a, b, d) * yc.value(b) * c.samples[i].p(d);
    EXPECT_LT(max_abs_diff(dpc, apply(covariant_derivative(gc, yc), c.samples[i].p)), 1e-14);
  }
}

TEST(Monitors, LieTransport) {
  const MetricSpec flat = catalog_metric("euclidean2");
  const VectorFieldSpec lin = VectorFieldSpec::parse({"x - 2*y", "0.5*x"}, flat.symbols());
  const Trajectory tf = integrate_atl(flat, complete_lift(lin), {point({0.2, 0.1}), point({1, 1})}, 0.0, 1.0);
  for (std::size_t i = 0; i < tf.samples.size(); ++i) EXPECT_LT(lie_transport_residual(lin, tf, i), 1e-14);

  const MetricSpec sphere = catalog_metric("sphere2");
  const VectorFieldSpec rot = catalog_field(sphere, "rotation_z");
  const PhasePoint start{point({1.0, 0.0}), point({0.3, 0.5})};
  const Trajectory ts = integrate_atl(sphere, complete_lift(rot), start, 0.0, 1.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < ts.samples.size(); ++i) worst = std::max(worst, lie_transport_residual(rot, ts, i));
  EXPECT_LT(worst, 1e-10);

  const Trajectory th = integrate_atl(sphere, horizontal_lift(rot), start, 0.0, 1.0);
  EXPECT_GT(lie_transport_residual(rot, th, 0), 0.1);
}

TEST(Csv, HeaderAndPrecision) {
  const MetricSpec flat = catalog_metric("euclidean2");
  IntegratorConfig cfg;
  cfg.step = 0.5;
  const Trajectory t = integrate_geodesic(flat, {point({0.1, 0}), point({1.0 / 3, 0})}, 0.0, 1.0, cfg);
  std::ostringstream os;
  write_csv(os, t);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "sigma,x0,x1,p0,p1,gpp");
  std::getline(in, line);
  EXPECT_EQ(line, "0,0.10000000000000001,0,0.33333333333333331,0,0.1111111111111111");
  int rows = 1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

TEST(Integrate, RecordCadence) {
  const MetricSpec flat = catalog_metric("euclidean2");
  IntegratorConfig cfg;
  cfg.step = 0.01;
  cfg.record_every = 30;
  const Trajectory t = integrate_geodesic(flat, {point({0, 0}), point({1, 0})}, 0.0, 1.0, cfg);
  EXPECT_EQ(t.samples.size(), 5u);  // 0, 30, 60, 90 and the final step
  EXPECT_EQ(t.samples.back().sigma, 1.0);
  EXPECT_EQ(t.steps, 100u);
}
