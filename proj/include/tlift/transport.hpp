#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "tlift/bundle.hpp"
#include "tlift/error.hpp"
#include "tlift/geometry.hpp"
#include "tlift/lifts.hpp"

namespace tlift {

/// Fixed-step classical RK4 settings.
struct IntegratorConfig {
  double step = 1e-3;
  std::size_t max_steps = 10'000'000;
  std::size_t record_every = 1;  // keep every k-th step (the last step is always kept)
};

struct TrajectorySample {
  double sigma = 0.0;
  Vector x;
  Vector p;
  Vector dx;  // dx/dsigma from the ODE right side
  Vector dp;  // dp/dsigma from the ODE right side
  double gpp = 0.0;  // g_ab p^a p^b
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  bool left_region = false;  // truncated at the last admitted sample
  std::size_t steps = 0;
};

namespace detail {

struct PhaseRate {
  Vector dx;
  Vector dp;
};

using PhaseRhs = std::function<PhaseRate(const Vector& x, const Vector& p)>;

inline PhaseRate atl_rate(const MetricSpec& m, const AtlSpec& l, const Vector& x, const Vector& p) {
  const GeometryPoint gp = geometry_at(m, x.span());
  const AffineData d = evaluate(l, gp);
  // dp^a/dsigma = (A^a_b - Gamma^a_bc Y^c) p^b + k^a
  PhaseRate r{d.y, apply(d.a, p) + d.k};
  const std::size_t n = x.dim();
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c) r.dp(a) -= gp.gamma(a, b, c) * d.y(c) * p(b);
  return r;
}

inline PhaseRate geodesic_rate(const MetricSpec& m, const Vector& x, const Vector& p) {
  const BundleVector s = spray_at(m, {x, p});
  return {s.horizontal, s.vertical};
}

inline TrajectorySample make_sample(const MetricSpec& m, const PhaseRhs& rhs, double sigma, const Vector& x,
                                    const Vector& p) {
  const PhaseRate r = rhs(x, p);
  const GeometryPoint gp = geometry_at(m, x.span());
  return {sigma, x, p, r.dx, r.dp, bilinear(gp.g, p, p)};
}

inline Trajectory integrate(const MetricSpec& m, const PhaseRhs& rhs, const PhasePoint& start, double sigma0,
                            double sigma1, const IntegratorConfig& cfg) {
  if (!(cfg.step > 0.0)) throw IntegrationError("integration step must be positive");
  if (!(sigma1 > sigma0)) throw IntegrationError("integration span must be increasing");
  if (!m.admits(start.x.span())) throw GeometryError("start point lies outside the admitted region");
  const double span = sigma1 - sigma0;
  const double ratio = span / cfg.step;
  const auto steps = static_cast<std::size_t>(std::ceil(ratio - 1e-9 * ratio));
  if (steps > cfg.max_steps)
    throw IntegrationError("span needs " + std::to_string(steps) + " steps, more than max_steps");
  const double h = span / static_cast<double>(steps);
  const std::size_t every = cfg.record_every == 0 ? 1 : cfg.record_every;

  Trajectory traj;
  traj.samples.push_back(make_sample(m, rhs, sigma0, start.x, start.p));
  Vector x = start.x, p = start.p;
  for (std::size_t i = 1; i <= steps; ++i) {
    Vector nx, np;
    try {
      const PhaseRate k1 = rhs(x, p);
      const PhaseRate k2 = rhs(x + (0.5 * h) * k1.dx, p + (0.5 * h) * k1.dp);
      const PhaseRate k3 = rhs(x + (0.5 * h) * k2.dx, p + (0.5 * h) * k2.dp);
      const PhaseRate k4 = rhs(x + h * k3.dx, p + h * k3.dp);
      nx = x + (h / 6.0) * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
      np = p + (h / 6.0) * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
    } catch (const GeometryError&) {
      traj.left_region = true;
    } catch (const DomainError&) {
      traj.left_region = true;
    }
    if (traj.left_region || !m.admits(nx.span())) {
      traj.left_region = true;
      if (traj.samples.back().sigma != sigma0 + static_cast<double>(i - 1) * h)
        traj.samples.push_back(make_sample(m, rhs, sigma0 + static_cast<double>(i - 1) * h, x, p));
      break;
    }
    x = nx;
    p = np;
    traj.steps = i;
    if (i % every == 0 || i == steps) {
      const double sigma = i == steps ? sigma1 : sigma0 + static_cast<double>(i) * h;
      traj.samples.push_back(make_sample(m, rhs, sigma, x, p));
    }
  }
  return traj;
}

}  // namespace detail

/// Integral curve of Y^(A,k): dx/dsigma = Y, dp/dsigma = (A - Gamma Y) p + k.
/// Stops early, flagging `left_region`, if a step leaves the admitted region.
inline Trajectory integrate_atl(const MetricSpec& m, const AtlSpec& l, const PhasePoint& start, double sigma0,
                                double sigma1, const IntegratorConfig& cfg = {}) {
  const detail::PhaseRhs rhs = [&](const Vector& x, const Vector& p) { return detail::atl_rate(m, l, x, p); };
  return detail::integrate(m, rhs, start, sigma0, sigma1, cfg);
}

/// Lifted geodesic: dx/dsigma = p, dp/dsigma = -Gamma^a_bc p^b p^c.
inline Trajectory integrate_geodesic(const MetricSpec& m, const PhasePoint& start, double sigma0, double sigma1,
                                     const IntegratorConfig& cfg = {}) {
  const detail::PhaseRhs rhs = [&](const Vector& x, const Vector& p) { return detail::geodesic_rate(m, x, p); };
  return detail::integrate(m, rhs, start, sigma0, sigma1, cfg);
}

/// |Dp/dsigma - (A p + k)|_inf at a sample, with Dp/dsigma = dp/dsigma + Gamma^a_bc Y^b p^c.
inline double covariant_rate_residual(const MetricSpec& m, const AtlSpec& l, const TrajectorySample& s) {
  const GeometryPoint gp = geometry_at(m, s.x.span());
  const AffineData d = evaluate(l, gp);
  const std::size_t n = gp.dim();
  Vector covariant = s.dp;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c) covariant(a) += gp.gamma(a, b, c) * d.y(b) * s.p(c);
  return max_abs_diff(covariant, apply(d.a, s.p) + d.k);
}

/// |dp/dsigma - (d_b Y^a) p^b|_inf: vanishes when p is Lie-dragged along Y.
inline double lie_transport_residual(const VectorFieldSpec& y, const Trajectory& t, std::size_t index) {
  const TrajectorySample& s = t.samples.at(index);
  const VectorJet yj = evaluate(y, s.x.span());
  return max_abs_diff(s.dp, apply(yj.d, s.p));
}

struct NormDrift {
  std::vector<double> gpp;
  double max_drift = 0.0;  // max |g(p,p)_i - g(p,p)_0|
};

inline NormDrift norm_drift(const Trajectory& t) {
  NormDrift r;
  for (const auto& s : t.samples) {
    r.gpp.push_back(s.gpp);
    r.max_drift = std::max(r.max_drift, std::abs(s.gpp - t.samples.front().gpp));
  }
  return r;
}

/// Signed angle from p(start) to p(end) in a 2D metric, measured with the
/// coordinate orientation at the end point. Meaningful for closed loops.
inline double holonomy_angle(const MetricSpec& m, const Trajectory& t) {
  if (m.dimension != 2) throw GeometryError("holonomy angle is defined for 2D manifolds only");
  const TrajectorySample& first = t.samples.front();
  const TrajectorySample& last = t.samples.back();
  const GeometryPoint gp = geometry_at(m, last.x.span());
  const double det = gp.g(0, 0) * gp.g(1, 1) - gp.g(0, 1) * gp.g(1, 0);
  const double cross = std::sqrt(std::abs(det)) * (first.p(0) * last.p(1) - first.p(1) * last.p(0));
  return std::atan2(cross, bilinear(gp.g, first.p, last.p));
}

/// Angle wrapped into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a <= -std::numbers::pi ? a + 2.0 * std::numbers::pi : a;
}

/// Holonomy rotation in [0, 2pi), counted against the coordinate orientation.
/// On the unit sphere, a latitude loop at theta0 traversed with increasing phi
/// gives 2 pi cos(theta0) (mod 2 pi).
inline double holonomy_rotation(const MetricSpec& m, const Trajectory& t) {
  const double a = std::fmod(-holonomy_angle(m, t), 2.0 * std::numbers::pi);
  return a < 0.0 ? a + 2.0 * std::numbers::pi : a;
}

/// CSV: sigma, x0..x(n-1), p0..p(n-1), gpp; 17 significant digits.
inline void write_csv(std::ostream& os, const Trajectory& t) {
  const std::size_t n = t.samples.empty() ? 0 : t.samples.front().x.dim();
  os << "sigma";
  for (std::size_t i = 0; i < n; ++i) os << ",x" << i;
  for (std::size_t i = 0; i < n; ++i) os << ",p" << i;
  os << ",gpp\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (const auto& s : t.samples) {
    put(s.sigma);
    for (std::size_t i = 0; i < n; ++i) os << ',', put(s.x(i));
    for (std::size_t i = 0; i < n; ++i) os << ',', put(s.p(i));
    os << ',';
    put(s.gpp);
    os << '\n';
  }
}

}  // namespace tlift
