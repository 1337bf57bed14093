#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "tlift/bundle.hpp"
#include "tlift/error.hpp"
#include "tlift/geometry.hpp"
#include "tlift/lifts.hpp"

namespace tlift {

using Box = std::vector<std::pair<double, double>>;

/// Seeded point and field generator. Draws are reproducible across platforms:
/// uniforms come from the top 53 bits of a mt19937_64 word rather than from
/// std::uniform_real_distribution.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed = 42) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  Vector in_box(const Box& box) {
    Vector v(box.size());
    for (std::size_t i = 0; i < box.size(); ++i) v(i) = uniform(box[i].first, box[i].second);
    return v;
  }

  /// `count` admitted base points drawn from `box` (the metric's sample box if
  /// empty). Gives up after 10 x count rejections.
  std::vector<Vector> base_points(const MetricSpec& m, std::size_t count, const Box& box = {}) {
    const Box& b = box.empty() ? m.sample_box : box;
    if (b.size() != m.dimension) throw GeometryError("sampling box has wrong dimension");
    std::vector<Vector> out;
    std::size_t rejected = 0;
    while (out.size() < count) {
      Vector x = in_box(b);
      if (m.admits(x.span())) {
        out.push_back(x);
      } else if (++rejected > 10 * count) {
        throw GeometryError("sampling rejected too many points outside the admitted region of " + m.name);
      }
    }
    return out;
  }

  /// Phase points with momenta drawn from `momentum_box` (default [-1, 1]^n).
  std::vector<PhasePoint> phase_points(const MetricSpec& m, std::size_t count, const Box& box = {},
                                       const Box& momentum_box = {}) {
    const Box pb = momentum_box.empty() ? Box(m.dimension, {-1.0, 1.0}) : momentum_box;
    std::vector<PhasePoint> out;
    for (Vector& x : base_points(m, count, box)) out.push_back({x, in_box(pb)});
    return out;
  }

  /// Random quadratic polynomial in coordinates rescaled to [-1, 1] over `box`,
  /// coefficients uniform in [-scale, scale].
  Expression quadratic(const Box& box, double scale = 1.0) {
    const std::size_t n = box.size();
    std::vector<Expression> u;
    for (std::size_t i = 0; i < n; ++i) {
      const double mid = 0.5 * (box[i].first + box[i].second);
      const double half = 0.5 * (box[i].second - box[i].first);
      u.push_back((Expression::variable(n, i) - Expression::constant(n, mid)) / Expression::constant(n, half));
    }
    Expression e = Expression::constant(n, uniform(-scale, scale));
    for (std::size_t i = 0; i < n; ++i) {
      e = e + uniform(-scale, scale) * u[i];
      for (std::size_t j = i; j < n; ++j) e = e + uniform(-scale, scale) * (u[i] * u[j]);
    }
    return e;
  }

  VectorFieldSpec vector_field(const Box& box, double scale = 1.0) {
    VectorFieldSpec y;
    for (std::size_t a = 0; a < box.size(); ++a) y.components.push_back(quadratic(box, scale));
    return y;
  }

  Tensor2FieldSpec tensor_field(const Box& box, double scale = 1.0) {
    Tensor2FieldSpec t;
    t.dim = box.size();
    for (std::size_t i = 0; i < t.dim * t.dim; ++i) t.components.push_back(quadratic(box, scale));
    return t;
  }

  /// W_ab = -W_ba with random quadratic entries.
  Tensor2FieldSpec two_form(const Box& box, double scale = 1.0) {
    const std::size_t n = box.size();
    Tensor2FieldSpec t = Tensor2FieldSpec::zero(n);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) {
        const Expression e = quadratic(box, scale);
        t.components[a * n + b] = e;
        t.components[b * n + a] = -e;
      }
    return t;
  }

  /// General ATL on `box`: Y and k random quadratics, A the sum of an explicit
  /// random tensor, a multiple of nabla of a random field and a raised random
  /// two-form, so every transport term kind is exercised.
  AtlSpec atl(const Box& box, double scale = 1.0) {
    AtlSpec l;
    l.base = vector_field(box, scale);
    l.transport = TransportGenerator::explicit_tensor(tensor_field(box, scale)) +
                  TransportGenerator::covariant_derivative(vector_field(box, scale), uniform(-1.0, 1.0)) +
                  TransportGenerator::raised_form(two_form(box, scale));
    l.offset = vector_field(box, scale);
    l.kind = LiftKind::General;
    return l;
  }

  /// Y^(A) with A^a_b = g^ac W_cb for a random two-form W, hence A_(ab) = 0.
  AtlSpec matter_atl(const Box& box, double scale = 1.0) {
    const std::size_t n = box.size();
    return {vector_field(box, scale), TransportGenerator::raised_form(two_form(box, scale)),
            VectorFieldSpec::zero(n), LiftKind::Matter};
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tlift
