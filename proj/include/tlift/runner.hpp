#pragma once

// Config-driven task runner behind the command-line tool. Needs nlohmann/json
// (json.hpp) on the include path.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tlift/tlift.hpp"

namespace tlift::cli {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolName = "tlift";
inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kPass = 0, kVerificationFailure = 1, kConfigError = 2, kNumericalFailure = 3 };

enum class Status { Pass, Fail, Error };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Pass: return "pass";
    case Status::Fail: return "fail";
    case Status::Error: return "error";
  }
  return "?";
}

/// Command-line overrides applied on top of a config file.
struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  bool integrate_only = false;
};

/// One file the caller should write, relative to the output directory.
struct OutputFile {
  std::string name;
  std::string contents;
};

struct TaskOutcome {
  std::string type;
  Status status = Status::Pass;
  Json report;
  std::string text;
  std::vector<OutputFile> files;
};

struct RunResult {
  int exit_code = kPass;
  std::string message;  // set for config errors
  std::vector<TaskOutcome> tasks;
  Json summary;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Residual formatting for the text rendering: 3 significant digits.
inline std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (std::size_t i = 0; i < v.dim(); ++i) a.push_back(v(i));
  return a;
}

inline Json to_json(const Matrix& m) {
  Json a = Json::array();
  for (std::size_t i = 0; i < m.dim(); ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < m.dim(); ++j) row.push_back(m(i, j));
    a.push_back(row);
  }
  return a;
}

inline Json to_json(const PhasePoint& pt) { return Json{{"x", to_json(pt.x)}, {"p", to_json(pt.p)}}; }

namespace detail {

inline const Json& require(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  return j.at(key);
}

inline std::string get_string(const Json& j, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where + ": expected a string");
  return j.get<std::string>();
}

inline double get_number(const Json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

inline std::vector<std::string> string_list(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of strings");
  std::vector<std::string> out;
  for (const auto& e : j) out.push_back(e.is_number() ? Expression::constant(1, e.get<double>()).to_string()
                                                      : get_string(e, where));
  return out;
}

inline Box parse_box(const Json& j, std::size_t n, const std::string& where) {
  if (!j.is_array() || j.size() != n) throw ConfigError(where + ": expected " + std::to_string(n) + " intervals");
  Box b;
  for (const auto& iv : j) {
    if (!iv.is_array() || iv.size() != 2) throw ConfigError(where + ": each interval is [lo, hi]");
    const double lo = get_number(iv[0], where), hi = get_number(iv[1], where);
    if (!(lo <= hi)) throw ConfigError(where + ": interval has lo > hi");
    b.emplace_back(lo, hi);
  }
  return b;
}

inline Vector parse_vector(const Json& j, std::size_t n, const std::string& where) {
  if (!j.is_array() || j.size() != n) throw ConfigError(where + ": expected " + std::to_string(n) + " numbers");
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) v(i) = get_number(j[i], where);
  return v;
}

// Expression parse failures inside a config are config errors.
template <class F>
auto config_parse(const std::string& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const GeometryError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace detail

/// Resolved manifold, declared fields and sampling settings of a config.
struct Context {
  std::shared_ptr<const MetricSpec> metric;
  bool from_catalog = false;
  std::map<std::string, VectorFieldSpec> vectors;
  std::map<std::string, Tensor2FieldSpec> tensors;
  std::map<std::string, ScalarFieldSpec> scalars;
  std::uint64_t seed = 42;
  std::size_t count = 100;
  Box box;
  Box momentum_box;
  Json tolerances = Json::object();
  std::optional<double> tol_override;

  std::size_t n() const { return metric->dimension; }

  double tolerance(const Json& task, const std::string& type, double fallback) const {
    if (tol_override) return *tol_override;
    if (task.contains("tol")) return detail::get_number(task.at("tol"), type + ".tol");
    if (tolerances.contains(type)) return detail::get_number(tolerances.at(type), "tolerances." + type);
    return fallback;
  }

  VectorFieldSpec vector(const Json& ref, const std::string& where) const {
    if (ref.is_array()) {
      const auto comps = detail::string_list(ref, where);
      if (comps.size() != n()) throw ConfigError(where + ": vector field needs " + std::to_string(n()) + " components");
      return detail::config_parse(where, [&] { return VectorFieldSpec::parse(comps, metric->symbols()); });
    }
    const std::string name = detail::get_string(ref, where);
    if (auto it = vectors.find(name); it != vectors.end()) return it->second;
    if (from_catalog) {
      for (const auto& f : catalog_entry(metric->name).fields)
        if (f.name == name) return catalog_field(*metric, name);
    }
    throw ConfigError(where + ": undeclared vector field '" + name + "'");
  }

  Tensor2FieldSpec tensor(const Json& ref, const std::string& where) const {
    if (ref.is_array()) {
      if (ref.size() != n()) throw ConfigError(where + ": tensor field needs " + std::to_string(n()) + " rows");
      std::vector<std::vector<std::string>> rows;
      for (const auto& r : ref) {
        rows.push_back(detail::string_list(r, where));
        if (rows.back().size() != n()) throw ConfigError(where + ": tensor row has wrong length");
      }
      return detail::config_parse(where, [&] { return Tensor2FieldSpec::parse(rows, metric->symbols()); });
    }
    const std::string name = detail::get_string(ref, where);
    if (auto it = tensors.find(name); it != tensors.end()) return it->second;
    throw ConfigError(where + ": undeclared tensor field '" + name + "'");
  }

  /// A declared scalar name, or else an inline expression.
  ScalarFieldSpec scalar(const Json& ref, const std::string& where) const {
    if (ref.is_number()) return ScalarFieldSpec{Expression::constant(n(), ref.get<double>())};
    const std::string text = detail::get_string(ref, where);
    if (auto it = scalars.find(text); it != scalars.end()) return it->second;
    return detail::config_parse(where, [&] { return ScalarFieldSpec::parse(text, metric->symbols()); });
  }

  TransportGenerator transport_term(const Json& t, const std::string& where) const {
    if (t.is_string() || (t.is_array() && !t.empty() && t[0].is_array()))
      return TransportGenerator::explicit_tensor(tensor(t, where));
    if (!t.is_object() || t.size() == 0) throw ConfigError(where + ": malformed transport term");
    const double coef = t.contains("coef") ? detail::get_number(t.at("coef"), where + ".coef") : 1.0;
    if (t.contains("explicit")) return TransportGenerator::explicit_tensor(tensor(t.at("explicit"), where), coef);
    if (t.contains("nabla")) return TransportGenerator::covariant_derivative(vector(t.at("nabla"), where), coef);
    if (t.contains("skew_nabla"))
      return TransportGenerator::skew_covariant_derivative(vector(t.at("skew_nabla"), where), coef);
    if (t.contains("raised")) return TransportGenerator::raised_form(tensor(t.at("raised"), where), coef);
    if (t.contains("scalar")) return TransportGenerator::scalar_identity(scalar(t.at("scalar"), where).expr, coef);
    throw ConfigError(where + ": transport term needs one of explicit, nabla, skew_nabla, raised, scalar");
  }

  /// A single term, an inline tensor, or a list of terms summed together.
  TransportGenerator transport(const Json& t, const std::string& where) const {
    if (t.is_array() && !t.empty() && !t[0].is_array()) {
      TransportGenerator sum = TransportGenerator::zero(n());
      for (const auto& term : t) sum = sum + transport_term(term, where);
      return sum;
    }
    return transport_term(t, where);
  }

  AtlSpec lift(const Json& j, const std::string& where) const {
    const std::string kind = detail::get_string(detail::require(j, "kind", where), where + ".kind");
    auto field = [&] { return vector(detail::require(j, "field", where), where + ".field"); };
    auto psi = [&] { return scalar(detail::require(j, "psi", where), where + ".psi"); };
    auto gen = [&] { return transport(detail::require(j, "transport", where), where + ".transport"); };
    if (kind == "horizontal") return horizontal_lift(field());
    if (kind == "vertical_vector") return vertical_lift_vector(field());
    if (kind == "vertical_tensor") return vertical_lift_tensor(gen());
    if (kind == "euler") return euler_field(n());
    if (kind == "complete") return complete_lift(field());
    if (kind == "iwai") return iwai_lift(field(), psi());
    if (kind == "dynamical") return dynamical_atl(field(), psi());
    if (kind == "matter") {
      AtlSpec l{field(), gen(), VectorFieldSpec::zero(n()), LiftKind::Matter};
      return l;
    }
    if (kind == "general") {
      AtlSpec l;
      l.base = j.contains("field") ? field() : VectorFieldSpec::zero(n());
      l.transport = j.contains("transport") ? gen() : TransportGenerator::zero(n());
      l.offset = j.contains("offset") ? vector(j.at("offset"), where + ".offset") : VectorFieldSpec::zero(n());
      l.kind = LiftKind::General;
      return l;
    }
    throw ConfigError(where + ": unknown lift kind '" + kind + "'");
  }

  std::size_t task_count(const Json& task, const std::string& where) const {
    if (!task.contains("count")) return count;
    const double c = detail::get_number(task.at("count"), where + ".count");
    if (!(c >= 1.0) || c != std::floor(c)) throw ConfigError(where + ".count must be a positive integer");
    return static_cast<std::size_t>(c);
  }
};

inline std::shared_ptr<const MetricSpec> parse_manifold(const Json& cfg, bool& from_catalog) {
  const Json& m = detail::require(cfg, "manifold", "config");
  std::map<std::string, double> params;
  if (cfg.contains("parameters")) {
    if (!cfg.at("parameters").is_object()) throw ConfigError("parameters: expected an object");
    for (const auto& [k, v] : cfg.at("parameters").items()) params[k] = detail::get_number(v, "parameters." + k);
  }
  if (m.is_string()) {
    from_catalog = true;
    return std::make_shared<const MetricSpec>(
        detail::config_parse("manifold", [&] { return catalog_metric(m.get<std::string>(), params); }));
  }
  from_catalog = false;
  const std::string where = "manifold";
  const auto coords = detail::string_list(detail::require(m, "coordinates", where), where + ".coordinates");
  if (m.contains("parameters"))
    for (const auto& [k, v] : m.at("parameters").items()) params.emplace(k, detail::get_number(v, where + ".parameters"));
  std::vector<std::vector<std::string>> rows;
  const Json& metric = detail::require(m, "metric", where);
  if (!metric.is_array()) throw ConfigError("manifold.metric: expected rows");
  for (const auto& r : metric) rows.push_back(detail::string_list(r, where + ".metric"));
  const auto region = m.contains("region") ? detail::string_list(m.at("region"), where + ".region")
                                           : std::vector<std::string>{};
  Box box;
  if (m.contains("sample_box")) box = detail::parse_box(m.at("sample_box"), coords.size(), where + ".sample_box");
  const std::string name = m.contains("name") ? detail::get_string(m.at("name"), where + ".name") : "inline";
  return std::make_shared<const MetricSpec>(detail::config_parse(
      where, [&] { return MetricSpec::from_strings(name, coords, params, rows, region, box); }));
}

inline Context build_context(const Json& cfg, const RunOptions& opts) {
  if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
  Context ctx;
  ctx.metric = parse_manifold(cfg, ctx.from_catalog);
  const std::size_t n = ctx.n();

  if (cfg.contains("fields")) {
    const Json& fields = cfg.at("fields");
    if (!fields.is_object()) throw ConfigError("fields: expected an object");
    for (const auto& [name, spec] : fields.items()) {
      const std::string where = "fields." + name;
      const std::string type = detail::get_string(detail::require(spec, "type", where), where + ".type");
      if (type == "vector") {
        ctx.vectors[name] = ctx.vector(detail::require(spec, "components", where), where);
      } else if (type == "tensor2") {
        ctx.tensors[name] = ctx.tensor(detail::require(spec, "components", where), where);
      } else if (type == "scalar") {
        const std::string text = detail::get_string(detail::require(spec, "expression", where), where);
        ctx.scalars[name] = detail::config_parse(where, [&] { return ScalarFieldSpec::parse(text, ctx.metric->symbols()); });
      } else {
        throw ConfigError(where + ": unknown field type '" + type + "'");
      }
    }
  }

  ctx.box = ctx.metric->sample_box;
  ctx.momentum_box = Box(n, {-1.0, 1.0});
  if (cfg.contains("sampling")) {
    const Json& s = cfg.at("sampling");
    if (s.contains("seed")) {
      if (!s.at("seed").is_number_unsigned()) throw ConfigError("sampling.seed must be a non-negative integer");
      ctx.seed = s.at("seed").get<std::uint64_t>();
    }
    if (s.contains("count")) ctx.count = ctx.task_count(s, "sampling");
    if (s.contains("box")) ctx.box = detail::parse_box(s.at("box"), n, "sampling.box");
    if (s.contains("momentum_box")) ctx.momentum_box = detail::parse_box(s.at("momentum_box"), n, "sampling.momentum_box");
  }
  if (opts.seed) ctx.seed = *opts.seed;
  if (cfg.contains("tolerances")) {
    if (!cfg.at("tolerances").is_object()) throw ConfigError("tolerances: expected an object");
    ctx.tolerances = cfg.at("tolerances");
  }
  ctx.tol_override = opts.tol;
  return ctx;
}

namespace detail {

struct Prepared {
  std::string type;
  Json spec;
  std::function<TaskOutcome()> run;
};

inline Json header(const Context& ctx, const std::string& config_hash, std::size_t index, const std::string& type) {
  return Json{{"tool", kToolName},
              {"version", kVersion},
              {"config_hash", config_hash},
              {"seed", ctx.seed},
              {"task_index", index},
              {"task", type},
              {"manifold", ctx.metric->name}};
}

inline std::vector<PhasePoint> phase_sample(const Context& ctx, std::size_t count) {
  Sampler s(ctx.seed);
  return s.phase_points(*ctx.metric, count, ctx.box, ctx.momentum_box);
}

inline std::string worst_point_text(const Json& pt) {
  return pt.dump();
}

inline Prepared prepare_verify_brackets(const Context& ctx, const Json& task, Json head) {
  const double tol = ctx.tolerance(task, "verify-brackets", 1e-10);
  const std::size_t count = ctx.task_count(task, "verify-brackets");
  return {"verify-brackets", task, [=, &ctx] {
            BasisBracketResiduals worst;
            PhasePoint worst_pt;
            double worst_max = -1.0;
            for (const PhasePoint& pt : phase_sample(ctx, count)) {
              const BasisBracketResiduals r = verify_basis_brackets(*ctx.metric, pt);
              worst.vertical_vertical = std::max(worst.vertical_vertical, r.vertical_vertical);
              worst.horizontal_vertical = std::max(worst.horizontal_vertical, r.horizontal_vertical);
              worst.horizontal_horizontal = std::max(worst.horizontal_horizontal, r.horizontal_horizontal);
              if (r.max() > worst_max) worst_max = r.max(), worst_pt = pt;
            }
            TaskOutcome o;
            o.type = "verify-brackets";
            o.status = worst.max() < tol ? Status::Pass : Status::Fail;
            o.report = head;
            o.report["tolerance"] = tol;
            o.report["points"] = count;
            o.report["status"] = to_string(o.status);
            o.report["results"] = Json{{"vertical_vertical", worst.vertical_vertical},
                                       {"horizontal_vertical", worst.horizontal_vertical},
                                       {"horizontal_horizontal", worst.horizontal_horizontal},
                                       {"worst_point", to_json(worst_pt)}};
            o.text = "  [V_a,V_b] = 0                  max residual " + fmt3(worst.vertical_vertical) +
                     "\n  [H_a,V_b] = Gamma^c_ab V_c     max residual " + fmt3(worst.horizontal_vertical) +
                     "\n  [H_a,H_b] = -R^d_cab p^c V_d   max residual " + fmt3(worst.horizontal_horizontal) + "\n";
            return o;
          }};
}

inline Prepared prepare_atl_algebra(const Context& ctx, const Json& task, Json head) {
  const double tol = ctx.tolerance(task, "verify-atl-algebra", 1e-9);
  const std::size_t count = ctx.task_count(task, "verify-atl-algebra");
  std::optional<std::pair<AtlSpec, AtlSpec>> fixed;
  if (task.contains("lifts")) {
    const Json& l = task.at("lifts");
    if (!l.is_array() || l.size() != 2) throw ConfigError("verify-atl-algebra.lifts: expected two lifts");
    fixed.emplace(ctx.lift(l[0], "verify-atl-algebra.lifts[0]"), ctx.lift(l[1], "verify-atl-algebra.lifts[1]"));
  }
  return {"verify-atl-algebra", task, [=, &ctx] {
            Sampler s(ctx.seed);
            const auto pts = s.phase_points(*ctx.metric, count, ctx.box, ctx.momentum_box);
            double bracket = 0.0, linear = 0.0;
            PhasePoint worst_pt;
            for (const PhasePoint& pt : pts) {
              const AtlSpec l1 = fixed ? fixed->first : s.atl(ctx.box);
              const AtlSpec l2 = fixed ? fixed->second : s.atl(ctx.box);
              const GeometryPoint gp = geometry_at(*ctx.metric, pt.x.span());
              const BundleVector closed =
                  to_coordinate_basis(gp, atl_bracket(gp, l1, l2).connection_value(pt.p), pt.p);
              const BundleVector numeric = lie_bracket(atl_jet(l1, gp, pt.p), atl_jet(l2, gp, pt.p));
              const double r = (closed - numeric).max_abs();
              if (r > bracket) bracket = r, worst_pt = pt;
              const double a = s.uniform(-2.0, 2.0), b = s.uniform(-2.0, 2.0);
              const BundleVector comb = atl_jet(atl_combine(a, l1, b, l2), gp, pt.p).value;
              const BundleVector expect = a * atl_jet(l1, gp, pt.p).value + b * atl_jet(l2, gp, pt.p).value;
              linear = std::max(linear, (comb - expect).max_abs() / (1.0 + expect.max_abs()));
            }
            constexpr double kRoundoff = 1e-12;
            TaskOutcome o;
            o.type = "verify-atl-algebra";
            o.status = bracket < tol && linear < kRoundoff ? Status::Pass : Status::Fail;
            o.report = head;
            o.report["tolerance"] = tol;
            o.report["linearity_tolerance"] = kRoundoff;
            o.report["points"] = count;
            o.report["random_pairs"] = !fixed.has_value();
            o.report["status"] = to_string(o.status);
            o.report["results"] = Json{{"bracket_residual", bracket},
                                       {"linearity_residual", linear},
                                       {"worst_point", to_json(worst_pt)}};
            o.text = "  closed-form ATL bracket vs numeric   max residual " + fmt3(bracket) +
                     "\n  linear combination vs pointwise sum  max relative residual " + fmt3(linear) + "\n";
            return o;
          }};
}

inline Prepared prepare_classify(const Context& ctx, const Json& task, Json head) {
  const double tol = ctx.tolerance(task, "classify", 1e-8);
  const std::size_t count = task.contains("count") ? ctx.task_count(task, "classify") : 64;
  const VectorFieldSpec y = ctx.vector(require(task, "field", "classify"), "classify.field");
  const std::string field_name = task.at("field").is_string() ? task.at("field").get<std::string>() : "inline";
  std::map<std::string, bool> expect;
  if (task.contains("expect")) {
    for (const auto& [k, v] : task.at("expect").items()) {
      static const char* known[] = {"killing", "conformal_killing", "homothetic", "affine_collineation",
                                    "projective_collineation", "dynamical_symmetry"};
      if (std::find(std::begin(known), std::end(known), k) == std::end(known))
        throw ConfigError("classify.expect: unknown flag '" + k + "'");
      if (!v.is_boolean()) throw ConfigError("classify.expect." + k + ": expected a boolean");
      expect[k] = v.get<bool>();
    }
  }
  return {"classify", task, [=, &ctx] {
            Sampler s(ctx.seed);
            const SymmetryReport r = classify_vector_field(*ctx.metric, y, s.base_points(*ctx.metric, count, ctx.box), tol);
            const std::map<std::string, bool> flags = {{"killing", r.killing},
                                                       {"conformal_killing", r.conformal_killing},
                                                       {"homothetic", r.homothetic},
                                                       {"affine_collineation", r.affine_collineation},
                                                       {"projective_collineation", r.projective_collineation},
                                                       {"dynamical_symmetry", r.dynamical_symmetry}};
            Json mismatches = Json::array();
            for (const auto& [k, v] : expect)
              if (flags.at(k) != v) mismatches.push_back(k);
            TaskOutcome o;
            o.type = "classify";
            o.status = mismatches.empty() ? Status::Pass : Status::Fail;
            o.report = head;
            o.report["tolerance"] = tol;
            o.report["points"] = count;
            o.report["status"] = to_string(o.status);
            o.report["field"] = field_name;
            o.report["note"] = "flags mean no violation was found at the tolerance over the sampled points";
            Json jf = Json::object();
            for (const char* k : {"killing", "conformal_killing", "homothetic", "affine_collineation",
                                  "projective_collineation", "dynamical_symmetry"})
              jf[k] = flags.at(k);
            Json per = Json::array();
            for (const auto& p : r.points)
              per.push_back(Json{{"x", to_json(p.x)},
                                 {"killing", p.killing},
                                 {"conformal", p.conformal},
                                 {"conformal_factor", p.conformal_factor},
                                 {"affine", p.affine},
                                 {"projective", p.projective},
                                 {"projective_gradient", to_json(p.projective_gradient)}});
            o.report["results"] = Json{{"flags", jf},
                                       {"max_killing", r.max_killing()},
                                       {"max_conformal", r.max_conformal()},
                                       {"conformal_factor_spread", r.conformal_factor_spread},
                                       {"max_affine", r.max_affine()},
                                       {"max_projective", r.max_projective()},
                                       {"expectation_mismatches", mismatches},
                                       {"per_point", per}};
            std::ostringstream t;
            t << "  field " << field_name << "\n";
            for (const auto& [k, v] : jf.items()) t << "  " << k << ": " << (v.get<bool>() ? "yes" : "no") << "\n";
            t << "  max |sym nabla Y| " << fmt3(r.max_killing()) << ", conformal residual " << fmt3(r.max_conformal())
              << ", psi spread " << fmt3(r.conformal_factor_spread) << ", |L_Y Gamma| " << fmt3(r.max_affine())
              << ", projective residual " << fmt3(r.max_projective()) << "\n";
            if (!mismatches.empty()) t << "  expectation mismatches: " << mismatches.dump() << "\n";
            o.text = t.str();
            return o;
          }};
}

inline Prepared prepare_check_dynamical(const Context& ctx, const Json& task, Json head) {
  const double tol = ctx.tolerance(task, "check-dynamical", 1e-9);
  const std::size_t count = ctx.task_count(task, "check-dynamical");
  const AtlSpec l = ctx.lift(require(task, "lift", "check-dynamical"), "check-dynamical.lift");
  std::optional<ScalarFieldSpec> psi;
  if (task.contains("psi")) psi = ctx.scalar(task.at("psi"), "check-dynamical.psi");
  return {"check-dynamical", task, [=, &ctx] {
            const auto pts = phase_sample(ctx, count);
            double worst = 0.0, psi_min = std::numeric_limits<double>::infinity(), psi_max = -psi_min;
            std::size_t worst_index = 0;
            std::vector<DynamicalResidual> rs;
            for (std::size_t i = 0; i < pts.size(); ++i) {
              rs.push_back(dynamical_residual(*ctx.metric, l, pts[i]));
              if (rs.back().residual > worst) worst = rs.back().residual, worst_index = i;
              psi_min = std::min(psi_min, rs.back().psi);
              psi_max = std::max(psi_max, rs.back().psi);
            }
            AtlDynamicalConditions cond;
            if (psi) {
              for (const auto& pt : pts) {
                const AtlDynamicalConditions c = atl_dynamical_conditions(*ctx.metric, l, pt.x.span(), *psi);
                cond.offset_norm = std::max(cond.offset_norm, c.offset_norm);
                cond.transport_residual = std::max(cond.transport_residual, c.transport_residual);
                cond.projective_residual = std::max(cond.projective_residual, c.projective_residual);
              }
            }
            TaskOutcome o;
            o.type = "check-dynamical";
            o.status = worst < tol ? Status::Pass : Status::Fail;
            o.report = head;
            o.report["tolerance"] = tol;
            o.report["points"] = count;
            o.report["status"] = to_string(o.status);
            o.report["lift"] = to_string(l.kind);
            Json res{{"max_residual", worst},
                     {"worst_point", to_json(pts[worst_index])},
                     {"worst_psi_hat", rs[worst_index].psi},
                     {"psi_hat_min", psi_min},
                     {"psi_hat_max", psi_max}};
            if (psi)
              res["conditions"] = Json{{"offset_norm", cond.offset_norm},
                                       {"transport_residual", cond.transport_residual},
                                       {"projective_residual", cond.projective_residual}};
            Json per = Json::array();
            for (std::size_t i = 0; i < pts.size(); ++i)
              per.push_back(Json{{"point", to_json(pts[i])}, {"psi_hat", rs[i].psi}, {"residual", rs[i].residual}});
            res["per_point"] = per;
            o.report["results"] = res;
            std::ostringstream t;
            t << "  [Sigma, spray] + psi spray   max residual " << fmt3(worst) << "\n"
              << "  psi_hat range [" << fmt3(psi_min) << ", " << fmt3(psi_max) << "]\n";
            if (psi)
              t << "  conditions: |k| " << fmt3(cond.offset_norm) << ", transport " << fmt3(cond.transport_residual)
                << ", projective " << fmt3(cond.projective_residual) << "\n";
            if (o.status != Status::Pass) t << "  violating point " << to_json(pts[worst_index]).dump() << "\n";
            o.text = t.str();
            return o;
          }};
}

inline Prepared prepare_check_matter(const Context& ctx, const Json& task, Json head) {
  const double tol = ctx.tolerance(task, "check-matter", 1e-9);
  const double skew_tol = task.contains("skew_tol") ? get_number(task.at("skew_tol"), "check-matter.skew_tol") : 1e-10;
  const std::size_t count = ctx.task_count(task, "check-matter");
  std::optional<AtlSpec> lift;
  if (task.contains("lift")) lift = ctx.lift(task.at("lift"), "check-matter.lift");
  std::optional<VectorFieldSpec> coincidence;
  if (task.contains("coincidence_field"))
    coincidence = ctx.vector(task.at("coincidence_field"), "check-matter.coincidence_field");
  if (!lift && !coincidence) throw ConfigError("check-matter: needs 'lift' and/or 'coincidence_field'");
  const double classify_tol = ctx.tolerance(task, "classify", 1e-8);
  return {"check-matter", task, [=, &ctx] {
            const auto pts = phase_sample(ctx, count);
            TaskOutcome o;
            o.type = "check-matter";
            o.report = head;
            o.report["tolerance"] = tol;
            o.report["skew_tolerance"] = skew_tol;
            o.report["points"] = count;
            Json res = Json::object();
            std::ostringstream t;
            bool ok = true;
            if (lift) {
              std::vector<Vector> base;
              for (const auto& p : pts) base.push_back(p.x);
              const double skew = max_symmetric_part(*ctx.metric, lift->transport, base);
              const double offset = [&] {
                double k = 0.0;
                for (const auto& x : base) k = std::max(k, evaluate(lift->offset, x.span()).value.max_abs());
                return k;
              }();
              double bracket = 0.0;
              if (offset == 0.0) {
                for (const auto& pt : pts) {
                  const GeometryPoint gp = geometry_at(*ctx.metric, pt.x.span());
                  const BundleVector closed = matter_spray_bracket(gp, *lift, pt.p);
                  bracket = std::max(bracket, (closed - lie_bracket(atl_jet(*lift, gp, pt.p), spray_jet(gp, pt.p))).max_abs());
                }
              }
              const bool lift_ok = skew < skew_tol && offset == 0.0 && bracket < tol;
              ok = ok && lift_ok;
              res["lift"] = Json{{"max_symmetric_part", skew}, {"max_offset", offset}, {"spray_bracket_residual", bracket}};
              t << "  matter lift: max |A_(ab)| " << fmt3(skew) << ", |k| " << fmt3(offset)
                << ", spray bracket closed form vs numeric " << fmt3(bracket) << "\n";
            }
            if (coincidence) {
              const CoincidenceReport c = coincidence_check(*ctx.metric, *coincidence, pts, tol, classify_tol);
              ok = ok && c.consistent();
              res["coincidence"] = Json{{"homothetic", c.homothetic},
                                        {"dynamical", c.dynamical},
                                        {"consistent", c.consistent()},
                                        {"max_residual", c.max_residual},
                                        {"worst_point", to_json(pts[c.worst_index])},
                                        {"psi_hat_at_first_point", c.residuals.front().psi}};
              t << "  coincidence: homothetic " << (c.homothetic ? "yes" : "no") << ", matter lift dynamical "
                << (c.dynamical ? "yes" : "no") << " (max residual " << fmt3(c.max_residual) << "), "
                << (c.consistent() ? "consistent" : "INCONSISTENT") << "\n";
            }
            o.status = ok ? Status::Pass : Status::Fail;
            o.report["status"] = to_string(o.status);
            o.report["results"] = res;
            o.text = t.str();
            return o;
          }};
}

inline Prepared prepare_integrate(const Context& ctx, const Json& task, Json head, std::size_t index) {
  const std::string where = "integrate";
  const bool geodesic = task.contains("geodesic") && task.at("geodesic").get<bool>();
  std::optional<AtlSpec> lift;
  if (!geodesic) lift = ctx.lift(require(task, "lift", where), where + ".lift");
  const Json& start = require(task, "start", where);
  const PhasePoint pt{parse_vector(require(start, "x", where + ".start"), ctx.n(), where + ".start.x"),
                      parse_vector(require(start, "p", where + ".start.p"), ctx.n(), where + ".start.p")};
  const Json& span = require(task, "span", where);
  if (!span.is_array() || span.size() != 2) throw ConfigError("integrate.span: expected [sigma0, sigma1]");
  const double s0 = get_number(span[0], where + ".span"), s1 = get_number(span[1], where + ".span");
  if (!(s1 > s0)) throw ConfigError("integrate.span: sigma1 must exceed sigma0");
  IntegratorConfig cfg;
  if (task.contains("step")) cfg.step = get_number(task.at("step"), where + ".step");
  if (!(cfg.step > 0.0)) throw ConfigError("integrate.step must be positive");
  if (task.contains("max_steps")) cfg.max_steps = task.at("max_steps").get<std::size_t>();
  if (task.contains("record_every")) cfg.record_every = task.at("record_every").get<std::size_t>();
  const bool holonomy = task.contains("holonomy") && task.at("holonomy").get<bool>();
  if (holonomy && ctx.n() != 2) throw ConfigError("integrate.holonomy needs a 2D manifold");
  const std::string csv = task.contains("csv") ? get_string(task.at("csv"), where + ".csv")
                                               : "trajectory_" + std::to_string(index) + ".csv";
  const Json expect = task.contains("expect") ? task.at("expect") : Json::object();
  std::optional<PhasePoint> want_end;
  double end_tol = 1e-12;
  for (const auto& [k, v] : expect.items()) {
    if (k == "endpoint") {
      want_end = PhasePoint{parse_vector(require(v, "x", "integrate.expect.endpoint"), ctx.n(), "integrate.expect.endpoint.x"),
                            parse_vector(require(v, "p", "integrate.expect.endpoint"), ctx.n(), "integrate.expect.endpoint.p")};
      if (v.contains("tol")) end_tol = get_number(v.at("tol"), "integrate.expect.endpoint.tol");
      continue;
    }
    if (k != "max_norm_drift" && k != "holonomy_rotation" && k != "holonomy_tol" && k != "max_covariant_rate")
      throw ConfigError("integrate.expect: unknown key '" + k + "'");
    get_number(v, "integrate.expect." + k);
  }
  return {"integrate", task, [=, &ctx] {
            const Trajectory t = geodesic ? integrate_geodesic(*ctx.metric, pt, s0, s1, cfg)
                                          : integrate_atl(*ctx.metric, *lift, pt, s0, s1, cfg);
            const NormDrift drift = norm_drift(t);
            double rate = 0.0;
            if (lift)
              for (const auto& s : t.samples) rate = std::max(rate, covariant_rate_residual(*ctx.metric, *lift, s));
            TaskOutcome o;
            o.type = "integrate";
            o.report = head;
            const TrajectorySample& end = t.samples.back();
            Json res{{"lift", geodesic ? "geodesic" : to_string(lift->kind)},
                     {"steps", t.steps},
                     {"samples", t.samples.size()},
                     {"left_region", t.left_region},
                     {"sigma_end", end.sigma},
                     {"endpoint", Json{{"x", to_json(end.x)}, {"p", to_json(end.p)}}},
                     {"max_norm_drift", drift.max_drift},
                     {"max_covariant_rate_residual", rate},
                     {"csv", csv}};
            bool ok = true;
            Json checks = Json::object();
            if (holonomy) {
              const double rot = holonomy_rotation(*ctx.metric, t);
              res["holonomy_rotation"] = rot;
              res["holonomy_signed_angle"] = holonomy_angle(*ctx.metric, t);
              if (expect.contains("holonomy_rotation")) {
                const double want = expect.at("holonomy_rotation").get<double>();
                const double htol = expect.contains("holonomy_tol") ? expect.at("holonomy_tol").get<double>() : 1e-6;
                const double err = std::abs(wrap_angle(rot - want));
                checks["holonomy_rotation"] = Json{{"expected", want}, {"error", err}, {"tolerance", htol}};
                ok = ok && err < htol;
              }
            }
            if (expect.contains("max_norm_drift")) {
              const double lim = expect.at("max_norm_drift").get<double>();
              checks["max_norm_drift"] = Json{{"limit", lim}, {"value", drift.max_drift}};
              ok = ok && drift.max_drift < lim;
            }
            if (expect.contains("max_covariant_rate")) {
              const double lim = expect.at("max_covariant_rate").get<double>();
              checks["max_covariant_rate"] = Json{{"limit", lim}, {"value", rate}};
              ok = ok && rate < lim;
            }
            if (want_end) {
              const double err = std::max((end.x - want_end->x).max_abs(), (end.p - want_end->p).max_abs());
              checks["endpoint"] = Json{{"error", err}, {"tolerance", end_tol}};
              ok = ok && err < end_tol;
            }
            res["checks"] = checks;
            o.status = t.left_region ? Status::Error : (ok ? Status::Pass : Status::Fail);
            o.report["step"] = cfg.step;
            o.report["tolerances"] = expect;
            o.report["status"] = to_string(o.status);
            o.report["results"] = res;
            std::ostringstream csv_text;
            write_csv(csv_text, t);
            o.files.push_back({csv, csv_text.str()});
            std::ostringstream txt;
            txt << "  " << t.steps << " RK4 steps of h = " << fmt3(cfg.step) << ", sigma_end " << end.sigma
                << (t.left_region ? " (LEFT ADMITTED REGION, trajectory truncated)" : "") << "\n"
                << "  endpoint x " << to_json(end.x).dump() << ", p " << to_json(end.p).dump() << "\n"
                << "  max |g(p,p) drift| " << fmt3(drift.max_drift) << ", max covariant-rate residual " << fmt3(rate)
                << "\n";
            if (holonomy) txt << "  holonomy rotation angle " << res["holonomy_rotation"].get<double>() << " rad\n";
            txt << "  csv " << csv << "\n";
            o.text = txt.str();
            return o;
          }};
}

}  // namespace detail

inline std::string render_text(const TaskOutcome& o) {
  const Json& r = o.report;
  std::ostringstream t;
  t << "[" << r.value("task_index", 0) << "] " << o.type << " on " << r.value("manifold", "") << ": "
    << to_string(o.status);
  if (r.contains("tolerance")) t << " (tol " << fmt3(r.at("tolerance").get<double>()) << ")";
  t << "\n" << o.text;
  return t.str();
}

/// Runs the tasks of a parsed config. `raw` is the config text, hashed into
/// every report.
inline RunResult run_config(const Json& cfg, std::string_view raw, const RunOptions& opts) {
  RunResult result;
  const std::string hash = "fnv1a64:" + hex64(fnv1a(raw));
  Context ctx;
  std::vector<detail::Prepared> tasks;
  try {
    ctx = build_context(cfg, opts);
    const Json& list = detail::require(cfg, "tasks", "config");
    if (!list.is_array() || list.empty()) throw ConfigError("tasks: expected a non-empty array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Json& task = list[i];
      const std::string type = detail::get_string(detail::require(task, "type", "tasks"), "tasks.type");
      if (opts.integrate_only && type != "integrate") continue;
      Json head = detail::header(ctx, hash, i, type);
      if (type == "verify-brackets") tasks.push_back(detail::prepare_verify_brackets(ctx, task, head));
      else if (type == "verify-atl-algebra") tasks.push_back(detail::prepare_atl_algebra(ctx, task, head));
      else if (type == "classify") tasks.push_back(detail::prepare_classify(ctx, task, head));
      else if (type == "check-dynamical") tasks.push_back(detail::prepare_check_dynamical(ctx, task, head));
      else if (type == "check-matter") tasks.push_back(detail::prepare_check_matter(ctx, task, head));
      else if (type == "integrate") tasks.push_back(detail::prepare_integrate(ctx, task, head, i));
      else throw ConfigError("tasks[" + std::to_string(i) + "]: unknown task type '" + type + "'");
    }
    if (tasks.empty()) throw ConfigError("config has no tasks to run for this command");
  } catch (const ConfigError& e) {
    result.exit_code = kConfigError;
    result.message = e.what();
    return result;
  } catch (const Json::exception& e) {
    result.exit_code = kConfigError;
    result.message = std::string("malformed config value: ") + e.what();
    return result;
  }

  bool failed = false, numerical = false;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    TaskOutcome o;
    try {
      o = tasks[i].run();
    } catch (const ConstraintError& e) {
      o.type = tasks[i].type;
      o.status = Status::Fail;
      o.report = detail::header(ctx, hash, cfg.at("tasks").size() > i ? i : 0, o.type);
      o.report["status"] = to_string(o.status);
      o.report["error"] = e.what();
      o.text = std::string("  constraint violated: ") + e.what() + "\n";
    } catch (const Error& e) {
      o.type = tasks[i].type;
      o.status = Status::Error;
      o.report = detail::header(ctx, hash, i, o.type);
      o.report["status"] = to_string(o.status);
      o.report["error"] = e.what();
      o.text = std::string("  numerical failure: ") + e.what() + "\n";
    }
    failed = failed || o.status == Status::Fail;
    numerical = numerical || o.status == Status::Error;
    result.tasks.push_back(std::move(o));
  }
  result.exit_code = numerical ? kNumericalFailure : (failed ? kVerificationFailure : kPass);

  Json summary{{"tool", kToolName}, {"version", kVersion}, {"config_hash", hash}, {"seed", ctx.seed},
               {"manifold", ctx.metric->name}, {"exit_code", result.exit_code}};
  Json list = Json::array();
  for (const auto& o : result.tasks)
    list.push_back(Json{{"task", o.type}, {"task_index", o.report.value("task_index", 0)}, {"status", to_string(o.status)}});
  summary["tasks"] = list;
  result.summary = summary;
  return result;
}

/// Parses `text` as JSON and runs it; malformed JSON is a config error.
inline RunResult run_config_text(std::string_view text, const RunOptions& opts) {
  Json cfg;
  try {
    cfg = Json::parse(text);
  } catch (const Json::parse_error& e) {
    RunResult r;
    r.exit_code = kConfigError;
    r.message = std::string("config is not valid JSON: ") + e.what();
    return r;
  }
  return run_config(cfg, text, opts);
}

/// Report file stem for a task: "<index>_<type>".
inline std::string report_stem(const TaskOutcome& o) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", static_cast<int>(o.report.value("task_index", 0)));
  return std::string(buf) + "_" + o.type;
}

inline Json catalog_json() {
  Json out = Json::array();
  for (const auto& e : catalog_entries()) {
    Json params = Json::object();
    for (const auto& [k, v] : e.parameters) params[k] = v;
    Json fields = Json::array();
    for (const auto& f : e.fields) fields.push_back(Json{{"name", f.name}, {"components", f.components}, {"note", f.note}});
    Json box = Json::array();
    for (const auto& [lo, hi] : e.sample_box) box.push_back(Json::array({lo, hi}));
    out.push_back(Json{{"name", e.name},
                       {"description", e.description},
                       {"dimension", e.coordinates.size()},
                       {"coordinates", e.coordinates},
                       {"parameters", params},
                       {"metric", e.metric},
                       {"region", e.region},
                       {"sample_box", box},
                       {"fields", fields}});
  }
  return out;
}

inline std::string catalog_text() {
  std::ostringstream t;
  for (const auto& e : catalog_entries()) {
    t << e.name << " (n = " << e.coordinates.size() << "): " << e.description << "\n  coordinates:";
    for (const auto& c : e.coordinates) t << " " << c;
    t << "\n  parameters:";
    if (e.parameters.empty()) t << " none";
    for (const auto& [k, v] : e.parameters) t << " " << k << "=" << v;
    t << "\n  region:";
    if (e.region.empty()) t << " everywhere";
    for (std::size_t i = 0; i < e.region.size(); ++i) t << (i ? ", " : " ") << e.region[i];
    t << "\n  fields:";
    for (const auto& f : e.fields) t << " " << f.name;
    t << "\n";
  }
  return t.str();
}

}  // namespace tlift::cli
