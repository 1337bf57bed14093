#pragma once

#include <map>
#include <string>
#include <vector>

#include "tlift/error.hpp"
#include "tlift/geometry.hpp"

namespace tlift {

/// A named vector field shipped with a catalog manifold.
struct ExampleField {
  std::string name;
  std::vector<std::string> components;
  std::string note;
};

struct CatalogEntry {
  std::string name;
  std::string description;
  std::vector<std::string> coordinates;
  std::map<std::string, double> parameters;  // defaults
  std::vector<std::vector<std::string>> metric;
  std::vector<std::string> region;
  std::vector<std::pair<double, double>> sample_box;
  std::vector<ExampleField> fields;
};

inline const std::vector<CatalogEntry>& catalog_entries() {
  static const std::vector<CatalogEntry> entries = [] {
    std::vector<CatalogEntry> e;
    e.push_back({"euclidean2",
                 "flat Euclidean plane, Cartesian coordinates",
                 {"x", "y"},
                 {},
                 {{"1", "0"}, {"0", "1"}},
                 {},
                 {{-2, 2}, {-2, 2}},
                 {{"translation_x", {"1", "0"}, "Killing"},
                  {"rotation", {"-y", "x"}, "Killing"},
                  {"dilation", {"x", "y"}, "homothetic, psi = 1"},
                  {"projective", {"x^2", "x*y"}, "projective collineation, psi = 2x"}}});

    e.push_back({"euclidean3",
                 "flat Euclidean 3-space, Cartesian coordinates",
                 {"x", "y", "z"},
                 {},
                 {{"1", "0", "0"}, {"0", "1", "0"}, {"0", "0", "1"}},
                 {},
                 {{-2, 2}, {-2, 2}, {-2, 2}},
                 {{"rotation_z", {"-y", "x", "0"}, "Killing"}, {"dilation", {"x", "y", "z"}, "homothetic"}}});

    e.push_back({"euclidean4",
                 "flat Euclidean 4-space, Cartesian coordinates",
                 {"x0", "x1", "x2", "x3"},
                 {},
                 {{"1", "0", "0", "0"}, {"0", "1", "0", "0"}, {"0", "0", "1", "0"}, {"0", "0", "0", "1"}},
                 {},
                 {{-2, 2}, {-2, 2}, {-2, 2}, {-2, 2}},
                 {{"dilation", {"x0", "x1", "x2", "x3"}, "homothetic"}}});

    e.push_back({"euclidean-polar",
                 "flat Euclidean plane, polar coordinates (r, th)",
                 {"r", "th"},
                 {},
                 {{"1", "0"}, {"0", "r^2"}},
                 {"r > 1e-6"},
                 {{0.5, 3.0}, {0.0, 6.283185307179586}},
                 {{"rotation", {"0", "1"}, "Killing"},
                  {"dilation", {"r", "0"}, "homothetic, psi = 1"},
                  {"translation_x", {"cos(th)", "-sin(th)/r"}, "Killing"}}});

    e.push_back({"sphere2",
                 "unit 2-sphere (th, ph)",
                 {"th", "ph"},
                 {},
                 {{"1", "0"}, {"0", "sin(th)^2"}},
                 {"sin(th) > 1e-6"},
                 {{0.2, 2.941592653589793}, {0.0, 6.283185307179586}},
                 {{"rotation_z", {"0", "1"}, "Killing"},
                  {"rotation_x", {"-sin(ph)", "-cos(th)/sin(th)*cos(ph)"}, "Killing"},
                  {"rotation_y", {"cos(ph)", "-cos(th)/sin(th)*sin(ph)"}, "Killing"},
                  {"theta_stretch", {"th", "0"}, "not homothetic"}}});

    e.push_back({"minkowski2",
                 "2D Minkowski space (t, x), signature (-,+)",
                 {"t", "x"},
                 {},
                 {{"-1", "0"}, {"0", "1"}},
                 {},
                 {{-2, 2}, {-2, 2}},
                 {{"boost", {"x", "t"}, "Killing"}, {"dilation", {"t", "x"}, "homothetic"}}});

    e.push_back({"minkowski4",
                 "4D Minkowski space (t, x, y, z), signature (-,+,+,+)",
                 {"t", "x", "y", "z"},
                 {},
                 {{"-1", "0", "0", "0"}, {"0", "1", "0", "0"}, {"0", "0", "1", "0"}, {"0", "0", "0", "1"}},
                 {},
                 {{-2, 2}, {-2, 2}, {-2, 2}, {-2, 2}},
                 {{"boost_x", {"x", "t", "0", "0"}, "Killing"},
                  {"rotation_z", {"0", "-y", "x", "0"}, "Killing"},
                  {"dilation", {"t", "x", "y", "z"}, "homothetic"}}});

    e.push_back({"schwarzschild",
                 "Schwarzschild exterior (t, r, th, ph), mass M",
                 {"t", "r", "th", "ph"},
                 {{"M", 1.0}},
                 {{"-(1-2*M/r)", "0", "0", "0"},
                  {"0", "1/(1-2*M/r)", "0", "0"},
                  {"0", "0", "r^2", "0"},
                  {"0", "0", "0", "r^2*sin(th)^2"}},
                 {"r > 2*M*(1+1e-6)", "sin(th) > 1e-6"},
                 {{-5.0, 5.0}, {3.0, 10.0}, {0.3, 2.841592653589793}, {0.0, 6.283185307179586}},
                 {{"time_translation", {"1", "0", "0", "0"}, "Killing"},
                  {"rotation_z", {"0", "0", "0", "1"}, "Killing"},
                  {"rotation_x", {"0", "0", "-sin(ph)", "-cos(th)/sin(th)*cos(ph)"}, "Killing"}}});
    return e;
  }();
  return entries;
}

inline const CatalogEntry& catalog_entry(const std::string& name) {
  for (const auto& e : catalog_entries())
    if (e.name == name) return e;
  throw ConfigError("unknown manifold '" + name + "'");
}

/// Builds a catalog metric, overriding default parameters where given.
inline MetricSpec catalog_metric(const std::string& name, const std::map<std::string, double>& overrides = {}) {
  const CatalogEntry& e = catalog_entry(name);
  std::map<std::string, double> params = e.parameters;
  for (const auto& [k, v] : overrides) {
    if (!params.count(k)) throw ConfigError("manifold '" + name + "' has no parameter '" + k + "'");
    params[k] = v;
  }
  return MetricSpec::from_strings(e.name, e.coordinates, params, e.metric, e.region, e.sample_box);
}

inline VectorFieldSpec catalog_field(const MetricSpec& m, const std::string& field) {
  for (const auto& f : catalog_entry(m.name).fields)
    if (f.name == field) return VectorFieldSpec::parse(f.components, m.symbols());
  throw ConfigError("manifold '" + m.name + "' has no example field '" + field + "'");
}

}  // namespace tlift
