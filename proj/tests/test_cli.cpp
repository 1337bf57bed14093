#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "tlift/runner.hpp"

using namespace tlift::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string config(const std::string& name) { return slurp(fs::path(TLIFT_CONFIG_DIR) / name); }

RunResult run_file(const std::string& name, RunOptions opts = {}) { return run_config_text(config(name), opts); }

int shell(const std::string& cmd) {
  const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tlift_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Hash, Fnv1aVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(hex64(0xabcull), "0000000000000abc");
}

TEST(Run, SphereBracketsPass) {
  const RunResult r = run_file("sphere_brackets.json");
  ASSERT_EQ(r.exit_code, kPass) << r.message;
  ASSERT_EQ(r.tasks.size(), 1u);
  const Json& rep = r.tasks[0].report;
  EXPECT_EQ(rep["tool"], "tlift");
  EXPECT_EQ(rep["version"], kVersion);
  EXPECT_EQ(rep["config_hash"], "fnv1a64:" + hex64(fnv1a(config("sphere_brackets.json"))));
  EXPECT_EQ(rep["seed"], 42);
  EXPECT_EQ(rep["tolerance"], 1e-10);
  EXPECT_EQ(rep["points"], 100);
  for (const char* k : {"vertical_vertical", "horizontal_vertical", "horizontal_horizontal"})
    EXPECT_LT(rep["results"][k].get<double>(), 1e-10) << k;
  EXPECT_NE(r.tasks[0].text.find("max residual"), std::string::npos);
}

TEST(Run, ConfigErrors) {
  EXPECT_EQ(run_file("unknown_manifold.json").exit_code, kConfigError);
  EXPECT_NE(run_file("unknown_manifold.json").message.find("torus7"), std::string::npos);
  const char* bad[] = {
      "{not json",
      "[]",
      R"J({"manifold": "sphere2"})J",
      R"J({"manifold": "sphere2", "tasks": []})J",
      R"J({"manifold": "sphere2", "tasks": [{"type": "frobnicate"}]})J",
      R"J({"manifold": "sphere2", "tasks": [{"type": "classify", "field": "nope"}]})J",
      R"J({"manifold": "sphere2", "tasks": [{"type": "classify", "field": ["sin(th", "0"]}]})J",
      R"J({"manifold": "sphere2", "tasks": [{"type": "classify", "field": ["1", "0", "0"]}]})J",
      R"J({"manifold": "sphere2", "tasks": [{"type": "classify", "field": "rotation_z", "expect": {"kiling": true}}]})J",
      R"J({"manifold": "sphere2", "tasks": [{"type": "check-dynamical", "lift": {"kind": "sideways"}}]})J",
      R"J({"manifold": "sphere2", "tasks": [{"type": "check-dynamical", "lift": {"kind": "iwai", "field": "rotation_z"}}]})J",
      R"J({"manifold": "sphere2", "sampling": {"seed": -1}, "tasks": [{"type": "verify-brackets"}]})J",
      R"J({"manifold": "sphere2", "sampling": {"box": [[0, 1]]}, "tasks": [{"type": "verify-brackets"}]})J",
      R"J({"manifold": "sphere2", "fields": {"f": {"type": "spinor"}}, "tasks": [{"type": "verify-brackets"}]})J",
      R"J({"manifold": "sphere2", "tasks": [{"type": "integrate", "geodesic": true,
          "start": {"x": [1, 0], "p": [1, 0]}, "span": [1, 0]}]})J",
      R"J({"manifold": {"coordinates": ["u"], "metric": [["1 +"]]}, "tasks": [{"type": "verify-brackets"}]})J",
  };
  for (const char* text : bad) {
    const RunResult r = run_config_text(text, {});
    EXPECT_EQ(r.exit_code, kConfigError) << text;
    EXPECT_FALSE(r.message.empty()) << text;
    EXPECT_TRUE(r.tasks.empty()) << text;
  }
}

TEST(Run, ConfigErrorBeforeAnyTaskRuns) {
  // The second task is broken: nothing runs, even though the first is valid.
  const RunResult r = run_config_text(
      R"J({"manifold": "sphere2", "tasks": [{"type": "verify-brackets"}, {"type": "classify"}]})J", {});
  EXPECT_EQ(r.exit_code, kConfigError);
  EXPECT_TRUE(r.tasks.empty());
}

TEST(Run, NonSymmetryRecordsViolatingPoint) {
  const RunResult r = run_file("non_symmetry.json");
  ASSERT_EQ(r.exit_code, kVerificationFailure);
  const Json& res = r.tasks[0].report["results"];
  EXPECT_GT(res["max_residual"].get<double>(), 1e-3);
  ASSERT_TRUE(res.contains("worst_point"));
  EXPECT_EQ(res["worst_point"]["x"].size(), 2u);
  EXPECT_EQ(r.tasks[0].report["status"], "fail");
  EXPECT_NE(r.tasks[0].text.find("violating point"), std::string::npos);
}

TEST(Run, InlineManifoldAndDeclaredFields) {
  const char* text = R"J({
    "manifold": {"name": "warped", "coordinates": ["u", "v"], "parameters": {"a": 0.5},
                 "metric": [["1", "0"], ["0", "exp(2*a*u)"]], "region": [],
                 "sample_box": [[-1, 1], [-1, 1]]},
    "fields": {"dv": {"type": "vector", "components": ["0", "1"]},
               "mixed": {"type": "vector", "components": ["1", "-a*v"]}},
    "sampling": {"count": 40},
    "tasks": [
      {"type": "verify-brackets"},
      {"type": "classify", "field": "dv", "expect": {"killing": true}},
      {"type": "classify", "field": "mixed", "expect": {"killing": true}},
      {"type": "check-dynamical", "lift": {"kind": "complete", "field": "mixed"}}
    ]})J";
  const RunResult r = run_config_text(text, {});
  ASSERT_EQ(r.exit_code, kPass) << r.message;
  EXPECT_EQ(r.tasks[0].report["manifold"], "warped");
  EXPECT_EQ(r.tasks[0].report["points"], 40);
}

TEST(Run, TransportExpressionsAndLiftKinds) {
  const char* text = R"J({
    "manifold": "euclidean2",
    "fields": {"w": {"type": "tensor2", "components": [["0", "-1"], ["1", "0"]]},
               "s": {"type": "scalar", "expression": "x"}},
    "tasks": [
      {"type": "check-matter", "lift": {"kind": "matter", "field": "rotation",
        "transport": [{"explicit": "w", "coef": 2}, {"skew_nabla": "projective"}]}},
      {"type": "check-dynamical", "lift": {"kind": "dynamical", "field": "projective", "psi": "2*x"},
       "psi": "2*x"},
      {"type": "check-dynamical", "lift": {"kind": "iwai", "field": "dilation", "psi": 1}},
      {"type": "verify-atl-algebra", "count": 10, "lifts": [
        {"kind": "general", "field": "rotation", "transport": {"scalar": "s"}, "offset": ["1", "y"]},
        {"kind": "vertical_tensor", "transport": [["x", "1"], ["0", "y"]]}]}
    ]})J";
  const RunResult r = run_config_text(text, {});
  ASSERT_EQ(r.exit_code, kPass) << r.message;
  EXPECT_EQ(r.tasks[1].report["lift"], "dynamical");
  EXPECT_LT(r.tasks[1].report["results"]["conditions"]["projective_residual"].get<double>(), 1e-12);
  EXPECT_EQ(r.tasks[3].report["random_pairs"], false);
}

TEST(Run, MatterLiftWithSymmetricTransportFails) {
  const RunResult r = run_config_text(
      R"J({"manifold": "euclidean2", "tasks": [{"type": "check-matter",
          "lift": {"kind": "matter", "field": "rotation", "transport": [["1", "0"], ["0", "1"]]}}]})J",
      {});
  EXPECT_EQ(r.exit_code, kVerificationFailure);
  EXPECT_GT(r.tasks[0].report["results"]["lift"]["max_symmetric_part"].get<double>(), 0.5);
}

TEST(Run, CoincidenceFailsForNonHomotheticField) {
  // x^2 d_x on the plane is neither homothetic nor a dynamical symmetry: consistent.
  const RunResult r = run_config_text(
      R"J({"manifold": "euclidean2", "tasks": [{"type": "check-matter", "coincidence_field": ["x^2", "0"]}]})J", {});
  ASSERT_EQ(r.exit_code, kPass) << r.message;
  const Json& c = r.tasks[0].report["results"]["coincidence"];
  EXPECT_FALSE(c["homothetic"].get<bool>());
  EXPECT_FALSE(c["dynamical"].get<bool>());
  EXPECT_GT(c["max_residual"].get<double>(), 1e-3);
}

TEST(Run, OverridesTakePrecedence) {
  RunOptions opts;
  opts.seed = 9;
  opts.tol = 1e-3;
  const RunResult r = run_file("full_suite.json", opts);
  ASSERT_EQ(r.exit_code, kPass) << r.message;
  for (const auto& t : r.tasks) {
    EXPECT_EQ(t.report["seed"], 9);
    if (t.report.contains("tolerance")) {
      EXPECT_EQ(t.report["tolerance"], 1e-3) << t.type;
    }
  }
  const RunResult base = run_file("full_suite.json");
  EXPECT_EQ(base.tasks[0].report["tolerance"], 1e-10);
  EXPECT_EQ(base.tasks[2].report["tolerance"], 1e-8);
  EXPECT_NE(base.tasks[0].report["results"].dump(), r.tasks[0].report["results"].dump());
}

TEST(Run, TaskToleranceBeatsConfigTolerance) {
  const RunResult r = run_config_text(
      R"J({"manifold": "euclidean2", "tolerances": {"verify-brackets": 1e-6},
          "tasks": [{"type": "verify-brackets", "tol": 1e-4}, {"type": "verify-brackets"}]})J",
      {});
  EXPECT_EQ(r.tasks[0].report["tolerance"], 1e-4);
  EXPECT_EQ(r.tasks[1].report["tolerance"], 1e-6);
}

TEST(Run, ImpossibleToleranceIsAVerificationFailure) {
  RunOptions opts;
  opts.tol = 1e-300;
  EXPECT_EQ(run_file("non_symmetry.json", opts).exit_code, kVerificationFailure);
}

TEST(Integrate, SphereHolonomyScenario) {
  const RunResult r = run_file("sphere_holonomy.json");
  ASSERT_EQ(r.exit_code, kPass) << r.message;
  const Json& res = r.tasks[0].report["results"];
  EXPECT_NEAR(res["holonomy_rotation"].get<double>(), std::numbers::pi, 1e-6);
  EXPECT_FALSE(res["left_region"].get<bool>());
  EXPECT_LT(res["max_norm_drift"].get<double>(), 1e-9);
  ASSERT_EQ(r.tasks[0].files.size(), 1u);
  EXPECT_EQ(r.tasks[0].files[0].name, "sphere_holonomy.csv");
  EXPECT_EQ(r.tasks[0].files[0].contents.substr(0, 20), "sigma,x0,x1,p0,p1,gp");
}

TEST(Integrate, FlatGeodesicEndpoint) {
  const RunResult r = run_file("flat_geodesic.json");
  ASSERT_EQ(r.exit_code, kPass) << r.message;
  const Json& end = r.tasks[0].report["results"]["endpoint"];
  EXPECT_NEAR(end["x"][0].get<double>(), 0.1 + 2.0 * 1.0, 1e-12);
  EXPECT_NEAR(end["x"][1].get<double>(), 0.2 + 2.0 * -0.5, 1e-12);
}

TEST(Integrate, SkewTransportDrift) {
  const RunResult r = run_file("skew_transport.json");
  ASSERT_EQ(r.exit_code, kPass) << r.message;
  EXPECT_LT(r.tasks[0].report["results"]["max_norm_drift"].get<double>(), 1e-9);
  EXPECT_LT(r.tasks[0].report["results"]["max_covariant_rate_residual"].get<double>(), 1e-12);
}

TEST(Integrate, RegionExitIsNumericalFailureWithPartialCsv) {
  const RunResult r = run_file("schwarzschild_infall.json");
  ASSERT_EQ(r.exit_code, kNumericalFailure);
  const Json& res = r.tasks[0].report["results"];
  EXPECT_TRUE(res["left_region"].get<bool>());
  EXPECT_LT(res["sigma_end"].get<double>(), 20.0);
  EXPECT_GT(res["endpoint"]["x"][1].get<double>(), 2.0);
  ASSERT_EQ(r.tasks[0].files.size(), 1u);
  EXPECT_GT(std::count(r.tasks[0].files[0].contents.begin(), r.tasks[0].files[0].contents.end(), '\n'), 10);
}

TEST(Integrate, StartOutsideRegionIsNumericalFailure) {
  const RunResult r = run_config_text(
      R"J({"manifold": "schwarzschild", "tasks": [{"type": "integrate", "geodesic": true,
          "start": {"x": [0, 1.5, 1.5, 0], "p": [1, 0, 0, 0]}, "span": [0, 1]}]})J",
      {});
  EXPECT_EQ(r.exit_code, kNumericalFailure);
  EXPECT_EQ(r.tasks[0].report["status"], "error");
}

TEST(Integrate, IntegrateOnlySkipsOtherTasks) {
  RunOptions opts;
  opts.integrate_only = true;
  const RunResult r = run_file("full_suite.json", opts);
  ASSERT_EQ(r.exit_code, kPass) << r.message;
  ASSERT_EQ(r.tasks.size(), 1u);
  EXPECT_EQ(r.tasks[0].type, "integrate");
  EXPECT_EQ(report_stem(r.tasks[0]), "06_integrate");
  EXPECT_EQ(run_file("sphere_brackets.json", opts).exit_code, kConfigError);
}

TEST(Determinism, SameSeedSameReports) {
  const RunResult a = run_file("full_suite.json"), b = run_file("full_suite.json");
  ASSERT_EQ(a.tasks.size(), b.tasks.size());
  for (std::size_t i = 0; i < a.tasks.size(); ++i) {
    EXPECT_EQ(a.tasks[i].report.dump(2), b.tasks[i].report.dump(2));
    EXPECT_EQ(render_text(a.tasks[i]), render_text(b.tasks[i]));
  }
}

TEST(Catalog, TextAndJsonAgree) {
  const std::string text = catalog_text();
  const Json j = catalog_json();
  for (const char* name : {"sphere2", "schwarzschild", "minkowski4", "euclidean-polar"}) {
    EXPECT_NE(text.find(name), std::string::npos) << name;
    EXPECT_TRUE(std::any_of(j.begin(), j.end(), [&](const Json& e) { return e["name"] == name; })) << name;
  }
  EXPECT_NE(text.find("M=1"), std::string::npos);
  for (const auto& e : j) {
    EXPECT_NE(text.find(e["name"].get<std::string>() + " (n = " + std::to_string(e["dimension"].get<int>()) + ")"),
              std::string::npos);
    for (const auto& f : e["fields"]) EXPECT_NE(text.find(f["name"].get<std::string>()), std::string::npos);
  }
  const auto schw = std::find_if(j.begin(), j.end(), [](const Json& e) { return e["name"] == "schwarzschild"; });
  EXPECT_EQ((*schw)["parameters"]["M"], 1.0);
  EXPECT_FALSE((*schw)["region"].empty());
}

TEST(Binary, ExitCodesAndFiles) {
  const std::string cli = TLIFT_CLI_PATH;
  const std::string dir = TLIFT_CONFIG_DIR;
  const fs::path out = scratch("exit");
  EXPECT_EQ(shell(cli + " run " + dir + "/sphere_brackets.json --out-dir " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "00_verify-brackets.json"));
  EXPECT_TRUE(fs::exists(out / "00_verify-brackets.txt"));
  EXPECT_TRUE(fs::exists(out / "summary.json"));
  EXPECT_EQ(shell(cli + " run " + dir + "/non_symmetry.json --out-dir " + out.string()), 1);
  EXPECT_EQ(shell(cli + " run " + dir + "/unknown_manifold.json --out-dir " + out.string()), 2);
  EXPECT_EQ(shell(cli + " run " + dir + "/does_not_exist.json"), 2);
  EXPECT_EQ(shell(cli + " run " + dir + "/sphere_brackets.json --format xml"), 2);
  EXPECT_EQ(shell(cli + " frobnicate"), 2);
  EXPECT_EQ(shell(cli + " integrate " + dir + "/schwarzschild_infall.json --out-dir " + out.string()), 3);
  EXPECT_TRUE(fs::exists(out / "infall.csv"));
  EXPECT_EQ(shell(cli + " catalog"), 0);
  EXPECT_EQ(shell(cli + " catalog --json"), 0);
  fs::remove_all(out);
}

TEST(Binary, ByteIdenticalRuns) {
  const std::string cli = TLIFT_CLI_PATH;
  const std::string cfg = std::string(TLIFT_CONFIG_DIR) + "/full_suite.json";
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  ASSERT_EQ(shell(cli + " run " + cfg + " --seed 5 --out-dir " + a.string()), 0);
  ASSERT_EQ(shell(cli + " run " + cfg + " --seed 5 --out-dir " + b.string()), 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path();
  }
  EXPECT_EQ(files, 7u * 2u + 2u);  // json + txt per task, one csv, summary
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Run, SamplerRejectionCapIsNumericalFailure) {
  const RunResult r = run_config_text(
      R"J({"manifold": "sphere2", "sampling": {"box": [[-1, -0.5], [0, 1]]}, "tasks": [{"type": "verify-brackets"}]})J",
      {});
  EXPECT_EQ(r.exit_code, kNumericalFailure);
  EXPECT_NE(r.tasks[0].report["error"].get<std::string>().find("rejected"), std::string::npos);
}
