// Command-line front end: run config tasks, list the manifold catalog.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tlift/runner.hpp"

namespace fs = std::filesystem;
using namespace tlift::cli;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::string out_dir;
  std::string format = "text";
};

bool write_file(const fs::path& path, const std::string& contents) {
  std::ofstream os(path, std::ios::binary);
  os << contents;
  return static_cast<bool>(os);
}

int run(const Flags& f, bool integrate_only) {
  std::ifstream in(f.config, std::ios::binary);
  if (!in) {
    std::cerr << "tlift: cannot read config '" << f.config << "'\n";
    return kConfigError;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string raw = buf.str();

  RunOptions opts;
  opts.seed = f.seed;
  opts.tol = f.tol;
  opts.integrate_only = integrate_only;
  const RunResult r = run_config_text(raw, opts);
  if (r.exit_code == kConfigError) {
    std::cerr << "tlift: config error: " << r.message << "\n";
    return kConfigError;
  }

  std::string dir = f.out_dir;
  if (dir.empty()) {
    const Json cfg = Json::parse(raw);
    dir = cfg.contains("output") && cfg["output"].contains("dir") ? cfg["output"]["dir"].get<std::string>()
                                                                  : "tlift-out";
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    std::cerr << "tlift: cannot create output directory '" << dir << "': " << ec.message() << "\n";
    return kConfigError;
  }

  bool io_ok = true;
  Json all = Json::array();
  for (const TaskOutcome& o : r.tasks) {
    const std::string stem = report_stem(o);
    io_ok = write_file(fs::path(dir) / (stem + ".json"), o.report.dump(2) + "\n") && io_ok;
    io_ok = write_file(fs::path(dir) / (stem + ".txt"), render_text(o)) && io_ok;
    for (const OutputFile& file : o.files) io_ok = write_file(fs::path(dir) / file.name, file.contents) && io_ok;
    all.push_back(o.report);
    if (f.format == "text") std::cout << render_text(o);
  }
  io_ok = write_file(fs::path(dir) / "summary.json", r.summary.dump(2) + "\n") && io_ok;
  if (!io_ok) std::cerr << "tlift: failed to write some output files under '" << dir << "'\n";

  if (f.format == "json") {
    Json out = r.summary;
    out["reports"] = all;
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << "exit " << r.exit_code << " (reports in " << dir << ")\n";
  }
  return r.exit_code;
}

void add_run_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("config", f.config, "JSON configuration file")->required();
  cmd->add_option("--seed", f.seed, "Override the sampling seed");
  cmd->add_option("--tol", f.tol, "Override every verification tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--out-dir", f.out_dir, "Directory for reports and trajectory files");
  cmd->add_option("--format", f.format, "Console output format")->check(CLI::IsMember({"text", "json"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tlift: transport lifts and symmetries of geodesic sprays"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Flags run_flags, integrate_flags;
  bool catalog_json_out = false;
  CLI::App* run_cmd = app.add_subcommand("run", "Run every task of a configuration");
  add_run_flags(run_cmd, run_flags);
  CLI::App* integrate_cmd = app.add_subcommand("integrate", "Run only the integrate tasks of a configuration");
  add_run_flags(integrate_cmd, integrate_flags);
  CLI::App* catalog_cmd = app.add_subcommand("catalog", "List the built-in manifolds");
  catalog_cmd->add_flag("--json", catalog_json_out, "Print the catalog as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*run_cmd) return run(run_flags, false);
    if (*integrate_cmd) return run(integrate_flags, true);
    if (catalog_json_out)
      std::cout << catalog_json().dump(2) << "\n";
    else
      std::cout << catalog_text();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "tlift: " << e.what() << "\n";
    return kNumericalFailure;
  }
}
