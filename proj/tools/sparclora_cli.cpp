// sparclora: run scenario files and build FLR / power reports from their output.
//
//   sparclora run <file> [--seed N] [--out DIR]
//   sparclora report flr <dir>...
//   sparclora report power <dir> [--capacity-mah N] [--voltage V] [--events-per-day R]
//
// Exit codes: 0 ok, 2 parse error, 3 invalid scenario, 4 missing artifacts.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sparclora.hpp"

namespace fs = std::filesystem;
using namespace sparclora;

namespace {

enum Exit { kOk = 0, kParse = 2, kInvalid = 3, kMissing = 4 };

int exit_code(Errc code) {
  switch (code) {
    case Errc::parse_error: return kParse;
    case Errc::missing_artifact: return kMissing;
    default: return kInvalid;
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(Errc::missing_artifact, "cannot write " + path.string());
}

SimMetrics read_metrics(const fs::path& dir) {
  const fs::path path = dir / "metrics.txt";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::missing_artifact, "no metrics file at " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_metrics(buf.str());
}

int cmd_run(const std::string& file, std::optional<std::uint64_t> seed, const fs::path& out) {
  Scenario s = load_scenario(file);
  if (seed) s.seed = *seed;
  const SimResult r = run(s);
  const SimMetrics m = compute_metrics(s, r.trace);

  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(Errc::missing_artifact, "cannot create " + out.string());
  write_file(out / "trace.txt", format_trace(r.trace));
  write_file(out / "metrics.txt", format_metrics(m));
  write_file(out / "export.lp", r.store.export_lines());

  const auto t = m.totals();
  std::cout << s.name << ": " << r.scheduled << " interrupts, " << r.store.size()
            << " published, FLR " << format_percent(t) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPARC-LoRa network simulator"};
  app.require_subcommand(1);

  std::string scenario_file;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  auto* run_cmd = app.add_subcommand("run", "Run a scenario and write trace, metrics and export");
  run_cmd->add_option("file", scenario_file, "Scenario file")->required();
  run_cmd->add_option("--seed", seed, "Override the scenario seed");
  run_cmd->add_option("--out", out_dir, "Output directory")->capture_default_str();

  auto* report_cmd = app.add_subcommand("report", "Build reports from run directories");
  report_cmd->require_subcommand(1);

  std::vector<std::string> flr_dirs;
  auto* flr_cmd = report_cmd->add_subcommand("flr", "Frame loss ratio table");
  flr_cmd->add_option("dirs", flr_dirs, "Run output directories")->required();

  std::string power_dir;
  BatterySpec battery;
  double events_per_day = 10.0;
  auto* power_cmd = report_cmd->add_subcommand("power", "Energy and lifetime report");
  power_cmd->add_option("dir", power_dir, "Run output directory")->required();
  power_cmd->add_option("--capacity-mah", battery.capacity_mah, "Battery capacity")
      ->capture_default_str();
  power_cmd->add_option("--voltage", battery.voltage_v, "Battery voltage")->capture_default_str();
  power_cmd->add_option("--usable-fraction", battery.usable_fraction,
                        "Usable share of the capacity")
      ->capture_default_str();
  power_cmd->add_option("--events-per-day", events_per_day, "Report events per day")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kParse;
  }

  try {
    if (*run_cmd) return cmd_run(scenario_file, seed, out_dir);
    if (*flr_cmd) {
      std::vector<SimMetrics> runs;
      for (const auto& d : flr_dirs) runs.push_back(read_metrics(d));
      std::cout << format_flr_report(runs);
      return kOk;
    }
    if (*power_cmd) {
      std::cout << format_power_report(read_metrics(power_dir), battery, events_per_day);
      return kOk;
    }
  } catch (const ScenarioError& e) {
    std::cerr << scenario_file << ": " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  }
  return kOk;
}
