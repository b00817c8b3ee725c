#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "wot/error.hpp"
#include "wot/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitJobFailed = 1;
constexpr int kExitConfig = 2;

void print_outcome(const wot::RunOutcome& outcome) {
  for (const auto& job : outcome.jobs) {
    std::cout << job.status << "\t" << job.name << "\t" << job.kind;
    if (!job.error.empty()) std::cout << "\t" << job.error;
    std::cout << "\n";
  }
  std::cout << "manifest: " << (outcome.out_dir / "manifest.json").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monge-Ampere transport experiments on Gaussian sections of Wiener space", "wiener-ot"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", wot::tool_version());

  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int jobs = 1;
  app.add_option("--seed", seed, "Override the config seed")->type_name("INT");
  app.add_option("--jobs", jobs, "Run up to N independent jobs concurrently")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "Output directory (overrides output_dir)")->type_name("DIR");

  std::string config_path, run_dir;
  auto* run = app.add_subcommand("run", "Execute every job of a config");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  auto* compare = app.add_subcommand("compare", "Execute only the oracle-compare jobs of a config");
  compare->add_option("config", config_path, "Experiment config (JSON)")->required();
  auto* report = app.add_subcommand("report", "Summarize a finished run directory");
  report->add_option("dir", run_dir, "Run directory holding manifest.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*report) {
      const auto text = wot::report_run(run_dir);
      std::cout << text;
      return text.rfind("PASS 100%", 0) == 0 ? kExitOk : kExitJobFailed;
    }
    const auto config = wot::load_config(config_path);
    wot::RunOptions options;
    if (seed) options.seed = *seed;
    if (out) options.out_dir = *out;
    options.jobs = jobs;
    options.compare_only = static_cast<bool>(*compare);
    const auto outcome = wot::run_experiment(config, options);
    print_outcome(outcome);
    return outcome.exit_code == 0 ? kExitOk : kExitJobFailed;
  } catch (const wot::Error& e) {
    std::cerr << "wiener-ot: " << e.what() << "\n";
    if (e.code() == wot::Errc::ConfigInvalid || e.code() == wot::Errc::ManifestMissing) return kExitConfig;
    return kExitJobFailed;
  } catch (const std::exception& e) {
    std::cerr << "wiener-ot: " << e.what() << "\n";
    return kExitJobFailed;
  }
}
