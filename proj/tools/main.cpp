// Experiment runner for over-parameterized regression with anisotropic
// Gaussian designs. Subcommands:
//   run            execute one scenario from a JSON config
//   accept         run the acceptance suite (fast or full tier)
//   list-scenarios print the available scenario names
// Exit codes: 0 success, 1 acceptance/verdict failure, 2 configuration error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "anisoreg/anisoreg.hpp"

namespace {

std::filesystem::path default_out_dir() {
  if (const char* env = std::getenv("ANISOREG_OUT")) return env;
  return "anisoreg-out";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"anisoreg: over-parameterized regression experiments"};
  app.require_subcommand(1);

  // run
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed_override = 0;
  bool seed_set = false;
  int threads = 0;
  bool dump_samples = false;
  auto* run = app.add_subcommand("run", "run one scenario from a JSON config");
  run->add_option("--config", config_path, "path to the scenario config")->required();
  run->add_option("--seed", seed_override, "override the config seed")
      ->each([&](const std::string&) { seed_set = true; });
  run->add_option("--out", out_dir, "output directory (default: $ANISOREG_OUT or ./anisoreg-out)");
  run->add_option("--threads", threads, "worker threads (0 = logical cores)");
  run->add_flag("--dump-samples", dump_samples, "dump the first replicate's design to CSV");

  // accept
  std::string tier_name = "fast";
  std::uint64_t accept_seed = 1;
  int accept_threads = 0;
  std::string accept_out;
  auto* accept = app.add_subcommand("accept", "run the acceptance suite");
  accept->add_option("--tier", tier_name, "fast or full")
      ->check(CLI::IsMember({"fast", "full"}));
  accept->add_option("--seed", accept_seed, "suite seed");
  accept->add_option("--threads", accept_threads, "worker threads (0 = logical cores)");
  accept->add_option("--out", accept_out, "write the verdict JSON to this directory");

  auto* list = app.add_subcommand("list-scenarios", "print scenario names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (list->parsed()) {
      for (const auto& name : anisoreg::scenario_names()) std::cout << name << "\n";
      return 0;
    }

    if (run->parsed()) {
      anisoreg::ExperimentConfig cfg;
      try {
        cfg = anisoreg::load_config_file(config_path);
      } catch (const anisoreg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
      }
      if (seed_set) cfg.seed = seed_override;
      if (threads > 0) cfg.threads = threads;
      if (dump_samples) cfg.dump_design = true;

      const anisoreg::ScenarioReport rep = anisoreg::run_scenario(cfg);
      const std::filesystem::path base =
          out_dir.empty() ? default_out_dir() : std::filesystem::path(out_dir);
      const std::filesystem::path dir = anisoreg::report_directory(base, rep);
      anisoreg::write_report(rep, dir);

      std::cout << rep.scenario << " seed " << rep.seed << ": " << rep.checks.size()
                << " checks, " << (rep.all_passed() ? "all passed" : "FAILURES") << ", report "
                << (dir / "report.json").string() << "\n";
      for (const auto& ch : rep.checks)
        if (!ch.passed)
          std::cout << "  FAIL " << ch.id << ": measured " << anisoreg::fmt_double(ch.measured)
                    << " required " << anisoreg::fmt_double(ch.required) << "\n";
      return rep.all_passed() ? 0 : 1;
    }

    if (accept->parsed()) {
      const anisoreg::Tier tier =
          tier_name == "full" ? anisoreg::Tier::full : anisoreg::Tier::fast;
      const anisoreg::AcceptanceSummary summary =
          anisoreg::run_acceptance_suite(tier, accept_seed, accept_threads, std::cout);
      if (!accept_out.empty()) {
        std::filesystem::create_directories(accept_out);
        std::ofstream out(std::filesystem::path(accept_out) / "acceptance.json",
                          std::ios::binary);
        out << anisoreg::verdict_json(summary).dump(2) << "\n";
      }
      return summary.all_passed() ? 0 : 1;
    }
  } catch (const anisoreg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
