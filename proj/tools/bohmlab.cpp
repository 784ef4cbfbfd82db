// bohmlab: run, list and describe scenarios.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "bohm/error.hpp"
#include "bohm/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Bohmian mechanics scenario runner"};
  app.require_subcommand(1);

  std::string target;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::optional<std::size_t> snapshot_every;

  CLI::App* run = app.add_subcommand("run", "Run a scenario file or shipped scenario");
  run->add_option("config", target, "Config file path or shipped scenario name")->required();
  run->add_option("--out", out_dir,
                  "Run directory (default: $BOHMLAB_OUT/<name> or bohmlab-runs/<name>)");
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--threads", threads, "Worker threads for trajectory ensembles")
      ->check(CLI::PositiveNumber);
  run->add_option("--snapshot-every", snapshot_every,
                  "Write a wave-function snapshot every K propagator steps");

  CLI::App* list = app.add_subcommand("list", "List shipped scenarios");
  CLI::App* describe = app.add_subcommand("describe", "Show a shipped scenario");
  std::string describe_name;
  describe->add_option("scenario", describe_name, "Scenario name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : bohm::kExitInvalid;
  }

  if (*list) {
    std::size_t width = 0;
    const auto all = bohm::list_scenarios();
    for (const auto& s : all) width = std::max(width, s.name.size());
    for (const auto& s : all) {
      std::cout << s.name << std::string(width + 2 - s.name.size(), ' ') << s.description
                << '\n';
    }
    return 0;
  }
  if (*describe) {
    try {
      std::cout << bohm::describe_scenario(describe_name);
      return 0;
    } catch (const bohm::Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return bohm::kExitInvalid;
    }
  }

  bohm::RunOptions opts;
  if (!out_dir.empty()) opts.out_dir = out_dir;
  opts.seed = seed;
  opts.threads = threads;
  opts.snapshot_every = snapshot_every;
  const bohm::RunResult r = bohm::run_scenario(target, opts);
  std::cout << r.status;
  if (!r.out_dir.empty()) std::cout << "  " << r.out_dir.string();
  std::cout << '\n';
  if (!r.message.empty()) std::cerr << r.message << '\n';
  return r.exit_code;
}
