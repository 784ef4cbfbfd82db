#pragma once

// Declarative scenario runs: an INI-style config names an experiment, its
// grid, Hamiltonian, initial state, numerics and pass tolerances. Running a
// scenario writes report.json, CSV artifacts and a manifest with content
// hashes into one output directory.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bohm {

enum class ExperimentKind {
  evolve,
  trajectories,
  equilibrium,
  collapse,
  decoupled,
  timeless,
  velocity_check,
};
std::string to_string(ExperimentKind k);

class ScenarioConfig {
 public:
  // Throws ValidationError on syntax errors, unknown sections or keys, and
  // missing required entries.
  static ScenarioConfig parse(std::string_view text, std::string origin = "<string>");
  static ScenarioConfig load(const std::filesystem::path& path);
  // A shipped scenario by name; throws ValidationError when unknown.
  static ScenarioConfig shipped(std::string_view name);
  // An existing file path, otherwise a shipped scenario name.
  static ScenarioConfig resolve(std::string_view path_or_name);

  const std::string& name() const { return name_; }
  const std::string& description() const { return description_; }
  ExperimentKind kind() const { return kind_; }
  std::uint64_t seed() const { return seed_; }
  const std::string& text() const { return text_; }
  const std::string& origin() const { return origin_; }

  bool has(const std::string& section, const std::string& key) const;
  // Raw value of section.key, if present.
  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  // Replaces (or adds) a value; the key must be a known one.
  void set(const std::string& section, const std::string& key, std::string value);

 private:
  std::string name_;
  std::string description_;
  ExperimentKind kind_ = ExperimentKind::evolve;
  std::uint64_t seed_ = 1;
  std::string text_;
  std::string origin_;
  std::map<std::string, std::string> values_;  // "section.key" -> value

  void refresh();
};

// Parses a number or a product/quotient of numbers and `pi`, e.g. "2*pi/400".
double parse_number(std::string_view text);

struct ScenarioInfo {
  std::string name;
  std::string experiment;
  std::string description;
};

// Shipped scenarios, alphabetized by name.
std::vector<ScenarioInfo> list_scenarios();
// Human-readable summary followed by the full config text.
std::string describe_scenario(std::string_view name);

// Throws ValidationError if the config cannot be run as written (grid,
// Hamiltonian, initial state, step compatibility, tolerances). No numerics
// beyond state construction are performed.
void validate_scenario(const ScenarioConfig& config);

inline constexpr int kExitPass = 0;
inline constexpr int kExitCriterionFailed = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitAborted = 3;

struct RunOptions {
  // Run directory; defaults to default_output_root() / scenario name.
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  // Snapshot every K propagator steps (0: none); evolve and trajectories only.
  std::optional<std::size_t> snapshot_every;
};

struct RunResult {
  int exit_code = kExitPass;
  std::string status;  // passed | failed | aborted | invalid
  std::string message;
  std::filesystem::path out_dir;
  std::vector<std::string> artifacts;  // relative to out_dir, manifest excluded
};

// $BOHMLAB_OUT when set, otherwise "bohmlab-runs".
std::filesystem::path default_output_root();

// Never throws for scenario problems; they are mapped to exit codes and
// recorded in the manifest.
RunResult run_scenario(const ScenarioConfig& config, const RunOptions& options = {});
// Resolves the argument first; unparsable configs yield exit code 2.
RunResult run_scenario(std::string_view path_or_name, const RunOptions& options = {});

}  // namespace bohm
