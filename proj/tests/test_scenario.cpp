#include <filesystem>
#include <fstream>
#include <sstream>

#include "bohm/error.hpp"
#include "bohm/scenario.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace bohm;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "bohmlab-tests" / name;
  fs::remove_all(p);
  return p;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("numbers may be products and quotients of pi") {
  CHECK(parse_number("0.25") == 0.25);
  CHECK(parse_number(" -3e-2 ") == -0.03);
  CHECK(parse_number("pi") == doctest::Approx(3.141592653589793));
  CHECK(parse_number("2*pi/400") == doctest::Approx(2 * 3.141592653589793 / 400));
  CHECK(parse_number("pi/2") == doctest::Approx(1.5707963267948966));
  CHECK_THROWS_AS(parse_number("two"), ValidationError);
  CHECK_THROWS_AS(parse_number("1/0"), ValidationError);
  CHECK_THROWS_AS(parse_number(""), ValidationError);
}

TEST_CASE("configs reject unknown sections and keys") {
  const std::string base = "[scenario]\nname = t\nexperiment = evolve\n";
  CHECK_NOTHROW(ScenarioConfig::parse(base));
  CHECK_THROWS_AS(ScenarioConfig::parse(base + "[bogus]\nx = 1\n"), ValidationError);
  CHECK_THROWS_AS(ScenarioConfig::parse(base + "[grid]\nwidth = 1\n"), ValidationError);
  CHECK_THROWS_AS(ScenarioConfig::parse("[scenario]\nname = t\nexperiment = magic\n"),
                  ValidationError);
  CHECK_THROWS_AS(ScenarioConfig::parse("[scenario]\nexperiment = evolve\n"), ValidationError);
  ScenarioConfig c = ScenarioConfig::parse(base);
  CHECK_THROWS_AS(c.set("grid", "nonsense", "1"), ValidationError);
  c.set("scenario", "seed", "99");
  CHECK(c.seed() == 99);
}

TEST_CASE("the shipped catalogue is alphabetized and valid") {
  const auto list = list_scenarios();
  REQUIRE(list.size() >= 2);
  for (std::size_t i = 1; i < list.size(); ++i) CHECK(list[i - 1].name < list[i].name);
  bool timeless = false, born = false;
  for (const auto& s : list) {
    timeless |= s.name == "timeless-rotor";
    born |= s.name == "born-statistics-25-75";
    CHECK_FALSE(s.description.empty());
    const ScenarioConfig c = ScenarioConfig::shipped(s.name);
    CHECK(c.name() == s.name);
    CHECK(to_string(c.kind()) == s.experiment);
    CHECK_NOTHROW(validate_scenario(c));
  }
  CHECK(timeless);
  CHECK(born);
  CHECK(describe_scenario("timeless-rotor").find("[numerics]") != std::string::npos);
  CHECK_THROWS_AS(describe_scenario("no-such-thing"), ValidationError);
}

TEST_CASE("a passing run writes a report and a hashed manifest") {
  const fs::path dir = scratch("pass");
  RunOptions o;
  o.out_dir = dir;
  const RunResult r = run_scenario(ScenarioConfig::shipped("velocity-check-product"), o);
  CHECK(r.exit_code == kExitPass);
  CHECK(r.status == "passed");
  const json report = read_json(dir / "report.json");
  CHECK(report["pass"] == true);
  CHECK(report["scenario"] == "velocity-check-product");
  CHECK_FALSE(report.contains("timestamp"));
  const json manifest = read_json(dir / "manifest.json");
  CHECK(manifest["exit_code"] == 0);
  CHECK(manifest.contains("timestamp"));
  for (const auto& a : manifest["artifacts"]) {
    const fs::path p = dir / a["path"].get<std::string>();
    CHECK(fs::exists(p));
    CHECK(a["bytes"].get<std::uintmax_t>() == fs::file_size(p));
    CHECK(a["sha256"].get<std::string>().size() == 64);
  }
  CHECK(std::find(r.artifacts.begin(), r.artifacts.end(), "report.json") != r.artifacts.end());
}

TEST_CASE("reports are byte-identical across runs") {
  RunOptions a, b;
  a.out_dir = scratch("repeat-a");
  b.out_dir = scratch("repeat-b");
  const ScenarioConfig c = ScenarioConfig::shipped("velocity-check-rotor");
  REQUIRE(run_scenario(c, a).exit_code == 0);
  REQUIRE(run_scenario(c, b).exit_code == 0);
  CHECK(slurp(*a.out_dir / "report.json") == slurp(*b.out_dir / "report.json"));
  CHECK(slurp(*a.out_dir / "points.csv") == slurp(*b.out_dir / "points.csv"));
}

TEST_CASE("a step that does not divide half the trajectory step is invalid") {
  ScenarioConfig c = ScenarioConfig::shipped("decoupled-free");
  c.set("numerics", "dt_time", "0.003");
  RunOptions o;
  o.out_dir = scratch("bad-dt");
  const RunResult r = run_scenario(c, o);
  CHECK(r.exit_code == kExitInvalid);
  CHECK(r.message.find("0.003") != std::string::npos);
  CHECK(r.message.find("0.05") != std::string::npos);
  const json manifest = read_json(*o.out_dir / "manifest.json");
  CHECK(manifest["status"] == "invalid");
  CHECK(manifest["exit_code"] == kExitInvalid);
}

TEST_CASE("non-positive tolerances are invalid") {
  ScenarioConfig c = ScenarioConfig::shipped("decoupled-free");
  c.set("tolerance", "deviation", "0");
  CHECK_THROWS_AS(validate_scenario(c), ValidationError);
}

TEST_CASE("an unmeetable tolerance fails the criterion") {
  ScenarioConfig c = ScenarioConfig::shipped("decoupled-free");
  c.set("tolerance", "deviation", "1e-30");
  RunOptions o;
  o.out_dir = scratch("unmeetable");
  const RunResult r = run_scenario(c, o);
  CHECK(r.exit_code == kExitCriterionFailed);
  const json report = read_json(*o.out_dir / "report.json");
  CHECK(report["pass"] == false);
  CHECK(read_json(*o.out_dir / "manifest.json")["status"] == "failed");
}

TEST_CASE("a numerical abort still writes its report") {
  ScenarioConfig c = ScenarioConfig::shipped("born-statistics-50-50");
  c.set("numerics", "shift_length", "2");
  c.set("numerics", "n", "200");
  RunOptions o;
  o.out_dir = scratch("abort");
  const RunResult r = run_scenario(c, o);
  CHECK(r.exit_code == kExitAborted);
  const json report = read_json(*o.out_dir / "report.json");
  CHECK(report["status"] == "aborted");
  CHECK(report.contains("error"));
  CHECK(read_json(*o.out_dir / "manifest.json")["status"] == "aborted");
}

TEST_CASE("unknown names and unreadable configs exit as invalid") {
  RunOptions o;
  o.out_dir = scratch("unknown");
  CHECK(run_scenario(std::string_view("definitely-not-shipped"), o).exit_code == kExitInvalid);
}
