#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gjam/config.hpp"
#include "gjam/error.hpp"

using namespace gjam;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

auto has_code(ErrorCode code) {
  return Catch::Matchers::Predicate<Error>([code](const Error& e) { return e.code() == code; },
                                           "error code " + std::string(to_string(code)));
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gjam_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

// Runs the CLI with stdout and stderr captured into `log`; returns the exit code.
int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(GJAM_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kTinyPlan = R"({"format": "gjam-plan", "n_t": 2, "rows": [
  {"scenarios": ["1a"], "categories": ["None", "Chirp", "Multitone"], "powers_dbm": [6], "count": 4}]})";

}  // namespace

TEST_CASE("config defaults and round trip", "[config]") {
  const RunConfig c = parse_run_config(json{{"seed", 7}});
  CHECK(*c.seed == 7);
  CHECK(c.protocol == 1);
  CHECK(c.experiment.train.lr == 0.01);
  CHECK(c.experiment.train.batch_size == 32);
  CHECK_NOTHROW(validate(c));

  const RunConfig back = parse_run_config(to_json(c));
  CHECK(to_json(back) == to_json(c));

  const json custom = {{"seed", 3},
                       {"protocol", 4},
                       {"tasks", {"type", "power"}},
                       {"train", {{"epochs", 5}, {"batch_size", 8}}},
                       {"arch", {{"freq_pool", 16}, {"widths", {8, 16}}}},
                       {"split", {{"mode", "independent"}, {"holdout_key", "power"}, {"holdout_values", {8.0}}}},
                       {"members", 3},
                       {"reps", 2}};
  const RunConfig d = parse_run_config(custom);
  CHECK(d.experiment.train.epochs == 5);
  CHECK(d.experiment.arch.widths == std::vector<int>{8, 16});
  CHECK(d.experiment.split.mode == SplitMode::Independent);
  CHECK_NOTHROW(validate(d));
  CHECK(to_json(parse_run_config(to_json(d))) == to_json(d));
}

TEST_CASE("config rejects unknown keys, wrong types and bad values", "[config]") {
  CHECK_THROWS_MATCHES(parse_run_config(json{{"seed", 1}, {"sede", 2}}), Error, has_code(ErrorCode::ConfigInvalid));
  CHECK_THROWS_MATCHES(parse_run_config(json{{"seed", "seven"}}), Error, has_code(ErrorCode::ConfigInvalid));
  CHECK_THROWS_MATCHES(parse_run_config(json{{"train", {{"learning_rate", 0.1}}}}), Error,
                       has_code(ErrorCode::ConfigInvalid));
  CHECK_THROWS_MATCHES(parse_run_config(json::array()), Error, has_code(ErrorCode::ConfigInvalid));

  auto invalid = [](const json& j) {
    CHECK_THROWS_MATCHES(validate(parse_run_config(j)), Error, has_code(ErrorCode::ConfigInvalid));
  };
  invalid(json::object());  // no seed
  CHECK_THROWS_MATCHES(parse_run_config(json{{"seed", -1}}), Error, has_code(ErrorCode::ConfigInvalid));
  CHECK_THROWS_MATCHES(parse_run_config(json{{"seed", 1.5}}), Error, has_code(ErrorCode::ConfigInvalid));
  invalid({{"seed", 1}, {"protocol", 9}});
  invalid({{"seed", 1}, {"tasks", {"colour"}}});
  invalid({{"seed", 1}, {"train", {{"lr", -1.0}}}});
  invalid({{"seed", 1}, {"arch", {{"freq_pool", 3}}}});
  invalid({{"seed", 1}, {"split", {{"mode", "independent"}}}});
  invalid({{"seed", 1}, {"split", {{"test_fraction", 1.0}}}});
  invalid({{"seed", 1}, {"lengths", {0, 5}}});
  invalid({{"seed", 1}, {"lengths", {35}}});
  invalid({{"seed", 1}, {"scenarios", {"1c"}}});
  invalid({{"seed", 1}, {"members", 0}});
}

TEST_CASE("config files", "[config]") {
  const fs::path dir = scratch("cfgfile");
  CHECK_THROWS_MATCHES(load_run_config(dir / "absent.json"), Error, has_code(ErrorCode::DataMissing));
  spit(dir / "broken.json", "{\"seed\": ");
  CHECK_THROWS_MATCHES(load_run_config(dir / "broken.json"), Error, has_code(ErrorCode::ConfigInvalid));
  spit(dir / "ok.json", R"({"seed": 11, "reps": 3})");
  CHECK(load_run_config(dir / "ok.json").experiment.reps == 3);
  fs::remove_all(dir);
}

TEST_CASE("shipped configs parse", "[config]") {
  for (const auto& entry : fs::directory_iterator(GJAM_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    INFO(entry.path());
    const json j = json::parse(slurp(entry.path()));
    if (j.value("format", "") == "gjam-plan")
      CHECK_NOTHROW(load_plan(j));
    else
      CHECK_NOTHROW(parse_run_config(j));
  }
}

TEST_CASE("CLI help lists every flag", "[cli]") {
  const fs::path dir = scratch("help");
  REQUIRE(run_cli("--help", dir / "log") == 0);
  const std::string top = slurp(dir / "log");
  for (const char* cmd : {"synth", "train", "eval", "xscen", "ablate", "uncert"}) CHECK_THAT(top, Catch::Matchers::ContainsSubstring(cmd));

  REQUIRE(run_cli("eval --help", dir / "log") == 0);
  const std::string help = slurp(dir / "log");
  for (const char* flag : {"--config", "--seed", "--out", "--jobs", "--data", "--members", "--epochs", "--reps", "--protocol"})
    CHECK_THAT(help, Catch::Matchers::ContainsSubstring(flag));
  REQUIRE(run_cli("uncert --help", dir / "log") == 0);
  CHECK_THAT(slurp(dir / "log"), Catch::Matchers::ContainsSubstring("--checkpoints"));
  REQUIRE(run_cli("synth --help", dir / "log") == 0);
  CHECK_THAT(slurp(dir / "log"), Catch::Matchers::ContainsSubstring("--plan"));
  fs::remove_all(dir);
}

TEST_CASE("CLI exit codes", "[cli]") {
  const fs::path dir = scratch("codes");
  spit(dir / "plan.json", kTinyPlan);
  const std::string plan = (dir / "plan.json").string();
  CHECK(run_cli("synth --plan " + plan + " --seed 1 --bogus", dir / "log") == 2);
  CHECK(run_cli("", dir / "log") == 2);
  CHECK(run_cli("eval --protocol 9 --seed 1", dir / "log") == 2);
  CHECK(run_cli("synth --plan " + plan + " --out " + (dir / "a").string(), dir / "log") == 2);  // no seed
  CHECK_THAT(slurp(dir / "log"), Catch::Matchers::ContainsSubstring("seed"));
  spit(dir / "badplan.json", R"({"format": "gjam-plan", "rows": []})");
  CHECK(run_cli("synth --seed 1 --plan " + (dir / "badplan.json").string() + " --out " + (dir / "b").string(),
             dir / "log") == 2);
  CHECK(run_cli("train --seed 1 --data " + (dir / "nowhere").string() + " --out " + (dir / "c").string(), dir / "log") ==
        3);
  CHECK(run_cli("train --config " + (dir / "nothere.json").string(), dir / "log") == 3);
  spit(dir / "cfg.json", R"({"seed": 1, "tasks": ["colour"]})");
  CHECK(run_cli("train --config " + (dir / "cfg.json").string(), dir / "log") == 2);
  fs::remove_all(dir);
}

TEST_CASE("CLI runs are reproducible and self-describing", "[cli]") {
  const fs::path dir = scratch("repro");
  spit(dir / "plan.json", kTinyPlan);
  spit(dir / "cfg.json", R"({"tasks": ["type"], "train": {"epochs": 2, "batch_size": 4},
    "arch": {"freq_pool": 32, "stem_width": 4, "widths": [4, 8]}, "members": 2})");
  for (const char* run : {"r1", "r2"}) {
    const fs::path out = dir / run;
    REQUIRE(run_cli("synth --seed 7 --plan " + (dir / "plan.json").string() + " --out " + (out / "data").string(),
                 dir / "log") == 0);
    REQUIRE(run_cli("train --seed 7 --config " + (dir / "cfg.json").string() + " --data " + (out / "data").string() +
                     " --out " + (out / "model").string(),
                 dir / "log") == 0);
    REQUIRE(run_cli("uncert --seed 7 --config " + (dir / "cfg.json").string() + " --data " + (out / "data").string() +
                     " --checkpoints " + (out / "model").string() + " --out " + (out / "unc").string(),
                 dir / "log") == 0);
  }
  for (const char* file : {"data/records.gjam", "data/records.gjam.manifest.json",
                           "model/member_0.gjnn", "model/member_1.gjnn", "model/trace.csv", "unc/summary.csv",
                           "unc/uncertainty_type.csv"}) {
    INFO(file);
    REQUIRE(fs::exists(dir / "r1" / file));
    CHECK(slurp(dir / "r1" / file) == slurp(dir / "r2" / file));
  }
  CHECK(slurp(dir / "r1/model/member_0.gjnn") != slurp(dir / "r1/model/member_1.gjnn"));
  for (const char* sub : {"data", "model", "unc"}) {
    REQUIRE(fs::exists(dir / "r1" / sub / "version.json"));
    const json cfg = json::parse(slurp(dir / "r1" / sub / "resolved_config.json"));
    CHECK(cfg.at("seed") == 7);
    CHECK(cfg.contains("command"));
  }
  // The frozen config alone reproduces the dataset.
  json frozen = json::parse(slurp(dir / "r1/data/resolved_config.json"));
  frozen.erase("command");
  frozen["out"] = (dir / "r3").string();
  spit(dir / "frozen.json", frozen.dump());
  REQUIRE(run_cli("synth --config " + (dir / "frozen.json").string(), dir / "log") == 0);
  CHECK(slurp(dir / "r3/records.gjam") == slurp(dir / "r1/data/records.gjam"));
  fs::remove_all(dir);
}
