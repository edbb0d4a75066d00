#include "gjam/config.hpp"

#include <set>

#include "gjam/bytes.hpp"
#include "gjam/dataio.hpp"
#include "gjam/error.hpp"

namespace gjam {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, msg); }

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) invalid(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) invalid("unknown key '" + k + "' in " + where);
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    invalid(where + "." + key + " has the wrong type");
  }
}

template <class T>
void maybe(const json& j, const std::string& key, const std::string& where, T& into) {
  if (j.contains(key)) into = get<T>(j, key, where);
}

nnet::TrainConfig parse_train(const json& j) {
  check_keys(j, "train", {"lr", "weight_decay", "momentum", "epochs", "lr_milestones", "lr_factor", "batch_size",
                          "calibration_samples", "clip_norm"});
  nnet::TrainConfig t;
  maybe(j, "lr", "train", t.lr);
  maybe(j, "weight_decay", "train", t.weight_decay);
  maybe(j, "momentum", "train", t.momentum);
  maybe(j, "epochs", "train", t.epochs);
  maybe(j, "lr_milestones", "train", t.lr_milestones);
  maybe(j, "lr_factor", "train", t.lr_factor);
  maybe(j, "batch_size", "train", t.batch_size);
  maybe(j, "calibration_samples", "train", t.calibration_samples);
  maybe(j, "clip_norm", "train", t.clip_norm);
  return t;
}

nnet::Architecture parse_arch(const json& j) {
  check_keys(j, "arch", {"in_channels", "freq_pool", "stem_width", "widths"});
  nnet::Architecture a;
  maybe(j, "in_channels", "arch", a.in_channels);
  maybe(j, "freq_pool", "arch", a.freq_pool);
  maybe(j, "stem_width", "arch", a.stem_width);
  maybe(j, "widths", "arch", a.widths);
  return a;
}

SplitSpec parse_split(const json& j) {
  check_keys(j, "split", {"mode", "holdout_key", "holdout_values", "test_fraction"});
  SplitSpec s;
  if (j.contains("mode")) {
    try {
      s.mode = parse_split_mode(get<std::string>(j, "mode", "split"));
    } catch (const Error& e) {
      invalid(e.what());
    }
  }
  maybe(j, "holdout_key", "split", s.holdout_key);
  maybe(j, "holdout_values", "split", s.holdout_values);
  maybe(j, "test_fraction", "split", s.test_fraction);
  return s;
}

TaskOptions parse_task_options(const json& j) {
  check_keys(j, "task_options", {"power_levels", "bw_levels"});
  TaskOptions o;
  maybe(j, "power_levels", "task_options", o.power_levels);
  maybe(j, "bw_levels", "task_options", o.bw_levels);
  return o;
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  check_keys(j, "config",
             {"seed", "data", "plan", "out", "checkpoints", "protocol", "tasks", "task_options", "train", "arch",
              "split", "members", "reps", "jobs", "lengths", "truncate_at_test", "scenarios"});
  RunConfig c;
  ExperimentConfig& e = c.experiment;
  if (j.contains("seed")) {
    const json& s = j.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
      invalid("seed must be a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("data")) c.data = get<std::string>(j, "data", "config");
  if (j.contains("plan")) {
    c.plan = j.at("plan");
    if (!c.plan.is_object() && !c.plan.is_string()) invalid("plan must be an object or a file path");
  }
  if (j.contains("out")) c.out = get<std::string>(j, "out", "config");
  if (j.contains("checkpoints")) c.checkpoints = get<std::string>(j, "checkpoints", "config");
  maybe(j, "protocol", "config", c.protocol);
  maybe(j, "tasks", "config", e.tasks);
  if (j.contains("task_options")) e.task_options = parse_task_options(j.at("task_options"));
  if (j.contains("train")) e.train = parse_train(j.at("train"));
  if (j.contains("arch")) e.arch = parse_arch(j.at("arch"));
  if (j.contains("split")) e.split = parse_split(j.at("split"));
  maybe(j, "members", "config", e.members);
  maybe(j, "reps", "config", e.reps);
  maybe(j, "jobs", "config", e.threads);
  maybe(j, "lengths", "config", e.lengths);
  maybe(j, "truncate_at_test", "config", e.truncate_at_test);
  maybe(j, "scenarios", "config", e.scenarios);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& ex) {
    invalid(path.string() + ": " + ex.what());
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& c) {
  const ExperimentConfig& e = c.experiment;
  const nnet::TrainConfig& t = e.train;
  json j{{"data", c.data.string()},
         {"out", c.out.string()},
         {"checkpoints", c.checkpoints.string()},
         {"protocol", c.protocol},
         {"tasks", e.tasks},
         {"task_options", {{"power_levels", e.task_options.power_levels}, {"bw_levels", e.task_options.bw_levels}}},
         {"train",
          {{"lr", t.lr},
           {"weight_decay", t.weight_decay},
           {"momentum", t.momentum},
           {"epochs", t.epochs},
           {"lr_milestones", nnet::effective_milestones(t)},
           {"lr_factor", t.lr_factor},
           {"batch_size", t.batch_size},
           {"calibration_samples", t.calibration_samples},
           {"clip_norm", t.clip_norm}}},
         {"arch",
          {{"in_channels", e.arch.in_channels},
           {"freq_pool", e.arch.freq_pool},
           {"stem_width", e.arch.stem_width},
           {"widths", e.arch.widths}}},
         {"split",
          {{"mode", std::string(to_string(e.split.mode))},
           {"holdout_key", e.split.holdout_key},
           {"holdout_values", e.split.holdout_values},
           {"test_fraction", e.split.test_fraction}}},
         {"members", e.members},
         {"reps", e.reps},
         {"jobs", e.threads},
         {"lengths", e.lengths},
         {"truncate_at_test", e.truncate_at_test},
         {"scenarios", e.scenarios}};
  if (c.seed) j["seed"] = *c.seed;
  if (!c.plan.is_null()) j["plan"] = c.plan;
  return j;
}

void validate(const RunConfig& c) {
  const ExperimentConfig& e = c.experiment;
  if (!c.seed) invalid("a seed is required (--seed or \"seed\")");
  if (c.protocol < 1 || c.protocol > 8) invalid("protocol must be in 1..8");
  if (e.members < 1) invalid("members must be >= 1");
  if (e.reps < 1) invalid("reps must be >= 1");
  if (e.threads < 0) invalid("jobs must be >= 0");
  if (e.tasks.empty()) invalid("tasks must not be empty");
  for (const std::string& t : e.tasks) {
    try {
      make_task(t, e.task_options);
    } catch (const Error& ex) {
      invalid(ex.what());
    }
  }
  try {
    nnet::validate(e.train);
  } catch (const Error& ex) {
    invalid(ex.what());
  }
  if (e.arch.in_channels < 1 || e.arch.freq_pool < 1 || 1024 % e.arch.freq_pool != 0 || e.arch.stem_width < 1)
    invalid("arch: in_channels, freq_pool (a divisor of 1024) and stem_width must be positive");
  for (int w : e.arch.widths)
    if (w < 1) invalid("arch: widths must be positive");
  if (!(e.split.test_fraction > 0.0 && e.split.test_fraction < 1.0)) invalid("split.test_fraction must be in (0, 1)");
  if (e.split.mode == SplitMode::Independent && (e.split.holdout_key.empty() || e.split.holdout_values.empty()))
    invalid("independent split needs holdout_key and holdout_values");
  if (!e.split.holdout_key.empty()) {
    try {
      label_value(SnapshotRecord{}, e.split.holdout_key);
    } catch (const Error& ex) {
      invalid(ex.what());
    }
  }
  for (int len : e.lengths)
    if (len < 1 || len > kMaxSnapshotLength) invalid("lengths must lie in 1..34");
  for (const std::string& s : e.scenarios) {
    try {
      parse_scenario(s);
    } catch (const Error& ex) {
      invalid(ex.what());
    }
  }
}

GenerationPlan load_plan(const json& plan_or_path) {
  if (plan_or_path.is_object()) return GenerationPlan::from_json(plan_or_path);
  if (!plan_or_path.is_string()) invalid("plan must be an object or a file path");
  const std::filesystem::path path = plan_or_path.get<std::string>();
  const std::vector<std::uint8_t> bytes = read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& ex) {
    invalid(path.string() + ": " + ex.what());
  }
  return GenerationPlan::from_json(j);
}

}  // namespace gjam
