// gjam: synthesize GNSS jammer datasets, train classifiers, run experiments.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gjam/bytes.hpp"
#include "gjam/config.hpp"
#include "gjam/dataio.hpp"
#include "gjam/error.hpp"
#include "gjam/eval.hpp"
#include "gjam/nnet/checkpoint.hpp"
#include "gjam/plot.hpp"
#include "gjam/rng.hpp"
#include "gjam/tasks.hpp"
#include "gjam/uncert.hpp"

#ifndef GJAM_VERSION
#define GJAM_VERSION "0.0.0"
#endif
#ifndef GJAM_GIT_REV
#define GJAM_GIT_REV "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gjam;

namespace {

// Seed streams for commands that train outside an eval protocol.
constexpr std::uint64_t kTrainOrderStream = 0x74726e6f;
constexpr std::uint64_t kTrainInitStream = 0x74726e69;
constexpr std::uint64_t kUncertSplitStream = 0x756e6373;

struct Flags {
  std::string config;
  std::string plan;
  std::string data;
  std::string out;
  std::string checkpoints;
  std::optional<std::uint64_t> seed;
  std::optional<int> protocol, reps, members, jobs, epochs;
};

void log(const std::string& msg) { std::fprintf(stderr, "[gjam] %s\n", msg.c_str()); }

RunConfig resolve(const Flags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (f.seed) c.seed = f.seed;
  if (!f.plan.empty()) c.plan = f.plan;
  if (!f.data.empty()) c.data = f.data;
  if (!f.out.empty()) c.out = f.out;
  if (!f.checkpoints.empty()) c.checkpoints = f.checkpoints;
  if (f.protocol) c.protocol = *f.protocol;
  if (f.reps) c.experiment.reps = *f.reps;
  if (f.members) c.experiment.members = *f.members;
  if (f.jobs) c.experiment.threads = *f.jobs;
  if (f.epochs) c.experiment.train.epochs = *f.epochs;
  validate(c);
  c.experiment.seed = *c.seed;
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// Frozen copy of the configuration plus a version stamp, beside the outputs.
void stamp(const RunConfig& c, const std::string& command) {
  fs::create_directories(c.out);
  json cfg = to_json(c);
  cfg["command"] = command;
  write_text(c.out / "resolved_config.json", cfg.dump(2) + "\n");
  const json version{{"name", "gjam"}, {"version", GJAM_VERSION}, {"git", GJAM_GIT_REV}};
  write_text(c.out / "version.json", version.dump(2) + "\n");
}

std::vector<SnapshotRecord> load_data(const RunConfig& c, DatasetManifest* manifest = nullptr) {
  if (c.data.empty()) throw Error(ErrorCode::ConfigInvalid, "no dataset given (--data or \"data\")");
  if (!fs::exists(c.data)) throw Error(ErrorCode::DataMissing, "dataset not found: " + c.data.string());
  std::vector<SnapshotRecord> records = open_dataset(c.data, manifest);
  log("loaded " + std::to_string(records.size()) + " records from " + c.data.string());
  return records;
}

std::vector<Task> tasks_of(const RunConfig& c) {
  std::vector<Task> tasks;
  for (const std::string& id : c.experiment.tasks) tasks.push_back(make_task(id, c.experiment.task_options));
  return tasks;
}

std::vector<std::size_t> every_index(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// ------------------------------------------------------------------ commands

void cmd_synth(RunConfig c) {
  if (c.plan.is_null()) throw Error(ErrorCode::ConfigInvalid, "synth needs a plan (--plan or \"plan\")");
  const GenerationPlan plan = load_plan(c.plan);
  c.plan = plan.to_json();
  stamp(c, "synth");
  log("synthesizing " + std::to_string(plan.total_count()) + " snapshots");
  const DatasetManifest m = synthesize_dataset(plan, *c.seed, c.out, c.experiment.threads);
  log("wrote " + (c.out / "records.gjam").string() + " (" + std::to_string(m.total) + " records, hash " +
      m.records_hash + ")");
}

void cmd_train(const RunConfig& c) {
  DatasetManifest manifest;
  const std::vector<SnapshotRecord> records = load_data(c, &manifest);
  stamp(c, "train");
  const std::vector<Task> tasks = tasks_of(c);
  const std::vector<std::size_t> idx = labeled_indices(records, tasks, every_index(records.size()));
  const nnet::LabeledSet set = make_labeled_set(records, idx, tasks);
  std::vector<nnet::TaskHead> heads;
  for (const Task& t : tasks) heads.push_back(t.head());
  nnet::TrainConfig tc = c.experiment.train;
  tc.seed = derive_seed(*c.seed, kTrainOrderStream);
  const std::uint64_t base = derive_seed(*c.seed, kTrainInitStream);
  log("training " + std::to_string(c.experiment.members) + " member(s) on " + std::to_string(set.size()) +
      " samples");
  std::vector<std::vector<nnet::EpochStats>> traces;
  const std::vector<nnet::Network> members =
      train_ensemble(set, heads, tc, c.experiment.members, base, c.experiment.arch, c.experiment.threads, &traces);
  std::string csv = "member,seed,epoch,lr,loss,train_accuracy\n";
  for (std::size_t k = 0; k < members.size(); ++k) {
    nnet::save_checkpoint(members[k], c.out / ("member_" + std::to_string(k) + ".gjnn"));
    for (const nnet::EpochStats& s : traces[k])
      csv += std::to_string(k) + "," + std::to_string(member_seed(base, static_cast<int>(k))) + "," +
             std::to_string(s.epoch) + "," + fixed(s.lr) + "," + fixed(s.loss) + "," + fixed(s.accuracy) + "\n";
  }
  write_text(c.out / "trace.csv", csv);
  std::vector<double> xs;
  std::vector<plot::Series> loss;
  for (std::size_t k = 0; k < traces.size(); ++k) {
    plot::Series s{"member " + std::to_string(k), {}, {}};
    for (const nnet::EpochStats& e : traces[k]) s.y.push_back(e.loss);
    loss.push_back(std::move(s));
  }
  for (const nnet::EpochStats& e : traces.front()) xs.push_back(e.epoch);
  plot::write_svg(c.out / "loss.svg", plot::line_chart("training loss", "epoch", "loss", xs, loss));
  log("wrote " + std::to_string(members.size()) + " checkpoint(s) to " + c.out.string());
}

void write_table_outputs(const ResultTable& t, const fs::path& out) {
  t.write_csv(out / "results.csv");
  const fs::path conf = out / "confusions";
  if (!t.confusions.empty()) {
    fs::create_directories(conf);
    t.write_confusions(conf);
    for (const auto& [key, cm] : t.confusions) {
      std::string name = key;
      for (char& ch : name)
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
      plot::write_svg(conf / ("confusion_" + name + ".svg"),
                      plot::confusion_chart(t.title + " " + key + " (% of row)", cm, t.class_names.at(key)));
    }
  }
  json meta = t.metadata;
  meta["title"] = t.title;
  write_text(out / "results.meta.json", meta.dump(2) + "\n");
}

void print_table(const ResultTable& t) {
  std::printf("%s\n", t.title.c_str());
  for (const ResultRow& r : t.rows)
    std::printf("  %-16s %-18s %-14s %10.4f +- %.4f  (n=%zu)\n", r.condition.c_str(), r.task.c_str(),
                r.metric.c_str(), r.mean(), r.std(), r.runs.size());
}

void write_matrix(const CrossMatrix& m, const fs::path& out) {
  write_cross_matrix_csv(m, out / "matrix.csv");
  CrossMatrix sd = m;
  sd.mean = m.std;
  write_cross_matrix_csv(sd, out / "matrix_std.csv");
  plot::write_svg(out / "matrix.svg", plot::heatmap("cross-scenario accuracy (%), rows = train, cols = test",
                                                    m.scenarios, m.scenarios, m.mean, 0.0, 100.0));
}

void write_sweep(const ResultTable& t, const std::vector<int>& lengths, const fs::path& out) {
  std::vector<double> xs(lengths.begin(), lengths.end());
  std::vector<std::pair<std::string, std::string>> keys;
  for (const ResultRow& r : t.rows)
    if (std::find(keys.begin(), keys.end(), std::make_pair(r.task, r.metric)) == keys.end())
      keys.emplace_back(r.task, r.metric);
  for (const auto& [task, metric] : keys) {
    plot::Series s{task + " " + metric, {}, {}};
    for (int len : lengths) {
      const ResultRow* r = t.find("n_t=" + std::to_string(len), task, metric);
      s.y.push_back(r ? r->mean() : 0.0);
      s.err.push_back(r ? r->std() : 0.0);
    }
    plot::write_svg(out / ("curve_" + task + "_" + metric + ".svg"),
                    plot::line_chart(task + " " + metric + " vs snapshot length", "snapshot length N_t",
                                     metric, xs, {s}));
  }
}

void cmd_eval(const RunConfig& c) {
  const std::vector<SnapshotRecord> records = load_data(c);
  stamp(c, "eval");
  log("protocol " + std::to_string(c.protocol) + " (" + protocol_name(c.protocol) + "), " +
      std::to_string(c.experiment.reps) + " repetition(s)");
  if (c.protocol == 7) {
    const CrossMatrix m = cross_scenario_matrix(records, c.experiment);
    ResultTable t = cross_matrix_table(m);
    t.title = protocol_name(7);
    write_table_outputs(t, c.out);
    write_matrix(m, c.out);
    print_table(t);
    return;
  }
  const ResultTable t = run_protocol(c.protocol, records, c.experiment);
  write_table_outputs(t, c.out);
  if (c.protocol == 8) write_sweep(t, c.experiment.lengths, c.out);
  print_table(t);
}

void cmd_xscen(RunConfig c) {
  c.protocol = 7;
  const std::vector<SnapshotRecord> records = load_data(c);
  stamp(c, "xscen");
  const CrossMatrix m = cross_scenario_matrix(records, c.experiment);
  write_matrix(m, c.out);
  ResultTable t = cross_matrix_table(m);
  print_table(t);
}

void cmd_ablate(RunConfig c) {
  c.protocol = 8;
  const std::vector<SnapshotRecord> records = load_data(c);
  stamp(c, "ablate");
  const ResultTable t = snapshot_length_sweep(records, c.experiment);
  t.write_csv(c.out / "sweep.csv");
  write_sweep(t, c.experiment.lengths, c.out);
  print_table(t);
}

std::vector<nnet::Network> load_members(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::DataMissing, "checkpoint directory not found: " + dir.string());
  std::vector<nnet::Network> members;
  for (int k = 0;; ++k) {
    const fs::path p = dir / ("member_" + std::to_string(k) + ".gjnn");
    if (!fs::exists(p)) break;
    members.push_back(nnet::load_checkpoint(p));
  }
  if (members.empty()) throw Error(ErrorCode::DataMissing, "no member_<k>.gjnn in " + dir.string());
  return members;
}

void cmd_uncert(RunConfig c) {
  const std::vector<SnapshotRecord> records = load_data(c);
  std::vector<nnet::Network> members;
  std::vector<std::size_t> test;
  std::vector<Task> tasks;
  if (!c.checkpoints.empty()) {
    members = load_members(c.checkpoints);
    for (const nnet::HeadLayer& h : members.front().heads()) tasks.push_back(make_task(h.desc.id, c.experiment.task_options));
    c.experiment.tasks.clear();
    for (const Task& t : tasks) c.experiment.tasks.push_back(t.id);
    c.experiment.members = static_cast<int>(members.size());
    stamp(c, "uncert");
    test = labeled_indices(records, tasks, every_index(records.size()));
  } else {
    stamp(c, "uncert");
    tasks = tasks_of(c);
    const std::vector<std::size_t> cand = labeled_indices(records, tasks, every_index(records.size()));
    SplitSpec spec = c.experiment.split;
    spec.seed = derive_seed(*c.seed, kUncertSplitStream);
    const Split split = make_split(records, cand, tasks.front(), spec);
    test = split.test;
    std::vector<nnet::TaskHead> heads;
    for (const Task& t : tasks) heads.push_back(t.head());
    nnet::TrainConfig tc = c.experiment.train;
    tc.seed = derive_seed(*c.seed, kTrainOrderStream);
    log("training " + std::to_string(c.experiment.members) + " member(s)");
    members = train_ensemble(make_labeled_set(records, split.train, tasks), heads, tc, c.experiment.members,
                             derive_seed(*c.seed, kTrainInitStream), c.experiment.arch, c.experiment.threads);
  }
  std::vector<const Spectrogram*> grids;
  for (std::size_t i : test) grids.push_back(&records[i].spectrogram);
  const EnsembleOutput out = ensemble_predict(members, grids, {}, c.experiment.threads);
  std::string summary = "task,n,accuracy,mean_aleatoric,mean_epistemic\n";
  for (std::size_t h = 0; h < tasks.size(); ++h) {
    if (tasks[h].kind != nnet::HeadKind::Classification) continue;
    std::vector<int> truths;
    std::vector<UncertaintyReport> reports;
    std::vector<double> alea, epi;
    for (std::size_t k = 0; k < test.size(); ++k) {
      truths.push_back(static_cast<int>(tasks[h].target(records[test[k]])));
      reports.push_back(decompose(out.heads[h].samples[k]));
      alea.push_back(reports.back().aleatoric_trace());
      epi.push_back(reports.back().epistemic_trace());
    }
    const std::string id = tasks[h].id;
    write_uncertainty_csv(c.out / ("uncertainty_" + id + ".csv"), truths, out.heads[h].labels, reports);
    const int nc = tasks[h].n_c;
    const std::vector<double> ca = confusion_uncertainty(truths, out.heads[h].labels, alea, nc);
    const std::vector<double> ce = confusion_uncertainty(truths, out.heads[h].labels, epi, nc);
    std::string csv = "true,pred,count,aleatoric,epistemic\n";
    const ConfusionMatrix cm = confusion(out.heads[h].labels, truths, nc);
    for (int t = 0; t < nc; ++t)
      for (int p = 0; p < nc; ++p)
        csv += tasks[h].class_names[t] + "," + tasks[h].class_names[p] + "," + std::to_string(cm.at(t, p)) + "," +
               fixed(ca[t * nc + p]) + "," + fixed(ce[t * nc + p]) + "\n";
    write_text(c.out / ("confusion_uncertainty_" + id + ".csv"), csv);
    auto hi_of = [](const std::vector<double>& v) {
      double m = 1e-12;
      for (double x : v) m = std::max(m, x);
      return m;
    };
    plot::write_svg(c.out / ("aleatoric_" + id + ".svg"),
                    plot::heatmap(id + ": mean aleatoric trace by (true, pred)", tasks[h].class_names,
                                  tasks[h].class_names, ca, 0.0, hi_of(ca), "%.3f"));
    plot::write_svg(c.out / ("epistemic_" + id + ".svg"),
                    plot::heatmap(id + ": mean epistemic trace by (true, pred)", tasks[h].class_names,
                                  tasks[h].class_names, ce, 0.0, hi_of(ce), "%.3f"));
    plot::write_svg(c.out / ("confusion_" + id + ".svg"),
                    plot::confusion_chart(id + " (% of row)", cm, tasks[h].class_names));
    summary += id + "," + std::to_string(test.size()) + "," + fixed(accuracy(out.heads[h].labels, truths)) + "," +
               fixed(mean_of(alea)) + "," + fixed(mean_of(epi)) + "\n";
  }
  write_text(c.out / "summary.csv", summary);
  std::printf("%s", summary.c_str());
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::PlanInvalid:
      return 2;
    case ErrorCode::DataMissing:
      return 3;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthesize GNSS jammer spectrogram datasets, train residual CNN classifiers and run experiments."};
  app.set_version_flag("--version", std::string(GJAM_VERSION) + " (" + GJAM_GIT_REV + ")");
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON run configuration");
    sub->add_option("--seed", f.seed, "master seed (required here or in the config)");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--jobs", f.jobs, "worker thread cap (0 = all cores)")->check(CLI::NonNegativeNumber);
  };
  auto with_data = [&](CLI::App* sub) { sub->add_option("--data", f.data, "dataset directory or record file"); };
  auto with_training = [&](CLI::App* sub) {
    sub->add_option("--members", f.members, "ensemble size")->check(CLI::PositiveNumber);
    sub->add_option("--epochs", f.epochs, "training epochs")->check(CLI::PositiveNumber);
  };
  auto with_reps = [&](CLI::App* sub) {
    sub->add_option("--reps", f.reps, "repetitions per condition")->check(CLI::PositiveNumber);
  };

  CLI::App* synth = app.add_subcommand("synth", "synthesize a dataset from a generation plan");
  common(synth);
  synth->add_option("--plan", f.plan, "generation plan JSON file");

  CLI::App* train = app.add_subcommand("train", "train an ensemble and write checkpoints");
  common(train);
  with_data(train);
  with_training(train);

  CLI::App* eval = app.add_subcommand("eval", "run one evaluation protocol (1..8)");
  common(eval);
  with_data(eval);
  with_training(eval);
  with_reps(eval);
  eval->add_option("--protocol", f.protocol, "protocol number")->check(CLI::Range(1, 8));

  CLI::App* xscen = app.add_subcommand("xscen", "cross-scenario accuracy matrix");
  common(xscen);
  with_data(xscen);
  with_training(xscen);
  with_reps(xscen);

  CLI::App* ablate = app.add_subcommand("ablate", "snapshot-length sweep");
  common(ablate);
  with_data(ablate);
  with_training(ablate);
  with_reps(ablate);

  CLI::App* uncert = app.add_subcommand("uncert", "ensemble uncertainty decomposition");
  common(uncert);
  with_data(uncert);
  with_training(uncert);
  uncert->add_option("--checkpoints", f.checkpoints, "directory of member_<k>.gjnn from `train`");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const RunConfig c = resolve(f);
    if (synth->parsed()) cmd_synth(c);
    if (train->parsed()) cmd_train(c);
    if (eval->parsed()) cmd_eval(c);
    if (xscen->parsed()) cmd_xscen(c);
    if (ablate->parsed()) cmd_ablate(c);
    if (uncert->parsed()) cmd_uncert(c);
  } catch (const Error& e) {
    std::fprintf(stderr, "gjam: %s\n", e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gjam: %s\n", e.what());
    return 1;
  }
  return 0;
}
