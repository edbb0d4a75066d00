#include "gjam/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <set>

#include <omp.h>

#include "gjam/error.hpp"
#include "gjam/rng.hpp"
#include "gjam/uncert.hpp"

namespace gjam {

namespace {

void check_pair(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorCode::LengthMismatch, "predictions and truths differ in length");
  if (a == 0) throw Error(ErrorCode::Empty, "no samples");
}

std::string fmt(double v, const char* f = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

double accuracy(std::span<const int> preds, std::span<const int> truths) {
  check_pair(preds.size(), truths.size());
  std::size_t ok = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) ok += preds[i] == truths[i];
  return 100.0 * static_cast<double>(ok) / static_cast<double>(preds.size());
}

double weighted_f2(std::span<const int> preds, std::span<const int> truths, int n_classes) {
  check_pair(preds.size(), truths.size());
  const ConfusionMatrix cm = confusion(preds, truths, n_classes);
  double score = 0.0;
  for (int k = 0; k < n_classes; ++k) {
    const double support = static_cast<double>(cm.row_sum(k));
    if (support == 0.0) continue;
    const double tp = static_cast<double>(cm.at(k, k));
    double predicted = 0.0;
    for (int t = 0; t < n_classes; ++t) predicted += static_cast<double>(cm.at(t, k));
    const double p = predicted > 0.0 ? tp / predicted : 0.0;
    const double r = tp / support;
    const double f2 = p + r > 0.0 ? 5.0 * p * r / (4.0 * p + r) : 0.0;
    score += support * f2;
  }
  return score / static_cast<double>(preds.size());
}

double mae(std::span<const double> preds, std::span<const double> truths) {
  check_pair(preds.size(), truths.size());
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) s += std::abs(preds[i] - truths[i]);
  return s / static_cast<double>(preds.size());
}

std::uint64_t ConfusionMatrix::row_sum(int truth) const {
  std::uint64_t s = 0;
  for (int p = 0; p < c; ++p) s += at(truth, p);
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (std::uint64_t v : cells) s += v;
  return s;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t s = 0;
  for (int k = 0; k < c; ++k) s += at(k, k);
  return s;
}

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> truths, int n_classes) {
  if (preds.size() != truths.size()) throw Error(ErrorCode::LengthMismatch, "predictions and truths differ in length");
  if (n_classes < 1) throw Error(ErrorCode::InvalidSpec, "n_classes must be >= 1");
  ConfusionMatrix cm{n_classes, std::vector<std::uint64_t>(static_cast<std::size_t>(n_classes) * n_classes, 0)};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || preds[i] >= n_classes || truths[i] < 0 || truths[i] >= n_classes)
      throw Error(ErrorCode::InvalidSpec, "class index out of range");
    ++cm.cells[static_cast<std::size_t>(truths[i]) * n_classes + preds[i]];
  }
  return cm;
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return std::nan("");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double population_std(std::span<const double> v) {
  if (v.empty()) return std::nan("");
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

std::string_view to_string(SplitMode m) {
  switch (m) {
    case SplitMode::Dependent:
      return "dependent";
    case SplitMode::Independent:
      return "independent";
    case SplitMode::Random:
      return "random";
  }
  return "?";
}

SplitMode parse_split_mode(std::string_view s) {
  if (s == "dependent") return SplitMode::Dependent;
  if (s == "independent") return SplitMode::Independent;
  if (s == "random") return SplitMode::Random;
  throw Error(ErrorCode::InvalidSpec, "unknown split mode '" + std::string(s) + "'");
}

double label_value(const SnapshotRecord& r, std::string_view key) {
  if (key == "power") return r.power_dbm;
  if (key == "bandwidth") return r.bandwidth_mhz;
  if (key == "position") return r.position_id;
  if (key == "area") return r.area_id;
  if (key == "category") return static_cast<double>(r.category);
  if (key == "angle") return r.angle_deg;
  if (key == "scenario") {
    const auto& all = all_scenarios();
    return static_cast<double>(std::find(all.begin(), all.end(), r.scenario) - all.begin());
  }
  throw Error(ErrorCode::InvalidSpec, "unknown label key '" + std::string(key) + "'");
}

namespace {

bool in_values(double v, const std::vector<double>& values) {
  for (double h : values)
    if (std::abs(v - h) < 1e-6) return true;
  return false;
}

}  // namespace

Split make_split(const std::vector<SnapshotRecord>& records, const std::vector<std::size_t>& candidates,
                 const Task& stratify, const SplitSpec& spec) {
  if (candidates.empty()) throw Error(ErrorCode::DegenerateSplit, "nothing to split");
  Split s;
  if (spec.mode == SplitMode::Independent) {
    if (spec.holdout_key.empty() || spec.holdout_values.empty())
      throw Error(ErrorCode::InvalidSpec, "independent split needs a holdout key and values");
    std::set<double> seen;
    for (std::size_t i : candidates) {
      const double v = label_value(records.at(i), spec.holdout_key);
      if (in_values(v, spec.holdout_values)) {
        s.test.push_back(i);
        seen.insert(v);
      } else {
        s.train.push_back(i);
      }
    }
    for (double h : spec.holdout_values) {
      bool present = false;
      for (double v : seen) present = present || std::abs(v - h) < 1e-6;
      if (!present) throw Error(ErrorCode::DegenerateSplit, "holdout value " + fmt(h, "%g") + " absent from data");
    }
    for (std::size_t i : s.train)
      if (in_values(label_value(records[i], spec.holdout_key), spec.holdout_values))
        throw Error(ErrorCode::DegenerateSplit, "holdout value leaked into training set");
  } else {
    if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
      throw Error(ErrorCode::InvalidSpec, "test_fraction must be in (0, 1)");
    const bool by_key = spec.mode == SplitMode::Dependent && !spec.holdout_key.empty();
    std::map<std::pair<double, double>, std::vector<std::size_t>> strata;
    for (std::size_t i : candidates) {
      const double t = stratify.target(records.at(i));
      strata[{std::isnan(t) ? -1.0 : t, by_key ? label_value(records[i], spec.holdout_key) : 0.0}].push_back(i);
    }
    Rng rng(spec.seed);
    for (auto& [key, idx] : strata) {
      for (std::size_t k = idx.size(); k > 1; --k) std::swap(idx[k - 1], idx[rng.below(k)]);
      const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(idx.size())));
      s.test.insert(s.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
      s.train.insert(s.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    }
  }
  if (s.train.empty() || s.test.empty()) throw Error(ErrorCode::DegenerateSplit, "split leaves one side empty");
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

void ResultTable::add(const std::string& condition, const std::string& task, const std::string& metric, double value) {
  for (ResultRow& r : rows)
    if (r.condition == condition && r.task == task && r.metric == metric) {
      r.runs.push_back(value);
      return;
    }
  rows.push_back({condition, task, metric, {value}});
}

const ResultRow* ResultTable::find(const std::string& condition, const std::string& task,
                                   const std::string& metric) const {
  for (const ResultRow& r : rows)
    if (r.condition == condition && r.task == task && r.metric == metric) return &r;
  return nullptr;
}

std::string ResultTable::to_csv() const {
  std::string out = "condition,task,metric,runs,mean,std,values\n";
  for (const ResultRow& r : rows) {
    out += r.condition + "," + r.task + "," + r.metric + "," + std::to_string(r.runs.size()) + "," + fmt(r.mean()) +
           "," + fmt(r.std()) + ",";
    for (std::size_t i = 0; i < r.runs.size(); ++i) out += (i ? ";" : "") + fmt(r.runs[i]);
    out += "\n";
  }
  return out;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot create " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::DiskFull, "write failed: " + path.string());
}

std::string safe_name(std::string s) {
  for (char& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
  return s;
}

}  // namespace

void ResultTable::write_csv(const std::filesystem::path& path) const { write_text(path, to_csv()); }

void ResultTable::write_confusions(const std::filesystem::path& dir) const {
  for (const auto& [key, cm] : confusions) {
    std::string text = "true\\pred";
    const auto names = class_names.find(key);
    auto name = [&](int k) {
      if (names != class_names.end() && static_cast<std::size_t>(k) < names->second.size()) return names->second[k];
      return std::to_string(k);
    };
    for (int p = 0; p < cm.c; ++p) text += "," + name(p);
    text += "\n";
    for (int t = 0; t < cm.c; ++t) {
      text += name(t);
      for (int p = 0; p < cm.c; ++p) text += "," + std::to_string(cm.at(t, p));
      text += "\n";
    }
    write_text(dir / ("confusion_" + safe_name(key) + ".csv"), text);
  }
}

namespace {

std::uint64_t rep_seed(const ExperimentConfig& cfg, std::uint64_t purpose, int rep) {
  return derive_seed(derive_seed(cfg.seed, purpose), static_cast<std::uint64_t>(rep));
}

constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kOrderStream = 2;
constexpr std::uint64_t kInitStream = 3;

std::vector<Task> make_tasks(const std::vector<std::string>& ids, const TaskOptions& opt) {
  if (ids.empty()) throw Error(ErrorCode::InvalidSpec, "no tasks given");
  std::vector<Task> tasks;
  for (const std::string& id : ids) tasks.push_back(make_task(id, opt));
  return tasks;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

struct Evaluated {
  std::vector<std::vector<int>> truths, preds;  // per task (classification)
  std::vector<std::vector<double>> vtruths, vpreds;  // per task (regression)
};

std::vector<nnet::Network> fit(const std::vector<SnapshotRecord>& records, const std::vector<std::size_t>& idx,
                               const std::vector<Task>& tasks, const ExperimentConfig& cfg, int rep, int threads) {
  std::vector<nnet::TaskHead> heads;
  for (const Task& t : tasks) heads.push_back(t.head());
  const nnet::LabeledSet set = make_labeled_set(records, idx, tasks);
  nnet::TrainConfig tc = cfg.train;
  tc.seed = rep_seed(cfg, kOrderStream, rep);
  return train_ensemble(set, heads, tc, cfg.members, rep_seed(cfg, kInitStream, rep), cfg.arch, threads);
}

Evaluated evaluate(const std::vector<nnet::Network>& members, const std::vector<SnapshotRecord>& records,
                   const std::vector<std::size_t>& idx, const std::vector<Task>& tasks, int threads) {
  std::vector<const Spectrogram*> grids;
  for (std::size_t i : idx) grids.push_back(&records.at(i).spectrogram);
  const EnsembleOutput out = ensemble_predict(members, grids, {}, threads);
  Evaluated e;
  e.truths.resize(tasks.size());
  e.preds.resize(tasks.size());
  e.vtruths.resize(tasks.size());
  e.vpreds.resize(tasks.size());
  for (std::size_t h = 0; h < tasks.size(); ++h)
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double t = tasks[h].target(records[idx[k]]);
      if (tasks[h].kind == nnet::HeadKind::Classification) {
        e.truths[h].push_back(static_cast<int>(t));
        e.preds[h].push_back(out.heads[h].labels[k]);
      } else {
        e.vtruths[h].push_back(t);
        e.vpreds[h].push_back(out.heads[h].values[k]);
      }
    }
  return e;
}

void record_metrics(const Evaluated& e, const std::vector<Task>& tasks, const std::string& condition,
                    ResultTable& table) {
  for (std::size_t h = 0; h < tasks.size(); ++h) {
    const Task& t = tasks[h];
    if (t.kind == nnet::HeadKind::Classification) {
      table.add(condition, t.id, "accuracy", accuracy(e.preds[h], e.truths[h]));
      table.add(condition, t.id, "f2", 100.0 * weighted_f2(e.preds[h], e.truths[h], t.n_c));
      const ConfusionMatrix cm = confusion(e.preds[h], e.truths[h], t.n_c);
      const std::string key = condition + "/" + t.id;
      auto it = table.confusions.find(key);
      if (it == table.confusions.end()) {
        table.confusions[key] = cm;
        table.class_names[key] = t.class_names;
      } else {
        for (std::size_t i = 0; i < cm.cells.size(); ++i) it->second.cells[i] += cm.cells[i];
      }
    } else {
      table.add(condition, t.id, "mae", mae(e.vpreds[h], e.vtruths[h]));
    }
  }
}

void merge(ResultTable& into, const ResultTable& part) {
  for (const ResultRow& r : part.rows)
    for (double v : r.runs) into.add(r.condition, r.task, r.metric, v);
  for (const auto& [key, cm] : part.confusions) {
    auto it = into.confusions.find(key);
    if (it == into.confusions.end()) {
      into.confusions[key] = cm;
      into.class_names[key] = part.class_names.at(key);
    } else {
      for (std::size_t i = 0; i < cm.cells.size(); ++i) it->second.cells[i] += cm.cells[i];
    }
  }
}

// Runs body(rep, partial_table) for every repetition, spread over threads, and
// merges the partial tables in repetition order.
template <class F>
void for_each_rep(const ExperimentConfig& cfg, ResultTable& table, F&& body) {
  if (cfg.reps < 1) throw Error(ErrorCode::InvalidSpec, "reps must be >= 1");
  std::vector<ResultTable> parts(static_cast<std::size_t>(cfg.reps));
  std::vector<std::exception_ptr> errors(parts.size());
  const int nthreads = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(nthreads)
  for (int r = 0; r < cfg.reps; ++r) {
    try {
      body(r, parts[static_cast<std::size_t>(r)]);
    } catch (...) {
      errors[static_cast<std::size_t>(r)] = std::current_exception();
    }
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
  for (const ResultTable& p : parts) merge(table, p);
}

// Inner parallelism only when repetitions do not already occupy the threads.
int inner_threads(const ExperimentConfig& cfg) {
  const int nthreads = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();
  return cfg.reps >= nthreads ? 1 : nthreads;
}

}  // namespace

void run_repetition(const std::vector<SnapshotRecord>& train_records, const std::vector<std::size_t>& train_idx,
                    const std::vector<SnapshotRecord>& test_records, const std::vector<std::size_t>& test_idx,
                    const std::vector<Task>& tasks, const ExperimentConfig& cfg, int rep,
                    const std::string& condition, ResultTable& table) {
  const int threads = inner_threads(cfg);
  const auto members = fit(train_records, train_idx, tasks, cfg, rep, threads);
  record_metrics(evaluate(members, test_records, test_idx, tasks, threads), tasks, condition, table);
}

ResultTable run_tasks(const std::vector<SnapshotRecord>& records, const std::vector<std::string>& task_ids,
                      const ExperimentConfig& cfg, const std::string& condition, ResultTable table) {
  const std::vector<Task> tasks = make_tasks(task_ids, cfg.task_options);
  const std::vector<std::size_t> candidates = labeled_indices(records, tasks, all_indices(records.size()));
  if (candidates.empty())
    throw Error(ErrorCode::MissingLabel, "no record carries labels for tasks of condition '" + condition + "'");
  for_each_rep(cfg, table, [&](int rep, ResultTable& part) {
    SplitSpec spec = cfg.split;
    spec.seed = rep_seed(cfg, kSplitStream, rep);
    const Split split = make_split(records, candidates, tasks.front(), spec);
    run_repetition(records, split.train, records, split.test, tasks, cfg, rep, condition, part);
  });
  return table;
}

CrossMatrix cross_scenario_matrix(const std::vector<SnapshotRecord>& records, const ExperimentConfig& cfg) {
  CrossMatrix m;
  if (cfg.scenarios.empty())
    for (ScenarioId s : all_scenarios()) m.scenarios.push_back(to_string(s));
  else
    m.scenarios = cfg.scenarios;
  const std::size_t k = m.scenarios.size();
  std::vector<std::vector<std::size_t>> by_scenario(k);
  for (std::size_t i = 0; i < records.size(); ++i)
    for (std::size_t s = 0; s < k; ++s)
      if (to_string(records[i].scenario) == m.scenarios[s]) by_scenario[s].push_back(i);
  for (std::size_t s = 0; s < k; ++s)
    if (by_scenario[s].empty()) throw Error(ErrorCode::MissingScenario, "no samples for scenario " + m.scenarios[s]);
  if (cfg.reps < 1) throw Error(ErrorCode::InvalidSpec, "reps must be >= 1");

  const std::vector<Task> tasks{make_task("type", cfg.task_options)};
  const int jobs = static_cast<int>(k) * cfg.reps;
  std::vector<std::vector<double>> cell_runs(static_cast<std::size_t>(jobs));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  const int nthreads = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(nthreads)
  for (int job = 0; job < jobs; ++job) {
    try {
      const std::size_t i = static_cast<std::size_t>(job / cfg.reps);
      const int rep = job % cfg.reps;
      SplitSpec spec;
      spec.mode = SplitMode::Random;
      spec.test_fraction = cfg.split.test_fraction;
      spec.seed = derive_seed(rep_seed(cfg, kSplitStream, rep), i);
      const Split split = make_split(records, by_scenario[i], tasks.front(), spec);
      const auto members = fit(records, split.train, tasks, cfg, rep, 1);
      std::vector<double>& row = cell_runs[static_cast<std::size_t>(job)];
      for (std::size_t j = 0; j < k; ++j) {
        const Evaluated e = evaluate(members, records, j == i ? split.test : by_scenario[j], tasks, 1);
        row.push_back(accuracy(e.preds[0], e.truths[0]));
      }
    } catch (...) {
      errors[static_cast<std::size_t>(job)] = std::current_exception();
    }
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
  m.mean.assign(k * k, 0.0);
  m.std.assign(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<double> v;
      for (int rep = 0; rep < cfg.reps; ++rep) v.push_back(cell_runs[i * cfg.reps + rep][j]);
      m.mean[i * k + j] = mean_of(v);
      m.std[i * k + j] = population_std(v);
    }
  return m;
}

ResultTable snapshot_length_sweep(const std::vector<SnapshotRecord>& records, const ExperimentConfig& cfg) {
  if (cfg.lengths.empty()) throw Error(ErrorCode::InvalidSpec, "no snapshot lengths given");
  int stored = kMaxSnapshotLength;
  for (const SnapshotRecord& r : records) stored = std::min(stored, r.spectrogram.n_t);
  for (int len : cfg.lengths)
    if (len < 1 || len > stored)
      throw Error(ErrorCode::InvalidSpec, "snapshot length " + std::to_string(len) + " outside 1.." +
                                              std::to_string(stored));
  ResultTable table;
  table.title = "snapshot length";
  if (!cfg.truncate_at_test) {
    for (int len : cfg.lengths) {
      const std::vector<SnapshotRecord> cut = truncate_records(records, len);
      table = run_tasks(cut, cfg.tasks, cfg, "n_t=" + std::to_string(len), std::move(table));
    }
    return table;
  }
  const std::vector<Task> tasks = make_tasks(cfg.tasks, cfg.task_options);
  const std::vector<std::size_t> candidates = labeled_indices(records, tasks, all_indices(records.size()));
  std::vector<std::vector<SnapshotRecord>> cuts;
  for (int len : cfg.lengths) cuts.push_back(truncate_records(records, len));
  for_each_rep(cfg, table, [&](int rep, ResultTable& part) {
    SplitSpec spec = cfg.split;
    spec.seed = rep_seed(cfg, kSplitStream, rep);
    const Split split = make_split(records, candidates, tasks.front(), spec);
    const int threads = inner_threads(cfg);
    const auto members = fit(records, split.train, tasks, cfg, rep, threads);
    for (std::size_t l = 0; l < cfg.lengths.size(); ++l)
      record_metrics(evaluate(members, cuts[l], split.test, tasks, threads), tasks,
                     "n_t=" + std::to_string(cfg.lengths[l]), part);
  });
  return table;
}

std::string protocol_name(int protocol) {
  switch (protocol) {
    case 1:
      return "interference type";
    case 2:
      return "signal power";
    case 3:
      return "bandwidth";
    case 4:
      return "dependent vs independent split";
    case 5:
      return "antenna area";
    case 6:
      return "position";
    case 7:
      return "cross-scenario";
    case 8:
      return "snapshot length";
    default:
      throw Error(ErrorCode::InvalidSpec, "protocol must be 1..8");
  }
}

ResultTable cross_matrix_table(const CrossMatrix& m) {
  ResultTable t;
  t.title = "cross-scenario";
  const std::size_t k = m.scenarios.size();
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      ResultRow r{"train=" + m.scenarios[i], "type", "accuracy@" + m.scenarios[j], {m.mean[i * k + j]}};
      t.rows.push_back(r);
    }
  return t;
}

void write_cross_matrix_csv(const CrossMatrix& m, const std::filesystem::path& path) {
  std::string text = "train\\test";
  for (const std::string& s : m.scenarios) text += "," + s;
  text += "\n";
  const std::size_t k = m.scenarios.size();
  for (std::size_t i = 0; i < k; ++i) {
    text += m.scenarios[i];
    for (std::size_t j = 0; j < k; ++j) text += "," + fmt(m.mean[i * k + j], "%.4f");
    text += "\n";
  }
  write_text(path, text);
}

ResultTable run_protocol(int protocol, const std::vector<SnapshotRecord>& records, const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  ResultTable table;
  table.title = protocol_name(protocol);
  const std::string second = cfg.tasks.size() > 1 ? cfg.tasks[1] : "";
  switch (protocol) {
    case 1:
      cfg.split.mode = SplitMode::Random;
      table = run_tasks(records, {"type"}, cfg, "random", std::move(table));
      break;
    case 2:
      cfg.split.mode = SplitMode::Dependent;
      cfg.split.holdout_key = "power";
      table = run_tasks(records, {"type", "power"}, cfg, "dependent", std::move(table));
      break;
    case 3:
      cfg.split.mode = SplitMode::Dependent;
      cfg.split.holdout_key = "bandwidth";
      table = run_tasks(records, {"type", "bw"}, cfg, "regression", std::move(table));
      table = run_tasks(records, {"type", "bw_class"}, cfg, "classification", std::move(table));
      break;
    case 4: {
      const std::string task2 = second.empty() ? "power" : second;
      if (cfg.split.holdout_key.empty()) cfg.split.holdout_key = "power";
      if (cfg.split.holdout_values.empty()) cfg.split.holdout_values = {8.0};
      cfg.split.mode = SplitMode::Dependent;
      table = run_tasks(records, {"type", task2}, cfg, "dependent", std::move(table));
      cfg.split.mode = SplitMode::Independent;
      table = run_tasks(records, {"type", task2}, cfg, "independent", std::move(table));
      break;
    }
    case 5:
      cfg.split.mode = SplitMode::Random;
      table = run_tasks(records, {"type", "area"}, cfg, "random", std::move(table));
      break;
    case 6:
      cfg.split.mode = SplitMode::Random;
      for (const char* set : {"hall", "gallery", "all"})
        table = run_tasks(records, {"type", std::string("position_") + set}, cfg, set, std::move(table));
      break;
    case 7: {
      const CrossMatrix m = cross_scenario_matrix(records, cfg);
      ResultTable t = cross_matrix_table(m);
      t.title = table.title;
      table = std::move(t);
      break;
    }
    case 8:
      table = snapshot_length_sweep(records, cfg);
      table.title = protocol_name(8);
      break;
    default:
      protocol_name(protocol);
  }
  table.metadata["protocol"] = protocol;
  table.metadata["reps"] = cfg.reps;
  table.metadata["members"] = cfg.members;
  table.metadata["seed"] = cfg.seed;
  return table;
}

}  // namespace gjam
