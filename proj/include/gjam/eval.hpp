#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gjam/dataio.hpp"
#include "gjam/nnet/network.hpp"
#include "gjam/nnet/train.hpp"
#include "gjam/tasks.hpp"

namespace gjam {

// ---------------------------------------------------------------- metrics

/// 100 * correct / n. Throws LengthMismatch, Empty.
double accuracy(std::span<const int> preds, std::span<const int> truths);
/// Support-weighted one-vs-rest F2 = 5PR / (4P + R); a class with P + R = 0
/// scores 0. Result in [0, 1].
double weighted_f2(std::span<const int> preds, std::span<const int> truths, int n_classes);
double mae(std::span<const double> preds, std::span<const double> truths);

/// Counts, rows = true class, columns = predicted class.
struct ConfusionMatrix {
  int c = 0;
  std::vector<std::uint64_t> cells;

  std::uint64_t at(int truth, int pred) const { return cells[static_cast<std::size_t>(truth) * c + pred]; }
  std::uint64_t row_sum(int truth) const;
  std::uint64_t total() const;
  std::uint64_t trace() const;
};
ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> truths, int n_classes);

double population_std(std::span<const double> v);
double mean_of(std::span<const double> v);

// ---------------------------------------------------------------- splits

enum class SplitMode { Dependent, Independent, Random };
std::string_view to_string(SplitMode m);
SplitMode parse_split_mode(std::string_view s);

/// Label fields usable as holdout keys: "power", "bandwidth", "scenario",
/// "position", "area", "category", "angle".
double label_value(const SnapshotRecord& r, std::string_view key);

struct SplitSpec {
  SplitMode mode = SplitMode::Random;
  std::string holdout_key;  // independent: field to hold out; dependent: extra stratification key
  std::vector<double> holdout_values;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Splits `candidates` (indices into records).
///   random       stratified by the first task's label
///   dependent    stratified by (first task label, holdout_key value)
///   independent  test = samples whose holdout_key value is in holdout_values
/// Throws DegenerateSplit when a side is empty, InvalidSpec on a bad spec.
Split make_split(const std::vector<SnapshotRecord>& records, const std::vector<std::size_t>& candidates,
                 const Task& stratify, const SplitSpec& spec);

// ---------------------------------------------------------------- results

struct ResultRow {
  std::string condition;
  std::string task;
  std::string metric;  // accuracy, f2 (in %), mae
  std::vector<double> runs;

  double mean() const { return mean_of(runs); }
  double std() const { return population_std(runs); }
};

struct ResultTable {
  std::string title;
  std::vector<ResultRow> rows;
  std::map<std::string, ConfusionMatrix> confusions;  // summed over repetitions, keyed "condition/task"
  std::map<std::string, std::vector<std::string>> class_names;
  nlohmann::json metadata = nlohmann::json::object();

  void add(const std::string& condition, const std::string& task, const std::string& metric, double value);
  const ResultRow* find(const std::string& condition, const std::string& task, const std::string& metric) const;

  /// condition,task,metric,runs,mean,std,values
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
  /// One CSV per confusion matrix into `dir`, file names derived from keys.
  void write_confusions(const std::filesystem::path& dir) const;
};

// ---------------------------------------------------------------- experiments

struct ExperimentConfig {
  std::vector<std::string> tasks{"type"};
  TaskOptions task_options{};
  nnet::TrainConfig train{};
  nnet::Architecture arch{};
  SplitSpec split{};
  int members = 1;
  int reps = 10;
  std::uint64_t seed = 0;
  int threads = 0;
  bool truncate_at_test = false;
  std::vector<int> lengths{1, 5, 10, 34};
  std::vector<std::string> scenarios;  // cross-scenario subset; empty = all twelve
};

/// One repetition: train an ensemble on `train_idx`, evaluate on `test_idx`,
/// append accuracy/f2 (classification) or mae (regression) rows under
/// `condition`. Rep `rep` seeds data order and initialization.
void run_repetition(const std::vector<SnapshotRecord>& train_records, const std::vector<std::size_t>& train_idx,
                    const std::vector<SnapshotRecord>& test_records, const std::vector<std::size_t>& test_idx,
                    const std::vector<Task>& tasks, const ExperimentConfig& cfg, int rep,
                    const std::string& condition, ResultTable& table);

/// Repeated split + train + test of `tasks` on records (all indices with labels).
ResultTable run_tasks(const std::vector<SnapshotRecord>& records, const std::vector<std::string>& tasks,
                      const ExperimentConfig& cfg, const std::string& condition, ResultTable table = {});

struct CrossMatrix {
  std::vector<std::string> scenarios;
  std::vector<double> mean;  // row = train scenario, column = test scenario, %
  std::vector<double> std;

  double at(std::size_t train, std::size_t test) const { return mean[train * scenarios.size() + test]; }
};

/// Cell (i, j): type accuracy of a model trained on scenario i and tested on
/// scenario j. The diagonal tests on a held-out split of scenario i; off the
/// diagonal the model trained on that same split is tested on all samples of
/// scenario j. Throws MissingScenario.
CrossMatrix cross_scenario_matrix(const std::vector<SnapshotRecord>& records, const ExperimentConfig& cfg);

/// Per-length results under conditions "n_t=<len>". Retrains on truncated
/// grids, or with cfg.truncate_at_test trains once at the stored length and
/// truncates only the test grids.
ResultTable snapshot_length_sweep(const std::vector<SnapshotRecord>& records, const ExperimentConfig& cfg);

/// Dispatcher over protocols 1..8. Throws InvalidSpec for other ids,
/// MissingLabel when the records lack the labels a protocol needs.
ResultTable run_protocol(int protocol, const std::vector<SnapshotRecord>& records, const ExperimentConfig& cfg);
std::string protocol_name(int protocol);

ResultTable cross_matrix_table(const CrossMatrix& m);
void write_cross_matrix_csv(const CrossMatrix& m, const std::filesystem::path& path);

}  // namespace gjam
