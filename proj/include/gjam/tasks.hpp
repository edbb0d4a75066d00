#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "gjam/dataio.hpp"
#include "gjam/nnet/network.hpp"
#include "gjam/nnet/train.hpp"

namespace gjam {

/// Label extraction for one learning task.
///
///   type              7 classes, the interference category
///   power             classes {none, levels...}; default levels 6, 8, 10 dBm
///   power_reg         signal power in dBm (interference only)
///   bw                bandwidth regression in MHz (0 for clean snapshots)
///   bw_class          classes over the bandwidth levels (interference only)
///   area              4 antenna-facing areas
///   position_hall     16 hall positions
///   position_gallery  30 gallery positions
///   position_all      all 46 positions
///   angle             bearing regression in degrees
///   scenario          12 scenario variants
struct TaskOptions {
  std::vector<double> power_levels{6.0, 8.0, 10.0};
  std::vector<double> bw_levels{2, 5, 10, 15, 20, 25, 30, 35, 40, 50, 60};
};

struct Task {
  std::string id;
  nnet::HeadKind kind = nnet::HeadKind::Classification;
  int n_c = 2;
  std::vector<std::string> class_names;  // empty for regression
  TaskOptions options;

  /// Target of a record: class index or physical value. NaN when the record
  /// carries no label for this task (for example bandwidth of a clean snapshot).
  double target(const SnapshotRecord& r) const;
  nnet::TaskHead head(double weight = 1.0) const { return {id, kind, n_c, weight}; }
};

/// Throws InvalidSpec for an unknown task id.
Task make_task(std::string_view id, const TaskOptions& options = {});
const std::vector<std::string>& task_ids();

/// Indices of records that carry a label for every task.
std::vector<std::size_t> labeled_indices(const std::vector<SnapshotRecord>& records, const std::vector<Task>& tasks,
                                         const std::vector<std::size_t>& candidates);

/// Training view of records[indices]: borrowed grids plus per-task targets.
nnet::LabeledSet make_labeled_set(const std::vector<SnapshotRecord>& records, const std::vector<std::size_t>& indices,
                                  const std::vector<Task>& tasks);

/// Copies of the grids truncated to n_t columns (the prefix property makes
/// this equal to rendering at n_t).
std::vector<SnapshotRecord> truncate_records(const std::vector<SnapshotRecord>& records, int n_t);

}  // namespace gjam
