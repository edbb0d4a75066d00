#include "gjam/tasks.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "gjam/error.hpp"

namespace gjam {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int level_index(const std::vector<double>& levels, double v) {
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (std::abs(levels[i] - v) < 1e-3) return static_cast<int>(i);
  return -1;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& task_ids() {
  static const std::vector<std::string> ids{"type",          "power",         "power_reg",        "bw",
                                            "bw_class",      "area",          "position_hall",    "position_gallery",
                                            "position_all",  "angle",         "scenario"};
  return ids;
}

Task make_task(std::string_view id, const TaskOptions& options) {
  Task t;
  t.id = std::string(id);
  t.options = options;
  using nnet::HeadKind;
  if (id == "type") {
    t.n_c = kNumCategories;
    for (int c = 0; c < kNumCategories; ++c) t.class_names.emplace_back(to_string(static_cast<Category>(c)));
  } else if (id == "power") {
    if (options.power_levels.empty()) throw Error(ErrorCode::InvalidSpec, "power task needs levels");
    t.n_c = static_cast<int>(options.power_levels.size()) + 1;
    t.class_names.push_back("none");
    for (double p : options.power_levels) t.class_names.push_back(fmt(p));
  } else if (id == "bw_class") {
    if (options.bw_levels.size() < 2) throw Error(ErrorCode::InvalidSpec, "bw_class task needs >= 2 levels");
    t.n_c = static_cast<int>(options.bw_levels.size());
    for (double b : options.bw_levels) t.class_names.push_back(fmt(b));
  } else if (id == "area") {
    t.n_c = kNumAreas;
    for (int a = 0; a < kNumAreas; ++a) t.class_names.push_back(std::to_string(a));
  } else if (id == "position_hall") {
    t.n_c = kNumHallPositions;
  } else if (id == "position_gallery") {
    t.n_c = kNumGalleryPositions;
  } else if (id == "position_all") {
    t.n_c = kNumPositions;
  } else if (id == "scenario") {
    t.n_c = static_cast<int>(all_scenarios().size());
    for (ScenarioId s : all_scenarios()) t.class_names.push_back(to_string(s));
  } else if (id == "power_reg" || id == "bw" || id == "angle") {
    t.kind = HeadKind::Regression;
    t.n_c = 1;
  } else {
    throw Error(ErrorCode::InvalidSpec, "unknown task '" + std::string(id) + "'");
  }
  if (id.starts_with("position_")) {
    const int first = id == "position_gallery" ? kNumHallPositions : 0;
    for (int i = 0; i < t.n_c; ++i) t.class_names.push_back(std::to_string(first + i));
  }
  return t;
}

double Task::target(const SnapshotRecord& r) const {
  const bool clean = r.category == Category::None;
  if (id == "type") return static_cast<double>(r.category);
  if (id == "power") {
    if (clean) return 0.0;
    const int k = level_index(options.power_levels, r.power_dbm);
    return k < 0 ? kNaN : k + 1.0;
  }
  if (id == "power_reg") return clean ? kNaN : r.power_dbm;
  if (id == "bw") return clean ? 0.0 : r.bandwidth_mhz;
  if (id == "bw_class") {
    if (clean) return kNaN;
    const int k = level_index(options.bw_levels, r.bandwidth_mhz);
    return k < 0 ? kNaN : k;
  }
  if (id == "area") return r.area_id;
  if (id == "position_hall") return r.position_id < kNumHallPositions ? r.position_id : kNaN;
  if (id == "position_gallery")
    return r.position_id >= kNumHallPositions ? r.position_id - kNumHallPositions : kNaN;
  if (id == "position_all") return r.position_id;
  if (id == "angle") return r.angle_deg;
  if (id == "scenario") {
    const auto& all = all_scenarios();
    for (std::size_t i = 0; i < all.size(); ++i)
      if (all[i] == r.scenario) return static_cast<double>(i);
    return kNaN;
  }
  throw Error(ErrorCode::InvalidSpec, "unknown task '" + id + "'");
}

std::vector<std::size_t> labeled_indices(const std::vector<SnapshotRecord>& records, const std::vector<Task>& tasks,
                                         const std::vector<std::size_t>& candidates) {
  std::vector<std::size_t> out;
  for (std::size_t i : candidates) {
    bool ok = true;
    for (const Task& t : tasks) ok = ok && !std::isnan(t.target(records.at(i)));
    if (ok) out.push_back(i);
  }
  return out;
}

nnet::LabeledSet make_labeled_set(const std::vector<SnapshotRecord>& records, const std::vector<std::size_t>& indices,
                                  const std::vector<Task>& tasks) {
  nnet::LabeledSet set;
  set.targets.resize(tasks.size());
  for (std::size_t i : indices) {
    const SnapshotRecord& r = records.at(i);
    set.inputs.push_back(&r.spectrogram);
    for (std::size_t h = 0; h < tasks.size(); ++h) set.targets[h].push_back(tasks[h].target(r));
  }
  return set;
}

std::vector<SnapshotRecord> truncate_records(const std::vector<SnapshotRecord>& records, int n_t) {
  std::vector<SnapshotRecord> out;
  out.reserve(records.size());
  for (const SnapshotRecord& r : records) {
    SnapshotRecord c = r;
    c.spectrogram = truncate(r.spectrogram, n_t);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace gjam
