#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "gjam/error.hpp"
#include "gjam/eval.hpp"
#include "gjam/tasks.hpp"

using namespace gjam;
using Catch::Matchers::WithinAbs;

namespace {

auto has_code(ErrorCode code) {
  return Catch::Matchers::Predicate<Error>([code](const Error& e) { return e.code() == code; },
                                           "error code " + std::string(to_string(code)));
}

// Brute-force references, written without the confusion matrix.
double ref_accuracy(const std::vector<int>& p, const std::vector<int>& t) {
  int ok = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] == t[i]) ++ok;
  return 100.0 * ok / static_cast<double>(p.size());
}

double ref_f2(const std::vector<int>& p, const std::vector<int>& t, int c) {
  double sum = 0;
  for (int k = 0; k < c; ++k) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] == k && t[i] == k) ++tp;
      if (p[i] == k && t[i] != k) ++fp;
      if (p[i] != k && t[i] == k) ++fn;
    }
    const double prec = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double rec = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
    const double f = prec + rec > 0 ? 5 * prec * rec / (4 * prec + rec) : 0.0;
    sum += f * (tp + fn);
  }
  return sum / static_cast<double>(p.size());
}

double ref_mae(const std::vector<double>& p, const std::vector<double>& t) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - t[i]);
  return s / static_cast<double>(p.size());
}

std::vector<SnapshotRecord> labelled_records(int per_cell) {
  std::vector<SnapshotRecord> recs;
  std::uint64_t id = 0;
  for (int c = 0; c < kNumCategories; ++c)
    for (double p : {6.0, 8.0, 10.0})
      for (int i = 0; i < per_cell; ++i) {
        SnapshotRecord r;
        r.spectrogram.n_t = 1;
        r.spectrogram.cells.assign(1024, 0.0f);
        r.category = static_cast<Category>(c);
        r.power_dbm = c == 0 ? 0.0f : static_cast<float>(p);
        r.bandwidth_mhz = c == 0 ? 0.0f : 10.0f;
        r.seed = id++;
        recs.push_back(r);
      }
  return recs;
}

std::vector<std::size_t> all(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

TEST_CASE("accuracy examples", "[eval][metrics]") {
  CHECK(accuracy(std::vector<int>{0, 1, 2}, std::vector<int>{0, 1, 2}) == 100.0);
  CHECK(accuracy(std::vector<int>{0, 1, 2, 2}, std::vector<int>{0, 1, 1, 2}) == 75.0);
  CHECK(accuracy(std::vector<int>{1}, std::vector<int>{0}) == 0.0);
  CHECK_THROWS_MATCHES(accuracy(std::vector<int>{1, 2}, std::vector<int>{0}), Error, has_code(ErrorCode::LengthMismatch));
  CHECK_THROWS_MATCHES(accuracy(std::vector<int>{}, std::vector<int>{}), Error, has_code(ErrorCode::Empty));
}

TEST_CASE("weighted F2 examples", "[eval][metrics]") {
  CHECK(weighted_f2(std::vector<int>{0, 1, 2}, std::vector<int>{0, 1, 2}, 3) == 1.0);
  // Sole class 0 with precision 0.5 and recall 1.
  CHECK_THAT(weighted_f2(std::vector<int>{0, 0}, std::vector<int>{0, 1}, 2), WithinAbs(0.5 * 5.0 * 0.5 / 3.0, 1e-15));
  CHECK_THAT(weighted_f2(std::vector<int>{0, 0, 0, 0}, std::vector<int>{0, 0, 1, 1}, 2), WithinAbs(5.0 / 12.0, 1e-15));
  CHECK_THROWS_MATCHES(weighted_f2(std::vector<int>{}, std::vector<int>{}, 2), Error, has_code(ErrorCode::Empty));
}

TEST_CASE("MAE examples", "[eval][metrics]") {
  CHECK(mae(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 0.0);
  CHECK(mae(std::vector<double>{1, 3}, std::vector<double>{2, 2}) == 1.0);
  CHECK_THAT(mae(std::vector<double>{1.5, 2.5, 3.5}, std::vector<double>{1, 2, 3}), WithinAbs(0.5, 1e-15));
  CHECK_THROWS_MATCHES(mae(std::vector<double>{1}, std::vector<double>{}), Error, has_code(ErrorCode::LengthMismatch));
}

TEST_CASE("metrics agree with brute force on random prediction sets", "[eval][metrics][property]") {
  std::mt19937_64 g(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const int c = 2 + static_cast<int>(g() % 10);
    const std::size_t n = 1 + g() % 300;
    std::vector<int> p(n), t(n);
    std::vector<double> pv(n), tv(n);
    std::normal_distribution<double> nd(0.0, 10.0);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = static_cast<int>(g() % c);
      p[i] = g() % 3 ? t[i] : static_cast<int>(g() % c);
      tv[i] = nd(g);
      pv[i] = tv[i] + nd(g);
    }
    REQUIRE(accuracy(p, t) == ref_accuracy(p, t));
    REQUIRE(std::abs(weighted_f2(p, t, c) - ref_f2(p, t, c)) <= 1e-12);
    REQUIRE(mae(pv, tv) == ref_mae(pv, tv));

    const ConfusionMatrix cm = confusion(p, t, c);
    for (int k = 0; k < c; ++k)
      REQUIRE(cm.row_sum(k) == static_cast<std::uint64_t>(std::count(t.begin(), t.end(), k)));
    REQUIRE(cm.total() == n);
    REQUIRE(100.0 * static_cast<double>(cm.trace()) / static_cast<double>(cm.total()) == accuracy(p, t));
  }
}

TEST_CASE("out-of-range class indices are rejected", "[eval][metrics]") {
  CHECK_THROWS_AS(confusion(std::vector<int>{3}, std::vector<int>{0}, 3), Error);
  CHECK_THROWS_AS(weighted_f2(std::vector<int>{-1}, std::vector<int>{0}, 3), Error);
}

TEST_CASE("repetition statistics use the population standard deviation", "[eval]") {
  std::mt19937_64 g(2);
  std::uniform_real_distribution<double> u(0, 100);
  for (int trial = 0; trial < 50; ++trial) {
    ResultTable t;
    std::vector<double> runs;
    for (int r = 0; r < 10; ++r) {
      runs.push_back(u(g));
      t.add("c", "type", "accuracy", runs.back());
    }
    double m = 0, ss = 0;
    for (double v : runs) m += v / runs.size();
    for (double v : runs) ss += (v - m) * (v - m);
    REQUIRE(std::abs(t.rows[0].std() - std::sqrt(ss / runs.size())) <= 1e-12);
    REQUIRE(std::abs(t.rows[0].mean() - m) <= 1e-12);
  }
}

TEST_CASE("result CSV carries mean and std columns", "[eval]") {
  ResultTable t;
  t.add("random", "type", "accuracy", 90.0);
  t.add("random", "type", "accuracy", 100.0);
  t.add("random", "bw", "mae", 1.25);
  CHECK(t.to_csv() ==
        "condition,task,metric,runs,mean,std,values\n"
        "random,type,accuracy,2,95.000000,5.000000,90.000000;100.000000\n"
        "random,bw,mae,1,1.250000,0.000000,1.250000\n");
  CHECK(t.find("random", "bw", "mae") != nullptr);
  CHECK(t.find("random", "bw", "accuracy") == nullptr);
}

TEST_CASE("independent split keeps holdout values out of training", "[eval][split]") {
  const std::vector<SnapshotRecord> recs = labelled_records(5);
  const Task type = make_task("type");
  SplitSpec s;
  s.mode = SplitMode::Independent;
  s.holdout_key = "power";
  s.holdout_values = {8.0};
  const Split sp = make_split(recs, all(recs.size()), type, s);
  for (std::size_t i : sp.train) CHECK(recs[i].power_dbm != 8.0f);
  for (std::size_t i : sp.test) CHECK(recs[i].power_dbm == 8.0f);
  CHECK(sp.train.size() + sp.test.size() == recs.size());

  s.holdout_values = {4.0};
  CHECK_THROWS_MATCHES(make_split(recs, all(recs.size()), type, s), Error, has_code(ErrorCode::DegenerateSplit));
  s.holdout_values = {0.0, 6.0, 8.0, 10.0};
  CHECK_THROWS_MATCHES(make_split(recs, all(recs.size()), type, s), Error, has_code(ErrorCode::DegenerateSplit));
}

TEST_CASE("stratified splits are disjoint, complete and seed-determined", "[eval][split]") {
  std::vector<SnapshotRecord> recs = labelled_records(48);  // 1008 records
  recs.resize(1000);
  const Task type = make_task("type");
  for (SplitMode mode : {SplitMode::Random, SplitMode::Dependent}) {
    SplitSpec s;
    s.mode = mode;
    s.holdout_key = mode == SplitMode::Dependent ? "power" : "";
    s.seed = 3;
    const Split a = make_split(recs, all(recs.size()), type, s);
    CHECK(std::abs(static_cast<int>(a.test.size()) - 200) <= 21);
    std::set<std::size_t> seen(a.train.begin(), a.train.end());
    for (std::size_t i : a.test) CHECK(seen.insert(i).second);
    CHECK(seen.size() == recs.size());
    // Every class is represented on both sides in proportion.
    std::map<int, int> test_per_class;
    for (std::size_t i : a.test) ++test_per_class[static_cast<int>(recs[i].category)];
    for (const auto& [c, n] : test_per_class) CHECK(std::abs(n - 29) <= 2);

    const Split b = make_split(recs, all(recs.size()), type, s);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    s.seed = 4;
    CHECK(make_split(recs, all(recs.size()), type, s).test != a.test);
  }
}

TEST_CASE("degenerate splits are reported", "[eval][split]") {
  std::vector<SnapshotRecord> recs;
  std::set<Category> seen;
  for (const SnapshotRecord& r : labelled_records(1))
    if (seen.insert(r.category).second) recs.push_back(r);
  REQUIRE(recs.size() == 7);
  SplitSpec s;
  s.test_fraction = 0.2;
  // One record per class rounds every stratum to zero test samples.
  CHECK_THROWS_MATCHES(make_split(recs, all(recs.size()), make_task("type"), s), Error,
                       has_code(ErrorCode::DegenerateSplit));
  CHECK_THROWS_MATCHES(make_split(recs, {}, make_task("type"), s), Error, has_code(ErrorCode::DegenerateSplit));
  s.test_fraction = 1.5;
  CHECK_THROWS_AS(make_split(recs, all(recs.size()), make_task("type"), s), Error);
}

TEST_CASE("position tasks have 16, 30 and 46 classes", "[eval]") {
  CHECK(make_task("position_hall").n_c == 16);
  CHECK(make_task("position_gallery").n_c == 30);
  CHECK(make_task("position_all").n_c == 46);
  CHECK(make_task("area").n_c == 4);
  CHECK(make_task("type").n_c == 7);
  CHECK(make_task("power").n_c == 4);
  CHECK(make_task("scenario").n_c == 12);
}

TEST_CASE("protocol dispatcher validates its input", "[eval]") {
  ExperimentConfig cfg;
  CHECK_THROWS_AS(run_protocol(0, {}, cfg), Error);
  CHECK_THROWS_AS(run_protocol(9, {}, cfg), Error);
  cfg.scenarios = {"1a", "8"};
  CHECK_THROWS_MATCHES(cross_scenario_matrix(labelled_records(2), cfg), Error, has_code(ErrorCode::MissingScenario));
  cfg.lengths = {1, 40};
  CHECK_THROWS_AS(snapshot_length_sweep(labelled_records(2), cfg), Error);
}
