#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>

#include "gjam/dataio.hpp"
#include "gjam/error.hpp"
#include "gjam/nnet/checkpoint.hpp"
#include "gjam/nnet/network.hpp"
#include "gjam/nnet/train.hpp"
#include "gjam/rng.hpp"
#include "gjam/tasks.hpp"
#include "gjam/uncert.hpp"

using namespace gjam;
using namespace gjam::nnet;

namespace {

Tensor random_tensor(int n, int c, int h, int w, std::uint64_t seed) {
  Tensor t(n, c, h, w);
  Rng rng(seed);
  for (double& v : t.v) v = rng.uniform();
  return t;
}

Architecture small_arch() {
  Architecture a;
  a.freq_pool = 64;
  a.stem_width = 4;
  a.widths = {4, 6};
  return a;
}

std::vector<TaskHead> two_heads() {
  return {{"type", HeadKind::Classification, 3, 1.0}, {"bw", HeadKind::Regression, 1, 0.7}};
}

auto has_code(ErrorCode code) {
  return Catch::Matchers::Predicate<Error>([code](const Error& e) { return e.code() == code; },
                                           "error code " + std::string(to_string(code)));
}

Spectrogram random_grid(int n_t, std::uint64_t seed) {
  Spectrogram g;
  g.n_t = n_t;
  g.cells.resize(static_cast<std::size_t>(kFreqBins) * n_t);
  Rng rng(seed);
  for (float& v : g.cells) v = static_cast<float>(rng.uniform());
  return g;
}

}  // namespace

TEST_CASE("conv GEMM path matches the direct loops", "[nnet][conv]") {
  for (ConvShape s : {ConvShape{1, 4, 3, 3, 2, 1}, ConvShape{3, 5, 3, 3, 2, 2}, ConvShape{4, 2, 1, 1, 2, 2},
                      ConvShape{2, 3, 3, 3, 1, 1}}) {
    Conv2d conv(s);
    Rng rng(11);
    for (double& w : conv.weight) w = rng.normal();
    for (double& b : conv.bias) b = rng.normal();
    for (double& a : conv.scale) a = rng.uniform(0.5, 2.0);
    for (int w : {1, 2, 5, 34}) {
      const Tensor x = random_tensor(3, s.cin, 9, w, 5 + w);
      const Tensor fast = conv.forward(x);
      const Tensor ref = conv2d_reference(s, conv.weight, conv.bias, conv.scale, x);
      REQUIRE(fast.same_shape(ref));
      for (std::size_t i = 0; i < ref.v.size(); ++i) REQUIRE(fast.v[i] == Catch::Approx(ref.v[i]).margin(1e-12));
    }
  }
}

TEST_CASE("backward matches central differences", "[nnet][grad]") {
  Network net(small_arch(), two_heads(), 3);
  const Tensor x = random_tensor(3, 1, 1024, 3, 21);
  net.calibrate(x);
  const Targets t{{0, 2, 1}, {4.0, -1.0, 2.5}};
  net.heads()[1].stats = {1.0, 2.0};

  net.zero_grad();
  net.forward_backward(x, t);
  std::vector<ParamView> params = net.parameters();

  auto total = [&] { return net.loss(net.forward(x), t).total; };
  Rng pick(99);
  const double h = 1e-4;
  const std::vector<bool> pattern = net.relu_pattern(x);
  int skipped = 0;
  int checked = 0;
  double worst = 0.0;
  std::vector<int> per_block(params.size(), 0);
  for (int attempt = 0; checked < 240 && attempt < 5000; ++attempt) {
    // Sweep the blocks in order first so every layer type is covered.
    const std::size_t b = attempt < 20 * static_cast<int>(params.size()) && per_block[attempt % params.size()] == 0
                              ? static_cast<std::size_t>(attempt) % params.size()
                              : pick.below(params.size());
    const std::size_t k = pick.below(params[b].values.size());
    double& w = params[b].values[k];
    const double w0 = w;
    w = w0 + h;
    const double lp = total();
    const bool kink_p = net.relu_pattern(x) != pattern;
    w = w0 - h;
    const double lm = total();
    const bool kink_m = net.relu_pattern(x) != pattern;
    w = w0;
    if (kink_p || kink_m) {  // step crosses a ReLU kink, the difference quotient is not a derivative
      ++skipped;
      continue;
    }
    const double numeric = (lp - lm) / (2 * h);
    const double analytic = params[b].grads[k];
    const double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-6});
    worst = std::max(worst, rel);
    INFO(params[b].name << "[" << k << "] analytic " << analytic << " numeric " << numeric);
    CHECK(rel < 1e-4);
    ++per_block[b];
    ++checked;
  }
  for (int c : per_block) CHECK(c > 0);
  CHECK(checked == 240);
  WARN("worst relative error " << worst << ", " << skipped << " steps across kinks");
}

TEST_CASE("softmax rows sum to one", "[nnet]") {
  Network net(small_arch(), {{"type", HeadKind::Classification, 7, 1.0}}, 4);
  const Tensor x = random_tensor(5, 1, 1024, 4, 6);
  net.calibrate(x);
  const Outputs out = net.forward(x);
  const std::vector<double> p = softmax_rows(out.heads[0], 7);
  for (int i = 0; i < 5; ++i) {
    double s = 0;
    for (int k = 0; k < 7; ++k) s += p[static_cast<std::size_t>(i) * 7 + k];
    CHECK_THAT(s, Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
  const std::vector<double> big{1000.0, -1000.0, 999.0};
  const std::vector<double> q = softmax_rows(big, 3);
  CHECK(std::isfinite(q[0]));
  CHECK_THAT(q[0] + q[1] + q[2], Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("zero head gives the uniform distribution and CE of ln 7", "[nnet]") {
  Network net(small_arch(), {{"type", HeadKind::Classification, 7, 1.0}}, 4);
  std::fill(net.heads()[0].weight.begin(), net.heads()[0].weight.end(), 0.0);
  std::fill(net.heads()[0].bias.begin(), net.heads()[0].bias.end(), 0.0);
  const Tensor x = random_tensor(3, 1, 1024, 2, 7);
  const Outputs out = net.forward(x);
  for (double p : softmax_rows(out.heads[0], 7)) CHECK(std::abs(p - 1.0 / 7.0) <= 1e-15);
  const LossResult l = net.loss(out, {{0, 3, 6}});
  CHECK_THAT(l.total, Catch::Matchers::WithinAbs(std::log(7.0), 1e-12));
}

TEST_CASE("identical inputs give identical rows", "[nnet]") {
  Network net(small_arch(), two_heads(), 5);
  Tensor x = random_tensor(2, 1, 1024, 3, 8);
  std::copy(x.sample(0), x.sample(0) + x.sample_size(), x.sample(1));
  net.calibrate(random_tensor(4, 1, 1024, 3, 9));
  const Outputs out = net.forward(x);
  for (std::size_t h = 0; h < out.heads.size(); ++h) {
    const std::size_t c = out.heads[h].size() / 2;
    for (std::size_t k = 0; k < c; ++k) CHECK(out.heads[h][k] == out.heads[h][c + k]);
  }
}

TEST_CASE("loss is the weighted sum of head terms", "[nnet]") {
  Network net(small_arch(), {{"type", HeadKind::Classification, 2, 1.0}, {"bw", HeadKind::Regression, 1, 1.0}}, 5);
  Outputs out;
  out.n = 1;
  out.heads = {{0.0, std::log(std::numbers::e - 1.0)}, {0.5}};
  const LossResult l = net.loss(out, {{0}, {0.0}});
  CHECK_THAT(l.per_head[0], Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(l.per_head[1], Catch::Matchers::WithinAbs(0.5, 1e-12));
  CHECK_THAT(l.total, Catch::Matchers::WithinAbs(1.5, 1e-12));

  out.heads[1] = {0.0};
  CHECK(net.loss(out, {{0}, {0.0}}).per_head[1] == 0.0);

  Rng rng(3);
  net.heads()[0].desc.weight = 0.3;
  net.heads()[1].desc.weight = 1.7;
  net.heads()[1].stats = {2.0, 3.0};
  for (int trial = 0; trial < 50; ++trial) {
    out.n = 4;
    out.heads = {{}, {}};
    Targets t{{}, {}};
    for (int i = 0; i < 4; ++i) {
      out.heads[0].push_back(rng.normal());
      out.heads[0].push_back(rng.normal());
      out.heads[1].push_back(rng.normal());
      t[0].push_back(static_cast<double>(rng.below(2)));
      t[1].push_back(rng.uniform(-5, 5));
    }
    const LossResult r = net.loss(out, t);
    REQUIRE(r.total == 0.3 * r.per_head[0] + 1.7 * r.per_head[1]);
  }
}

TEST_CASE("missing labels are rejected", "[nnet]") {
  Network net(small_arch(), two_heads(), 5);
  const Tensor x = random_tensor(2, 1, 1024, 1, 10);
  const Outputs out = net.forward(x);
  CHECK_THROWS_MATCHES(net.loss(out, {{0, 1}}), Error, has_code(ErrorCode::MissingLabel));
  CHECK_THROWS_MATCHES(net.loss(out, {{0, NAN}, {1.0, 2.0}}), Error, has_code(ErrorCode::MissingLabel));
  CHECK_THROWS_MATCHES(net.loss(out, {{0, 3}, {1.0, 2.0}}), Error, has_code(ErrorCode::MissingLabel));
}

TEST_CASE("a head with weight 0 receives exactly zero gradient", "[nnet][grad]") {
  std::vector<TaskHead> heads = two_heads();
  heads[1].weight = 0.0;
  Network net(small_arch(), heads, 6);
  const Tensor x = random_tensor(3, 1, 1024, 2, 11);
  net.calibrate(x);
  net.zero_grad();
  net.forward_backward(x, {{0, 1, 2}, {1.0, 2.0, 3.0}});
  for (double g : net.heads()[1].grad_weight) CHECK(g == 0.0);
  for (double g : net.heads()[1].grad_bias) CHECK(g == 0.0);
  double sum = 0;
  for (double g : net.heads()[0].grad_weight) sum += std::abs(g);
  CHECK(sum > 0.0);
}

TEST_CASE("gradients are bit-identical across runs", "[nnet][grad]") {
  auto grads = [] {
    Network net(small_arch(), two_heads(), 7);
    const Tensor x = random_tensor(3, 1, 1024, 4, 12);
    net.calibrate(x);
    net.zero_grad();
    net.forward_backward(x, {{0, 1, 2}, {1.0, 2.0, 3.0}});
    std::vector<double> all;
    for (const ParamView& p : net.parameters()) all.insert(all.end(), p.grads.begin(), p.grads.end());
    return all;
  };
  CHECK(grads() == grads());
}

TEST_CASE("forward accepts every snapshot length", "[nnet]") {
  Network net(small_arch(), two_heads(), 8);
  net.calibrate(random_tensor(2, 1, 1024, 34, 13));
  for (int n_t = 1; n_t <= kMaxSnapshotLength; ++n_t) {
    const Outputs out = net.forward(random_tensor(2, 1, 1024, n_t, 14 + n_t));
    REQUIRE(out.heads[0].size() == 6);
    REQUIRE(out.heads[1].size() == 2);
    for (double v : out.heads[0]) REQUIRE(std::isfinite(v));
  }
  CHECK_THROWS_MATCHES(net.forward(random_tensor(1, 2, 1024, 3, 1)), Error, has_code(ErrorCode::ShapeMismatch));
  CHECK_THROWS_MATCHES(net.forward(random_tensor(1, 1, 512, 3, 1)), Error, has_code(ErrorCode::ShapeMismatch));
}

TEST_CASE("duplicate time columns leave the embedding of a constant-in-time input unchanged", "[nnet][property]") {
  Network net(small_arch(), two_heads(), 9);
  net.calibrate(random_tensor(4, 1, 1024, 8, 15));
  const Tensor col = random_tensor(2, 1, 1024, 1, 16);
  const std::vector<double> ref = net.embed(col);
  for (int n_t : {2, 3, 7, 34}) {
    Tensor x(2, 1, 1024, n_t);
    for (int i = 0; i < 2; ++i)
      for (int f = 0; f < 1024; ++f)
        for (int t = 0; t < n_t; ++t) x.sample(i)[f * n_t + t] = col.sample(i)[f];
    const std::vector<double> e = net.embed(x);
    REQUIRE(e.size() == ref.size());
    for (std::size_t k = 0; k < e.size(); ++k) CHECK(std::abs(e[k] - ref[k]) <= 1e-12 * (1.0 + std::abs(ref[k])));
  }
}

TEST_CASE("multi-step learning-rate schedule", "[nnet][train]") {
  TrainConfig cfg;
  CHECK(effective_milestones(cfg) == std::vector<int>{15, 22});
  for (int e = 0; e < 15; ++e) CHECK(lr_at_epoch(cfg, e) == 0.01);
  CHECK_THAT(lr_at_epoch(cfg, 15), Catch::Matchers::WithinRel(0.001, 1e-12));
  for (int e = 22; e < 30; ++e) CHECK_THAT(lr_at_epoch(cfg, e), Catch::Matchers::WithinRel(0.0001, 1e-12));

  TrainConfig bad;
  bad.lr = 0.0;
  CHECK_THROWS_AS(validate(bad), Error);
  bad = {};
  bad.lr_milestones = {10, 10};
  CHECK_THROWS_AS(validate(bad), Error);
  CHECK_NOTHROW(validate(TrainConfig{}));
}

TEST_CASE("training on one sample never raises the loss", "[nnet][train]") {
  GenerationPlan plan;
  plan.n_t = 4;
  PlanRow row;
  row.scenarios = {parse_scenario("1a")};
  row.categories = {Category::Chirp};
  row.powers_dbm = {6};
  row.count = 1;
  plan.rows.push_back(row);
  const std::vector<SnapshotRecord> recs = synthesize(plan, 17);
  LabeledSet data;
  data.inputs = {&recs[0].spectrogram};
  data.targets = {{3.0}};
  TrainConfig cfg;
  cfg.epochs = 24;
  cfg.batch_size = 1;
  cfg.calibration_samples = 1;
  const Architecture a;
  const TrainResult r = train(data, {{"type", HeadKind::Classification, 7, 1.0}}, cfg, 18, a);
  REQUIRE(r.trace.size() == 24);
  for (std::size_t e = 1; e < r.trace.size(); ++e) {
    INFO("epoch " << e);
    CHECK(r.trace[e].loss <= r.trace[e - 1].loss + 1e-12);
    CHECK(r.trace[e].lr == lr_at_epoch(cfg, static_cast<int>(e)));
  }
  CHECK(r.trace.back().loss < r.trace.front().loss);

  LabeledSet empty;
  empty.targets = {{}};
  CHECK_THROWS_MATCHES(train(empty, {{"type", HeadKind::Classification, 7, 1.0}}, cfg, 18, a), Error,
                       has_code(ErrorCode::EmptyDataset));
}

TEST_CASE("desk-scale sanity set is fitted to at least 99%", "[nnet][train][long]") {
  GenerationPlan plan;
  PlanRow row;
  row.scenarios = {parse_scenario("1a")};
  for (int c = 0; c < kNumCategories; ++c) row.categories.push_back(static_cast<Category>(c));
  row.powers_dbm = {6, 8, 10};
  row.count = 24;  // 72 per class
  plan.rows.push_back(row);
  const std::vector<SnapshotRecord> recs = synthesize(plan, 19);
  std::vector<std::size_t> idx(recs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const Task type = make_task("type");
  const LabeledSet data = make_labeled_set(recs, idx, {type});

  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.clip_norm = 1.0;
  cfg.seed = 20;
  const TrainResult r = train(data, {type.head()}, cfg, 21);
  const Prediction p = predict(r.net, data.inputs);
  int ok = 0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto row_begin = p.heads[0].begin() + static_cast<std::ptrdiff_t>(i * 7);
    ok += std::max_element(row_begin, row_begin + 7) - row_begin == static_cast<int>(recs[i].category);
  }
  const double acc = 100.0 * ok / static_cast<double>(recs.size());
  INFO("train accuracy " << acc);
  CHECK(acc >= 99.0);
}

TEST_CASE("checkpoint round trip", "[nnet][checkpoint]") {
  Network net(small_arch(), two_heads(), 22);
  net.calibrate(random_tensor(3, 1, 1024, 4, 23));
  net.heads()[1].stats = {12.5, 4.25};
  const std::vector<std::uint8_t> bytes = serialize(net);
  const Network back = deserialize(bytes);
  CHECK(back.arch() == net.arch());
  CHECK(back.heads()[1].stats == net.heads()[1].stats);
  CHECK(back.heads()[0].desc == net.heads()[0].desc);
  CHECK(serialize(back) == bytes);

  const Tensor x = random_tensor(2, 1, 1024, 5, 24);
  const Outputs a = net.forward(x), b = back.forward(x);
  for (std::size_t h = 0; h < a.heads.size(); ++h)
    for (std::size_t k = 0; k < a.heads[h].size(); ++k)
      CHECK(std::abs(a.heads[h][k] - b.heads[h][k]) <= 1e-4 * (1.0 + std::abs(a.heads[h][k])));

  const auto path = std::filesystem::temp_directory_path() / "gjam_test_model.gjnn";
  save_checkpoint(net, path);
  CHECK(serialize(load_checkpoint(path)) == bytes);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), Error);
}

TEST_CASE("corrupt checkpoints are rejected", "[nnet][checkpoint]") {
  const std::vector<std::uint8_t> bytes = serialize(Network(small_arch(), two_heads(), 25));
  std::vector<std::uint8_t> magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_MATCHES(deserialize(magic), Error, has_code(ErrorCode::BadMagic));
  std::vector<std::uint8_t> version = bytes;
  version[4] = 9;
  CHECK_THROWS_MATCHES(deserialize(version), Error, has_code(ErrorCode::VersionMismatch));
  for (std::size_t cut : {std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    const std::vector<std::uint8_t> shortened(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK_THROWS_AS(deserialize(shortened), Error);
  }
  std::vector<std::uint8_t> tail = bytes;
  tail.push_back(0);
  CHECK_THROWS_MATCHES(deserialize(tail), Error, has_code(ErrorCode::TruncatedRecord));
}

TEST_CASE("parallel inference matches the serial path", "[nnet][predict]") {
  Network net(small_arch(), two_heads(), 26);
  net.calibrate(random_tensor(3, 1, 1024, 6, 27));
  std::vector<Spectrogram> grids;
  for (int i = 0; i < 45; ++i) grids.push_back(random_grid(6, 28 + i));
  std::vector<const Spectrogram*> ptrs;
  for (const Spectrogram& g : grids) ptrs.push_back(&g);
  const Prediction serial = predict_serial(net, ptrs, 8);
  for (int threads : {1, 2, 4}) {
    const Prediction par = predict(net, ptrs, threads, 8);
    CHECK(par.heads == serial.heads);
  }
}

TEST_CASE("ensemble members are reproducible per seed", "[nnet][uncert]") {
  std::vector<Spectrogram> grids;
  for (int i = 0; i < 12; ++i) grids.push_back(random_grid(2, 40 + i));
  LabeledSet data;
  for (const Spectrogram& g : grids) data.inputs.push_back(&g);
  data.targets = {{0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2}};
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  const std::vector<TaskHead> heads{{"type", HeadKind::Classification, 3, 1.0}};
  const auto a = train_ensemble(data, heads, cfg, 3, 50, small_arch(), 1);
  const auto b = train_ensemble(data, heads, cfg, 3, 50, small_arch(), 3);
  REQUIRE(a.size() == 3);
  for (int k = 0; k < 3; ++k) CHECK(serialize(a[k]) == serialize(b[k]));
  CHECK(serialize(a[0]) != serialize(a[1]));
}
