#include "gjam/nnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gjam/error.hpp"
#include "gjam/rng.hpp"

namespace gjam::nnet {

void validate(const TrainConfig& cfg) {
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) throw Error(ErrorCode::InvalidSpec, "lr must be > 0");
  if (!(cfg.weight_decay >= 0.0)) throw Error(ErrorCode::InvalidSpec, "weight_decay must be >= 0");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw Error(ErrorCode::InvalidSpec, "momentum must be in [0, 1)");
  if (cfg.epochs < 1) throw Error(ErrorCode::InvalidSpec, "epochs must be >= 1");
  if (cfg.batch_size < 1) throw Error(ErrorCode::InvalidSpec, "batch_size must be >= 1");
  if (!(cfg.clip_norm >= 0.0)) throw Error(ErrorCode::InvalidSpec, "clip_norm must be >= 0");
  if (!(cfg.lr_factor > 0.0)) throw Error(ErrorCode::InvalidSpec, "lr_factor must be > 0");
  for (std::size_t i = 1; i < cfg.lr_milestones.size(); ++i)
    if (cfg.lr_milestones[i] <= cfg.lr_milestones[i - 1])
      throw Error(ErrorCode::InvalidSpec, "lr milestones must be strictly increasing");
}

std::vector<int> effective_milestones(const TrainConfig& cfg) {
  if (!cfg.lr_milestones.empty()) return cfg.lr_milestones;
  std::vector<int> m{cfg.epochs / 2, (3 * cfg.epochs) / 4};
  m.erase(std::unique(m.begin(), m.end()), m.end());
  m.erase(std::remove(m.begin(), m.end(), 0), m.end());
  return m;
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  double lr = cfg.lr;
  for (int m : effective_milestones(cfg))
    if (epoch >= m) lr *= cfg.lr_factor;
  return lr;
}

TargetStats fit_target_stats(const std::vector<double>& all) {
  TargetStats s;
  std::vector<double> values;
  for (double v : all)
    if (!std::isnan(v)) values.push_back(v);
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size()));
  s.std = sd > 1e-12 ? sd : 1.0;
  return s;
}

Tensor batch_inputs(const LabeledSet& data, const std::vector<std::size_t>& indices, int channels) {
  std::vector<const Spectrogram*> grids;
  grids.reserve(indices.size());
  for (std::size_t i : indices) grids.push_back(data.inputs.at(i));
  return to_tensor(grids, channels);
}

Targets batch_targets(const LabeledSet& data, const std::vector<std::size_t>& indices) {
  Targets t(data.targets.size());
  for (std::size_t h = 0; h < data.targets.size(); ++h) {
    t[h].reserve(indices.size());
    for (std::size_t i : indices) t[h].push_back(data.targets[h].at(i));
  }
  return t;
}

TrainResult train(const LabeledSet& data, const std::vector<TaskHead>& heads, const TrainConfig& cfg,
                  std::uint64_t init_seed, const Architecture& arch) {
  validate(cfg);
  if (data.size() == 0) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  if (data.targets.size() != heads.size())
    throw Error(ErrorCode::MissingLabel, "training set needs one target vector per head");

  TrainResult res{Network(arch, heads, init_seed), {}};
  Network& net = res.net;
  for (std::size_t h = 0; h < heads.size(); ++h) {
    if (data.targets[h].size() != data.size())
      throw Error(ErrorCode::MissingLabel, "target count mismatch for head '" + heads[h].id + "'");
    if (heads[h].kind == HeadKind::Regression) net.heads()[h].stats = fit_target_stats(data.targets[h]);
  }

  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto shuffle = [&order](Rng& rng) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  };

  Rng warm(derive_seed(cfg.seed, 0x77a7));
  shuffle(warm);
  const std::size_t nc = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(cfg.calibration_samples, 1)));
  net.calibrate(batch_inputs(data, {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(nc)},
                             arch.in_channels));

  int acc_head = -1;
  for (std::size_t h = 0; h < heads.size(); ++h)
    if (heads[h].kind == HeadKind::Classification && heads[h].weight > 0.0) {
      acc_head = static_cast<int>(h);
      break;
    }

  std::vector<ParamView> params = net.parameters();
  std::vector<std::vector<double>> velocity;
  if (cfg.momentum > 0.0)
    for (const ParamView& p : params) velocity.emplace_back(p.values.size(), 0.0);

  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at_epoch(cfg, epoch);
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::iota(order.begin(), order.end(), 0);
    shuffle(rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::size_t correct = 0;
    for (std::size_t lo = 0; lo < n; lo += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t hi = std::min(n, lo + static_cast<std::size_t>(cfg.batch_size));
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                         order.begin() + static_cast<std::ptrdiff_t>(hi));
      const Targets t = batch_targets(data, idx);
      net.zero_grad();
      Outputs out;
      const LossResult lr_ = net.forward_backward(batch_inputs(data, idx, arch.in_channels), t, &out);
      loss_sum += lr_.total;
      ++batches;
      if (acc_head >= 0) {
        const int c = heads[static_cast<std::size_t>(acc_head)].n_c;
        const std::vector<double>& o = out.heads[static_cast<std::size_t>(acc_head)];
        for (std::size_t i = 0; i < idx.size(); ++i) {
          const double* row = o.data() + i * c;
          const int pred = static_cast<int>(std::max_element(row, row + c) - row);
          if (pred == static_cast<int>(t[static_cast<std::size_t>(acc_head)][i])) ++correct;
        }
      }
      double gscale = 1.0;
      if (cfg.clip_norm > 0.0) {
        double sq = 0.0;
        for (const ParamView& p : params)
          for (double g : p.grads) sq += g * g;
        const double norm = std::sqrt(sq);
        if (norm > cfg.clip_norm) gscale = cfg.clip_norm / norm;
      }
      for (std::size_t p = 0; p < params.size(); ++p) {
        std::span<double> w = params[p].values;
        std::span<double> g = params[p].grads;
        if (gscale != 1.0)
          for (double& x : g) x *= gscale;
        if (cfg.momentum > 0.0) {
          std::vector<double>& v = velocity[p];
          for (std::size_t k = 0; k < w.size(); ++k) {
            v[k] = cfg.momentum * v[k] + g[k] + cfg.weight_decay * w[k];
            w[k] -= lr * v[k];
          }
        } else {
          for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * (g[k] + cfg.weight_decay * w[k]);
        }
      }
    }
    EpochStats st;
    st.epoch = epoch;
    st.lr = lr;
    st.loss = loss_sum / static_cast<double>(batches);
    st.accuracy = acc_head >= 0 ? 100.0 * static_cast<double>(correct) / static_cast<double>(n)
                                : std::numeric_limits<double>::quiet_NaN();
    res.trace.push_back(st);
  }
  net.zero_grad();
  return res;
}

}  // namespace gjam::nnet
