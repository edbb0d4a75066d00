#pragma once

#include <cstdint>
#include <vector>

#include "gjam/nnet/network.hpp"

namespace gjam::nnet {

struct TrainConfig {
  double lr = 0.01;
  double weight_decay = 0.0005;
  double momentum = 0.0;
  int epochs = 30;
  std::vector<int> lr_milestones;  // empty selects {epochs/2, 3*epochs/4}
  double lr_factor = 0.1;
  int batch_size = 32;
  std::uint64_t seed = 0;       // data order
  int calibration_samples = 64;  // warm-up batch for the fixed conv scales
  double clip_norm = 0.0;        // global gradient-norm cap, 0 disables

  bool operator==(const TrainConfig&) const = default;
};

/// Throws InvalidSpec on lr <= 0, non-increasing milestones and the like.
void validate(const TrainConfig& cfg);
std::vector<int> effective_milestones(const TrainConfig& cfg);
/// Learning rate in effect during (0-based) `epoch`.
double lr_at_epoch(const TrainConfig& cfg, int epoch);

/// Training samples. `inputs` are borrowed and must outlive the set;
/// targets[h][i] follows the Targets convention of Network.
struct LabeledSet {
  std::vector<const Spectrogram*> inputs;
  Targets targets;

  std::size_t size() const noexcept { return inputs.size(); }
};

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;      // mean batch loss
  double accuracy = 0.0;  // % of the first classification head on training batches, NaN if none
};

struct TrainResult {
  Network net;
  std::vector<EpochStats> trace;
};

/// Fits target statistics of regression heads on `data`.
TargetStats fit_target_stats(const std::vector<double>& values);

/// Mini-batch SGD, single-threaded. Weights are drawn from `init_seed`, the
/// sample order from cfg.seed, so members of an ensemble that share cfg but
/// not init_seed see the same batches. Throws EmptyDataset.
TrainResult train(const LabeledSet& data, const std::vector<TaskHead>& heads, const TrainConfig& cfg,
                  std::uint64_t init_seed, const Architecture& arch = {});

/// Input tensor and targets of the samples at `indices`.
Tensor batch_inputs(const LabeledSet& data, const std::vector<std::size_t>& indices, int channels);
Targets batch_targets(const LabeledSet& data, const std::vector<std::size_t>& indices);

}  // namespace gjam::nnet
