#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gjam/nnet/network.hpp"
#include "gjam/nnet/train.hpp"

namespace gjam {

/// M x C softmax rows of one sample, one row per ensemble member.
struct EnsemblePrediction {
  int m = 0;
  int c = 0;
  std::vector<double> probs;  // row-major M x C
  std::vector<std::uint64_t> member_seeds;

  double p(int member, int cls) const { return probs[static_cast<std::size_t>(member) * c + cls]; }
  /// Throws EmptyEnsemble for M = 0, InvalidSpec for rows that are not
  /// probability vectors (tolerance 1e-9).
  void validate() const;
};

/// Kwon-style split of the predictive covariance diag(p_bar) - p_bar p_bar^T:
///   aleatoric = mean_m [diag(p_m) - p_m p_m^T]
///   epistemic = mean_m (p_m - p_bar)(p_m - p_bar)^T
struct UncertaintyReport {
  int c = 0;
  std::vector<double> mean_probs;
  std::vector<double> aleatoric;  // C x C row-major
  std::vector<double> epistemic;  // C x C row-major
  std::vector<double> per_class_aleatoric;
  std::vector<double> per_class_epistemic;

  double aleatoric_trace() const;
  double epistemic_trace() const;
};

UncertaintyReport decompose(const EnsemblePrediction& ens);

/// Index of the largest mean probability; ties resolve to the lowest index.
int argmax_lowest(std::span<const double> v);

/// Members are trained on the same data with the same data order (cfg.seed);
/// member k is initialized from member_seed(base_seed, k). Members train
/// concurrently on up to `threads` OpenMP threads and are returned in seed
/// order. Throws EmptyEnsemble for M < 1.
std::uint64_t member_seed(std::uint64_t base_seed, int k);
std::vector<nnet::Network> train_ensemble(const nnet::LabeledSet& data, const std::vector<nnet::TaskHead>& heads,
                                          const nnet::TrainConfig& cfg, int m, std::uint64_t base_seed,
                                          const nnet::Architecture& arch = {}, int threads = 0,
                                          std::vector<std::vector<nnet::EpochStats>>* traces = nullptr);

/// Per-head ensemble output over a batch of samples.
struct EnsembleOutput {
  struct Head {
    std::string id;
    nnet::HeadKind kind = nnet::HeadKind::Classification;
    int c = 1;
    std::vector<EnsemblePrediction> samples;  // classification heads
    std::vector<double> mean_probs;           // n x c
    std::vector<int> labels;                  // argmax of mean_probs
    std::vector<double> values;               // regression: member mean, n
    std::vector<double> spread;               // regression: across-member std (epistemic only), n
  };
  int n = 0;
  std::vector<Head> heads;
};

/// Runs every member over the grids and aggregates per head. Throws
/// EmptyEnsemble.
EnsembleOutput ensemble_predict(const std::vector<nnet::Network>& members, std::span<const Spectrogram* const> grids,
                                const std::vector<std::uint64_t>& member_seeds = {}, int threads = 0);

/// Confusion-conditioned uncertainty: cell (t, p) holds the mean of `value`
/// over samples with truth t and prediction p (0 for empty cells).
std::vector<double> confusion_uncertainty(const std::vector<int>& truths, const std::vector<int>& preds,
                                          const std::vector<double>& value, int c);

/// One CSV row per sample: index, true, pred, aleatoric/epistemic traces,
/// then per-class aleatoric and epistemic diagonals.
void write_uncertainty_csv(const std::filesystem::path& path, const std::vector<int>& truths,
                           const std::vector<int>& preds, const std::vector<UncertaintyReport>& reports);

}  // namespace gjam
