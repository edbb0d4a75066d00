#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gjam/nnet/conv.hpp"
#include "gjam/nnet/tensor.hpp"
#include "gjam/spectro.hpp"

namespace gjam::nnet {

/// Encoder layout: frequency pooling, fixed input standardization, stem conv (stride 2 on frequency), one
/// residual block per entry of `widths` (two 3x3 convs, first one strided
/// (2,2), 1x1 projection on the skip path), global average pooling.
struct Architecture {
  int in_channels = 1;  // 3 replicates the grid, for parity with image backbones
  int freq_pool = 8;
  int stem_width = 16;
  std::vector<int> widths{16, 32, 64};

  int embedding_dim() const { return widths.empty() ? stem_width : widths.back(); }
  bool operator==(const Architecture&) const = default;
};

enum class HeadKind : std::uint8_t { Classification = 0, Regression = 1 };

struct TaskHead {
  std::string id;
  HeadKind kind = HeadKind::Classification;
  int n_c = 2;          // 1 for regression
  double weight = 1.0;  // 0 leaves the head untrained

  bool operator==(const TaskHead&) const = default;
};

/// z-score statistics of a regression target, fitted on the training set.
struct TargetStats {
  double mean = 0.0;
  double std = 1.0;
  bool operator==(const TargetStats&) const = default;
};

/// Linear head on the embedding.
struct HeadLayer {
  TaskHead desc;
  TargetStats stats;
  std::vector<double> weight;  // [n_c][embedding]
  std::vector<double> bias;    // [n_c]
  std::vector<double> grad_weight;
  std::vector<double> grad_bias;
};

struct ResidualBlock {
  Conv2d conv1;
  Conv2d conv2;
  Conv2d proj;
};

/// Raw head outputs, heads[h] is n x n_c row-major. Regression outputs are in
/// standardized units.
struct Outputs {
  int n = 0;
  std::vector<std::vector<double>> heads;
};

/// targets[h][i]: class index (as a double) or regression value in physical
/// units. NaN marks a missing label.
using Targets = std::vector<std::vector<double>>;

struct LossResult {
  double total = 0.0;
  std::vector<double> per_head;  // unweighted CE or RMSE
};

/// Fixed per-channel standardization of the pooled input, x' = (x - mean) * scale.
struct InputNorm {
  std::vector<double> mean;
  std::vector<double> scale;
  bool operator==(const InputNorm&) const = default;
};

/// Mutable view of one parameter block and its gradient.
struct ParamView {
  std::string name;
  std::span<double> values;
  std::span<double> grads;
};

class Network {
 public:
  Network() = default;
  /// He fan-in initialization of the convolutions, small uniform heads, all
  /// drawn from `init_seed`.
  Network(Architecture arch, std::vector<TaskHead> heads, std::uint64_t init_seed);

  const Architecture& arch() const noexcept { return arch_; }
  const std::vector<HeadLayer>& heads() const noexcept { return heads_; }
  std::vector<HeadLayer>& heads() noexcept { return heads_; }
  ResidualBlock& block(std::size_t i) { return blocks_.at(i); }
  Conv2d& stem() noexcept { return stem_; }
  const Conv2d& stem() const noexcept { return stem_; }
  const std::vector<ResidualBlock>& blocks() const noexcept { return blocks_; }
  const InputNorm& input_norm() const noexcept { return input_norm_; }
  InputNorm& input_norm() noexcept { return input_norm_; }
  std::vector<ResidualBlock>& blocks() noexcept { return blocks_; }

  /// x: N x in_channels x kFreqBins x n_t. Throws ShapeMismatch.
  Outputs forward(const Tensor& x) const;
  /// Embedding vectors, N x embedding_dim row-major.
  std::vector<double> embed(const Tensor& x) const;

  LossResult loss(const Outputs& out, const Targets& targets) const;
  /// Forward, loss and backward in one pass. Gradients accumulate into the
  /// parameter blocks; call zero_grad first.
  LossResult forward_backward(const Tensor& x, const Targets& targets, Outputs* out = nullptr);
  void zero_grad();

  /// On/off state of every ReLU for input x. Central differences are only
  /// meaningful for steps that leave this pattern unchanged.
  std::vector<bool> relu_pattern(const Tensor& x) const;

  /// Fixes the input standardization, then the per-channel scale and bias of
  /// every convolution, from the statistics of `x`, layer by layer.
  void calibrate(const Tensor& x);

  std::vector<ParamView> parameters();
  std::size_t parameter_count();

 private:
  struct Cache;
  Tensor encode(const Tensor& x, Cache* cache) const;
  void check_input(const Tensor& x) const;

  Architecture arch_{};
  InputNorm input_norm_;
  Conv2d stem_;
  std::vector<ResidualBlock> blocks_;
  std::vector<HeadLayer> heads_;
};

/// Numerically stable softmax of each row of an n x c matrix.
std::vector<double> softmax_rows(std::span<const double> logits, int c);

/// Stacks grids (all with the same n_t) into an N x channels x 1024 x n_t tensor.
Tensor to_tensor(std::span<const Spectrogram* const> grids, int channels = 1);

/// Decoded predictions: classification heads hold softmax rows, regression
/// heads hold values in physical units.
struct Prediction {
  int n = 0;
  std::vector<std::vector<double>> heads;
};

/// Batched inference, chunks of `batch` samples spread over OpenMP threads
/// (threads <= 0 keeps the runtime default). Results do not depend on the
/// thread count.
Prediction predict(const Network& net, std::span<const Spectrogram* const> grids, int threads = 0, int batch = 32);
/// Same result, one chunk after another on the calling thread.
Prediction predict_serial(const Network& net, std::span<const Spectrogram* const> grids, int batch = 32);

}  // namespace gjam::nnet
