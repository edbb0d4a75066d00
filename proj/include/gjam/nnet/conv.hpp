#pragma once

#include <vector>

#include "gjam/nnet/tensor.hpp"

namespace gjam::nnet {

/// Geometry of a 2-D convolution with "same"-style padding of k/2. The
/// frequency axis (H) is zero padded; the time axis (W) replicates its edge
/// columns, so a snapshot that is constant in time maps to feature maps that
/// are constant in time for any number of columns.
struct ConvShape {
  int cin = 1;
  int cout = 1;
  int kh = 3;
  int kw = 3;
  int stride_h = 1;
  int stride_w = 1;

  int pad_h() const noexcept { return kh / 2; }
  int pad_w() const noexcept { return kw / 2; }
  int out_h(int h) const noexcept { return (h + 2 * pad_h() - kh) / stride_h + 1; }
  int out_w(int w) const noexcept { return (w + 2 * pad_w() - kw) / stride_w + 1; }
  int patch() const noexcept { return cin * kh * kw; }
  bool operator==(const ConvShape&) const = default;
};

/// y[o] = scale[o] * (W * x)[o] + bias[o]. `scale` is fixed (set once by
/// calibrate from warm-up statistics, never trained); weight and bias are the
/// trainable parameters.
class Conv2d {
 public:
  Conv2d() = default;
  explicit Conv2d(ConvShape shape);

  const ConvShape& shape() const noexcept { return shape_; }

  std::vector<double> weight;  // [cout][cin][kh][kw]
  std::vector<double> bias;    // [cout]
  std::vector<double> scale;   // [cout], fixed
  std::vector<double> grad_weight;
  std::vector<double> grad_bias;

  /// im2col + GEMM forward.
  Tensor forward(const Tensor& in) const;

  /// Accumulates parameter gradients for upstream gradient `dout`; writes the
  /// input gradient into `din` when non-null.
  void backward(const Tensor& in, const Tensor& dout, Tensor* din);

  /// Sets scale = 1/sigma and bias = -mu/sigma from per-channel statistics of
  /// W * in, so the layer output starts standardized on this batch.
  void calibrate(const Tensor& in);

  void zero_grad();

 private:
  ConvShape shape_{};
};

/// Direct seven-loop convolution with the same padding rules. Serial and
/// slow; the reference the GEMM path is tested against.
Tensor conv2d_reference(const ConvShape& shape, const std::vector<double>& weight, const std::vector<double>& bias,
                        const std::vector<double>& scale, const Tensor& in);

/// Pools groups of `factor` frequency rows. Output channel c holds the group
/// mean of input channel c, channel C + c the group maximum, so narrow lines
/// survive the reduction.
Tensor freq_pool(const Tensor& in, int factor);

}  // namespace gjam::nnet
