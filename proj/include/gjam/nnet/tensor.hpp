#pragma once

#include <cstddef>
#include <vector>

namespace gjam::nnet {

/// Dense NCHW activation block (H = frequency, W = time).
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), v(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0) {}

  std::size_t size() const noexcept { return v.size(); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }
  std::size_t sample_size() const noexcept { return static_cast<std::size_t>(c) * h * w; }
  double* sample(int i) noexcept { return v.data() + static_cast<std::size_t>(i) * sample_size(); }
  const double* sample(int i) const noexcept { return v.data() + static_cast<std::size_t>(i) * sample_size(); }
  double& at(int i, int ch, int y, int x) noexcept {
    return v[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
  }
  double at(int i, int ch, int y, int x) const noexcept {
    return v[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
  }
  bool same_shape(const Tensor& o) const noexcept { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

}  // namespace gjam::nnet
