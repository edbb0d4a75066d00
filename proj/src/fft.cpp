#include "gjam/fft.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "gjam/error.hpp"

namespace gjam {

bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) noexcept {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

FftPlan::FftPlan(std::size_t n) : n_(n) {
  if (!is_power_of_two(n)) throw Error(ErrorCode::InvalidSpec, "FFT size must be a power of two");
  int bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  bitrev_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (int b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
    bitrev_[i] = r;
  }
  twiddle_.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    twiddle_[k] = {std::cos(a), std::sin(a)};
  }
}

void FftPlan::forward(std::span<cplx> data) const { transform(data, false); }

void FftPlan::inverse(std::span<cplx> data) const {
  transform(data, true);
  const double s = 1.0 / static_cast<double>(n_);
  for (cplx& v : data) v *= s;
}

void FftPlan::transform(std::span<cplx> data, bool inverse) const {
  if (data.size() != n_) throw Error(ErrorCode::ShapeMismatch, "FFT input length differs from plan size");
  for (std::size_t i = 0; i < n_; ++i) {
    if (i < bitrev_[i]) std::swap(data[i], data[bitrev_[i]]);
  }
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n_ / len;
    for (std::size_t base = 0; base < n_; base += len) {
      for (std::size_t k = 0; k < half; ++k) {
        cplx w = twiddle_[k * step];
        if (inverse) w = std::conj(w);
        const cplx u = data[base + k];
        const cplx v = data[base + k + half] * w;
        data[base + k] = u + v;
        data[base + k + half] = u - v;
      }
    }
  }
}

const FftPlan& fft_plan_1024() {
  static const FftPlan plan(1024);
  return plan;
}

}  // namespace gjam
