#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gjam/iq.hpp"

namespace gjam {

/// Iterative radix-2 decimation-in-time FFT with precomputed twiddles and
/// bit-reversal table. The plan is immutable after construction, so one plan
/// can be shared by any number of threads.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);

  std::size_t size() const noexcept { return n_; }

  /// In-place forward transform, X[k] = sum_n x[n] exp(-j 2 pi k n / N).
  void forward(std::span<cplx> data) const;
  /// In-place inverse transform including the 1/N factor.
  void inverse(std::span<cplx> data) const;

 private:
  void transform(std::span<cplx> data, bool inverse) const;

  std::size_t n_;
  std::vector<std::size_t> bitrev_;
  std::vector<cplx> twiddle_;  // exp(-j 2 pi k / N), k < N/2
};

bool is_power_of_two(std::size_t n) noexcept;
std::size_t next_power_of_two(std::size_t n) noexcept;

/// Shared plan for the spectrogram window size; built once.
const FftPlan& fft_plan_1024();

}  // namespace gjam
