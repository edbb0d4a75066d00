#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace gjam {

using cplx = std::complex<double>;

inline constexpr double kDefaultSampleRateHz = 100e6;

/// Complex baseband samples plus their sample rate. Non-empty, finite, and
/// sample_rate > 0 are enforced on construction.
class IQBuffer {
 public:
  IQBuffer(std::vector<cplx> samples, double sample_rate_hz);

  std::span<const cplx> samples() const noexcept { return samples_; }
  std::span<cplx> samples() noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  double sample_rate() const noexcept { return sample_rate_; }
  double duration_s() const noexcept { return static_cast<double>(samples_.size()) / sample_rate_; }

  /// Average |x|^2 over the buffer.
  double mean_power() const noexcept;

  void scale(double gain) noexcept;

 private:
  std::vector<cplx> samples_;
  double sample_rate_;
};

double mean_power(std::span<const cplx> x) noexcept;

}  // namespace gjam
