#include "gjam/iq.hpp"

#include <cmath>

#include "gjam/error.hpp"

namespace gjam {

IQBuffer::IQBuffer(std::vector<cplx> samples, double sample_rate_hz)
    : samples_(std::move(samples)), sample_rate_(sample_rate_hz) {
  if (samples_.empty()) throw Error(ErrorCode::InvalidSpec, "IQBuffer must not be empty");
  if (!(sample_rate_ > 0.0) || !std::isfinite(sample_rate_))
    throw Error(ErrorCode::InvalidSpec, "IQBuffer sample rate must be positive");
  for (const cplx& s : samples_) {
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
      throw Error(ErrorCode::InvalidSpec, "IQBuffer sample is not finite");
  }
}

double IQBuffer::mean_power() const noexcept { return gjam::mean_power(samples_); }

void IQBuffer::scale(double gain) noexcept {
  for (cplx& s : samples_) s *= gain;
}

double mean_power(std::span<const cplx> x) noexcept {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (const cplx& s : x) acc += std::norm(s);
  return acc / static_cast<double>(x.size());
}

}  // namespace gjam
