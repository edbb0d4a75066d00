#include "gjam/spectro.hpp"

#include <algorithm>
#include <cmath>

#include "gjam/error.hpp"
#include "gjam/fft.hpp"

namespace gjam {

DbMatrix stft_db(std::span<const cplx> x) {
  if (x.size() < static_cast<std::size_t>(kWindow))
    throw Error(ErrorCode::TooShort, "need at least 1024 samples, got " + std::to_string(x.size()));
  const int cols = static_cast<int>(x.size() / kWindow);
  const FftPlan& plan = fft_plan_1024();
  DbMatrix m;
  m.cols = cols;
  m.db.resize(static_cast<std::size_t>(kFreqBins) * cols);
  std::vector<cplx> buf(kWindow);
  for (int t = 0; t < cols; ++t) {
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(t) * kWindow, kWindow, buf.begin());
    plan.forward(buf);
    for (int k = 0; k < kWindow; ++k) {
      // fftshift: bin k lands on row (k + N/2) mod N.
      const int row = (k + kWindow / 2) % kWindow;
      m.db[static_cast<std::size_t>(row) * cols + t] = 20.0 * std::log10(std::abs(buf[k]) + kLogFloor);
    }
  }
  return m;
}

double normalize_db(double v) { return std::clamp((v - kNormMinDb) / (kNormMaxDb - kNormMinDb), 0.0, 1.0); }

Spectrogram normalize(const DbMatrix& raw) {
  Spectrogram s;
  s.n_t = raw.cols;
  s.cells.resize(raw.db.size());
  for (std::size_t i = 0; i < raw.db.size(); ++i) {
    if (!std::isfinite(raw.db[i])) throw Error(ErrorCode::InvalidSpec, "non-finite dB value");
    s.cells[i] = static_cast<float>(normalize_db(raw.db[i]));
  }
  return s;
}

Spectrogram frame_snapshot(const IQBuffer& x, int n_t) {
  if (n_t < 1 || n_t > kMaxSnapshotLength)
    throw Error(ErrorCode::InvalidSpec, "snapshot length must lie in 1..34");
  if (x.size() < static_cast<std::size_t>(n_t) * kWindow)
    throw Error(ErrorCode::TooShort, "buffer holds fewer than n_t windows");
  const auto head = x.samples().first(static_cast<std::size_t>(n_t) * kWindow);
  return normalize(stft_db(head));
}

Spectrogram render_snapshot(const IQBuffer& x, int n_t, double receiver_gain_db) {
  IQBuffer scaled = x;
  scaled.scale(std::pow(10.0, receiver_gain_db / 20.0));
  return frame_snapshot(scaled, n_t);
}

Spectrogram truncate(const Spectrogram& s, int n_t) {
  if (n_t < 1 || n_t > s.n_t) throw Error(ErrorCode::TooShort, "cannot truncate to a longer snapshot");
  Spectrogram out;
  out.n_t = n_t;
  out.min_db = s.min_db;
  out.max_db = s.max_db;
  out.cells.resize(static_cast<std::size_t>(kFreqBins) * n_t);
  for (int f = 0; f < kFreqBins; ++f)
    std::copy_n(s.cells.begin() + static_cast<std::ptrdiff_t>(f) * s.n_t, n_t,
                out.cells.begin() + static_cast<std::ptrdiff_t>(f) * n_t);
  return out;
}

}  // namespace gjam
