#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gjam/iq.hpp"
#include "gjam/siggen.hpp"

namespace gjam {

inline constexpr int kFreqBins = kWindow;
inline constexpr int kMaxSnapshotLength = 34;
inline constexpr double kLogFloor = 1e-12;
inline constexpr double kNormMinDb = -182.77;
inline constexpr double kNormMaxDb = -17.12;
/// Receiver front-end gain applied before the STFT so channel outputs
/// (0 dBm == unit mean square) land inside the fixed normalization range.
inline constexpr double kReceiverGainDb = -100.0;

/// Raw dB magnitudes, kFreqBins rows x cols columns, row-major
/// (index = row * cols + col). Row 0 is -fs/2, row kFreqBins/2 is DC.
struct DbMatrix {
  int cols = 0;
  std::vector<double> db;

  double at(int row, int col) const { return db[static_cast<std::size_t>(row) * cols + col]; }
};

/// Normalized snapshot grid: kFreqBins x n_t cells in [0, 1], stored as f32
/// row-major frequency-first (index = f * n_t + t), the on-disk layout.
struct Spectrogram {
  int n_t = 0;
  std::vector<float> cells;
  double min_db = kNormMinDb;
  double max_db = kNormMaxDb;

  float at(int f, int t) const { return cells[static_cast<std::size_t>(f) * n_t + t]; }
  bool operator==(const Spectrogram&) const = default;
};

/// Non-overlapping rectangular-window 1024-point STFT, 20 log10(|X| + 1e-12),
/// fftshifted. A trailing partial window is dropped. Throws TooShort when
/// fewer than 1024 samples are given.
DbMatrix stft_db(std::span<const cplx> x);
inline DbMatrix stft_db(const IQBuffer& x) { return stft_db(x.samples()); }

/// Fixed min-max mapping of dB values onto [0, 1], clamped.
double normalize_db(double v);
Spectrogram normalize(const DbMatrix& raw);

/// First n_t columns of stft_db(x), normalized. n_t in 1..34.
Spectrogram frame_snapshot(const IQBuffer& x, int n_t);

/// frame_snapshot of the signal after the receiver front-end gain.
Spectrogram render_snapshot(const IQBuffer& x, int n_t, double receiver_gain_db = kReceiverGainDb);

/// First n_t columns of an existing grid.
Spectrogram truncate(const Spectrogram& s, int n_t);

}  // namespace gjam
