#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gjam/iq.hpp"
#include "gjam/rng.hpp"

namespace gjam {

/// Interference category. The numeric values are the class labels.
enum class Category : std::uint8_t {
  None = 0,
  Noise = 1,
  Chirp = 2,
  FreqHopper = 3,
  Modulated = 4,
  Multitone = 5,
  Pulsed = 6,
};

inline constexpr int kNumCategories = 7;

std::string_view to_string(Category c);
/// Parses a category name (case-sensitive, as printed by to_string) or its
/// numeric label. Throws Error(InvalidSpec).
Category parse_category(std::string_view s);

/// FFT length of one spectrogram column. Hop grids and tones are placed on
/// bin centres of this transform.
inline constexpr int kWindow = 1024;
inline constexpr double kWindowSeconds = kWindow / kDefaultSampleRateHz;  // 10.24 us

/// Per-type waveform parameters. Fields irrelevant to a category are ignored.
struct JammerParams {
  double sweep_period_s = kWindowSeconds;     // Chirp
  double hop_dwell_s = 2 * kWindowSeconds;    // FreqHopper
  int hop_channels = 8;                       // FreqHopper grid size
  double mod_rate_hz = 0.0;                   // Modulated; 0 selects bandwidth/2
  int tone_count = 5;                         // Multitone
  double pulse_duty = 0.3;                    // Pulsed
  double pulse_period_s = kWindowSeconds / 4; // Pulsed

  bool operator==(const JammerParams&) const = default;
};

struct JammerSpec {
  Category category = Category::None;
  double bandwidth_mhz = 0.0;
  double power_dbm = 0.0;
  JammerParams params{};

  bool operator==(const JammerSpec&) const = default;
};

/// Throws InvalidSpec or NyquistViolation.
void validate(const JammerSpec& spec, double sample_rate_hz);

/// Linear power that `power_dbm` calibrates to (0 dBm == unit mean square).
double dbm_to_linear(double power_dbm);

/// Synthesizes `n_samples` of the interference described by `spec`.
///
/// Every category except None is rescaled so the buffer's mean power equals
/// dbm_to_linear(spec.power_dbm). None returns zeros; receiver noise is added
/// by the channel. Random quantities (noise, hop choices, symbols, tone
/// phases) come from `rng`; the result is a pure function of the arguments
/// and the rng state.
///
///   Chirp       sawtooth linear sweep -BW/2 -> +BW/2 every sweep_period
///   FreqHopper  tone redrawn from an evenly spaced grid over +-BW/2 every dwell
///   Modulated   BPSK with rectangular symbols at mod_rate, carrier at 0 Hz
///   Multitone   tone_count equal-power tones evenly spaced over +-BW/2
///   Pulsed      rectangular gate of period pulse_period and duty pulse_duty,
///               carrying a linear sweep over +-BW/2 during each on-interval
///   Noise       white complex Gaussian, brick-wall low-passed to +-BW/2
IQBuffer synth(const JammerSpec& spec, std::size_t n_samples, double sample_rate_hz, Rng& rng);

/// Deterministic phase law of the swept and carrier categories at time t.
/// Chirp: 2 pi (f0 tau + k tau^2 / 2), tau = t mod sweep_period,
/// f0 = -BW/2, k = BW / sweep_period. Pulsed: same law restarted at every
/// pulse with the on-interval as sweep period (0 while gated off).
/// Modulated and None: 0 (carrier at DC). Noise, FreqHopper and Multitone
/// have no single phase law and throw InvalidSpec.
double waveform_phase(const JammerSpec& spec, double t);

/// d/dt of waveform_phase divided by 2 pi, for the same categories.
double instantaneous_frequency_hz(const JammerSpec& spec, double t);

/// Frequencies (Hz) of the FreqHopper grid or Multitone lines, snapped to
/// bin centres of a kWindow-point FFT at `sample_rate_hz`.
std::vector<double> line_frequencies_hz(const JammerSpec& spec, double sample_rate_hz);

}  // namespace gjam
