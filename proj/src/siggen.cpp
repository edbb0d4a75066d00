#include "gjam/siggen.hpp"

#include <charconv>
#include <cmath>
#include <numbers>

#include "gjam/error.hpp"
#include "gjam/fft.hpp"

namespace gjam {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Periods given in seconds are usually whole sample counts; snap those so
// sample-domain wrapping does not drift by one sample at a boundary.
double period_in_samples(double period_s, double fs) {
  const double p = period_s * fs;
  const double r = std::round(p);
  return std::abs(p - r) < 1e-6 ? r : p;
}

double sweep_phase(double f0, double slope, double tau) { return kTwoPi * (f0 * tau + 0.5 * slope * tau * tau); }

std::vector<cplx> chirp_samples(const JammerSpec& spec, std::size_t n, double fs) {
  const double bw = spec.bandwidth_mhz * 1e6;
  const double period = period_in_samples(spec.params.sweep_period_s, fs);
  const double slope = bw / spec.params.sweep_period_s;
  std::vector<cplx> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double tau = std::fmod(static_cast<double>(i), period) / fs;
    out[i] = std::polar(1.0, sweep_phase(-0.5 * bw, slope, tau));
  }
  return out;
}

std::vector<cplx> pulsed_samples(const JammerSpec& spec, std::size_t n, double fs) {
  const double bw = spec.bandwidth_mhz * 1e6;
  const double period = period_in_samples(spec.params.pulse_period_s, fs);
  const double on = spec.params.pulse_duty * period;
  const double on_s = spec.params.pulse_duty * spec.params.pulse_period_s;
  const double slope = bw / on_s;
  std::vector<cplx> out(n, cplx{0.0, 0.0});
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = std::fmod(static_cast<double>(i), period);
    if (pos < on) out[i] = std::polar(1.0, sweep_phase(-0.5 * bw, slope, pos / fs));
  }
  return out;
}

std::vector<cplx> hopper_samples(const JammerSpec& spec, std::size_t n, double fs, Rng& rng) {
  const std::vector<double> grid = line_frequencies_hz(spec, fs);
  const auto dwell = static_cast<std::size_t>(std::max(1.0, std::round(spec.params.hop_dwell_s * fs)));
  std::vector<cplx> out(n);
  double phase = 0.0;
  double freq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % dwell == 0) freq = grid[rng.below(grid.size())];
    out[i] = std::polar(1.0, phase);
    phase = std::fmod(phase + kTwoPi * freq / fs, kTwoPi);
  }
  return out;
}

std::vector<cplx> modulated_samples(const JammerSpec& spec, std::size_t n, double fs, Rng& rng) {
  const double rate = spec.params.mod_rate_hz > 0.0 ? spec.params.mod_rate_hz : 0.5 * spec.bandwidth_mhz * 1e6;
  std::vector<cplx> out(n);
  long long symbol_index = -1;
  double symbol = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const long long idx = rate > 0.0 ? static_cast<long long>(std::floor(static_cast<double>(i) * rate / fs)) : 0;
    if (idx != symbol_index) {
      symbol = (rng.next_u64() >> 63) ? 1.0 : -1.0;
      symbol_index = idx;
    }
    out[i] = {symbol, 0.0};
  }
  return out;
}

std::vector<cplx> multitone_samples(const JammerSpec& spec, std::size_t n, double fs, Rng& rng) {
  const std::vector<double> tones = line_frequencies_hz(spec, fs);
  std::vector<double> offsets(tones.size());
  for (double& o : offsets) o = kTwoPi * rng.uniform();
  std::vector<cplx> out(n, cplx{0.0, 0.0});
  for (std::size_t k = 0; k < tones.size(); ++k) {
    // Tones sit on bin centres, so the phase increment is a rational
    // multiple of 2 pi; reduce the sample index modulo the tone period.
    const double cycles_per_sample = tones[k] / fs;
    for (std::size_t i = 0; i < n; ++i) {
      const double turns = std::fmod(cycles_per_sample * static_cast<double>(i), 1.0);
      out[i] += std::polar(1.0, kTwoPi * turns + offsets[k]);
    }
  }
  return out;
}

std::vector<cplx> noise_samples(const JammerSpec& spec, std::size_t n, double fs, Rng& rng) {
  const std::size_t len = next_power_of_two(n);
  const double half_bw = 0.5 * spec.bandwidth_mhz * 1e6;
  std::vector<cplx> spectrum(len, cplx{0.0, 0.0});
  for (std::size_t k = 0; k < len; ++k) {
    const double f = (k < len / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(len)) * fs /
                     static_cast<double>(len);
    if (std::abs(f) <= half_bw) {
      const double re = rng.normal();
      const double im = rng.normal();
      spectrum[k] = {re, im};
    }
  }
  FftPlan(len).inverse(spectrum);
  spectrum.resize(n);
  return spectrum;
}

}  // namespace

std::string_view to_string(Category c) {
  switch (c) {
    case Category::None: return "None";
    case Category::Noise: return "Noise";
    case Category::Chirp: return "Chirp";
    case Category::FreqHopper: return "FreqHopper";
    case Category::Modulated: return "Modulated";
    case Category::Multitone: return "Multitone";
    case Category::Pulsed: return "Pulsed";
  }
  return "?";
}

Category parse_category(std::string_view s) {
  for (int i = 0; i < kNumCategories; ++i) {
    const auto c = static_cast<Category>(i);
    if (s == to_string(c)) return c;
  }
  int v = -1;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc{} && ptr == s.data() + s.size() && v >= 0 && v < kNumCategories) return static_cast<Category>(v);
  throw Error(ErrorCode::InvalidSpec, "unknown interference category '" + std::string(s) + "'");
}

double dbm_to_linear(double power_dbm) { return std::pow(10.0, power_dbm / 10.0); }

void validate(const JammerSpec& spec, double sample_rate_hz) {
  const auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidSpec, m); };
  if (!(sample_rate_hz > 0.0)) fail("sample rate must be positive");
  if (!std::isfinite(spec.bandwidth_mhz) || spec.bandwidth_mhz < 0.0) fail("bandwidth must be finite and >= 0");
  if (!std::isfinite(spec.power_dbm)) fail("power must be finite");
  const auto cat = static_cast<int>(spec.category);
  if (cat < 0 || cat >= kNumCategories) fail("category out of range");
  if (spec.category == Category::None && spec.bandwidth_mhz != 0.0) fail("category None requires zero bandwidth");
  // Complex baseband: the occupied band +-BW/2 has to fit inside +-fs/2.
  if (spec.bandwidth_mhz * 1e6 > sample_rate_hz)
    throw Error(ErrorCode::NyquistViolation, "bandwidth exceeds the complex sample rate");
  const JammerParams& p = spec.params;
  switch (spec.category) {
    case Category::Chirp:
      if (!(p.sweep_period_s > 0.0)) fail("sweep_period_s must be positive");
      break;
    case Category::FreqHopper:
      if (!(p.hop_dwell_s > 0.0)) fail("hop_dwell_s must be positive");
      if (p.hop_channels < 1) fail("hop_channels must be >= 1");
      break;
    case Category::Modulated:
      if (!(p.mod_rate_hz >= 0.0)) fail("mod_rate_hz must be >= 0");
      break;
    case Category::Multitone:
      if (p.tone_count < 2) fail("tone_count must be >= 2");
      break;
    case Category::Pulsed:
      if (!(p.pulse_duty > 0.0 && p.pulse_duty < 1.0)) fail("pulse_duty must lie in (0, 1)");
      if (!(p.pulse_period_s > 0.0)) fail("pulse_period_s must be positive");
      break;
    default:
      break;
  }
}

std::vector<double> line_frequencies_hz(const JammerSpec& spec, double sample_rate_hz) {
  int count = 1;
  if (spec.category == Category::FreqHopper) {
    count = spec.params.hop_channels;
  } else if (spec.category == Category::Multitone) {
    count = spec.params.tone_count;
  } else {
    throw Error(ErrorCode::InvalidSpec, "line frequencies exist only for FreqHopper and Multitone");
  }
  const double bw = spec.bandwidth_mhz * 1e6;
  const double bin = sample_rate_hz / kWindow;
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double f = count == 1 ? 0.0 : -0.5 * bw + bw * k / (count - 1);
    out[static_cast<std::size_t>(k)] = std::round(f / bin) * bin;
  }
  return out;
}

double waveform_phase(const JammerSpec& spec, double t) {
  if (!(t >= 0.0)) throw Error(ErrorCode::InvalidSpec, "waveform_phase needs t >= 0");
  const double bw = spec.bandwidth_mhz * 1e6;
  switch (spec.category) {
    case Category::None:
    case Category::Modulated:
      return 0.0;
    case Category::Chirp: {
      const double period = spec.params.sweep_period_s;
      return sweep_phase(-0.5 * bw, bw / period, std::fmod(t, period));
    }
    case Category::Pulsed: {
      const double period = spec.params.pulse_period_s;
      const double on = spec.params.pulse_duty * period;
      const double tau = std::fmod(t, period);
      return tau < on ? sweep_phase(-0.5 * bw, bw / on, tau) : 0.0;
    }
    default:
      throw Error(ErrorCode::InvalidSpec, std::string(to_string(spec.category)) + " has no deterministic phase law");
  }
}

double instantaneous_frequency_hz(const JammerSpec& spec, double t) {
  if (!(t >= 0.0)) throw Error(ErrorCode::InvalidSpec, "instantaneous_frequency_hz needs t >= 0");
  const double bw = spec.bandwidth_mhz * 1e6;
  switch (spec.category) {
    case Category::None:
    case Category::Modulated:
      return 0.0;
    case Category::Chirp: {
      const double period = spec.params.sweep_period_s;
      return -0.5 * bw + bw / period * std::fmod(t, period);
    }
    case Category::Pulsed: {
      const double period = spec.params.pulse_period_s;
      const double on = spec.params.pulse_duty * period;
      const double tau = std::fmod(t, period);
      return tau < on ? -0.5 * bw + bw / on * tau : 0.0;
    }
    default:
      throw Error(ErrorCode::InvalidSpec, std::string(to_string(spec.category)) + " has no deterministic phase law");
  }
}

IQBuffer synth(const JammerSpec& spec, std::size_t n_samples, double sample_rate_hz, Rng& rng) {
  if (n_samples < 1) throw Error(ErrorCode::InvalidSpec, "n_samples must be >= 1");
  validate(spec, sample_rate_hz);
  std::vector<cplx> x;
  switch (spec.category) {
    case Category::None: x.assign(n_samples, cplx{0.0, 0.0}); break;
    case Category::Noise: x = noise_samples(spec, n_samples, sample_rate_hz, rng); break;
    case Category::Chirp: x = chirp_samples(spec, n_samples, sample_rate_hz); break;
    case Category::FreqHopper: x = hopper_samples(spec, n_samples, sample_rate_hz, rng); break;
    case Category::Modulated: x = modulated_samples(spec, n_samples, sample_rate_hz, rng); break;
    case Category::Multitone: x = multitone_samples(spec, n_samples, sample_rate_hz, rng); break;
    case Category::Pulsed: x = pulsed_samples(spec, n_samples, sample_rate_hz); break;
  }
  IQBuffer buf(std::move(x), sample_rate_hz);
  if (spec.category != Category::None) {
    const double p = buf.mean_power();
    if (p > 0.0) buf.scale(std::sqrt(dbm_to_linear(spec.power_dbm) / p));
  }
  return buf;
}

}  // namespace gjam
