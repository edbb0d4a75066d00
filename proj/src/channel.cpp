#include "gjam/channel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "gjam/bytes.hpp"
#include "gjam/error.hpp"

namespace gjam {

namespace {

using nlohmann::json;

std::vector<ScenarioConfig> builtin_presets() {
  // Absorption constants are a calibration, not measurements. Scenarios 4, 7
  // and 8 bury a 6 dBm jammer below the receiver noise floor at every grid
  // position; the others keep the direct path within 10 dB and add
  // reflections of increasing strength.
  const auto s = [](std::string_view id) { return parse_scenario(id); };
  return {
      {s("1a"), 0.0, {}, kNoiseFloorDb, 1, "open hall, no absorber walls"},
      {s("2"), -3.0, {{0.05e-6, -9.0, 0.0}, {0.12e-6, -14.0, 0.0}}, kNoiseFloorDb, 1, "1 AW to MXG"},
      {s("3"), -4.0, {{0.03e-6, -8.0, 0.0}, {0.09e-6, -12.0, 0.0}, {0.21e-6, -16.0, 0.0}}, kNoiseFloorDb, 1,
       "1 AW to antenna"},
      {s("4"), -40.0, {{0.08e-6, -52.0, 0.0}, {0.20e-6, -56.0, 0.0}}, kNoiseFloorDb, 1, "3 AW + small AW to MXG"},
      {s("5"), -8.0, {{0.04e-6, -6.0, 0.0}, {0.11e-6, -9.0, 0.0}, {0.23e-6, -12.0, 0.0}, {0.37e-6, -15.0, 0.0}},
       kNoiseFloorDb, 1, "3 AW to MXG"},
      {s("6"), -6.0, {{0.06e-6, -8.0, 0.0}, {0.15e-6, -11.0, 0.0}, {0.30e-6, -15.0, 0.0}}, kNoiseFloorDb, 1,
       "4 AW to antenna"},
      {s("7"), -42.0, {{0.10e-6, -53.0, 0.0}, {0.25e-6, -57.0, 0.0}}, kNoiseFloorDb, 1, "4 AW to MXG"},
      {s("8"), -45.0, {{0.10e-6, -55.0, 0.0}, {0.30e-6, -58.0, 0.0}}, kNoiseFloorDb, 1, "4 AW + small AW to MXG"},
      {s("9"), -5.0, {{0.02e-6, -7.0, 0.0}, {0.05e-6, -10.0, 0.0}}, kNoiseFloorDb, 1, "4 AW as corridor"},
      {s("10"), -6.0, {{0.07e-6, -9.0, 0.0}, {0.18e-6, -13.0, 0.0}, {0.33e-6, -17.0, 0.0}}, kNoiseFloorDb, 1,
       "4 AW to MXG"},
      {s("11"), -4.0, {{0.04e-6, -10.0, 0.0}, {0.09e-6, -13.0, 0.0}, {0.16e-6, -16.0, 0.0}}, kNoiseFloorDb, 1,
       "3 small AW around MXG"},
      {s("1b"), 0.0, {}, kNoiseFloorDb, 2, "open hall, second antenna/MXG placement"},
  };
}

std::vector<PositionLabel> build_grid() {
  std::vector<PositionLabel> grid;
  grid.reserve(kNumPositions);
  const double hall_x[] = {5.5, 16.5, 27.5, 38.5};
  const double hall_y[] = {-11.25, -3.75, 3.75, 11.25};
  for (double x : hall_x)
    for (double y : hall_y) grid.push_back(make_position(static_cast<int>(grid.size()), x, y, false));
  for (int i = 0; i < 10; ++i) grid.push_back(make_position(static_cast<int>(grid.size()), 4.0 + 4.0 * i, -14.0, true));
  for (int i = 0; i < 10; ++i)
    grid.push_back(make_position(static_cast<int>(grid.size()), 43.0, -13.5 + 3.0 * i, true));
  for (int i = 0; i < 10; ++i) grid.push_back(make_position(static_cast<int>(grid.size()), 40.0 - 4.0 * i, 14.0, true));
  return grid;
}

json ray_to_json(const Ray& r) { return {{"delay_s", r.delay_s}, {"gain_db", r.gain_db}, {"phase", r.phase}}; }

}  // namespace

std::string to_string(ScenarioId id) {
  std::string s = std::to_string(id.number);
  if (id.variant != '\0') s.push_back(id.variant);
  return s;
}

ScenarioId parse_scenario(std::string_view s) {
  const auto bad = [&] { return Error(ErrorCode::UnknownScenario, "unknown scenario '" + std::string(s) + "'"); };
  if (s == "1a") return {1, 'a'};
  if (s == "1b") return {1, 'b'};
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || v < 2 || v > 11) throw bad();
  return {static_cast<std::uint8_t>(v), '\0'};
}

const std::vector<ScenarioId>& all_scenarios() {
  static const std::vector<ScenarioId> ids = [] {
    std::vector<ScenarioId> v{{1, 'a'}};
    for (std::uint8_t n = 2; n <= 11; ++n) v.push_back({n, '\0'});
    v.push_back({1, 'b'});
    return v;
  }();
  return ids;
}

void validate(const ScenarioConfig& cfg) {
  const auto fail = [&](const std::string& m) {
    throw Error(ErrorCode::InvalidSpec, "scenario " + to_string(cfg.id) + ": " + m);
  };
  if (!(cfg.direct_gain_db <= 0.0)) fail("direct_gain_db must be <= 0");
  if (cfg.rays.size() > kMaxRays) fail("at most 8 rays");
  for (const Ray& r : cfg.rays) {
    if (!(r.delay_s >= 0.0) || !std::isfinite(r.delay_s)) fail("ray delay must be finite and >= 0");
    if (!(r.gain_db <= 0.0)) fail("ray gain_db must be <= 0");
    if (!std::isfinite(r.phase)) fail("ray phase must be finite");
  }
  if (std::isnan(cfg.noise_floor_db) || cfg.noise_floor_db == std::numeric_limits<double>::infinity())
    fail("noise_floor_db must be finite or -inf");
  if (cfg.id.number == 1 && (cfg.direct_gain_db != 0.0 || !cfg.rays.empty()))
    fail("scenario 1 is the open-hall identity preset");
  if (cfg.default_position < 0 || cfg.default_position >= kNumPositions) fail("default_position out of range");
}

PresetTable::PresetTable() : presets_(builtin_presets()) {}

ScenarioConfig scenario_preset(ScenarioId id) {
  static const PresetTable table;
  return table.at(id);
}

ScenarioConfig scenario_preset(std::string_view id) { return scenario_preset(parse_scenario(id)); }

const ScenarioConfig& PresetTable::at(ScenarioId id) const {
  for (const ScenarioConfig& c : presets_)
    if (c.id == id) return c;
  throw Error(ErrorCode::UnknownScenario, "no preset for scenario " + to_string(id));
}

void PresetTable::set(const ScenarioConfig& cfg) {
  validate(cfg);
  for (ScenarioConfig& c : presets_) {
    if (c.id == cfg.id) {
      c = cfg;
      return;
    }
  }
  presets_.push_back(cfg);
}

json PresetTable::to_json() const {
  json arr = json::array();
  for (const ScenarioConfig& c : presets_) {
    json rays = json::array();
    for (const Ray& r : c.rays) rays.push_back(ray_to_json(r));
    json noise = std::isinf(c.noise_floor_db) ? json(nullptr) : json(c.noise_floor_db);
    arr.push_back({{"scenario", to_string(c.id)},
                   {"direct_gain_db", c.direct_gain_db},
                   {"noise_floor_db", noise},
                   {"default_position", c.default_position},
                   {"note", c.note},
                   {"rays", rays}});
  }
  return {{"format", "gjam-channel-presets"},
          {"version", 1},
          {"reference_distance_m", kReferenceDistanceM},
          {"presets", arr}};
}

PresetTable PresetTable::from_json(const json& j) {
  PresetTable table;
  try {
    if (j.value("format", std::string{}) != "gjam-channel-presets")
      throw Error(ErrorCode::InvalidSpec, "preset file: unexpected format tag");
    for (const json& p : j.at("presets")) {
      ScenarioConfig c;
      c.id = parse_scenario(p.at("scenario").get<std::string>());
      c.direct_gain_db = p.at("direct_gain_db").get<double>();
      const json& nf = p.at("noise_floor_db");
      c.noise_floor_db = nf.is_null() ? kNoNoise : nf.get<double>();
      c.default_position = p.value("default_position", 1);
      c.note = p.value("note", std::string{});
      for (const json& r : p.value("rays", json::array()))
        c.rays.push_back({r.at("delay_s").get<double>(), r.at("gain_db").get<double>(), r.value("phase", 0.0)});
      table.set(c);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, std::string("preset file: ") + e.what());
  }
  return table;
}

std::string PresetTable::hash() const {
  const std::string dump = to_json().dump();
  return hex64(fnv1a64(reinterpret_cast<const std::uint8_t*>(dump.data()), dump.size()));
}

double PositionLabel::distance_m() const noexcept { return std::hypot(x_m, y_m); }

double bearing_deg(double x_m, double y_m) {
  double a = std::atan2(y_m, x_m) * 180.0 / std::numbers::pi;
  if (a < 0.0) a += 360.0;
  if (a >= 360.0) a -= 360.0;
  return a;
}

int area_of(double x_m, double y_m) { return (x_m >= 0.5 * kHallLengthM ? 2 : 0) + (y_m >= 0.0 ? 1 : 0); }

PositionLabel make_position(int position_id, double x_m, double y_m, bool on_gallery) {
  return {position_id, area_of(x_m, y_m), on_gallery, x_m, y_m, bearing_deg(x_m, y_m)};
}

const std::vector<PositionLabel>& position_grid() {
  static const std::vector<PositionLabel> grid = build_grid();
  return grid;
}

const PositionLabel& position(int position_id) {
  if (position_id < 0 || position_id >= kNumPositions)
    throw Error(ErrorCode::InvalidSpec, "position id out of range: " + std::to_string(position_id));
  return position_grid()[static_cast<std::size_t>(position_id)];
}

double distance_loss_db(const PositionLabel& pos) {
  return 20.0 * std::log10(pos.distance_m() / kReferenceDistanceM);
}

IQBuffer apply_channel(const IQBuffer& x, const ScenarioConfig& cfg, const PositionLabel& pos, Rng& rng) {
  validate(cfg);
  const std::span<const cplx> in = x.samples();
  const std::size_t n = in.size();
  const double fs = x.sample_rate();

  struct Tap {
    std::size_t delay;
    cplx gain;
  };
  const double path = std::pow(10.0, -distance_loss_db(pos) / 20.0);
  std::vector<Tap> taps{{0, cplx{path * std::pow(10.0, cfg.direct_gain_db / 20.0), 0.0}}};
  for (const Ray& r : cfg.rays) {
    const double d = std::round(r.delay_s * fs);
    if (d >= static_cast<double>(n))
      throw Error(ErrorCode::DelayTooLarge, "ray delay " + std::to_string(r.delay_s) + " s exceeds the buffer");
    taps.push_back({static_cast<std::size_t>(d), std::polar(path * std::pow(10.0, r.gain_db / 20.0), r.phase)});
  }

  std::vector<cplx> out(n, cplx{0.0, 0.0});
  for (const Tap& tap : taps) {
    for (std::size_t i = tap.delay; i < n; ++i) out[i] += tap.gain * in[i - tap.delay];
  }
  if (std::isfinite(cfg.noise_floor_db)) {
    const double sigma = std::sqrt(0.5 * std::pow(10.0, cfg.noise_floor_db / 10.0));
    for (cplx& v : out) {
      const double re = rng.normal();
      const double im = rng.normal();
      v += cplx{sigma * re, sigma * im};
    }
  }
  return IQBuffer(std::move(out), fs);
}

ScenarioConfig randomize_ray_phases(ScenarioConfig cfg, Rng& rng) {
  for (Ray& r : cfg.rays) r.phase = 2.0 * std::numbers::pi * rng.uniform();
  return cfg;
}

}  // namespace gjam
