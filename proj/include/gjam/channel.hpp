#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gjam/iq.hpp"
#include "gjam/rng.hpp"

namespace gjam {

/// Recording scenario: 1..11, scenario 1 split into variants 'a' and 'b'.
struct ScenarioId {
  std::uint8_t number = 1;
  char variant = 'a';  // 'a' or 'b' for scenario 1, '\0' otherwise

  bool operator==(const ScenarioId&) const = default;
  auto operator<=>(const ScenarioId&) const = default;
};

std::string to_string(ScenarioId id);
/// Accepts "1a", "1b", "2" .. "11". Throws Error(UnknownScenario).
ScenarioId parse_scenario(std::string_view s);
/// The twelve scenario variants in table order: 1a, 2, ..., 11, 1b.
const std::vector<ScenarioId>& all_scenarios();

struct Ray {
  double delay_s = 0.0;
  double gain_db = 0.0;
  double phase = 0.0;  // radians

  bool operator==(const Ray&) const = default;
};

inline constexpr std::size_t kMaxRays = 8;
inline constexpr double kNoiseFloorDb = -50.0;
inline constexpr double kNoNoise = -std::numeric_limits<double>::infinity();

struct ScenarioConfig {
  ScenarioId id{};
  double direct_gain_db = 0.0;
  std::vector<Ray> rays;
  double noise_floor_db = kNoiseFloorDb;  // -inf disables receiver noise
  int default_position = 1;               // generator position used by plans that pin none
  std::string note;

  bool operator==(const ScenarioConfig&) const = default;
};

/// Throws InvalidSpec on a malformed preset (positive gains, > kMaxRays
/// rays, negative delays).
void validate(const ScenarioConfig& cfg);

/// Built-in preset for a scenario. See docs/channel_presets.md for the table
/// and how the absorption constants were chosen.
ScenarioConfig scenario_preset(ScenarioId id);
ScenarioConfig scenario_preset(std::string_view id);

/// Preset table, overridable from JSON so experiments can pin constants.
class PresetTable {
 public:
  PresetTable();  // built-in presets
  static PresetTable from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  /// FNV-1a 64 of the canonical JSON dump, hex encoded.
  std::string hash() const;

  const ScenarioConfig& at(ScenarioId id) const;
  void set(const ScenarioConfig& cfg);
  const std::vector<ScenarioConfig>& all() const noexcept { return presets_; }

 private:
  std::vector<ScenarioConfig> presets_;
};

/// Generator placement. Hall geometry: 44 m x 30 m, antenna at the midpoint
/// of one short wall at the origin looking along +x; y spans [-15, 15].
struct PositionLabel {
  int position_id = 0;   // 0..15 hall floor, 16..45 gallery
  int area_id = 0;       // 0..3
  bool on_gallery = false;
  double x_m = 0.0;
  double y_m = 0.0;
  double angle_deg = 0.0;  // bearing from the antenna, [0, 360), 0 = straight ahead

  double distance_m() const noexcept;
  bool operator==(const PositionLabel&) const = default;
};

inline constexpr double kHallLengthM = 44.0;
inline constexpr double kHallWidthM = 30.0;
inline constexpr double kReferenceDistanceM = 1.0;
inline constexpr int kNumHallPositions = 16;
inline constexpr int kNumGalleryPositions = 30;
inline constexpr int kNumPositions = kNumHallPositions + kNumGalleryPositions;
inline constexpr int kNumAreas = 4;

/// Bearing of (x, y) seen from the antenna, degrees in [0, 360).
double bearing_deg(double x_m, double y_m);
/// Hall quadrant of a point: near/far half along x, left/right along y.
int area_of(double x_m, double y_m);
PositionLabel make_position(int position_id, double x_m, double y_m, bool on_gallery);

/// 16 hall positions on a 4x4 grid followed by 30 gallery positions along the
/// two long walls and the far wall.
const std::vector<PositionLabel>& position_grid();
const PositionLabel& position(int position_id);

/// Free-space loss relative to kReferenceDistanceM, dB (positive = weaker).
double distance_loss_db(const PositionLabel& pos);

/// y[n] = g_pos (g_d x[n] + sum_r g_r e^{j phi_r} x[n - d_r]) + w[n]
/// with g_pos the free-space distance gain, d_r = round(delay_r * fs) and
/// x[n < 0] = 0. w is complex Gaussian of mean square 10^(noise_floor_db/10)
/// drawn from `rng` (no draws when the floor is -inf). Length is preserved.
/// Throws DelayTooLarge when a ray delay reaches the buffer length.
IQBuffer apply_channel(const IQBuffer& x, const ScenarioConfig& cfg, const PositionLabel& pos, Rng& rng);

/// Copy of `cfg` with every ray phase drawn uniformly from [0, 2 pi).
/// Called once per snapshot (block fading).
ScenarioConfig randomize_ray_phases(ScenarioConfig cfg, Rng& rng);

}  // namespace gjam
