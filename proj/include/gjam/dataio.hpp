#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "gjam/channel.hpp"
#include "gjam/siggen.hpp"
#include "gjam/spectro.hpp"

namespace gjam {

inline constexpr std::uint16_t kRecordFormatVersion = 1;
inline constexpr const char* kGeneratorVersion = "gjam-synth/1";

/// One stored snapshot with its full label tuple. Label fields use the
/// on-disk widths so a write/read round trip is bit-exact.
struct SnapshotRecord {
  Spectrogram spectrogram;
  Category category = Category::None;
  float power_dbm = 0.0f;      // 0 for None
  float bandwidth_mhz = 0.0f;  // 0 for None
  ScenarioId scenario{};
  std::uint16_t position_id = 0;
  std::uint8_t area_id = 0;
  float angle_deg = 0.0f;
  std::uint64_t seed = 0;  // generation seed; doubles as the snapshot id

  std::uint64_t snapshot_id() const noexcept { return seed; }
  bool operator==(const SnapshotRecord&) const = default;
};

/// Record file:
///   "GJAM", u16 version, then records, each
///   u32 byte length of the rest of the record,
///   u8 category, f32 power dBm, f32 bandwidth MHz, u8 scenario number, u8 variant ('a', 'b' or 0),
///   u16 position, u8 area, f32 angle deg, u64 seed, u16 n_t,
///   n_t * 1024 f32 cells, row-major frequency-first.
/// All little-endian.
std::vector<std::uint8_t> encode_records(const std::vector<SnapshotRecord>& records);
/// Throws BadMagic, VersionMismatch, TruncatedRecord. Nothing is returned on
/// error.
std::vector<SnapshotRecord> decode_records(const std::vector<std::uint8_t>& bytes);

void write_records(const std::filesystem::path& path, const std::vector<SnapshotRecord>& records);
std::vector<SnapshotRecord> read_records(const std::filesystem::path& path);

/// Synthetic analogue of a dataset overview table.
struct DatasetManifest {
  struct Key {
    std::string scenario;
    std::string category;
    double power_dbm = 0.0;
    double bandwidth_mhz = 0.0;
    auto operator<=>(const Key&) const = default;
  };
  std::map<Key, std::uint64_t> counts;
  std::uint64_t total = 0;
  std::uint16_t format_version = kRecordFormatVersion;
  std::string generator_version = kGeneratorVersion;
  std::string preset_hash;
  std::string records_hash;  // FNV-1a 64 of the record file bytes
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
  bool operator==(const DatasetManifest&) const = default;
};

DatasetManifest build_manifest(const std::vector<SnapshotRecord>& records, const std::vector<std::uint8_t>& file_bytes,
                               const std::string& preset_hash, std::uint64_t seed);

/// Sidecar path of a record file: <file>.manifest.json.
std::filesystem::path manifest_path(const std::filesystem::path& records);

/// Reads a record file and checks it against its sidecar manifest (counts,
/// total, version and content hash). Throws ManifestMismatch, DataMissing.
std::vector<SnapshotRecord> open_dataset(const std::filesystem::path& path, DatasetManifest* manifest = nullptr);

/// Generation plan. Every row expands to the product scenarios x categories x
/// powers; each combination yields `count` snapshots whose bandwidth and
/// position are drawn uniformly from the row's menus.
struct PlanRow {
  std::vector<ScenarioId> scenarios;
  std::vector<Category> categories;
  std::vector<double> powers_dbm;
  std::vector<double> bandwidths_mhz;  // empty selects the per-category default menu
  std::vector<int> positions;          // empty selects each scenario's default position
  int count = 0;
  JammerParams params{};
};

struct GenerationPlan {
  int n_t = kMaxSnapshotLength;
  double sample_rate_hz = kDefaultSampleRateHz;
  double receiver_gain_db = kReceiverGainDb;
  bool randomize_phases = true;  // redraw ray phases per snapshot
  std::vector<PlanRow> rows;
  PresetTable presets{};

  /// Throws PlanInvalid.
  static GenerationPlan from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  std::size_t total_count() const;
};

/// Default bandwidth menu of a category (MHz).
const std::vector<double>& default_bandwidths(Category c);

/// Position keywords accepted in plans: "hall" (0..15), "gallery" (16..45),
/// "all" (0..45).
std::vector<int> parse_positions(const nlohmann::json& j);

/// One concrete snapshot job after plan expansion.
struct SnapshotJob {
  JammerSpec spec;
  ScenarioId scenario;
  int position_id = 0;
  std::uint64_t seed = 0;
};

/// Expands the plan into jobs in a fixed order. Job i draws its bandwidth and
/// position from derive_seed(seed, i), and the same value seeds its signal.
std::vector<SnapshotJob> expand_plan(const GenerationPlan& plan, std::uint64_t seed);

/// siggen -> channel -> spectro for one job.
SnapshotRecord render_job(const SnapshotJob& job, const GenerationPlan& plan);

/// All jobs rendered across OpenMP threads (threads <= 0 keeps the runtime
/// default); output order and bytes do not depend on the thread count.
std::vector<SnapshotRecord> synthesize(const GenerationPlan& plan, std::uint64_t seed, int threads = 0);
/// Same records, rendered one after another.
std::vector<SnapshotRecord> synthesize_serial(const GenerationPlan& plan, std::uint64_t seed);

/// Synthesizes and writes <dir>/records.gjam, then the manifest sidecar.
DatasetManifest synthesize_dataset(const GenerationPlan& plan, std::uint64_t seed, const std::filesystem::path& dir,
                                   int threads = 0);

/// Hook for externally recorded snapshots: one file in, a record stream out.
/// No adapter ships with the library.
using ImportAdapter = std::function<std::vector<SnapshotRecord>(const std::filesystem::path&)>;

}  // namespace gjam
