#include "gjam/dataio.hpp"

#include <algorithm>
#include <cstring>
#include <exception>
#include <set>

#include <omp.h>

#include "gjam/bytes.hpp"
#include "gjam/error.hpp"

namespace gjam {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'G', 'J', 'A', 'M'};
constexpr std::size_t kLabelBytes = 1 + 4 + 4 + 1 + 1 + 2 + 1 + 4 + 8 + 2;

[[noreturn]] void plan_error(const std::string& what) { throw Error(ErrorCode::PlanInvalid, what); }

}  // namespace

std::vector<std::uint8_t> encode_records(const std::vector<SnapshotRecord>& records) {
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u16(kRecordFormatVersion);
  for (const SnapshotRecord& r : records) {
    const Spectrogram& s = r.spectrogram;
    if (s.n_t < 1 || s.n_t > 0xffff || s.cells.size() != static_cast<std::size_t>(kFreqBins) * s.n_t)
      throw Error(ErrorCode::ShapeMismatch, "record grid does not match its n_t");
    w.u32(static_cast<std::uint32_t>(kLabelBytes + 4 * s.cells.size()));
    w.u8(static_cast<std::uint8_t>(r.category));
    w.f32(r.power_dbm);
    w.f32(r.bandwidth_mhz);
    w.u8(r.scenario.number);
    w.u8(static_cast<std::uint8_t>(r.scenario.variant));
    w.u16(r.position_id);
    w.u8(r.area_id);
    w.f32(r.angle_deg);
    w.u64(r.seed);
    w.u16(static_cast<std::uint16_t>(s.n_t));
    for (float c : s.cells) w.f32(c);
  }
  return std::move(w.bytes());
}

std::vector<SnapshotRecord> decode_records(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw Error(ErrorCode::BadMagic, "not a GJAM record file");
  ByteReader r(bytes.data() + 4, bytes.size() - 4);
  const std::uint16_t version = r.u16();
  if (version != kRecordFormatVersion)
    throw Error(ErrorCode::VersionMismatch, "record format version " + std::to_string(version) + " unsupported");
  std::vector<SnapshotRecord> out;
  while (r.remaining() > 0) {
    const std::uint32_t len = r.u32();
    if (len < kLabelBytes || len > r.remaining()) throw Error(ErrorCode::TruncatedRecord, "record length out of range");
    const std::size_t start = r.position();
    SnapshotRecord rec;
    const std::uint8_t cat = r.u8();
    if (cat >= kNumCategories) throw Error(ErrorCode::TruncatedRecord, "bad category byte");
    rec.category = static_cast<Category>(cat);
    rec.power_dbm = r.f32();
    rec.bandwidth_mhz = r.f32();
    rec.scenario.number = r.u8();
    rec.scenario.variant = static_cast<char>(r.u8());
    rec.position_id = r.u16();
    rec.area_id = r.u8();
    rec.angle_deg = r.f32();
    rec.seed = r.u64();
    const int n_t = r.u16();
    if (len != kLabelBytes + 4ull * kFreqBins * static_cast<std::size_t>(n_t))
      throw Error(ErrorCode::TruncatedRecord, "record length does not match its n_t");
    rec.spectrogram.n_t = n_t;
    rec.spectrogram.cells.resize(static_cast<std::size_t>(kFreqBins) * n_t);
    for (float& c : rec.spectrogram.cells) c = r.f32();
    if (r.position() - start != len) throw Error(ErrorCode::TruncatedRecord, "record length mismatch");
    out.push_back(std::move(rec));
  }
  return out;
}

void write_records(const std::filesystem::path& path, const std::vector<SnapshotRecord>& records) {
  write_file(path.string(), encode_records(records));
}

std::vector<SnapshotRecord> read_records(const std::filesystem::path& path) {
  return decode_records(read_file(path.string()));
}

json DatasetManifest::to_json() const {
  json rows = json::array();
  for (const auto& [k, n] : counts)
    rows.push_back({{"scenario", k.scenario},
                    {"category", k.category},
                    {"power_dbm", k.power_dbm},
                    {"bandwidth_mhz", k.bandwidth_mhz},
                    {"count", n}});
  return {{"format", "gjam-manifest"},
          {"format_version", format_version},
          {"generator_version", generator_version},
          {"preset_hash", preset_hash},
          {"records_hash", records_hash},
          {"seed", seed},
          {"total", total},
          {"counts", rows}};
}

DatasetManifest DatasetManifest::from_json(const json& j) {
  DatasetManifest m;
  try {
    if (j.at("format").get<std::string>() != "gjam-manifest")
      throw Error(ErrorCode::ManifestMismatch, "manifest: unexpected format tag");
    m.format_version = j.at("format_version").get<std::uint16_t>();
    m.generator_version = j.at("generator_version").get<std::string>();
    m.preset_hash = j.at("preset_hash").get<std::string>();
    m.records_hash = j.at("records_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.total = j.at("total").get<std::uint64_t>();
    for (const json& r : j.at("counts")) {
      Key k{r.at("scenario").get<std::string>(), r.at("category").get<std::string>(), r.at("power_dbm").get<double>(),
            r.at("bandwidth_mhz").get<double>()};
      m.counts[k] = r.at("count").get<std::uint64_t>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestMismatch, std::string("manifest: ") + e.what());
  }
  return m;
}

DatasetManifest build_manifest(const std::vector<SnapshotRecord>& records, const std::vector<std::uint8_t>& file_bytes,
                               const std::string& preset_hash, std::uint64_t seed) {
  DatasetManifest m;
  for (const SnapshotRecord& r : records) {
    DatasetManifest::Key k{to_string(r.scenario), std::string(to_string(r.category)), r.power_dbm, r.bandwidth_mhz};
    ++m.counts[k];
  }
  m.total = records.size();
  m.preset_hash = preset_hash;
  m.records_hash = hex64(fnv1a64(file_bytes.data(), file_bytes.size()));
  m.seed = seed;
  return m;
}

std::filesystem::path manifest_path(const std::filesystem::path& records) {
  return records.string() + ".manifest.json";
}

std::vector<SnapshotRecord> open_dataset(const std::filesystem::path& path_in, DatasetManifest* manifest_out) {
  std::filesystem::path path = path_in;
  if (std::filesystem::is_directory(path)) path /= "records.gjam";
  const std::vector<std::uint8_t> bytes = read_file(path.string());
  const std::vector<std::uint8_t> mbytes = read_file(manifest_path(path).string());
  json j;
  try {
    j = json::parse(mbytes.begin(), mbytes.end());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestMismatch, std::string("manifest is not JSON: ") + e.what());
  }
  const DatasetManifest m = DatasetManifest::from_json(j);
  std::vector<SnapshotRecord> records = decode_records(bytes);
  const DatasetManifest actual = build_manifest(records, bytes, m.preset_hash, m.seed);
  if (m.format_version != kRecordFormatVersion) throw Error(ErrorCode::ManifestMismatch, "manifest format version");
  if (actual.records_hash != m.records_hash) throw Error(ErrorCode::ManifestMismatch, "record file hash differs from manifest");
  if (actual.total != m.total || actual.counts != m.counts)
    throw Error(ErrorCode::ManifestMismatch, "record counts differ from manifest");
  std::uint64_t sum = 0;
  for (const auto& kv : m.counts) sum += kv.second;
  if (sum != m.total) throw Error(ErrorCode::ManifestMismatch, "manifest counts do not sum to total");
  if (manifest_out != nullptr) *manifest_out = m;
  return records;
}

const std::vector<double>& default_bandwidths(Category c) {
  static const std::vector<double> none{0.0};
  static const std::vector<double> chirp{2, 5, 10, 15, 20, 25, 30, 35, 40, 50, 60};
  static const std::vector<double> hopper{0.1, 0.5, 1, 2, 2.5, 4, 5, 10, 20, 25, 35, 50};
  static const std::vector<double> pulsed{0.2, 1, 2.5, 4, 5, 10, 35, 50};
  static const std::vector<double> other{1, 2, 5, 10, 20, 40};
  switch (c) {
    case Category::None:
      return none;
    case Category::Chirp:
      return chirp;
    case Category::FreqHopper:
      return hopper;
    case Category::Pulsed:
      return pulsed;
    default:
      return other;
  }
}

std::vector<int> parse_positions(const json& j) {
  std::vector<int> out;
  auto range = [&out](int lo, int hi) {
    for (int i = lo; i < hi; ++i) out.push_back(i);
  };
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "hall")
      range(0, kNumHallPositions);
    else if (s == "gallery")
      range(kNumHallPositions, kNumPositions);
    else if (s == "all")
      range(0, kNumPositions);
    else
      plan_error("unknown position keyword '" + s + "'");
    return out;
  }
  if (j.is_number_integer()) return parse_positions(json::array({j}));
  if (!j.is_array()) plan_error("positions must be a keyword, an id or a list of ids");
  for (const json& v : j) {
    if (!v.is_number_integer()) plan_error("position ids must be integers");
    const int id = v.get<int>();
    if (id < 0 || id >= kNumPositions) plan_error("position id out of range: " + std::to_string(id));
    out.push_back(id);
  }
  return out;
}

namespace {

const std::set<std::string> kRowKeys{"scenarios", "categories", "powers_dbm", "bandwidths_mhz",
                                     "positions", "count",      "params"};
const std::set<std::string> kPlanKeys{"format", "n_t", "sample_rate_hz", "receiver_gain_db",
                                      "randomize_ray_phases", "presets", "rows"};

template <class T, class F>
std::vector<T> list_of(const json& j, const char* key, F&& parse) {
  std::vector<T> out;
  if (!j.is_array()) {
    out.push_back(parse(j));
    return out;
  }
  for (const json& v : j) out.push_back(parse(v));
  if (out.empty()) plan_error(std::string("empty list for '") + key + "'");
  return out;
}

JammerParams params_from_json(const json& j) {
  JammerParams p;
  for (const auto& [k, v] : j.items()) {
    if (k == "sweep_period_s")
      p.sweep_period_s = v.get<double>();
    else if (k == "hop_dwell_s")
      p.hop_dwell_s = v.get<double>();
    else if (k == "hop_channels")
      p.hop_channels = v.get<int>();
    else if (k == "mod_rate_hz")
      p.mod_rate_hz = v.get<double>();
    else if (k == "tone_count")
      p.tone_count = v.get<int>();
    else if (k == "pulse_duty")
      p.pulse_duty = v.get<double>();
    else if (k == "pulse_period_s")
      p.pulse_period_s = v.get<double>();
    else
      plan_error("unknown waveform parameter '" + k + "'");
  }
  return p;
}

json params_to_json(const JammerParams& p) {
  return {{"sweep_period_s", p.sweep_period_s}, {"hop_dwell_s", p.hop_dwell_s}, {"hop_channels", p.hop_channels},
          {"mod_rate_hz", p.mod_rate_hz},       {"tone_count", p.tone_count},   {"pulse_duty", p.pulse_duty},
          {"pulse_period_s", p.pulse_period_s}};
}

}  // namespace

GenerationPlan GenerationPlan::from_json(const json& j) {
  GenerationPlan plan;
  try {
    if (!j.is_object()) plan_error("plan must be a JSON object");
    for (const auto& [k, v] : j.items())
      if (!kPlanKeys.count(k)) plan_error("unknown plan key '" + k + "'");
    if (j.value("format", std::string("gjam-plan")) != "gjam-plan") plan_error("unexpected plan format tag");
    plan.n_t = j.value("n_t", kMaxSnapshotLength);
    if (plan.n_t < 1 || plan.n_t > kMaxSnapshotLength) plan_error("n_t must be in 1..34");
    plan.sample_rate_hz = j.value("sample_rate_hz", kDefaultSampleRateHz);
    if (!(plan.sample_rate_hz > 0.0)) plan_error("sample_rate_hz must be > 0");
    plan.receiver_gain_db = j.value("receiver_gain_db", kReceiverGainDb);
    plan.randomize_phases = j.value("randomize_ray_phases", true);
    if (j.contains("presets")) {
      try {
        plan.presets = PresetTable::from_json(j.at("presets"));
      } catch (const Error& e) {
        plan_error(e.what());
      }
    }
    if (!j.contains("rows") || !j.at("rows").is_array() || j.at("rows").empty()) plan_error("plan has no rows");
    for (const json& r : j.at("rows")) {
      for (const auto& [k, v] : r.items())
        if (!kRowKeys.count(k)) plan_error("unknown plan row key '" + k + "'");
      PlanRow row;
      const json& sc = r.at("scenarios");
      if (sc.is_string() && sc.get<std::string>() == "all")
        row.scenarios = all_scenarios();
      else
        row.scenarios = list_of<ScenarioId>(sc, "scenarios", [](const json& v) {
          try {
            return parse_scenario(v.get<std::string>());
          } catch (const Error& e) {
            plan_error(e.what());
          }
        });
      const json& cats = r.at("categories");
      if (cats.is_string() && cats.get<std::string>() == "all") {
        for (int c = 0; c < kNumCategories; ++c) row.categories.push_back(static_cast<Category>(c));
      } else {
        row.categories = list_of<Category>(cats, "categories", [](const json& v) {
          try {
            return parse_category(v.is_string() ? v.get<std::string>() : std::to_string(v.get<int>()));
          } catch (const Error& e) {
            plan_error(e.what());
          }
        });
      }
      row.powers_dbm = list_of<double>(r.value("powers_dbm", json(0.0)), "powers_dbm",
                                       [](const json& v) { return v.get<double>(); });
      if (r.contains("bandwidths_mhz"))
        row.bandwidths_mhz =
            list_of<double>(r.at("bandwidths_mhz"), "bandwidths_mhz", [](const json& v) { return v.get<double>(); });
      if (r.contains("positions")) {
        if (!(r.at("positions").is_string() && r.at("positions").get<std::string>() == "default"))
          row.positions = parse_positions(r.at("positions"));
      }
      row.count = r.at("count").get<int>();
      if (row.count <= 0) plan_error("row count must be >= 1");
      if (r.contains("params")) row.params = params_from_json(r.at("params"));
      for (Category c : row.categories) {
        const std::vector<double>& menu = row.bandwidths_mhz.empty() ? default_bandwidths(c) : row.bandwidths_mhz;
        for (double p : row.powers_dbm)
          for (double bw : menu) {
            JammerSpec s{c, c == Category::None ? 0.0 : bw, p, row.params};
            try {
              validate(s, plan.sample_rate_hz);
            } catch (const Error& e) {
              plan_error(e.what());
            }
          }
      }
      plan.rows.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    plan_error(std::string("plan: ") + e.what());
  }
  return plan;
}

json GenerationPlan::to_json() const {
  json jr = json::array();
  for (const PlanRow& r : rows) {
    json sc = json::array();
    for (ScenarioId id : r.scenarios) sc.push_back(to_string(id));
    json cats = json::array();
    for (Category c : r.categories) cats.push_back(std::string(to_string(c)));
    json row{{"scenarios", sc}, {"categories", cats}, {"powers_dbm", r.powers_dbm}, {"count", r.count},
             {"params", params_to_json(r.params)}};
    if (!r.bandwidths_mhz.empty()) row["bandwidths_mhz"] = r.bandwidths_mhz;
    row["positions"] = r.positions.empty() ? json("default") : json(r.positions);
    jr.push_back(row);
  }
  return {{"format", "gjam-plan"},
          {"n_t", n_t},
          {"sample_rate_hz", sample_rate_hz},
          {"receiver_gain_db", receiver_gain_db},
          {"randomize_ray_phases", randomize_phases},
          {"presets", presets.to_json()},
          {"rows", jr}};
}

std::size_t GenerationPlan::total_count() const {
  std::size_t n = 0;
  for (const PlanRow& r : rows) n += r.scenarios.size() * r.categories.size() * r.powers_dbm.size() * r.count;
  return n;
}

std::vector<SnapshotJob> expand_plan(const GenerationPlan& plan, std::uint64_t seed) {
  if (plan.rows.empty()) plan_error("plan has no rows");
  std::vector<SnapshotJob> jobs;
  jobs.reserve(plan.total_count());
  for (const PlanRow& row : plan.rows) {
    if (row.count <= 0) plan_error("row count must be >= 1");
    for (ScenarioId sc : row.scenarios)
      for (Category c : row.categories)
        for (double p : row.powers_dbm)
          for (int k = 0; k < row.count; ++k) {
            SnapshotJob job;
            job.seed = derive_seed(seed, jobs.size());
            Rng pick = Rng(job.seed).fork(0);
            const std::vector<double>& menu = row.bandwidths_mhz.empty() ? default_bandwidths(c) : row.bandwidths_mhz;
            const double bw = menu[pick.below(menu.size())];
            const int pos = row.positions.empty() ? plan.presets.at(sc).default_position
                                                  : row.positions[pick.below(row.positions.size())];
            job.spec = JammerSpec{c, c == Category::None ? 0.0 : bw, c == Category::None ? 0.0 : p, row.params};
            job.scenario = sc;
            job.position_id = pos;
            jobs.push_back(job);
          }
  }
  return jobs;
}

SnapshotRecord render_job(const SnapshotJob& job, const GenerationPlan& plan) {
  const Rng root(job.seed);
  Rng sig = root.fork(1);
  Rng phases = root.fork(2);
  Rng noise = root.fork(3);
  const std::size_t n = static_cast<std::size_t>(plan.n_t) * kFreqBins;
  const IQBuffer x = synth(job.spec, n, plan.sample_rate_hz, sig);
  ScenarioConfig cfg = plan.presets.at(job.scenario);
  if (plan.randomize_phases) cfg = randomize_ray_phases(cfg, phases);
  const PositionLabel& pos = position(job.position_id);
  const IQBuffer y = apply_channel(x, cfg, pos, noise);

  SnapshotRecord r;
  r.spectrogram = render_snapshot(y, plan.n_t, plan.receiver_gain_db);
  r.category = job.spec.category;
  r.power_dbm = static_cast<float>(job.spec.power_dbm);
  r.bandwidth_mhz = static_cast<float>(job.spec.bandwidth_mhz);
  r.scenario = job.scenario;
  r.position_id = static_cast<std::uint16_t>(pos.position_id);
  r.area_id = static_cast<std::uint8_t>(pos.area_id);
  r.angle_deg = static_cast<float>(pos.angle_deg);
  r.seed = job.seed;
  return r;
}

std::vector<SnapshotRecord> synthesize(const GenerationPlan& plan, std::uint64_t seed, int threads) {
  const std::vector<SnapshotJob> jobs = expand_plan(plan, seed);
  std::vector<SnapshotRecord> out(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  const long n = static_cast<long>(jobs.size());
  const int nthreads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 4) num_threads(nthreads)
  for (long i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = render_job(jobs[static_cast<std::size_t>(i)], plan);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::vector<SnapshotRecord> synthesize_serial(const GenerationPlan& plan, std::uint64_t seed) {
  std::vector<SnapshotRecord> out;
  for (const SnapshotJob& job : expand_plan(plan, seed)) out.push_back(render_job(job, plan));
  return out;
}

DatasetManifest synthesize_dataset(const GenerationPlan& plan, std::uint64_t seed, const std::filesystem::path& dir,
                                   int threads) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
  const std::vector<SnapshotRecord> records = synthesize(plan, seed, threads);
  const std::vector<std::uint8_t> bytes = encode_records(records);
  const std::filesystem::path file = dir / "records.gjam";
  write_file(file.string(), bytes);
  const DatasetManifest m = build_manifest(records, bytes, plan.presets.hash(), seed);
  const std::string text = m.to_json().dump(2) + "\n";
  write_file(manifest_path(file).string(), std::vector<std::uint8_t>(text.begin(), text.end()));
  return m;
}

}  // namespace gjam
