// adlmvdr/simulate/dataset.cc

#include "adlmvdr/simulate/dataset.h"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>

#include "json.hpp"

#include "adlmvdr/base/error.h"
#include "adlmvdr/signal/wav.h"
#include "adlmvdr/simulate/synth.h"

namespace adlmvdr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stream ids for MixSeed.
constexpr uint64_t kSceneStream = 0;
constexpr uint64_t kOrderStream = 1;
constexpr uint64_t kSourceStream = 100;
constexpr uint64_t kNoiseStream = 200;

std::vector<size_t> SpeakerAssignment(const DatasetSpec &spec) {
  const std::vector<size_t> counts = SpeakerCounts(spec.speaker_proportions, spec.num_scenes);
  std::vector<size_t> order;
  for (size_t c = 0; c < counts.size(); ++c)
    for (size_t k = 0; k < counts[c]; ++k) order.push_back(c + 1);
  std::mt19937_64 rng(MixSeed(spec.seed, kOrderStream));
  // Fisher-Yates with our own index draw; std::shuffle's use of the engine
  // is implementation-defined.
  for (size_t i = order.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::vector<fs::path> PoolFiles(const std::string &dir) {
  std::vector<fs::path> files;
  for (const auto &e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("dataset: dry pool " + dir + " has no .wav files");
  return files;
}

Waveform PoolCut(const std::vector<fs::path> &files, size_t len, uint64_t seed) {
  std::mt19937_64 rng(seed);
  const fs::path &path = files[rng() % files.size()];
  const MultiWave w = ReadWav(path.string());
  if (w.rate != kSampleRate)
    throw ConfigError("dataset: " + path.string() + " is not 16 kHz");
  const std::vector<double> &src = w.channels[0];
  Waveform out;
  out.samples.resize(len);
  const size_t start = src.size() > len ? rng() % (src.size() - len + 1) : 0;
  for (size_t i = 0; i < len; ++i) out.samples[i] = src[(start + i) % src.size()];
  return out;
}

double Uniform(std::mt19937_64 &rng, double lo, double hi) {
  return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

json SceneJson(const Scene &s) {
  json j;
  j["target_doa"] = s.target_doa;
  j["interferer_doas"] = s.interferer_doas;
  j["sir_db"] = s.sir_db;
  j["snr_db"] = std::isfinite(s.snr_db) ? json(s.snr_db) : json(nullptr);
  j["reverb_decay_s"] = s.reverb_decay_s;
  j["seed"] = s.seed;
  return j;
}

}  // namespace

void DatasetSpec::Validate() const {
  if (num_scenes == 0) throw ConfigError("dataset: num_scenes must be positive");
  if (!(chunk_seconds > 0.0)) throw ConfigError("dataset: chunk_seconds must be positive");
  if (num_mics < 2 || num_mics > 16) throw ConfigError("dataset: num_mics must be in [2, 16]");
  if (!(mic_spacing > 0.0)) throw ConfigError("dataset: mic_spacing must be positive");
  if (speaker_proportions.empty() || speaker_proportions.size() > 3)
    throw ConfigError("dataset: speaker_proportions needs 1 to 3 entries");
  double total = 0.0;
  for (double p : speaker_proportions) {
    if (!(p >= 0.0)) throw ConfigError("dataset: negative speaker proportion");
    total += p;
  }
  if (!(total > 0.0)) throw ConfigError("dataset: speaker proportions sum to zero");
  if (!(sir_min_db <= sir_max_db) || !std::isfinite(sir_min_db) || !std::isfinite(sir_max_db))
    throw ConfigError("dataset: bad SIR range");
  if (!(snr_min_db <= snr_max_db)) throw ConfigError("dataset: bad SNR range");
  if (!(reverb_min_s >= 0.0 && reverb_min_s <= reverb_max_s))
    throw ConfigError("dataset: bad reverb range");
  if (!(doa_span > 0.0 && doa_span <= 2.0 * std::numbers::pi))
    throw ConfigError("dataset: doa_span must be in (0, 2 pi]");
  if (jobs == 0) throw ConfigError("dataset: jobs must be positive");
}

ArrayGeometry DatasetSpec::Geometry() const {
  return ArrayGeometry::UniformLinear(num_mics, mic_spacing);
}

size_t DatasetSpec::ChunkSamples() const {
  return static_cast<size_t>(std::lround(chunk_seconds * kSampleRate));
}

std::vector<size_t> SpeakerCounts(const std::vector<double> &proportions, size_t total) {
  double sum = 0.0;
  for (double p : proportions) sum += p;
  if (!(sum > 0.0)) throw ConfigError("SpeakerCounts: proportions sum to zero");
  std::vector<size_t> counts(proportions.size());
  std::vector<std::pair<double, size_t>> rem;
  size_t used = 0;
  for (size_t i = 0; i < proportions.size(); ++i) {
    const double exact = proportions[i] / sum * static_cast<double>(total);
    counts[i] = static_cast<size_t>(std::floor(exact));
    used += counts[i];
    rem.emplace_back(exact - std::floor(exact), i);
  }
  // Largest remainder first; ties go to the smaller speaker count.
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto &a, const auto &b) { return a.first > b.first; });
  for (size_t k = 0; used < total; ++k, ++used) ++counts[rem[k % rem.size()].second];
  return counts;
}

SceneRender RenderDatasetScene(const DatasetSpec &spec, size_t index) {
  spec.Validate();
  if (index >= spec.num_scenes) throw ConfigError("dataset: scene index out of range");
  const size_t speakers = SpeakerAssignment(spec)[index];
  const uint64_t scene_seed = MixSeed(spec.seed, (index << 8) | kSceneStream);
  std::mt19937_64 rng(scene_seed);

  Scene scene;
  scene.seed = scene_seed;
  scene.target_doa = Uniform(rng, 0.0, spec.doa_span);
  for (size_t k = 1; k < speakers; ++k) {
    scene.interferer_doas.push_back(Uniform(rng, 0.0, spec.doa_span));
    scene.sir_db.push_back(Uniform(rng, spec.sir_min_db, spec.sir_max_db));
  }
  scene.snr_db = spec.add_noise ? Uniform(rng, spec.snr_min_db, spec.snr_max_db)
                                : std::numeric_limits<double>::infinity();
  scene.reverb_decay_s = Uniform(rng, spec.reverb_min_s, spec.reverb_max_s);

  const size_t len = spec.ChunkSamples();
  std::vector<Waveform> drys;
  if (spec.dry_pool.empty()) {
    for (size_t k = 0; k < speakers; ++k)
      drys.push_back(SynthesizeSpeech(len, MixSeed(scene_seed, kSourceStream + k)));
  } else {
    const auto files = PoolFiles(spec.dry_pool);
    for (size_t k = 0; k < speakers; ++k)
      drys.push_back(PoolCut(files, len, MixSeed(scene_seed, kSourceStream + k)));
  }
  const MultiWave noise = SynthesizeNoise(spec.num_mics, len, MixSeed(scene_seed, kNoiseStream));
  const std::vector<Waveform> interferers(drys.begin() + 1, drys.end());
  return MixScene(scene, spec.Geometry(), drys[0], interferers,
                  spec.add_noise ? &noise : nullptr);
}

std::vector<ManifestEntry> GenerateDataset(const DatasetSpec &spec, const fs::path &out_dir) {
  spec.Validate();
  for (const char *sub : {"mix", "ref", "dry"}) fs::create_directories(out_dir / sub);

  std::vector<ManifestEntry> entries(spec.num_scenes);
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (size_t i = next++; i < spec.num_scenes; i = next++) {
      try {
        const SceneRender r = RenderDatasetScene(spec, i);
        char id[32];
        std::snprintf(id, sizeof(id), "scene%05zu", i);
        ManifestEntry &e = entries[i];
        e.id = id;
        e.mixture = "mix/" + e.id + ".wav";
        e.reference = "ref/" + e.id + ".wav";
        e.dry = "dry/" + e.id + ".wav";
        e.num_samples = r.mixture.NumSamples();
        e.num_mics = r.mixture.NumChannels();
        e.scene = r.scene;
        e.nearest_interferer_deg = r.nearest_interferer_deg;
        e.angle_bin = AngleBin(r.nearest_interferer_deg);
        e.num_speakers = r.scene.NumSpeakers();
        WriteWav((out_dir / e.mixture).string(), r.mixture);
        WriteWav((out_dir / e.reference).string(), r.target_reverberant);
        MultiWave dry(1, 0);
        dry.channels[0] = r.target_dry.samples;
        WriteWav((out_dir / e.dry).string(), dry);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = spec.num_scenes;
      }
    }
  };
  const size_t jobs = std::min(spec.jobs, spec.num_scenes);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (size_t k = 0; k < jobs; ++k) pool.emplace_back(worker);
    for (auto &t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::ofstream out(out_dir / "manifest.jsonl", std::ios::binary);
  if (!out) throw Error("dataset: cannot write " + (out_dir / "manifest.jsonl").string());
  for (const auto &e : entries) out << ManifestLine(e) << '\n';
  if (!out) throw Error("dataset: write failed for manifest.jsonl");
  return entries;
}

std::string ManifestLine(const ManifestEntry &e) {
  json j;
  j["version"] = kManifestVersion;
  j["id"] = e.id;
  j["mixture"] = e.mixture;
  j["reference"] = e.reference;
  j["dry"] = e.dry;
  j["num_samples"] = e.num_samples;
  j["num_mics"] = e.num_mics;
  j["scene"] = SceneJson(e.scene);
  j["nearest_interferer_deg"] = e.nearest_interferer_deg;
  j["angle_bin"] = e.angle_bin;
  j["num_speakers"] = e.num_speakers;
  return j.dump();
}

ManifestEntry ParseManifestLine(const std::string &line) {
  try {
    const json j = json::parse(line);
    if (j.at("version").get<int>() != kManifestVersion)
      throw FormatError("manifest: unsupported version " + j.at("version").dump());
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    e.mixture = j.at("mixture").get<std::string>();
    e.reference = j.at("reference").get<std::string>();
    e.dry = j.value("dry", std::string());
    e.num_samples = j.at("num_samples").get<size_t>();
    e.num_mics = j.at("num_mics").get<size_t>();
    const json &s = j.at("scene");
    e.scene.target_doa = s.at("target_doa").get<double>();
    e.scene.interferer_doas = s.at("interferer_doas").get<std::vector<double>>();
    e.scene.sir_db = s.at("sir_db").get<std::vector<double>>();
    e.scene.snr_db = s.at("snr_db").is_null() ? std::numeric_limits<double>::infinity()
                                              : s.at("snr_db").get<double>();
    e.scene.reverb_decay_s = s.at("reverb_decay_s").get<double>();
    e.scene.seed = s.at("seed").get<uint64_t>();
    e.nearest_interferer_deg = j.at("nearest_interferer_deg").get<double>();
    e.angle_bin = j.at("angle_bin").get<std::string>();
    e.num_speakers = j.at("num_speakers").get<size_t>();
    return e;
  } catch (const json::exception &ex) {
    throw FormatError(std::string("manifest: ") + ex.what());
  }
}

std::vector<ManifestEntry> ReadManifest(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(ParseManifestLine(line));
    } catch (const FormatError &e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace adlmvdr
