// adlmvdr/simulate/dataset.h
//
// Batch scene generation to WAV files plus a JSON-lines manifest.

#ifndef ADLMVDR_SIMULATE_DATASET_H_
#define ADLMVDR_SIMULATE_DATASET_H_

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "adlmvdr/simulate/geometry.h"
#include "adlmvdr/simulate/render.h"

namespace adlmvdr {

inline constexpr int kManifestVersion = 1;

struct DatasetSpec {
  size_t num_scenes = 8;
  uint64_t seed = 1;
  double chunk_seconds = 1.0;
  size_t num_mics = 6;
  double mic_spacing = 0.04;
  // Fractions of 1-, 2- and 3-speaker scenes. Counts are rounded by largest
  // remainder so they sum to num_scenes.
  std::vector<double> speaker_proportions = {0.0, 0.0, 1.0};
  double sir_min_db = -6.0, sir_max_db = 6.0;
  bool add_noise = true;
  double snr_min_db = 5.0, snr_max_db = 20.0;
  double reverb_min_s = 0.05, reverb_max_s = 0.7;
  // DOAs are drawn uniformly from [0, doa_span). A linear array cannot tell
  // front from back, so the default covers the half plane only.
  double doa_span = std::numbers::pi;
  std::string dry_pool;  // directory of 16 kHz WAVs; empty: synthetic speech
  size_t jobs = 1;

  void Validate() const;
  ArrayGeometry Geometry() const;
  size_t ChunkSamples() const;
};

struct ManifestEntry {
  std::string id;
  std::string mixture;    // relative to the manifest directory, M channels
  std::string reference;  // reverberant target image, M channels
  std::string dry;        // dry target, mono
  size_t num_samples = 0;
  size_t num_mics = 0;
  Scene scene;
  double nearest_interferer_deg = 180.0;
  std::string angle_bin;
  size_t num_speakers = 1;
};

// Exact per-class counts for the proportions (largest remainder).
std::vector<size_t> SpeakerCounts(const std::vector<double> &proportions, size_t total);

// Scene i is fully determined by (spec.seed, i), so any job count writes the
// same files. Writes mix/, ref/, dry/ and manifest.jsonl under out_dir.
std::vector<ManifestEntry> GenerateDataset(const DatasetSpec &spec,
                                           const std::filesystem::path &out_dir);

// Draws and renders scene i without touching the file system.
SceneRender RenderDatasetScene(const DatasetSpec &spec, size_t index);

std::string ManifestLine(const ManifestEntry &entry);
ManifestEntry ParseManifestLine(const std::string &line);
std::vector<ManifestEntry> ReadManifest(const std::filesystem::path &path);

}  // namespace adlmvdr

#endif  // ADLMVDR_SIMULATE_DATASET_H_
