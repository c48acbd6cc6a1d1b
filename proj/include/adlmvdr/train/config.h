// adlmvdr/train/config.h
//
// Run configuration. One TOML or JSON file holds a [simulate] table for the
// dataset generator and [model], [train], [stft], [features], [estimator],
// [grunet] tables for training. Unknown keys are rejected. The schema is
// listed in docs/config.md.
#ifndef ADLMVDR_TRAIN_CONFIG_H_
#define ADLMVDR_TRAIN_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "adlmvdr/features/features.h"
#include "adlmvdr/neural/estimator.h"
#include "adlmvdr/neural/gru.h"
#include "adlmvdr/signal/stft.h"
#include "adlmvdr/simulate/dataset.h"

namespace adlmvdr {

enum class Variant { kNnCrm, kNnCrf, kMvdrCrm, kMvdrCrf, kMultitapMvdr, kAdlMvdr };

std::string VariantName(Variant v);
// Throws ConfigError on an unknown name.
Variant ParseVariant(const std::string &name);
bool IsMaskVariant(Variant v);  // crm variants: a single-tap filter
bool IsNnVariant(Variant v);

struct ModelConfig {
  Variant variant = Variant::kAdlMvdr;
  size_t num_mics = 6;
  double mic_spacing = 0.04;
  size_t time_half = 1;  // L, forced to 0 for crm variants
  size_t freq_half = 1;  // K
  size_t taps = 2;       // multitap_mvdr only
  double loading_eps = 1e-6;
  bool per_frame_norm = false;
  StftConfig stft;
  FeatureConfig features;
  nn::EstimatorConfig estimator;  // num_bins, halves filled from the fields above
  nn::GruNetConfig steering_net{{64, 32}, 0, nn::GruInputNorm::kTrace};
  nn::GruNetConfig inverse_net{{64, 64}, 0, nn::GruInputNorm::kTrace};
  // Starts the GRU-Net output layers at v = e_ref and P = I.
  bool grunet_identity_init = true;

  // Derived sizes filled in, invariants checked. Throws ConfigError.
  void Finalize();
  size_t NumBins() const { return stft.NumBins(); }
};

struct OptimConfig {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double grad_clip = 0.0;  // global norm; 0 disables
};

struct TrainConfig {
  ModelConfig model;
  OptimConfig optim;
  size_t epochs = 50;
  size_t max_steps = 200;  // 0: run all epochs
  size_t batch_size = 2;
  double chunk_seconds = 1.0;  // 0: whole utterances
  uint64_t seed = 1;
  size_t valid_every = 1;  // epochs
  std::string precision = "float64";
  std::string train_manifest;
  std::string valid_manifest;  // empty: validate on the training set

  void Finalize();
};

// Reads TOML (by extension .toml) or JSON into a JSON tree. Throws
// ConfigError on a parse failure.
nlohmann::json LoadConfigTree(const std::filesystem::path &path);

TrainConfig TrainConfigFromJson(const nlohmann::json &tree);
nlohmann::json TrainConfigToJson(const TrainConfig &config);
ModelConfig ModelConfigFromJson(const nlohmann::json &tree);
nlohmann::json ModelConfigToJson(const ModelConfig &config);
DatasetSpec DatasetSpecFromJson(const nlohmann::json &tree);

}  // namespace adlmvdr

#endif  // ADLMVDR_TRAIN_CONFIG_H_
