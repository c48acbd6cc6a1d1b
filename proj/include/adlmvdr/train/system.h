// adlmvdr/train/system.h
//
// A trainable enhancement system: the filter estimator plus, for adl_mvdr,
// the two GRU-Nets, wired into one differentiable graph from features to the
// enhanced waveform.
#ifndef ADLMVDR_TRAIN_SYSTEM_H_
#define ADLMVDR_TRAIN_SYSTEM_H_

#include <filesystem>
#include <string>
#include <vector>

#include "adlmvdr/neural/checkpoint.h"
#include "adlmvdr/neural/graph_dsp.h"
#include "adlmvdr/signal/wave.h"
#include "adlmvdr/train/config.h"

namespace adlmvdr {

// One scene as loaded from disk or rendered in memory.
struct Utterance {
  std::string id;
  MultiWave mixture;
  std::vector<double> reference;  // reverberant target on the reference mic
  double doa = 0.0;
};

// Reads mixture and reference WAVs listed in a manifest. Throws when the
// manifest's mic count differs from num_mics.
std::vector<Utterance> LoadUtterances(const std::filesystem::path &manifest, size_t num_mics);

// Network-ready view of an utterance segment.
struct Example {
  std::string id;
  Stft mix;                      // [M, T, F]
  std::vector<double> reference;  // empty at inference
  nn::Tensor features;           // [T, D] constant
  double doa = 0.0;
};

// Samples [offset, offset + length) of u; length 0 takes the rest.
Example MakeExample(const Utterance &u, const ModelConfig &config, size_t offset = 0,
                    size_t length = 0);

class System {
 public:
  System(const ModelConfig &config, uint64_t seed);

  struct Output {
    nn::Tensor wave;  // [signal_len]
    nn::GraphReport report;
  };
  // Records the graph when gradients are enabled. Throws ShapeError when the
  // example's mic or bin count does not match the config.
  Output Forward(const Example &ex) const;
  // Inference without graph recording.
  std::vector<double> Enhance(const MultiWave &mixture, double doa) const;

  const ModelConfig &config() const { return config_; }
  nn::ParamStore &params() { return store_; }
  const nn::ParamStore &params() const { return store_; }
  // Parameter-name prefixes: "est", plus "vnet" and "inet" for adl_mvdr.
  std::vector<std::string> Groups() const;

  nn::Checkpoint ToCheckpoint() const;

 private:
  ModelConfig config_;
  ArrayGeometry geometry_;
  nn::ParamStore store_;
  nn::FilterEstimator estimator_;
  nn::GruNet vnet_, inet_;
};

// Rebuilds a system from the config echo stored in the checkpoint.
System LoadSystem(const std::filesystem::path &checkpoint);

}  // namespace adlmvdr

#endif  // ADLMVDR_TRAIN_SYSTEM_H_
