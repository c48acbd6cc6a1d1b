// adlmvdr/neural/checkpoint.h
//
// Versioned binary container: a JSON config echo plus named float64 arrays.
// Byte layout is described in docs/checkpoint_format.md.
#ifndef ADLMVDR_NEURAL_CHECKPOINT_H_
#define ADLMVDR_NEURAL_CHECKPOINT_H_

#include <filesystem>
#include <string>
#include <vector>

#include "adlmvdr/base/ndarray.h"
#include "adlmvdr/neural/params.h"

namespace adlmvdr::nn {

inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::string config_json;
  std::vector<CheckpointTensor> tensors;
};

Checkpoint Snapshot(const ParamStore &store, std::string config_json);
// Copies values into the store; names, order and shapes must match.
void Restore(const Checkpoint &ckpt, ParamStore &store);

std::string SerializeCheckpoint(const Checkpoint &ckpt);
// Throws FormatError on bad magic, version, truncation or checksum.
Checkpoint ParseCheckpoint(const std::string &bytes);

void SaveCheckpoint(const std::filesystem::path &path, const Checkpoint &ckpt);
Checkpoint LoadCheckpoint(const std::filesystem::path &path);

}  // namespace adlmvdr::nn

#endif  // ADLMVDR_NEURAL_CHECKPOINT_H_
