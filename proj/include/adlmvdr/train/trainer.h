// adlmvdr/train/trainer.h
//
// Adam, the training loop and its JSON-lines log.
#ifndef ADLMVDR_TRAIN_TRAINER_H_
#define ADLMVDR_TRAIN_TRAINER_H_

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "adlmvdr/train/system.h"

namespace adlmvdr {

class Adam {
 public:
  Adam(nn::ParamStore &store, const OptimConfig &config);
  // Applies one update from the gradients currently held by the store.
  // Throws NumericError naming the first parameter with a non-finite
  // gradient; nothing is updated in that case.
  void Step();
  size_t steps() const { return t_; }
  // Global gradient norm seen by the last Step (before clipping).
  double last_grad_norm() const { return last_norm_; }

 private:
  nn::ParamStore &store_;
  OptimConfig config_;
  std::vector<std::vector<double>> m_, v_;
  size_t t_ = 0;
  double last_norm_ = 0.0;
};

// Instability counters accumulated over a run.
struct StabilityCounters {
  nn::GraphReport graph;
  size_t nan_losses = 0;
  size_t nan_gradients = 0;
  size_t forward_errors = 0;  // numeric/convergence failures inside the graph
  size_t skipped_silent = 0;  // silent reference chunks
};

struct TrainSummary {
  size_t steps = 0;
  size_t epochs = 0;
  double initial_train_si_snr = 0.0;  // mean over the training set before step 1
  double final_train_si_snr = 0.0;
  double best_valid_si_snr = -1e300;
  size_t best_epoch = 0;
  StabilityCounters counters;
  std::vector<double> step_losses;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // best.ckpt, last.ckpt, train_log.jsonl; empty: no files
  bool quiet = false;             // no progress on stderr
  // Measures training-set Si-SNR before the first and after the last step.
  bool score_train_set = false;
};

// Trains a fresh system built from config.model and config.seed. Aborts with
// NumericError after 3 consecutive non-finite losses.
TrainSummary Train(const TrainConfig &config, const std::vector<Utterance> &train,
                   const std::vector<Utterance> &valid, const TrainOptions &options,
                   std::optional<System> *result = nullptr);

// Mean Si-SNR of the enhanced outputs over whole utterances (no graph).
double MeanSiSnr(const System &system, const std::vector<Utterance> &set);

}  // namespace adlmvdr

#endif  // ADLMVDR_TRAIN_TRAINER_H_
