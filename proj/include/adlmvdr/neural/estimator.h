// adlmvdr/neural/estimator.h
//
// Causal dilated-convolution filter estimator: features [T, D] in, one cRF
// for speech and one for noise out, each [T, F, taps] with real and
// imaginary parts bounded by mask_bound * tanh.
#ifndef ADLMVDR_NEURAL_ESTIMATOR_H_
#define ADLMVDR_NEURAL_ESTIMATOR_H_

#include <random>
#include <string>
#include <vector>

#include "adlmvdr/neural/complex.h"
#include "adlmvdr/neural/params.h"

namespace adlmvdr::nn {

struct EstimatorConfig {
  size_t channels = 64;
  size_t kernel = 3;
  std::vector<size_t> dilations = {1, 2, 4, 8};
  size_t repeats = 2;
  size_t num_bins = 257;
  size_t time_half = 1;  // L
  size_t freq_half = 1;  // K
  double mask_bound = 2.0;

  size_t NumTaps() const { return (2 * time_half + 1) * (2 * freq_half + 1); }
  size_t HeadDim() const { return 2 * 2 * NumTaps() * num_bins; }
  // Past frames that can influence an output frame, plus the frame itself.
  size_t ReceptiveField() const;
  void Validate() const;
};

struct FilterPair {
  CTensor speech;  // [T, F, taps]
  CTensor noise;
};

class FilterEstimator {
 public:
  FilterEstimator() = default;
  FilterEstimator(const std::string &prefix, size_t input_dim, const EstimatorConfig &config,
                  ParamStore &store, std::mt19937_64 &rng);

  FilterPair Forward(const Tensor &features) const;
  const EstimatorConfig &config() const { return config_; }
  size_t input_dim() const { return input_dim_; }

 private:
  struct Block {
    size_t dilation = 1;
    Tensor conv_w, conv_b, alpha, ln_g, ln_b, res_w, res_b;
  };
  EstimatorConfig config_;
  size_t input_dim_ = 0;
  Tensor in_ln_g_, in_ln_b_, in_w_, in_b_;
  std::vector<Block> blocks_;
  Tensor head_alpha_, head_w_, head_b_;
};

}  // namespace adlmvdr::nn

#endif  // ADLMVDR_NEURAL_ESTIMATOR_H_
