// adlmvdr/neural/gru.h
//
// GRU layers and the GRU-Nets that stand in for the steering-vector PCA and
// the noise-covariance inverse. Sequences are time-major [T, B, I]; the
// GRU-Nets run over time with frequency bins as the batch.
#ifndef ADLMVDR_NEURAL_GRU_H_
#define ADLMVDR_NEURAL_GRU_H_

#include <random>
#include <string>
#include <vector>

#include "adlmvdr/neural/complex.h"
#include "adlmvdr/neural/params.h"

namespace adlmvdr::nn {

// Gate order r, z, n in the 3H columns:
//   r = sigmoid(x W_ir + b_ir + h W_hr + b_hr)
//   z = sigmoid(x W_iz + b_iz + h W_hz + b_hz)
//   n = tanh(x W_in + b_in + r * (h W_hn + b_hn))
//   h' = (1 - z) * n + z * h
struct GruLayerParams {
  size_t input_dim = 0, hidden_dim = 0;
  Tensor w_ih;  // [I, 3H]
  Tensor w_hh;  // [H, 3H]
  Tensor b_ih;  // [3H]
  Tensor b_hh;  // [3H]
  void Validate() const;
};

GruLayerParams MakeGruLayer(const std::string &prefix, size_t input_dim, size_t hidden_dim,
                            ParamStore &store, std::mt19937_64 &rng);

// x [T, B, I] -> hidden sequence [T, B, H]; h0 [B, H] or undefined for zeros.
Tensor GruLayer(const GruLayerParams &p, const Tensor &x, const Tensor &h0 = {});
// Stacked layers; returns the last layer's hidden sequence.
Tensor GruForward(const std::vector<GruLayerParams> &layers, const Tensor &seq);

enum class GruInputNorm {
  kNone,   // raw covariance entries
  kTrace,  // divide by the per-bin mean trace over the utterance
};

struct GruNetConfig {
  std::vector<size_t> hidden = {64, 32};
  size_t output_dim = 0;
  GruInputNorm input_norm = GruInputNorm::kNone;
  void Validate() const;
};

class GruNet {
 public:
  GruNet() = default;
  GruNet(const std::string &prefix, size_t input_dim, const GruNetConfig &config,
         ParamStore &store, std::mt19937_64 &rng);

  // [T, B, I] -> [T, B, output_dim]
  Tensor Forward(const Tensor &seq) const;
  const GruNetConfig &config() const { return config_; }
  size_t input_dim() const { return input_dim_; }
  const std::vector<GruLayerParams> &layers() const { return layers_; }

 private:
  GruNetConfig config_;
  size_t input_dim_ = 0;
  std::vector<GruLayerParams> layers_;
  Tensor fc_w_, fc_b_;
};

// Output widths for M channels.
inline size_t SteeringNetOutput(size_t m) { return 2 * m; }
inline size_t InverseNetOutput(size_t m) { return 2 * m * m; }

// phi_ss [T, F, M, M] -> steering estimate [T, F, M]. Real and imaginary
// parts are flattened and concatenated into 2M^2 inputs per (t, f).
CTensor GruNetSteering(const GruNet &net, const CTensor &phi_ss);
// phi_nn [T, F, M, M] -> inverse estimate [T, F, M, M]. With trace input
// normalization the output is rescaled so the estimate tracks phi_nn^{-1}.
CTensor GruNetInverse(const GruNet &net, const CTensor &phi_nn);

}  // namespace adlmvdr::nn

#endif  // ADLMVDR_NEURAL_GRU_H_
