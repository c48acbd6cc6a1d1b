// neural/estimator.cc

#include "adlmvdr/neural/estimator.h"

#include <cmath>

namespace adlmvdr::nn {

size_t EstimatorConfig::ReceptiveField() const {
  size_t rf = 1;
  for (size_t r = 0; r < repeats; ++r)
    for (size_t d : dilations) rf += (kernel - 1) * d;
  return rf;
}

void EstimatorConfig::Validate() const {
  if (channels == 0 || kernel == 0 || num_bins == 0 || repeats == 0 || dilations.empty())
    throw ConfigError("estimator: channels, kernel, bins, repeats and dilations must be set");
  for (size_t d : dilations)
    if (d == 0) throw ConfigError("estimator: dilation must be positive");
  if (!(mask_bound > 0.0)) throw ConfigError("estimator: mask_bound must be positive");
}

FilterEstimator::FilterEstimator(const std::string &prefix, size_t input_dim,
                                 const EstimatorConfig &config, ParamStore &store,
                                 std::mt19937_64 &rng)
    : config_(config), input_dim_(input_dim) {
  config_.Validate();
  if (input_dim == 0) throw ConfigError("estimator: empty feature layout");
  const size_t c = config_.channels;
  auto bound = [](size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };
  in_ln_g_ = store.AddConstant(prefix + ".in_norm.gamma", {input_dim}, 1.0);
  in_ln_b_ = store.AddConstant(prefix + ".in_norm.beta", {input_dim}, 0.0);
  in_w_ = store.AddUniform(prefix + ".in.w", {input_dim, c}, bound(input_dim), rng);
  in_b_ = store.AddUniform(prefix + ".in.b", {c}, bound(input_dim), rng);
  size_t i = 0;
  for (size_t r = 0; r < config_.repeats; ++r)
    for (size_t d : config_.dilations) {
      const std::string p = prefix + ".block" + std::to_string(i++);
      Block b;
      b.dilation = d;
      b.conv_w = store.AddUniform(p + ".conv.w", {config_.kernel, c, c}, bound(config_.kernel * c), rng);
      b.conv_b = store.AddUniform(p + ".conv.b", {c}, bound(config_.kernel * c), rng);
      b.alpha = store.AddConstant(p + ".prelu", {c}, 0.25);
      b.ln_g = store.AddConstant(p + ".norm.gamma", {c}, 1.0);
      b.ln_b = store.AddConstant(p + ".norm.beta", {c}, 0.0);
      b.res_w = store.AddUniform(p + ".res.w", {c, c}, bound(c), rng);
      b.res_b = store.AddUniform(p + ".res.b", {c}, bound(c), rng);
      blocks_.push_back(std::move(b));
    }
  head_alpha_ = store.AddConstant(prefix + ".head.prelu", {c}, 0.25);
  head_w_ = store.AddUniform(prefix + ".head.w", {c, config_.HeadDim()}, bound(c), rng);
  head_b_ = store.AddUniform(prefix + ".head.b", {config_.HeadDim()}, bound(c), rng);
}

FilterPair FilterEstimator::Forward(const Tensor &features) const {
  if (features.rank() != 2 || features.dim(1) != input_dim_)
    throw ShapeError("estimator: features " + ShapeString(features.shape()) + ", expected [T, " +
                     std::to_string(input_dim_) + "]");
  Tensor x = Linear(LayerNorm(features, in_ln_g_, in_ln_b_), in_w_, in_b_);
  for (const auto &b : blocks_) {
    Tensor y = Conv1d(x, b.conv_w, b.conv_b, b.dilation);
    y = LayerNorm(PRelu(y, b.alpha), b.ln_g, b.ln_b);
    x = Add(x, Linear(y, b.res_w, b.res_b));
  }
  Tensor head = Linear(PRelu(x, head_alpha_), head_w_, head_b_);
  head = Scale(Tanh(head), config_.mask_bound);

  // Head layout per frame: [target][re/im][F][taps].
  const size_t t_n = features.dim(0), f_n = config_.num_bins, taps = config_.NumTaps();
  const size_t block = f_n * taps;
  auto part = [&](size_t target, size_t comp) {
    return Reshape(Slice(head, 1, (target * 2 + comp) * block, block), {t_n, f_n, taps});
  };
  return {{part(0, 0), part(0, 1)}, {part(1, 0), part(1, 1)}};
}

}  // namespace adlmvdr::nn
