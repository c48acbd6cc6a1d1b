// adlmvdr/neural/params.h
//
// Named, ordered parameter collection shared by the networks of a system.
#ifndef ADLMVDR_NEURAL_PARAMS_H_
#define ADLMVDR_NEURAL_PARAMS_H_

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "adlmvdr/neural/tensor.h"

namespace adlmvdr::nn {

class ParamStore {
 public:
  // uniform(-bound, bound) draws from rng, in registration order.
  Tensor AddUniform(const std::string &name, Shape shape, double bound, std::mt19937_64 &rng);
  Tensor AddConstant(const std::string &name, Shape shape, double value);

  const std::vector<std::pair<std::string, Tensor>> &entries() const { return entries_; }
  // Throws ConfigError when absent.
  Tensor Get(const std::string &name) const;
  size_t NumScalars() const;
  void ZeroGrad();

 private:
  Tensor Register(const std::string &name, Tensor t);
  std::vector<std::pair<std::string, Tensor>> entries_;
};

}  // namespace adlmvdr::nn

#endif  // ADLMVDR_NEURAL_PARAMS_H_
