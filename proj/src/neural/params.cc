// neural/params.cc

#include "adlmvdr/neural/params.h"

namespace adlmvdr::nn {

Tensor ParamStore::Register(const std::string &name, Tensor t) {
  for (const auto &[n, _] : entries_)
    if (n == name) throw ConfigError("duplicate parameter name " + name);
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::AddUniform(const std::string &name, Shape shape, double bound,
                              std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(NumElements(shape));
  for (double &x : v) x = dist(rng);
  return Register(name, Tensor::Parameter(std::move(shape), std::move(v)));
}

Tensor ParamStore::AddConstant(const std::string &name, Shape shape, double value) {
  std::vector<double> v(NumElements(shape), value);
  return Register(name, Tensor::Parameter(std::move(shape), std::move(v)));
}

Tensor ParamStore::Get(const std::string &name) const {
  for (const auto &[n, t] : entries_)
    if (n == name) return t;
  throw ConfigError("no parameter named " + name);
}

size_t ParamStore::NumScalars() const {
  size_t n = 0;
  for (const auto &[_, t] : entries_) n += t.size();
  return n;
}

void ParamStore::ZeroGrad() {
  for (auto &[_, t] : entries_) t.ZeroGrad();
}

}  // namespace adlmvdr::nn
