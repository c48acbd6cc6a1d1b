// adlmvdr/neural/complex.h
//
// Complex tensors as (re, im) pairs of real tensors, with arithmetic built
// from the real primitives so gradients come for free.
#ifndef ADLMVDR_NEURAL_COMPLEX_H_
#define ADLMVDR_NEURAL_COMPLEX_H_

#include <vector>

#include "adlmvdr/base/ndarray.h"
#include "adlmvdr/neural/ops.h"

namespace adlmvdr::nn {

struct CTensor {
  Tensor re, im;
  const Shape &shape() const { return re.shape(); }
  size_t dim(size_t axis) const { return re.dim(axis); }
};

CTensor CConstant(const ComplexArray &a);
ComplexArray ToComplex(const CTensor &c);

CTensor CAdd(const CTensor &a, const CTensor &b);
CTensor CSub(const CTensor &a, const CTensor &b);
CTensor CMul(const CTensor &a, const CTensor &b);
// a * conj(b)
CTensor CMulConj(const CTensor &a, const CTensor &b);
// conj(a) * b
CTensor CConjMul(const CTensor &a, const CTensor &b);
CTensor CConj(const CTensor &a);
CTensor CScale(const CTensor &a, const Tensor &s);  // real s, broadcast
CTensor CDiv(const CTensor &a, const CTensor &b);
Tensor CAbs2(const CTensor &a);

CTensor CSum(const CTensor &a, size_t axis, bool keepdim = false);
CTensor CReshape(const CTensor &a, const Shape &shape);
CTensor CPermute(const CTensor &a, const std::vector<size_t> &perm);
CTensor CSlice(const CTensor &a, size_t axis, size_t start, size_t len);
CTensor CConcat(const std::vector<CTensor> &xs, size_t axis);

// Splits a [2, ...] tensor into its re (index 0) and im (index 1) halves.
CTensor Unpack(const Tensor &packed);

}  // namespace adlmvdr::nn

#endif  // ADLMVDR_NEURAL_COMPLEX_H_
