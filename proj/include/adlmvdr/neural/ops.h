// adlmvdr/neural/ops.h
//
// Differentiable primitives on real tensors. Binary elementwise ops follow
// numpy broadcasting (shapes aligned from the right, size-1 axes stretch).
#ifndef ADLMVDR_NEURAL_OPS_H_
#define ADLMVDR_NEURAL_OPS_H_

#include <vector>

#include "adlmvdr/neural/tensor.h"

namespace adlmvdr::nn {

Tensor Add(const Tensor &a, const Tensor &b);
Tensor Sub(const Tensor &a, const Tensor &b);
Tensor Mul(const Tensor &a, const Tensor &b);
Tensor Div(const Tensor &a, const Tensor &b);

Tensor Neg(const Tensor &x);
Tensor Scale(const Tensor &x, double c);
Tensor AddScalar(const Tensor &x, double c);
Tensor Tanh(const Tensor &x);
Tensor Sigmoid(const Tensor &x);
Tensor Relu(const Tensor &x);
Tensor Exp(const Tensor &x);
Tensor Log(const Tensor &x);
Tensor Sqrt(const Tensor &x);
Tensor Square(const Tensor &x);
// Gradient passes only where the input lies inside the bounds.
Tensor ClampMin(const Tensor &x, double lo);
Tensor Clamp(const Tensor &x, double lo, double hi);
// max(x, 0) + alpha * min(x, 0), alpha broadcast along the last axis.
Tensor PRelu(const Tensor &x, const Tensor &alpha);

Tensor Sum(const Tensor &x, size_t axis, bool keepdim = false);
Tensor Mean(const Tensor &x, size_t axis, bool keepdim = false);
Tensor SumAll(const Tensor &x);
Tensor MeanAll(const Tensor &x);

Tensor Reshape(const Tensor &x, Shape shape);
Tensor Permute(const Tensor &x, const std::vector<size_t> &perm);
Tensor Transpose(const Tensor &x);  // 2-d
Tensor Slice(const Tensor &x, size_t axis, size_t start, size_t len);
Tensor Concat(const std::vector<Tensor> &xs, size_t axis);

// [n, k] x [k, m]
Tensor MatMul(const Tensor &a, const Tensor &b);
// x [..., in] * w [in, out] + b [out]
Tensor Linear(const Tensor &x, const Tensor &w, const Tensor &b);
// Causal dilated convolution over time. x [T, Cin], w [K, Cin, Cout],
// b [Cout]; out[t] = b + sum_k w[k]^T x[t - (K-1-k) * dilation], zero
// before the first frame.
Tensor Conv1d(const Tensor &x, const Tensor &w, const Tensor &b, size_t dilation);
// Normalizes over the last axis, then gamma * xhat + beta.
Tensor LayerNorm(const Tensor &x, const Tensor &gamma, const Tensor &beta, double eps = 1e-5);

}  // namespace adlmvdr::nn

#endif  // ADLMVDR_NEURAL_OPS_H_
