// adlmvdr/neural/tensor.h
//
// Reverse-mode autodiff over real double arrays. Every op records its
// parents and a backward closure on the result node; Backward() on a scalar
// walks the graph in reverse topological order. Complex quantities travel as
// (real, imag) pairs of real tensors.
#ifndef ADLMVDR_NEURAL_TENSOR_H_
#define ADLMVDR_NEURAL_TENSOR_H_

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "adlmvdr/base/ndarray.h"

namespace adlmvdr::nn {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad, accumulates into the parents.
  std::function<void(const std::vector<double> &)> backward;

  std::vector<double> &Grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor Constant(Shape shape, std::vector<double> value);
  static Tensor Zeros(Shape shape);
  static Tensor Scalar(double v);
  // Leaf that collects gradients.
  static Tensor Parameter(Shape shape, std::vector<double> value);

  bool defined() const { return node_ != nullptr; }
  const Shape &shape() const { return node_->shape; }
  size_t dim(size_t axis) const { return node_->shape.at(axis); }
  size_t rank() const { return node_->shape.size(); }
  size_t size() const { return node_->value.size(); }
  const std::vector<double> &value() const { return node_->value; }
  std::vector<double> &mutable_value() { return node_->value; }
  const double *data() const { return node_->value.data(); }
  double item() const;
  bool requires_grad() const { return node_->requires_grad; }
  // Zero-filled when no gradient has arrived.
  std::vector<double> &grad() { return node_->Grad(); }
  bool has_grad() const { return !node_->grad.empty(); }
  void ZeroGrad() { node_->grad.clear(); }
  Node *node() const { return node_.get(); }
  const std::shared_ptr<Node> &shared() const { return node_; }

  // Seeds d(this)/d(this) = 1; this must hold one element.
  void Backward() const;

 private:
  std::shared_ptr<Node> node_;
};

// Graph recording switch; inference runs with recording off.
bool GradEnabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard &operator=(const NoGradGuard &) = delete;

 private:
  bool prev_;
};

using BackwardFn = std::function<void(const std::vector<double> &)>;

// Builds an op result. The closure is kept only when recording is on and
// some parent needs a gradient; make_backward is called lazily so ops can
// skip capturing state for pure inference.
Tensor MakeResult(Shape shape, std::vector<double> value, const std::vector<Tensor> &parents,
                  const std::function<BackwardFn()> &make_backward);

// True when recording and any of the tensors needs a gradient.
bool NeedsGrad(const std::vector<Tensor> &parents);

}  // namespace adlmvdr::nn

#endif  // ADLMVDR_NEURAL_TENSOR_H_
