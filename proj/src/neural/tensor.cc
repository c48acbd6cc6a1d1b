// neural/tensor.cc

#include "adlmvdr/neural/tensor.h"

#include <unordered_set>

namespace adlmvdr::nn {

namespace {
thread_local bool g_grad_enabled = true;

std::shared_ptr<Node> NewNode(Shape shape, std::vector<double> value) {
  if (value.size() != NumElements(shape))
    throw ShapeError("tensor: " + std::to_string(value.size()) + " values for shape " +
                     ShapeString(shape));
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  return n;
}
}  // namespace

bool GradEnabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor Tensor::Constant(Shape shape, std::vector<double> value) {
  return Tensor(NewNode(std::move(shape), std::move(value)));
}

Tensor Tensor::Zeros(Shape shape) {
  const size_t n = NumElements(shape);
  return Constant(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::Scalar(double v) { return Constant({}, {v}); }

Tensor Tensor::Parameter(Shape shape, std::vector<double> value) {
  auto n = NewNode(std::move(shape), std::move(value));
  n->requires_grad = true;
  return Tensor(std::move(n));
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + ShapeString(shape()));
  return node_->value[0];
}

bool NeedsGrad(const std::vector<Tensor> &parents) {
  if (!g_grad_enabled) return false;
  for (const auto &p : parents)
    if (p.requires_grad()) return true;
  return false;
}

Tensor MakeResult(Shape shape, std::vector<double> value, const std::vector<Tensor> &parents,
                  const std::function<BackwardFn()> &make_backward) {
  auto n = NewNode(std::move(shape), std::move(value));
  if (NeedsGrad(parents)) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (const auto &p : parents) n->parents.push_back(p.shared());
    n->backward = make_backward();
  }
  return Tensor(std::move(n));
}

void Tensor::Backward() const {
  if (size() != 1) throw ShapeError("Backward() needs a scalar, got " + ShapeString(shape()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node *> order;
  std::unordered_set<Node *> seen;
  std::vector<std::pair<Node *, size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto &[n, next] = stack.back();
    if (next < n->parents.size()) {
      Node *p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->Grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node *n = *it;
    if (n->backward && !n->grad.empty()) n->backward(n->grad);
  }
}

}  // namespace adlmvdr::nn
