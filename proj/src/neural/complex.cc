// neural/complex.cc

#include "adlmvdr/neural/complex.h"

namespace adlmvdr::nn {

CTensor CConstant(const ComplexArray &a) {
  std::vector<double> re(a.size()), im(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    re[i] = a[i].real();
    im[i] = a[i].imag();
  }
  return {Tensor::Constant(a.shape(), std::move(re)), Tensor::Constant(a.shape(), std::move(im))};
}

ComplexArray ToComplex(const CTensor &c) {
  ComplexArray out(c.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = cdouble(c.re.value()[i], c.im.value()[i]);
  return out;
}

CTensor CAdd(const CTensor &a, const CTensor &b) { return {Add(a.re, b.re), Add(a.im, b.im)}; }
CTensor CSub(const CTensor &a, const CTensor &b) { return {Sub(a.re, b.re), Sub(a.im, b.im)}; }

CTensor CMul(const CTensor &a, const CTensor &b) {
  return {Sub(Mul(a.re, b.re), Mul(a.im, b.im)), Add(Mul(a.re, b.im), Mul(a.im, b.re))};
}

CTensor CMulConj(const CTensor &a, const CTensor &b) {
  return {Add(Mul(a.re, b.re), Mul(a.im, b.im)), Sub(Mul(a.im, b.re), Mul(a.re, b.im))};
}

CTensor CConjMul(const CTensor &a, const CTensor &b) {
  return {Add(Mul(a.re, b.re), Mul(a.im, b.im)), Sub(Mul(a.re, b.im), Mul(a.im, b.re))};
}

CTensor CConj(const CTensor &a) { return {a.re, Neg(a.im)}; }

CTensor CScale(const CTensor &a, const Tensor &s) { return {Mul(a.re, s), Mul(a.im, s)}; }

CTensor CDiv(const CTensor &a, const CTensor &b) {
  const Tensor den = CAbs2(b);
  const CTensor num = CMulConj(a, b);
  return {Div(num.re, den), Div(num.im, den)};
}

Tensor CAbs2(const CTensor &a) { return Add(Square(a.re), Square(a.im)); }

CTensor CSum(const CTensor &a, size_t axis, bool keepdim) {
  return {Sum(a.re, axis, keepdim), Sum(a.im, axis, keepdim)};
}

CTensor CReshape(const CTensor &a, const Shape &shape) {
  return {Reshape(a.re, shape), Reshape(a.im, shape)};
}

CTensor CPermute(const CTensor &a, const std::vector<size_t> &perm) {
  return {Permute(a.re, perm), Permute(a.im, perm)};
}

CTensor CSlice(const CTensor &a, size_t axis, size_t start, size_t len) {
  return {Slice(a.re, axis, start, len), Slice(a.im, axis, start, len)};
}

CTensor CConcat(const std::vector<CTensor> &xs, size_t axis) {
  std::vector<Tensor> re, im;
  for (const auto &x : xs) {
    re.push_back(x.re);
    im.push_back(x.im);
  }
  return {Concat(re, axis), Concat(im, axis)};
}

CTensor Unpack(const Tensor &packed) {
  if (packed.rank() < 1 || packed.dim(0) != 2)
    throw ShapeError("Unpack expects a leading axis of 2, got " + ShapeString(packed.shape()));
  Shape rest(packed.shape().begin() + 1, packed.shape().end());
  return {Reshape(Slice(packed, 0, 0, 1), rest), Reshape(Slice(packed, 0, 1, 1), rest)};
}

}  // namespace adlmvdr::nn
