// adlmvdr/base/ndarray.h

#ifndef ADLMVDR_BASE_NDARRAY_H_
#define ADLMVDR_BASE_NDARRAY_H_

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "adlmvdr/base/error.h"

namespace adlmvdr {

using cdouble = std::complex<double>;
using Shape = std::vector<size_t>;

inline size_t NumElements(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), size_t{1},
                         [](size_t a, size_t b) { return a * b; });
}

std::string ShapeString(const Shape &shape);

// Dense row-major n-d array. Used for spectrograms, masks, covariance
// sequences and feature matrices outside the autodiff graph.
template <typename T>
class NdArray {
 public:
  NdArray() = default;
  explicit NdArray(Shape shape, T fill = T{})
      : shape_(std::move(shape)), data_(NumElements(shape_), fill) {}
  NdArray(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != NumElements(shape_))
      throw ShapeError("NdArray: data size " + std::to_string(data_.size()) +
                       " does not match shape " + ShapeString(shape_));
  }

  const Shape &shape() const { return shape_; }
  size_t dim(size_t axis) const { return shape_.at(axis); }
  size_t rank() const { return shape_.size(); }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> flat() { return data_; }
  std::span<const T> flat() const { return data_; }
  std::vector<T> &vec() { return data_; }
  const std::vector<T> &vec() const { return data_; }
  T *data() { return data_.data(); }
  const T *data() const { return data_.data(); }

  template <typename... I>
  T &operator()(I... idx) {
    return data_[Offset({static_cast<size_t>(idx)...})];
  }
  template <typename... I>
  const T &operator()(I... idx) const {
    return data_[Offset({static_cast<size_t>(idx)...})];
  }

  T &operator[](size_t i) { return data_[i]; }
  const T &operator[](size_t i) const { return data_[i]; }

  size_t Offset(std::initializer_list<size_t> idx) const {
    size_t off = 0;
    size_t axis = 0;
    for (size_t i : idx) off = off * shape_[axis++] + i;
    return off;
  }

  bool SameShape(const NdArray &other) const { return shape_ == other.shape_; }

 private:
  Shape shape_;
  std::vector<T> data_;
};

using RealArray = NdArray<double>;
using ComplexArray = NdArray<cdouble>;

}  // namespace adlmvdr

#endif  // ADLMVDR_BASE_NDARRAY_H_
