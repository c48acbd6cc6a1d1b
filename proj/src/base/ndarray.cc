// adlmvdr/base/ndarray.cc

#include "adlmvdr/base/ndarray.h"

namespace adlmvdr {

std::string ShapeString(const Shape &shape) {
  std::string out = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

}  // namespace adlmvdr
