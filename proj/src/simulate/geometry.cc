// adlmvdr/simulate/geometry.cc

#include "adlmvdr/simulate/geometry.h"

#include <cmath>
#include <numbers>

#include "adlmvdr/base/error.h"

namespace adlmvdr {

ArrayGeometry ArrayGeometry::UniformLinear(size_t num_mics, double spacing) {
  ArrayGeometry g;
  const double centre = 0.5 * static_cast<double>(num_mics - 1) * spacing;
  for (size_t m = 0; m < num_mics; ++m)
    g.positions.push_back({static_cast<double>(m) * spacing - centre, 0.0, 0.0});
  return g;
}

void ArrayGeometry::Validate() const {
  if (positions.empty()) throw ConfigError("ArrayGeometry: no microphones");
  for (size_t i = 0; i < positions.size(); ++i) {
    for (double c : positions[i])
      if (!std::isfinite(c)) throw ConfigError("ArrayGeometry: non-finite position");
    for (size_t j = i + 1; j < positions.size(); ++j)
      if (positions[i] == positions[j])
        throw ConfigError("ArrayGeometry: mics " + std::to_string(i) + " and " +
                          std::to_string(j) + " coincide");
  }
}

std::vector<double> ArrayGeometry::Delays(double doa) const {
  if (!std::isfinite(doa)) throw ConfigError("ArrayGeometry: non-finite DOA");
  const double ux = std::cos(doa), uy = std::sin(doa);
  std::vector<double> out(positions.size());
  for (size_t m = 0; m < positions.size(); ++m)
    out[m] = -(positions[m][0] * ux + positions[m][1] * uy) / kSpeedOfSound;
  return out;
}

double ArrayGeometry::TargetPhaseDifference(size_t i, size_t j, double doa,
                                            double hz) const {
  const double ux = std::cos(doa), uy = std::sin(doa);
  const double proj = (positions.at(i)[0] - positions.at(j)[0]) * ux +
                      (positions.at(i)[1] - positions.at(j)[1]) * uy;
  return 2.0 * std::numbers::pi * hz * proj / kSpeedOfSound;
}

}  // namespace adlmvdr
