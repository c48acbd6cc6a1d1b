// adlmvdr/simulate/geometry.h

#ifndef ADLMVDR_SIMULATE_GEOMETRY_H_
#define ADLMVDR_SIMULATE_GEOMETRY_H_

#include <array>
#include <cstddef>
#include <vector>

namespace adlmvdr {

inline constexpr double kSpeedOfSound = 343.0;  // m/s

// Microphone positions in meters. DOAs are azimuths in the x-y plane,
// measured from the +x axis.
struct ArrayGeometry {
  std::vector<std::array<double, 3>> positions;

  size_t NumMics() const { return positions.size(); }

  // M mics on the x axis, centred on the origin.
  static ArrayGeometry UniformLinear(size_t num_mics, double spacing);

  // Throws unless there is at least one mic and positions are distinct.
  void Validate() const;

  // Far-field arrival time of each mic relative to the origin, in seconds:
  // -(p_m . u) / c with u the unit vector towards the source.
  std::vector<double> Delays(double doa) const;

  // Phase of Y_i - phase of Y_j expected for a plane wave from doa, at
  // frequency hz: 2 pi hz ((p_i - p_j) . u) / c.
  double TargetPhaseDifference(size_t i, size_t j, double doa, double hz) const;
};

}  // namespace adlmvdr

#endif  // ADLMVDR_SIMULATE_GEOMETRY_H_
