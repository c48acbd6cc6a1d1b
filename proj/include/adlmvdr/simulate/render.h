// adlmvdr/simulate/render.h
//
// Synthetic far-field scenes on a microphone array. Reverberation is a
// per-channel exponentially decaying white-noise tail, not a physical room
// model.

#ifndef ADLMVDR_SIMULATE_RENDER_H_
#define ADLMVDR_SIMULATE_RENDER_H_

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "adlmvdr/signal/wave.h"
#include "adlmvdr/simulate/geometry.h"

namespace adlmvdr {

struct ReverbConfig {
  double decay_s = 0.0;        // T60 of the tail; 0 renders anechoic
  double onset_s = 0.003;      // tail starts this long after the direct path
  // Tail-to-direct energy ratio is decay_s / this (0 dB at 0.4 s).
  double unit_energy_decay_s = 0.4;
};

// Direct path delayed per mic by frequency-domain fractional delay, plus the
// reverberant tail. Deterministic in seed.
MultiWave RenderSource(const Waveform &dry, double doa, const ArrayGeometry &geometry,
                       const ReverbConfig &reverb, uint64_t seed);

// The decaying-noise tail impulse response of one channel (index 0 is the
// direct-path instant). Exposed for tests of the decay.
std::vector<double> ReverbTail(const ReverbConfig &reverb, int rate, uint64_t seed);

struct Scene {
  double target_doa = 0.0;                 // radians
  std::vector<double> interferer_doas;     // radians
  std::vector<double> sir_db;              // one per interferer, vs the target
  double snr_db = std::numeric_limits<double>::infinity();  // inf: no noise
  double reverb_decay_s = 0.0;
  uint64_t seed = 0;

  size_t NumSpeakers() const { return 1 + interferer_doas.size(); }
  void Validate() const;
};

struct SceneRender {
  MultiWave mixture;
  MultiWave target_reverberant;           // the reference
  std::vector<MultiWave> interferers;     // scaled, as mixed
  MultiWave noise;                        // scaled, as mixed; empty if none
  Waveform target_dry;
  Scene scene;
  double nearest_interferer_deg = 180.0;
};

inline constexpr size_t kReferenceChannel = 0;

// Smallest angular distance in degrees from the target to any interferer;
// 180 when there are none.
double NearestInterfererDegrees(const Scene &scene);

// Label of the angle bin: "0-15", "15-45", "45-90" or "90-180".
std::string AngleBin(double degrees);

// Renders and mixes. Gains are set on the reference channel so each
// interferer sits sir_db below the target and the noise snr_db below it.
// All inputs are trimmed to the shortest length. A peak guard may rescale
// every component by the same factor, which keeps the ratios.
SceneRender MixScene(const Scene &scene, const ArrayGeometry &geometry,
                     const Waveform &target_dry,
                     const std::vector<Waveform> &interferer_drys,
                     const MultiWave *noise, const ReverbConfig &reverb_base = {});

}  // namespace adlmvdr

#endif  // ADLMVDR_SIMULATE_RENDER_H_
