// adlmvdr/signal/wave.h

#ifndef ADLMVDR_SIGNAL_WAVE_H_
#define ADLMVDR_SIGNAL_WAVE_H_

#include <cstddef>
#include <vector>

namespace adlmvdr {

// The whole toolkit runs at one rate; other rates are rejected, not resampled.
inline constexpr int kSampleRate = 16000;

struct Waveform {
  std::vector<double> samples;
  int rate = kSampleRate;

  size_t size() const { return samples.size(); }
};

// M channels of equal length at a common rate.
struct MultiWave {
  std::vector<std::vector<double>> channels;
  int rate = kSampleRate;

  MultiWave() = default;
  MultiWave(size_t num_channels, size_t num_samples, int sample_rate = kSampleRate)
      : channels(num_channels, std::vector<double>(num_samples, 0.0)),
        rate(sample_rate) {}

  size_t NumChannels() const { return channels.size(); }
  size_t NumSamples() const { return channels.empty() ? 0 : channels[0].size(); }

  Waveform Channel(size_t m) const { return {channels.at(m), rate}; }

  // Throws if empty, ragged, non-positive rate or non-finite samples.
  void Validate() const;
};

}  // namespace adlmvdr

#endif  // ADLMVDR_SIGNAL_WAVE_H_
