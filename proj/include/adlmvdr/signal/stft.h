// adlmvdr/signal/stft.h

#ifndef ADLMVDR_SIGNAL_STFT_H_
#define ADLMVDR_SIGNAL_STFT_H_

#include <span>
#include <string>
#include <vector>

#include "adlmvdr/base/ndarray.h"
#include "adlmvdr/signal/wave.h"

namespace adlmvdr {

struct StftConfig {
  size_t fft_size = 512;
  size_t frame_len = 512;  // 32 ms at 16 kHz
  size_t hop = 256;        // 16 ms
  std::string window = "hann";

  size_t NumBins() const { return fft_size / 2 + 1; }
  // Frames produced for a signal of num_samples under centered reflect
  // padding of frame_len / 2 on both ends.
  size_t NumFrames(size_t num_samples) const;
  void Validate() const;
  bool operator==(const StftConfig &) const = default;
};

// Periodic Hann of length n: 0.5 - 0.5 cos(2 pi k / n).
std::vector<double> PeriodicHann(size_t n);

// Complex spectrogram, data laid out [channels, frames, bins].
struct Stft {
  ComplexArray data;
  StftConfig config;
  size_t signal_len = 0;
  int rate = kSampleRate;

  size_t NumChannels() const { return data.dim(0); }
  size_t NumFrames() const { return data.dim(1); }
  size_t NumBins() const { return data.dim(2); }
};

Stft ForwardStft(const MultiWave &wave, const StftConfig &config);

// Weighted overlap-add with the analysis window as synthesis window and
// per-sample normalization by the summed squared window, which inverts
// ForwardStft exactly wherever the envelope is nonzero.
MultiWave InverseStft(const Stft &spec, const StftConfig &config);

// Single-channel building blocks of InverseStft, exposed for the autodiff
// iSTFT node. frames is [T, F] row-major, out has signal_len samples.
void InverseStftChannel(std::span<const cdouble> frames, size_t num_frames,
                        const StftConfig &config, size_t signal_len,
                        std::span<double> out);
// Adjoint of InverseStftChannel with respect to the real and imaginary
// parts of frames, treated as independent real inputs.
void InverseStftChannelAdjoint(std::span<const double> grad_out,
                               size_t num_frames, const StftConfig &config,
                               size_t signal_len, std::span<cdouble> grad_frames);

}  // namespace adlmvdr

#endif  // ADLMVDR_SIGNAL_STFT_H_
