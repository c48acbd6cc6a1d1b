// adlmvdr/signal/stft.cc

#include "adlmvdr/signal/stft.h"

#include <cmath>
#include <numbers>

#include "adlmvdr/signal/fft.h"

namespace adlmvdr {

namespace {

constexpr double kEnvelopeFloor = 1e-12;

size_t Pad(const StftConfig &config) { return config.frame_len / 2; }

std::vector<double> ReflectPad(const std::vector<double> &x, size_t pad) {
  const size_t n = x.size();
  std::vector<double> out(n + 2 * pad);
  for (size_t i = 0; i < pad; ++i) {
    out[pad - 1 - i] = x[i + 1];
    out[pad + n + i] = x[n - 2 - i];
  }
  std::copy(x.begin(), x.end(), out.begin() + static_cast<std::ptrdiff_t>(pad));
  return out;
}

// Sum over frames of the squared synthesis window, in padded coordinates.
std::vector<double> SquaredWindowEnvelope(const std::vector<double> &window,
                                          size_t num_frames, size_t hop,
                                          size_t padded_len) {
  std::vector<double> env(padded_len, 0.0);
  for (size_t t = 0; t < num_frames; ++t) {
    for (size_t j = 0; j < window.size(); ++j) {
      size_t n = t * hop + j;
      if (n < padded_len) env[n] += window[j] * window[j];
    }
  }
  return env;
}

size_t PaddedLength(const StftConfig &config, size_t num_frames) {
  return (num_frames - 1) * config.hop + config.frame_len;
}

}  // namespace

void StftConfig::Validate() const {
  if (window != "hann")
    throw ConfigError("StftConfig: only the hann window is supported, got '" +
                      window + "'");
  if (fft_size < 2 || fft_size % 2 != 0)
    throw ConfigError("StftConfig: fft_size must be even");
  if (frame_len == 0 || frame_len > fft_size)
    throw ConfigError("StftConfig: frame_len must be in [1, fft_size]");
  if (frame_len % 2 != 0)
    throw ConfigError("StftConfig: frame_len must be even");
  if (hop == 0 || hop > frame_len / 2)
    throw ConfigError("StftConfig: hop must be in [1, frame_len / 2]");
}

size_t StftConfig::NumFrames(size_t num_samples) const {
  return 1 + num_samples / hop;
}

std::vector<double> PeriodicHann(size_t n) {
  std::vector<double> w(n);
  for (size_t k = 0; k < n; ++k)
    w[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) /
                                static_cast<double>(n));
  return w;
}

Stft ForwardStft(const MultiWave &wave, const StftConfig &config) {
  config.Validate();
  if (wave.NumChannels() == 0 || wave.NumSamples() == 0)
    throw ShapeError("ForwardStft: empty input");
  wave.Validate();
  if (wave.rate != kSampleRate)
    throw ConfigError("ForwardStft: sample rate " + std::to_string(wave.rate) +
                      " unsupported, expected " + std::to_string(kSampleRate));
  const size_t len = wave.NumSamples();
  if (len < config.frame_len)
    throw ShapeError("ForwardStft: signal shorter than frame_len");

  const size_t num_frames = config.NumFrames(len);
  const size_t num_bins = config.NumBins();
  const std::vector<double> window = PeriodicHann(config.frame_len);
  const RealFft &fft = RealFft::Get(config.fft_size);

  Stft out;
  out.config = config;
  out.signal_len = len;
  out.rate = wave.rate;
  out.data = ComplexArray({wave.NumChannels(), num_frames, num_bins});

  std::vector<double> frame(config.fft_size, 0.0);
  for (size_t m = 0; m < wave.NumChannels(); ++m) {
    const std::vector<double> padded = ReflectPad(wave.channels[m], Pad(config));
    for (size_t t = 0; t < num_frames; ++t) {
      const size_t start = t * config.hop;
      for (size_t j = 0; j < config.frame_len; ++j)
        frame[j] = padded[start + j] * window[j];
      fft.Forward(frame, std::span<cdouble>(&out.data(m, t, 0), num_bins));
    }
  }
  return out;
}

void InverseStftChannel(std::span<const cdouble> frames, size_t num_frames,
                        const StftConfig &config, size_t signal_len,
                        std::span<double> out) {
  const size_t num_bins = config.NumBins();
  if (frames.size() != num_frames * num_bins || out.size() != signal_len)
    throw ShapeError("InverseStftChannel: size mismatch");
  const size_t padded_len = PaddedLength(config, num_frames);
  const std::vector<double> window = PeriodicHann(config.frame_len);
  const std::vector<double> env =
      SquaredWindowEnvelope(window, num_frames, config.hop, padded_len);
  const RealFft &fft = RealFft::Get(config.fft_size);
  const double scale = 1.0 / static_cast<double>(config.fft_size);

  std::vector<double> acc(padded_len, 0.0);
  std::vector<double> time(config.fft_size);
  for (size_t t = 0; t < num_frames; ++t) {
    fft.Inverse(frames.subspan(t * num_bins, num_bins), time);
    for (size_t j = 0; j < config.frame_len; ++j)
      acc[t * config.hop + j] += time[j] * scale * window[j];
  }
  const size_t pad = Pad(config);
  for (size_t n = 0; n < signal_len; ++n) {
    const size_t p = n + pad;
    out[n] = (p < padded_len && env[p] > kEnvelopeFloor) ? acc[p] / env[p] : 0.0;
  }
}

void InverseStftChannelAdjoint(std::span<const double> grad_out,
                               size_t num_frames, const StftConfig &config,
                               size_t signal_len, std::span<cdouble> grad_frames) {
  const size_t num_bins = config.NumBins();
  if (grad_frames.size() != num_frames * num_bins || grad_out.size() != signal_len)
    throw ShapeError("InverseStftChannelAdjoint: size mismatch");
  const size_t padded_len = PaddedLength(config, num_frames);
  const std::vector<double> window = PeriodicHann(config.frame_len);
  const std::vector<double> env =
      SquaredWindowEnvelope(window, num_frames, config.hop, padded_len);
  const RealFft &fft = RealFft::Get(config.fft_size);
  const double n_inv = 1.0 / static_cast<double>(config.fft_size);

  const size_t pad = Pad(config);
  std::vector<double> gpad(padded_len, 0.0);
  for (size_t n = 0; n < signal_len; ++n) {
    const size_t p = n + pad;
    if (p < padded_len && env[p] > kEnvelopeFloor) gpad[p] = grad_out[n] / env[p];
  }

  std::vector<double> q(config.fft_size, 0.0);
  std::vector<cdouble> spec(num_bins);
  for (size_t t = 0; t < num_frames; ++t) {
    for (size_t j = 0; j < config.frame_len; ++j)
      q[j] = window[j] * gpad[t * config.hop + j];
    fft.Forward(q, spec);
    for (size_t k = 0; k < num_bins; ++k) {
      const bool edge = (k == 0 || k == num_bins - 1);
      const double c = (edge ? 1.0 : 2.0) * n_inv;
      // c2r ignores the imaginary part of DC and Nyquist.
      grad_frames[t * num_bins + k] =
          cdouble(c * spec[k].real(), edge ? 0.0 : c * spec[k].imag());
    }
  }
}

MultiWave InverseStft(const Stft &spec, const StftConfig &config) {
  config.Validate();
  if (!(spec.config == config))
    throw ConfigError("InverseStft: config does not match the spectrogram's");
  if (spec.data.rank() != 3 || spec.NumBins() != config.NumBins())
    throw ShapeError("InverseStft: expected [M, T, F] with F = fft_size/2+1");
  if (spec.NumFrames() != config.NumFrames(spec.signal_len))
    throw ShapeError("InverseStft: frame count inconsistent with signal_len");

  const size_t num_frames = spec.NumFrames();
  const size_t num_bins = spec.NumBins();
  MultiWave out(spec.NumChannels(), spec.signal_len, spec.rate);
  for (size_t m = 0; m < spec.NumChannels(); ++m) {
    std::span<const cdouble> frames(&spec.data(m, 0, 0), num_frames * num_bins);
    InverseStftChannel(frames, num_frames, config, spec.signal_len, out.channels[m]);
  }
  return out;
}

}  // namespace adlmvdr
