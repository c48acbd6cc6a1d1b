// adlmvdr/simulate/synth.cc

#include "adlmvdr/simulate/synth.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace adlmvdr {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kTargetRms = 0.1;

void NormalizeRms(std::vector<double> &x, double rms) {
  double e = 0.0;
  for (double v : x) e += v * v;
  if (e <= 0.0) return;
  const double g = rms / std::sqrt(e / static_cast<double>(x.size()));
  for (double &v : x) v *= g;
}

// Raised-cosine attack and release over a segment of n samples.
double Envelope(size_t i, size_t n, size_t attack, size_t release) {
  if (i < attack) return 0.5 - 0.5 * std::cos(std::numbers::pi * i / attack);
  if (i + release > n)
    return 0.5 - 0.5 * std::cos(std::numbers::pi * (n - i) / release);
  return 1.0;
}

struct Formant {
  double centre, bandwidth, gain;
};

double FormantGain(const std::vector<Formant> &formants, double hz) {
  // Spectral floor so harmonics reach the upper bins, about -40 dB at 8 kHz.
  double g = 0.05 * std::exp(-hz / 5000.0);
  for (const auto &f : formants) {
    const double d = (hz - f.centre) / f.bandwidth;
    g += f.gain * std::exp(-0.5 * d * d);
  }
  return g;
}

}  // namespace

uint64_t MixSeed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Waveform SynthesizeSpeech(size_t num_samples, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double fs = kSampleRate;
  const double f0_base = uniform(90.0, 240.0);
  const double formant_scale = uniform(0.85, 1.2);

  Waveform out;
  out.samples.assign(num_samples, 0.0);
  size_t pos = static_cast<size_t>(uniform(0.0, 0.15) * fs);
  while (pos < num_samples) {
    const size_t len = static_cast<size_t>(uniform(0.12, 0.30) * fs);
    const size_t end = std::min(num_samples, pos + len);
    const size_t n = end - pos;
    const double level = uniform(0.5, 1.0);
    const size_t attack = std::max<size_t>(1, static_cast<size_t>(0.02 * fs));
    const size_t release = std::max<size_t>(1, static_cast<size_t>(0.04 * fs));

    if (u01(rng) < 0.8) {
      const std::vector<Formant> formants = {
          {uniform(300.0, 900.0) * formant_scale, uniform(80.0, 160.0), 1.0},
          {uniform(900.0, 2400.0) * formant_scale, uniform(100.0, 220.0), 0.6},
          {uniform(2300.0, 3500.0) * formant_scale, uniform(150.0, 300.0), 0.3}};
      const double f0_start = f0_base * uniform(0.85, 1.15);
      const double f0_end = f0_base * uniform(0.85, 1.15);
      const double vibrato = uniform(3.0, 6.0);
      const size_t num_harm = static_cast<size_t>(7800.0 / (1.2 * f0_base));
      std::vector<double> phase(num_harm, 0.0);
      for (auto &p : phase) p = uniform(0.0, kTwoPi);
      for (size_t i = 0; i < n; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(n);
        const double f0 = (f0_start + (f0_end - f0_start) * frac) *
                          (1.0 + 0.02 * std::sin(kTwoPi * vibrato * i / fs));
        double s = 0.0;
        for (size_t h = 0; h < num_harm; ++h) {
          const double hz = f0 * static_cast<double>(h + 1);
          if (hz >= 7800.0) break;
          phase[h] += kTwoPi * hz / fs;
          s += FormantGain(formants, hz) / std::sqrt(static_cast<double>(h + 1)) *
               std::sin(phase[h]);
        }
        out.samples[pos + i] += level * Envelope(i, n, attack, release) * s;
      }
    } else {
      double prev = 0.0;
      for (size_t i = 0; i < n; ++i) {
        const double w = gauss(rng);
        const double hp = w - 0.9 * prev;  // tilt towards high frequencies
        prev = w;
        out.samples[pos + i] += 0.3 * level * Envelope(i, n, attack, release) * hp;
      }
    }
    const double gap = u01(rng) < 0.15 ? uniform(0.25, 0.4) : uniform(0.03, 0.12);
    pos = end + static_cast<size_t>(gap * fs);
  }
  NormalizeRms(out.samples, kTargetRms);
  return out;
}

MultiWave SynthesizeNoise(size_t num_channels, size_t num_samples, uint64_t seed) {
  MultiWave out(num_channels, num_samples);
  for (size_t m = 0; m < num_channels; ++m) {
    std::mt19937_64 rng(MixSeed(seed, m));
    std::normal_distribution<double> gauss(0.0, 1.0);
    double y = 0.0;
    for (size_t n = 0; n < num_samples; ++n) {
      y = 0.8 * y + gauss(rng);
      out.channels[m][n] = y;
    }
    NormalizeRms(out.channels[m], kTargetRms);
  }
  return out;
}

}  // namespace adlmvdr
