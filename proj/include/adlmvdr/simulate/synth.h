// adlmvdr/simulate/synth.h
//
// Self-contained source material: a speech-like harmonic babble generator
// and multichannel background noise.

#ifndef ADLMVDR_SIMULATE_SYNTH_H_
#define ADLMVDR_SIMULATE_SYNTH_H_

#include <cstdint>

#include "adlmvdr/signal/wave.h"

namespace adlmvdr {

// Syllable-rate sequence of voiced (harmonic, formant-shaped, gliding f0)
// and unvoiced (noise burst) segments separated by pauses. Each seed gives
// a different "speaker" (f0 range and formant scaling). RMS 0.1.
Waveform SynthesizeSpeech(size_t num_samples, uint64_t seed);

// Independent per-channel low-passed (pinkish) noise, RMS 0.1 per channel.
MultiWave SynthesizeNoise(size_t num_channels, size_t num_samples, uint64_t seed);

// SplitMix64 step, used to derive independent child seeds.
uint64_t MixSeed(uint64_t seed, uint64_t stream);

}  // namespace adlmvdr

#endif  // ADLMVDR_SIMULATE_SYNTH_H_
