// adlmvdr/signal/wav.h

#ifndef ADLMVDR_SIGNAL_WAV_H_
#define ADLMVDR_SIGNAL_WAV_H_

#include <string>

#include "adlmvdr/signal/wave.h"

namespace adlmvdr {

enum class WavEncoding { kPcm16, kFloat32 };

// Reads little-endian RIFF/WAVE with PCM16 or IEEE float32 samples
// (WAVE_FORMAT_EXTENSIBLE accepted when its subformat is one of those).
// PCM16 is scaled by 2^-15.
MultiWave ReadWav(const std::string &path);

// PCM16 output is clipped to [-1, 1 - 2^-15] and rounded to nearest.
void WriteWav(const std::string &path, const MultiWave &wave,
              WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace adlmvdr

#endif  // ADLMVDR_SIGNAL_WAV_H_
