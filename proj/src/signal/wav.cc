// adlmvdr/signal/wav.cc

#include "adlmvdr/signal/wav.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "adlmvdr/base/error.h"

namespace adlmvdr {

static_assert(std::endian::native == std::endian::little,
              "WAV code assumes a little-endian host");

namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T Load(const std::vector<char> &buf, size_t off) {
  if (off + sizeof(T) > buf.size()) throw FormatError("wav: truncated file");
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  return v;
}

template <typename T>
void Store(std::vector<char> &buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.insert(buf.end(), bytes, bytes + sizeof(T));
}

void StoreTag(std::vector<char> &buf, const char *tag) {
  buf.insert(buf.end(), tag, tag + 4);
}

}  // namespace

void MultiWave::Validate() const {
  if (channels.empty()) throw ShapeError("MultiWave: no channels");
  if (rate <= 0) throw ShapeError("MultiWave: rate must be positive");
  const size_t n = channels[0].size();
  for (const auto &ch : channels) {
    if (ch.size() != n) throw ShapeError("MultiWave: channels differ in length");
    for (double v : ch)
      if (!std::isfinite(v)) throw NumericError("MultiWave: non-finite sample");
  }
}

MultiWave ReadWav(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("wav: cannot open " + path);
  std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw FormatError("wav: " + path + " is not a RIFF/WAVE file");

  uint16_t format = 0, num_channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  size_t data_off = 0, data_len = 0;
  bool have_data = false;

  size_t off = 12;
  while (off + 8 <= buf.size()) {
    const std::string id(buf.data() + off, 4);
    const uint32_t len = Load<uint32_t>(buf, off + 4);
    const size_t body = off + 8;
    if (id == "fmt ") {
      if (len < 16) throw FormatError("wav: fmt chunk too short");
      format = Load<uint16_t>(buf, body);
      num_channels = Load<uint16_t>(buf, body + 2);
      rate = Load<uint32_t>(buf, body + 4);
      bits = Load<uint16_t>(buf, body + 14);
      if (format == kFormatExtensible) {
        if (len < 40) throw FormatError("wav: extensible fmt chunk too short");
        format = Load<uint16_t>(buf, body + 24);
      }
      have_fmt = true;
    } else if (id == "data") {
      data_off = body;
      data_len = std::min<size_t>(len, buf.size() - body);
      have_data = true;
    }
    off = body + len + (len & 1u);
  }
  if (!have_fmt || !have_data) throw FormatError("wav: missing fmt or data chunk");
  if (num_channels == 0) throw FormatError("wav: channel count is 0");

  const bool pcm16 = (format == kFormatPcm && bits == 16);
  const bool f32 = (format == kFormatFloat && bits == 32);
  if (!pcm16 && !f32)
    throw FormatError("wav: unsupported encoding (format " + std::to_string(format) +
                      ", " + std::to_string(bits) + " bits); need PCM16 or float32");

  const size_t bytes_per_sample = bits / 8;
  const size_t frame_bytes = bytes_per_sample * num_channels;
  const size_t num_samples = data_len / frame_bytes;
  MultiWave wave(num_channels, num_samples, static_cast<int>(rate));
  for (size_t n = 0; n < num_samples; ++n) {
    for (size_t m = 0; m < num_channels; ++m) {
      const size_t p = data_off + n * frame_bytes + m * bytes_per_sample;
      wave.channels[m][n] = pcm16 ? Load<int16_t>(buf, p) / 32768.0
                                  : static_cast<double>(Load<float>(buf, p));
    }
  }
  return wave;
}

void WriteWav(const std::string &path, const MultiWave &wave, WavEncoding encoding) {
  if (wave.NumChannels() == 0) throw FormatError("wav: channel count is 0");
  wave.Validate();
  const bool pcm16 = encoding == WavEncoding::kPcm16;
  const uint16_t num_channels = static_cast<uint16_t>(wave.NumChannels());
  const uint16_t bits = pcm16 ? 16 : 32;
  const uint32_t block_align = num_channels * bits / 8;
  const size_t num_samples = wave.NumSamples();
  const uint32_t data_bytes = static_cast<uint32_t>(num_samples * block_align);

  std::vector<char> buf;
  buf.reserve(44 + data_bytes);
  StoreTag(buf, "RIFF");
  Store<uint32_t>(buf, 36 + data_bytes);
  StoreTag(buf, "WAVE");
  StoreTag(buf, "fmt ");
  Store<uint32_t>(buf, 16);
  Store<uint16_t>(buf, pcm16 ? kFormatPcm : kFormatFloat);
  Store<uint16_t>(buf, num_channels);
  Store<uint32_t>(buf, static_cast<uint32_t>(wave.rate));
  Store<uint32_t>(buf, static_cast<uint32_t>(wave.rate) * block_align);
  Store<uint16_t>(buf, static_cast<uint16_t>(block_align));
  Store<uint16_t>(buf, bits);
  StoreTag(buf, "data");
  Store<uint32_t>(buf, data_bytes);
  for (size_t n = 0; n < num_samples; ++n) {
    for (size_t m = 0; m < num_channels; ++m) {
      const double v = wave.channels[m][n];
      if (pcm16) {
        const double q = std::clamp(std::nearbyint(v * 32768.0), -32768.0, 32767.0);
        Store<int16_t>(buf, static_cast<int16_t>(q));
      } else {
        Store<float>(buf, static_cast<float>(v));
      }
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("wav: cannot open " + path + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("wav: write failed for " + path);
}

}  // namespace adlmvdr
