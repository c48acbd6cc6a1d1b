// tests/test_util.h

#ifndef ADLMVDR_TESTS_TEST_UTIL_H_
#define ADLMVDR_TESTS_TEST_UTIL_H_

#include <unistd.h>

#include <complex>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "adlmvdr/linalg/cmat.h"
#include "adlmvdr/signal/stft.h"

namespace adlmvdr::testing {

inline std::vector<double> RandomVector(std::mt19937_64 &rng, size_t n,
                                        double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (auto &x : v) x = g(rng);
  return v;
}

inline cdouble RandomComplex(std::mt19937_64 &rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  double re = g(rng);
  double im = g(rng);
  return {re, im};
}

inline CVec RandomCVec(std::mt19937_64 &rng, size_t n) {
  CVec v(n);
  for (auto &x : v) x = RandomComplex(rng);
  return v;
}

inline CMat RandomCMat(std::mt19937_64 &rng, size_t rows, size_t cols) {
  CMat m(rows, cols);
  for (auto &x : m.entries()) x = RandomComplex(rng);
  return m;
}

// B B^H + shift I.
inline CMat RandomPsd(std::mt19937_64 &rng, size_t n, double shift = 0.1) {
  CMat b = RandomCMat(rng, n, n);
  CMat a = MatMul(b, Hermitian(b));
  for (size_t i = 0; i < n; ++i) a(i, i) += shift;
  return a;
}

inline std::filesystem::path TempDir(const std::string &tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("adlmvdr_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

// Spectrogram container with random complex entries; config is nominal.
inline Stft RandomStft(std::mt19937_64 &rng, size_t channels, size_t frames,
                       size_t bins) {
  Stft s;
  s.data = ComplexArray({channels, frames, bins});
  for (auto &x : s.data.vec()) x = RandomComplex(rng);
  s.config.fft_size = 2 * (bins - 1);
  s.config.frame_len = s.config.fft_size;
  s.config.hop = s.config.fft_size / 2;
  s.signal_len = (frames - 1) * s.config.hop;
  return s;
}

// Naive DFT used as an FFT-independent oracle.
inline std::vector<cdouble> NaiveDft(const std::vector<double> &x) {
  const size_t n = x.size();
  std::vector<cdouble> out(n / 2 + 1);
  for (size_t k = 0; k <= n / 2; ++k) {
    cdouble s = 0.0;
    for (size_t j = 0; j < n; ++j)
      s += x[j] * std::polar(1.0, -2.0 * M_PI * static_cast<double>(k * j % n) /
                                      static_cast<double>(n));
    out[k] = s;
  }
  return out;
}

}  // namespace adlmvdr::testing

#endif  // ADLMVDR_TESTS_TEST_UTIL_H_
