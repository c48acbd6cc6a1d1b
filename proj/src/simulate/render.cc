// adlmvdr/simulate/render.cc

#include "adlmvdr/simulate/render.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "adlmvdr/base/error.h"
#include "adlmvdr/signal/fft.h"
#include "adlmvdr/simulate/synth.h"

namespace adlmvdr {

namespace {

constexpr size_t kDelayGuard = 64;  // samples of zero padding on each side
constexpr double kPeakLimit = 0.95;

size_t NextPow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

double Power(const std::vector<double> &x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return x.empty() ? 0.0 : e / static_cast<double>(x.size());
}

// x delayed by tau seconds (may be negative), same length.
std::vector<double> FractionalDelay(const std::vector<double> &x, double tau, int rate) {
  const size_t n = NextPow2(x.size() + 2 * kDelayGuard);
  const RealFft &fft = RealFft::Get(n);
  std::vector<double> buf(n, 0.0);
  std::copy(x.begin(), x.end(), buf.begin() + kDelayGuard);
  std::vector<cdouble> spec(fft.num_bins());
  fft.Forward(buf, spec);
  const double shift = tau * rate;
  for (size_t k = 0; k < spec.size(); ++k) {
    const double w = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    if (k == spec.size() - 1) {
      spec[k] *= std::cos(w * shift);  // keep the Nyquist bin real
    } else {
      spec[k] *= std::polar(1.0, -w * shift);
    }
  }
  fft.Inverse(spec, buf);
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = buf[kDelayGuard + i] / static_cast<double>(n);
  return out;
}

// Linear convolution truncated to x.size().
std::vector<double> Convolve(const std::vector<double> &x, const std::vector<double> &h) {
  const size_t n = NextPow2(x.size() + h.size());
  const RealFft &fft = RealFft::Get(n);
  std::vector<double> a(n, 0.0), b(n, 0.0);
  std::copy(x.begin(), x.end(), a.begin());
  std::copy(h.begin(), h.end(), b.begin());
  std::vector<cdouble> fa(fft.num_bins()), fb(fft.num_bins());
  fft.Forward(a, fa);
  fft.Forward(b, fb);
  for (size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  fft.Inverse(fa, a);
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = a[i] / static_cast<double>(n);
  return out;
}

void Scale(MultiWave &w, double g) {
  for (auto &ch : w.channels)
    for (double &v : ch) v *= g;
}

void Trim(MultiWave &w, size_t len) {
  for (auto &ch : w.channels) ch.resize(len);
}

}  // namespace

std::vector<double> ReverbTail(const ReverbConfig &reverb, int rate, uint64_t seed) {
  if (!(reverb.decay_s > 0.0)) return {};
  const size_t onset = static_cast<size_t>(reverb.onset_s * rate);
  const size_t len = onset + static_cast<size_t>(reverb.decay_s * rate);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  // Amplitude falls by 60 dB over decay_s: exp(-3 ln(10) t / T60).
  const double rate_per_sample = 3.0 * std::log(10.0) / (reverb.decay_s * rate);
  std::vector<double> h(len, 0.0);
  double energy = 0.0;
  for (size_t n = onset; n < len; ++n) {
    h[n] = gauss(rng) * std::exp(-rate_per_sample * static_cast<double>(n - onset));
    energy += h[n] * h[n];
  }
  const double target = reverb.decay_s / reverb.unit_energy_decay_s;
  const double g = std::sqrt(target / energy);
  for (double &v : h) v *= g;
  return h;
}

MultiWave RenderSource(const Waveform &dry, double doa, const ArrayGeometry &geometry,
                       const ReverbConfig &reverb, uint64_t seed) {
  geometry.Validate();
  if (!std::isfinite(doa)) throw ConfigError("RenderSource: non-finite DOA");
  if (dry.samples.empty()) throw ShapeError("RenderSource: empty source");
  if (reverb.decay_s < 0.0) throw ConfigError("RenderSource: negative reverb decay");
  const std::vector<double> delays = geometry.Delays(doa);
  MultiWave out;
  out.rate = dry.rate;
  for (size_t m = 0; m < geometry.NumMics(); ++m) {
    std::vector<double> ch = FractionalDelay(dry.samples, delays[m], dry.rate);
    const std::vector<double> tail = ReverbTail(reverb, dry.rate, MixSeed(seed, m));
    if (!tail.empty()) {
      const std::vector<double> wet = Convolve(dry.samples, tail);
      for (size_t i = 0; i < ch.size(); ++i) ch[i] += wet[i];
    }
    out.channels.push_back(std::move(ch));
  }
  return out;
}

void Scene::Validate() const {
  if (sir_db.size() != interferer_doas.size())
    throw ConfigError("Scene: one SIR per interferer required");
  for (double s : sir_db)
    if (!std::isfinite(s)) throw ConfigError("Scene: SIR must be finite");
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
    throw ConfigError("Scene: SNR must be finite or +inf");
  auto check_doa = [](double d) {
    if (!(d >= 0.0 && d < 2.0 * std::numbers::pi))
      throw ConfigError("Scene: DOA outside [0, 2 pi)");
  };
  check_doa(target_doa);
  for (double d : interferer_doas) check_doa(d);
  if (reverb_decay_s < 0.0) throw ConfigError("Scene: negative reverb decay");
}

double NearestInterfererDegrees(const Scene &scene) {
  double best = 180.0;
  for (double d : scene.interferer_doas) {
    double diff = std::fabs(std::remainder(d - scene.target_doa, 2.0 * std::numbers::pi));
    best = std::min(best, diff * 180.0 / std::numbers::pi);
  }
  return best;
}

std::string AngleBin(double degrees) {
  if (degrees < 15.0) return "0-15";
  if (degrees < 45.0) return "15-45";
  if (degrees < 90.0) return "45-90";
  return "90-180";
}

SceneRender MixScene(const Scene &scene, const ArrayGeometry &geometry,
                     const Waveform &target_dry,
                     const std::vector<Waveform> &interferer_drys, const MultiWave *noise,
                     const ReverbConfig &reverb_base) {
  scene.Validate();
  if (interferer_drys.size() != scene.interferer_doas.size())
    throw ConfigError("MixScene: one dry signal per interferer required");
  const bool with_noise = std::isfinite(scene.snr_db);
  if (with_noise && noise == nullptr)
    throw ConfigError("MixScene: finite SNR needs a noise signal");

  size_t len = target_dry.size();
  for (const auto &w : interferer_drys) len = std::min(len, w.size());
  if (with_noise) {
    if (noise->NumChannels() != geometry.NumMics())
      throw ConfigError("MixScene: noise channel count differs from the array");
    len = std::min(len, noise->NumSamples());
  }
  if (len == 0) throw ShapeError("MixScene: empty sources");
  for (const Waveform *w = &target_dry; w; w = nullptr)
    if (w->rate != kSampleRate) throw ConfigError("MixScene: sources must be 16 kHz");
  for (const auto &w : interferer_drys)
    if (w.rate != kSampleRate) throw ConfigError("MixScene: sources must be 16 kHz");

  ReverbConfig reverb = reverb_base;
  reverb.decay_s = scene.reverb_decay_s;

  SceneRender r;
  r.scene = scene;
  r.nearest_interferer_deg = NearestInterfererDegrees(scene);
  r.target_dry = {std::vector<double>(target_dry.samples.begin(),
                                      target_dry.samples.begin() + static_cast<std::ptrdiff_t>(len)),
                  kSampleRate};
  r.target_reverberant =
      RenderSource(r.target_dry, scene.target_doa, geometry, reverb, MixSeed(scene.seed, 0));
  const double target_power = Power(r.target_reverberant.channels[kReferenceChannel]);
  if (!(target_power > 0.0)) throw NumericError("MixScene: target has zero energy");

  for (size_t i = 0; i < interferer_drys.size(); ++i) {
    Waveform dry{std::vector<double>(interferer_drys[i].samples.begin(),
                                     interferer_drys[i].samples.begin() +
                                         static_cast<std::ptrdiff_t>(len)),
                 kSampleRate};
    MultiWave img = RenderSource(dry, scene.interferer_doas[i], geometry, reverb,
                                 MixSeed(scene.seed, 1 + i));
    const double p = Power(img.channels[kReferenceChannel]);
    if (!(p > 0.0))
      throw NumericError("MixScene: interferer " + std::to_string(i) +
                         " has zero energy, cannot set SIR");
    Scale(img, std::sqrt(target_power / p * std::pow(10.0, -scene.sir_db[i] / 10.0)));
    r.interferers.push_back(std::move(img));
  }
  if (with_noise) {
    r.noise = *noise;
    Trim(r.noise, len);
    const double p = Power(r.noise.channels[kReferenceChannel]);
    if (!(p > 0.0)) throw NumericError("MixScene: noise has zero energy, cannot set SNR");
    Scale(r.noise, std::sqrt(target_power / p * std::pow(10.0, -scene.snr_db / 10.0)));
  }

  auto build_mixture = [&] {
    r.mixture = r.target_reverberant;
    for (const auto &img : r.interferers)
      for (size_t m = 0; m < geometry.NumMics(); ++m)
        for (size_t n = 0; n < len; ++n) r.mixture.channels[m][n] += img.channels[m][n];
    if (with_noise)
      for (size_t m = 0; m < geometry.NumMics(); ++m)
        for (size_t n = 0; n < len; ++n) r.mixture.channels[m][n] += r.noise.channels[m][n];
  };
  build_mixture();

  double peak = 0.0;
  for (const auto &ch : r.mixture.channels)
    for (double v : ch) peak = std::max(peak, std::fabs(v));
  if (peak > kPeakLimit) {
    const double g = kPeakLimit / peak;
    Scale(r.target_reverberant, g);
    for (auto &img : r.interferers) Scale(img, g);
    if (with_noise) Scale(r.noise, g);
    build_mixture();
  }
  return r;
}

}  // namespace adlmvdr
