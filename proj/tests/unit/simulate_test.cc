// tests/unit/simulate_test.cc

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "adlmvdr/metrics/metrics.h"
#include "adlmvdr/signal/stft.h"
#include "adlmvdr/signal/wav.h"
#include "adlmvdr/simulate/dataset.h"
#include "adlmvdr/simulate/render.h"
#include "adlmvdr/simulate/synth.h"
#include "doctest.h"
#include "test_util.h"

using namespace adlmvdr;
using namespace adlmvdr::testing;

namespace {

double Power(const std::vector<double> &x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e / static_cast<double>(x.size());
}

// Lag of the cross-correlation peak of b against a, refined by a parabola.
double PeakLag(const std::vector<double> &a, const std::vector<double> &b, int max_lag) {
  std::vector<double> xc;
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
      const long j = static_cast<long>(i) + lag;
      if (j >= 0 && j < static_cast<long>(b.size())) s += a[i] * b[static_cast<size_t>(j)];
    }
    xc.push_back(s);
  }
  size_t k = 0;
  for (size_t i = 1; i < xc.size(); ++i)
    if (xc[i] > xc[k]) k = i;
  double frac = 0.0;
  if (k > 0 && k + 1 < xc.size()) {
    const double den = xc[k - 1] - 2.0 * xc[k] + xc[k + 1];
    if (den != 0.0) frac = 0.5 * (xc[k - 1] - xc[k + 1]) / den;
  }
  return static_cast<double>(k) - max_lag + frac;
}

std::string Slurp(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("synthetic sources") {
  const Waveform a = SynthesizeSpeech(16000, 1), b = SynthesizeSpeech(16000, 1);
  CHECK(a.samples == b.samples);
  CHECK(std::sqrt(Power(a.samples)) == doctest::Approx(0.1));
  CHECK(SynthesizeSpeech(16000, 2).samples != a.samples);
  const MultiWave n = SynthesizeNoise(3, 4000, 5);
  CHECK(n.NumChannels() == 3);
  CHECK(n.channels[0] != n.channels[1]);
  CHECK(MixSeed(1, 0) != MixSeed(1, 1));
}

TEST_CASE("render delays") {
  const ArrayGeometry geo = ArrayGeometry::UniformLinear(2, 0.04);
  const Waveform dry = SynthesizeSpeech(16000, 3);
  const MultiWave broad = RenderSource(dry, std::numbers::pi / 2, geo, {}, 1);
  CHECK(std::fabs(PeakLag(broad.channels[0], broad.channels[1], 5)) < 1e-6);

  // Endfire from +x: the mic at +x hears it first, so channel 0 lags.
  const MultiWave end = RenderSource(dry, 0.0, geo, {}, 1);
  const double expect = 0.04 / kSpeedOfSound * kSampleRate;
  const double lag = PeakLag(end.channels[1], end.channels[0], 5);
  MESSAGE("endfire lag " << lag << " expected " << expect);
  CHECK(std::fabs(lag - expect) < 0.1);
  CHECK_THROWS_AS(RenderSource(dry, std::nan(""), geo, {}, 1), ConfigError);
  CHECK_THROWS_AS(RenderSource(dry, 0.0, ArrayGeometry{}, {}, 1), ConfigError);
}

TEST_CASE("reverb tail decay") {
  for (double t60 : {0.2, 0.5}) {
    ReverbConfig cfg;
    cfg.decay_s = t60;
    const std::vector<double> h = ReverbTail(cfg, kSampleRate, 42);
    double energy = 0.0;
    for (double v : h) energy += v * v;
    CHECK(energy == doctest::Approx(t60 / 0.4));
    // Schroeder backward integration; fit the -5..-25 dB slope.
    std::vector<double> edc(h.size());
    double acc = 0.0;
    for (size_t i = h.size(); i-- > 0;) {
      acc += h[i] * h[i];
      edc[i] = acc;
    }
    size_t i5 = 0, i25 = 0;
    for (size_t i = 0; i < edc.size(); ++i) {
      const double db = 10.0 * std::log10(edc[i] / edc[0]);
      if (!i5 && db < -5.0) i5 = i;
      if (!i25 && db < -25.0) i25 = i;
    }
    const double slope = -20.0 / (static_cast<double>(i25 - i5) / kSampleRate);
    const double measured = -60.0 / slope;
    MESSAGE("T60 " << t60 << " measured " << measured);
    CHECK(std::fabs(measured - t60) < 0.2 * t60);
  }
  CHECK(ReverbTail({}, kSampleRate, 1).empty());
}

TEST_CASE("mix scene levels and decomposition") {
  const ArrayGeometry geo = ArrayGeometry::UniformLinear(4, 0.04);
  Scene scene;
  scene.target_doa = 0.4;
  scene.interferer_doas = {2.0, 1.0};
  scene.sir_db = {0.0, 4.5};
  scene.snr_db = 12.0;
  scene.reverb_decay_s = 0.3;
  scene.seed = 77;
  const MultiWave noise = SynthesizeNoise(4, 16000, 8);
  const SceneRender r = MixScene(scene, geo, SynthesizeSpeech(16000, 1),
                                 {SynthesizeSpeech(16000, 2), SynthesizeSpeech(16000, 3)},
                                 &noise);
  const double pt = Power(r.target_reverberant.channels[0]);
  CHECK(10.0 * std::log10(pt / Power(r.interferers[0].channels[0])) ==
        doctest::Approx(0.0).epsilon(0.01));
  CHECK(std::fabs(10.0 * std::log10(pt / Power(r.interferers[1].channels[0])) - 4.5) < 0.01);
  CHECK(std::fabs(10.0 * std::log10(pt / Power(r.noise.channels[0])) - 12.0) < 0.01);
  double worst = 0.0;
  for (size_t m = 0; m < 4; ++m)
    for (size_t n = 0; n < 16000; ++n) {
      const double sum = r.target_reverberant.channels[m][n] + r.interferers[0].channels[m][n] +
                         r.interferers[1].channels[m][n] + r.noise.channels[m][n];
      worst = std::max(worst, std::fabs(r.mixture.channels[m][n] - sum));
    }
  CHECK(worst == 0.0);
  CHECK(r.nearest_interferer_deg == doctest::Approx((1.0 - 0.4) * 180.0 / std::numbers::pi));
  CHECK(AngleBin(r.nearest_interferer_deg) == "15-45");

  // The STFT of the mixture is the sum of the component STFTs.
  const Stft ym = ForwardStft(r.mixture, {});
  MultiWave others = r.interferers[0];
  for (size_t m = 0; m < 4; ++m)
    for (size_t n = 0; n < 16000; ++n)
      others.channels[m][n] += r.interferers[1].channels[m][n] + r.noise.channels[m][n];
  const Stft ys = ForwardStft(r.target_reverberant, {}), yo = ForwardStft(others, {});
  double sd = 0.0;
  for (size_t i = 0; i < ym.data.vec().size(); ++i)
    sd = std::max(sd, std::abs(ym.data.vec()[i] - ys.data.vec()[i] - yo.data.vec()[i]));
  CHECK(sd < 1e-10);

  // No interferers, no noise: mixture is the target image.
  Scene solo;
  solo.target_doa = 1.0;
  const SceneRender s = MixScene(solo, geo, SynthesizeSpeech(8000, 5), {}, nullptr);
  CHECK(s.mixture.channels == s.target_reverberant.channels);
  CHECK(s.nearest_interferer_deg == 180.0);

  Scene silent = scene;
  silent.interferer_doas = {2.0};
  silent.sir_db = {0.0};
  CHECK_THROWS_AS(MixScene(silent, geo, SynthesizeSpeech(8000, 5), {Waveform{std::vector<double>(8000, 0.0)}},
                           &noise),
                  NumericError);
  Scene bad = scene;
  bad.target_doa = 7.0;
  CHECK_THROWS_AS(bad.Validate(), ConfigError);
}

TEST_CASE("angle bins and speaker counts") {
  CHECK(AngleBin(0.0) == "0-15");
  CHECK(AngleBin(14.99) == "0-15");
  CHECK(AngleBin(15.0) == "15-45");
  CHECK(AngleBin(89.9) == "45-90");
  CHECK(AngleBin(180.0) == "90-180");
  Scene s;
  s.target_doa = 0.1;
  s.interferer_doas = {2.0 * std::numbers::pi - 0.1};
  s.sir_db = {0.0};
  CHECK(NearestInterfererDegrees(s) == doctest::Approx(0.2 * 180.0 / std::numbers::pi));

  CHECK(SpeakerCounts({1, 1, 1}, 10) == std::vector<size_t>{4, 3, 3});
  CHECK(SpeakerCounts({0.2, 0.3, 0.5}, 10) == std::vector<size_t>{2, 3, 5});
  CHECK(SpeakerCounts({0, 0, 1}, 7) == std::vector<size_t>{0, 0, 7});
}

TEST_CASE("dataset generation") {
  const auto dir = TempDir("dataset");
  DatasetSpec spec;
  spec.num_scenes = 6;
  spec.chunk_seconds = 0.5;
  spec.num_mics = 3;
  spec.speaker_proportions = {1, 1, 1};
  spec.seed = 11;
  const auto entries = GenerateDataset(spec, dir / "a");
  REQUIRE(entries.size() == 6);
  size_t counts[4] = {0, 0, 0, 0};
  for (const auto &e : entries) {
    ++counts[e.num_speakers];
    CHECK(e.angle_bin == AngleBin(e.nearest_interferer_deg));
    const MultiWave mix = ReadWav((dir / "a" / e.mixture).string());
    CHECK(mix.NumChannels() == 3);
    CHECK(mix.NumSamples() == 8000);
  }
  CHECK(counts[1] == 2);
  CHECK(counts[2] == 2);
  CHECK(counts[3] == 2);

  spec.jobs = 3;
  GenerateDataset(spec, dir / "b");
  CHECK(Slurp(dir / "a" / "manifest.jsonl") == Slurp(dir / "b" / "manifest.jsonl"));
  CHECK(Slurp(dir / "a" / entries[4].mixture) == Slurp(dir / "b" / entries[4].mixture));

  const auto back = ReadManifest(dir / "a" / "manifest.jsonl");
  REQUIRE(back.size() == 6);
  CHECK(ManifestLine(back[2]) == ManifestLine(entries[2]));

  spec.dry_pool = (dir / "a" / "dry").string();
  spec.jobs = 1;
  const auto pooled = GenerateDataset(spec, dir / "c");
  CHECK(pooled.size() == 6);

  spec.dry_pool = (dir / "nowhere").string();
  CHECK_THROWS(GenerateDataset(spec, dir / "d"));
  CHECK_THROWS_AS(ParseManifestLine("{\"version\": 2}"), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("default mixtures sit in the expected Si-SNR range") {
  DatasetSpec spec;
  spec.num_scenes = 12;
  spec.speaker_proportions = {1, 1, 1};
  double acc = 0.0;
  for (size_t i = 0; i < spec.num_scenes; ++i) {
    const SceneRender r = RenderDatasetScene(spec, i);
    acc += SiSnr(r.mixture.channels[0], r.target_reverberant.channels[0]);
  }
  MESSAGE("mean mixture Si-SNR " << acc / spec.num_scenes);
  CHECK(acc / spec.num_scenes > -3.0);
  CHECK(acc / spec.num_scenes < 9.0);
}
