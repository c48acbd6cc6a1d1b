// tests/unit/beamformer_test.cc

#include <cmath>
#include <numbers>

#include "adlmvdr/beamformer/beamformer.h"
#include "adlmvdr/metrics/metrics.h"
#include "adlmvdr/simulate/render.h"
#include "adlmvdr/simulate/synth.h"
#include "doctest.h"
#include "oracles.h"
#include "test_util.h"

using namespace adlmvdr;
using namespace adlmvdr::testing;

namespace {

UttCov StackCov(const std::vector<CMat> &mats) {
  const size_t n = mats[0].rows();
  UttCov c{ComplexArray({mats.size(), n, n})};
  for (size_t f = 0; f < mats.size(); ++f)
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j) c.data(f, i, j) = mats[f](i, j);
  return c;
}

ComplexArray StackVec(const std::vector<CVec> &vs) {
  ComplexArray a({vs.size(), vs[0].size()});
  for (size_t f = 0; f < vs.size(); ++f)
    for (size_t i = 0; i < vs[f].size(); ++i) a(f, i) = vs[f][i];
  return a;
}

CVec Row(const ComplexArray &a, size_t f) {
  return CVec(&a(f, 0), &a(f, 0) + a.dim(1));
}

double QuadForm(const CMat &phi, const CVec &h) { return Dot(h, MatVec(phi, h)).real(); }

}  // namespace

TEST_CASE("mvdr trivial cases") {
  const CVec e0 = {1.0, 0.0, 0.0};
  for (double s : {1.0, 2.0}) {
    const BeamWeightsUtt w = MvdrWeights(StackCov({s * CMat::Identity(3)}), StackVec({e0}));
    for (size_t i = 0; i < 3; ++i) CHECK(std::abs(w.data(0, i) - e0[i]) < 1e-12);
  }
  CHECK_THROWS_AS(MvdrWeights(StackCov({CMat::Identity(2)}), StackVec({CVec(2)})),
                  NumericError);
  try {
    MvdrWeights(StackCov({CMat::Identity(2), CMat::Identity(2)}),
                StackVec({CVec{1.0, 0.0}, CVec(2)}));
  } catch (const NumericError &e) {
    CHECK(std::string(e.what()).find("bin 1") != std::string::npos);
  }
}

TEST_CASE("mvdr against lagrangian oracle") {
  std::mt19937_64 rng(20);
  for (int trial = 0; trial < 50; ++trial) {
    const size_t n = 2 + trial % 6;
    const CMat phi = RandomPsd(rng, n);
    const CVec v = RandomCVec(rng, n);
    const BeamWeightsUtt w = MvdrWeights(StackCov({phi}), StackVec({v}), 0.0);
    const CVec h = Row(w.data, 0);
    CHECK(std::abs(Dot(h, v) - 1.0) < 1e-8);
    const CVec oracle = LagrangianMvdr(phi, v);
    double d = 0.0;
    for (size_t i = 0; i < n; ++i) d = std::max(d, std::abs(h[i] - oracle[i]));
    CHECK(d < 1e-6);

    // Scale invariance with loading on.
    const BeamWeightsUtt w1 = MvdrWeights(StackCov({phi}), StackVec({v}));
    const BeamWeightsUtt w7 = MvdrWeights(StackCov({7.0 * phi}), StackVec({v}));
    for (size_t i = 0; i < n; ++i) CHECK(std::abs(w1.data(0, i) - w7.data(0, i)) < 1e-8);
  }
}

TEST_CASE("mvdr noise-power optimality") {
  std::mt19937_64 rng(21);
  const size_t n = 4;
  const CMat phi = RandomPsd(rng, n);
  const CVec v = RandomCVec(rng, n);
  const CVec h = Row(MvdrWeights(StackCov({phi}), StackVec({v}), 0.0).data, 0);
  const double base = QuadForm(phi, h);
  const double vv = Norm(v) * Norm(v);
  int better = 0;
  for (int k = 0; k < 10000; ++k) {
    CVec d = RandomCVec(rng, n);
    const double scale = std::pow(10.0, -3.0 + 3.0 * (k % 4) / 3.0);
    // Project out the component along v so (h + d)^H v = 1 still holds.
    const cdouble c = Dot(v, d) / vv;
    for (size_t i = 0; i < n; ++i) d[i] = scale * (d[i] - c * v[i]);
    CVec hp = h;
    for (size_t i = 0; i < n; ++i) hp[i] += d[i];
    REQUIRE(std::abs(Dot(hp, v) - 1.0) < 1e-9);
    if (QuadForm(phi, hp) < base - 1e-8) ++better;
  }
  CHECK(better == 0);
}

TEST_CASE("steering from covariance") {
  std::mt19937_64 rng(22);
  const CVec a = RandomCVec(rng, 4);
  const ComplexArray unit =
      SteeringFromCov(StackCov({Outer(a, a)}), SteeringGauge::kUnitNorm);
  CHECK(PhaseAlignedDistance(Row(unit, 0), CVec{a[0] / Norm(a), a[1] / Norm(a),
                                                 a[2] / Norm(a), a[3] / Norm(a)}) < 1e-8);
  const ComplexArray rtf = SteeringFromCov(StackCov({Outer(a, a)}));
  for (size_t i = 0; i < 4; ++i) CHECK(std::abs(rtf(0, i) - a[i] / a[0]) < 1e-8);

  // Fully degenerate: must not throw, must be unit norm or an RTF with v[0] = 1.
  const ComplexArray deg = SteeringFromCov(StackCov({CMat::Identity(3)}));
  CHECK(std::abs(deg(0, 0) - 1.0) < 1e-12);
}

TEST_CASE("steering from a simulated anechoic source") {
  const ArrayGeometry geo = ArrayGeometry::UniformLinear(4, 0.04);
  const double doa = 1.1;
  const Waveform dry = SynthesizeSpeech(16000, 3);
  const MultiWave img = RenderSource(dry, doa, geo, {}, 5);
  const Stft spec = ForwardStft(img, {});
  CrMask ones{ComplexArray({spec.NumFrames(), spec.NumBins()})};
  for (auto &x : ones.data.vec()) x = 1.0;
  const UttCov cov = UtteranceCov(spec, ones);
  const ComplexArray v = SteeringFromCov(cov);
  double peak = 0.0;
  for (size_t f = 0; f < spec.NumBins(); ++f) peak = std::max(peak, cov.data(f, 0, 0).real());
  double worst = 0.0;
  size_t used = 0;
  for (size_t f = 10; f < 240; ++f) {
    // Interior bins that carry the source.
    if (cov.data(f, 0, 0).real() < 1e-6 * peak) continue;
    ++used;
    const double hz = f * 16000.0 / 512.0;
    for (size_t m = 1; m < 4; ++m) {
      // v[m] / v[0] ~ Y_m / Y_0, whose phase is the TPD of pair (m, 0).
      const double expect = geo.TargetPhaseDifference(m, 0, doa, hz);
      worst = std::max(worst, std::fabs(std::remainder(std::arg(v(f, m)) - expect,
                                                       2.0 * std::numbers::pi)));
    }
  }
  CHECK(used > 200);
  CHECK(worst < 0.05);
}

TEST_CASE("multitap expansion") {
  std::mt19937_64 rng(23);
  const Stft y = RandomStft(rng, 3, 5, 6);
  const Stft one = MultitapExpand(y, 1);
  CHECK(one.data.vec() == y.data.vec());
  const Stft two = MultitapExpand(y, 2);
  CHECK(two.NumChannels() == 6);
  for (size_t m = 3; m < 6; ++m)
    for (size_t f = 0; f < 6; ++f) CHECK(two.data(m, 0, f) == cdouble(0.0));
  CHECK(two.data(4, 3, 2) == y.data(1, 2, 2));
  CHECK_THROWS_AS(MultitapExpand(y, 0), ShapeError);

  CrMask ones{ComplexArray({5, 6})};
  for (auto &x : ones.data.vec()) x = 1.0;
  const UttCov c = UtteranceCov(two, ones);
  CHECK(c.data.dim(1) == 6);
  CHECK(c.data.dim(2) == 6);
  const ComplexArray sv = ExpandSteering(StackVec({CVec{1.0, 2.0, 3.0}}), 2);
  CHECK(sv.dim(1) == 6);
  CHECK(sv(0, 1) == cdouble(2.0));
  CHECK(sv(0, 4) == cdouble(0.0));
}

TEST_CASE("adl weights") {
  const size_t t_n = 3, f_n = 2, m = 3;
  ComplexArray p({t_n, f_n, m, m}), v({t_n, f_n, m});
  for (size_t t = 0; t < t_n; ++t)
    for (size_t f = 0; f < f_n; ++f) {
      for (size_t i = 0; i < m; ++i) p(t, f, i, i) = 1.0;
      v(t, f, 0) = 1.0;
    }
  const BeamWeightsFrame w = AdlWeights(p, v);
  for (size_t t = 0; t < t_n; ++t)
    for (size_t f = 0; f < f_n; ++f)
      for (size_t i = 0; i < m; ++i)
        CHECK(std::abs(w.data(t, f, i) - (i == 0 ? 1.0 : 0.0)) < 1e-15);

  // Constant over time: matches the utterance-level path.
  std::mt19937_64 rng(24);
  std::vector<CMat> phis;
  std::vector<CVec> vs;
  for (size_t f = 0; f < f_n; ++f) {
    phis.push_back(RandomPsd(rng, m));
    vs.push_back(RandomCVec(rng, m));
  }
  const BeamWeightsUtt wu = MvdrWeights(StackCov(phis), StackVec(vs));
  for (size_t t = 0; t < t_n; ++t)
    for (size_t f = 0; f < f_n; ++f) {
      const CMat inv = InvLoaded(phis[f]);
      for (size_t i = 0; i < m; ++i) {
        v(t, f, i) = vs[f][i];
        for (size_t j = 0; j < m; ++j) p(t, f, i, j) = inv(i, j);
      }
    }
  const BeamWeightsFrame wf = AdlWeights(p, v);
  for (size_t t = 0; t < t_n; ++t)
    for (size_t f = 0; f < f_n; ++f)
      for (size_t i = 0; i < m; ++i) CHECK(std::abs(wf.data(t, f, i) - wu.data(f, i)) < 1e-10);

  // Arbitrary non-Hermitian "network" outputs still satisfy h^H v = 1.
  for (auto &x : p.vec()) x = RandomComplex(rng);
  for (auto &x : v.vec()) x = RandomComplex(rng);
  BeamformerReport rep;
  const BeamWeightsFrame wr = AdlWeights(p, v, &rep);
  for (size_t t = 0; t < t_n; ++t)
    for (size_t f = 0; f < f_n; ++f) {
      cdouble d = 0.0;
      for (size_t i = 0; i < m; ++i) d += std::conj(wr.data(t, f, i)) * v(t, f, i);
      CHECK(std::abs(d - 1.0) < 1e-6);
    }

  // Vanishing denominator is floored and counted.
  for (auto &x : p.vec()) x = 0.0;
  const BeamWeightsFrame wz = AdlWeights(p, v, &rep);
  CHECK(rep.floored_denominators == t_n * f_n);
  for (auto x : wz.data.vec()) CHECK(std::isfinite(x.real()));

  p(1, 1, 0, 0) = std::nan("");
  try {
    AdlWeights(p, v);
    CHECK(false);
  } catch (const NumericError &e) {
    CHECK(std::string(e.what()).find("t=1, f=1") != std::string::npos);
  }
}

TEST_CASE("apply weights") {
  std::mt19937_64 rng(25);
  const Stft y = RandomStft(rng, 3, 4, 5);
  BeamWeightsUtt w{ComplexArray({5, 3})};
  for (size_t f = 0; f < 5; ++f) w.data(f, 0) = 1.0;
  const Stft out = ApplyWeights(w, y);
  for (size_t t = 0; t < 4; ++t)
    for (size_t f = 0; f < 5; ++f) CHECK(out.data(0, t, f) == y.data(0, t, f));

  const cdouble rot = std::polar(1.0, 0.7);
  BeamWeightsFrame wf{ComplexArray({4, 5, 3})};
  for (size_t t = 0; t < 4; ++t)
    for (size_t f = 0; f < 5; ++f)
      for (size_t m = 0; m < 3; ++m) wf.data(t, f, m) = rot * RandomComplex(rng);
  BeamWeightsFrame wf0 = wf;
  for (auto &x : wf0.data.vec()) x /= rot;
  const Stft a = ApplyWeights(wf, y), b = ApplyWeights(wf0, y);
  for (size_t i = 0; i < a.data.vec().size(); ++i)
    CHECK(std::abs(a.data.vec()[i] - std::conj(rot) * b.data.vec()[i]) < 1e-12);

  CHECK_THROWS_AS(ApplyWeights(BeamWeightsUtt{ComplexArray({5, 2})}, y), ShapeError);
}

TEST_CASE("delay-and-sum gain on a simulated scene") {
  const ArrayGeometry geo = ArrayGeometry::UniformLinear(6, 0.04);
  const double doa = 0.6;
  Scene scene;
  scene.target_doa = doa;
  scene.snr_db = 0.0;
  scene.seed = 9;
  const Waveform dry = SynthesizeSpeech(16000, 1);
  const MultiWave noise = SynthesizeNoise(6, 16000, 2);
  const SceneRender r = MixScene(scene, geo, dry, {}, &noise);
  const Stft y = ForwardStft(r.mixture, {});
  BeamWeightsUtt w{ComplexArray({y.NumBins(), 6})};
  for (size_t f = 0; f < y.NumBins(); ++f) {
    const double hz = f * 16000.0 / 512.0;
    for (size_t m = 0; m < 6; ++m)
      w.data(f, m) = std::polar(1.0 / 6.0, geo.TargetPhaseDifference(m, 0, doa, hz));
  }
  const MultiWave out = InverseStft(ApplyWeights(w, y), {});
  const double before = SiSnr(r.mixture.channels[0], r.target_reverberant.channels[0]);
  const double after = SiSnr(out.channels[0], r.target_reverberant.channels[0]);
  MESSAGE("delay-and-sum Si-SNR " << before << " -> " << after);
  CHECK(after > before + 3.0);
}
