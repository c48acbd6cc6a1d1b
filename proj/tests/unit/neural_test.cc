// tests/unit/neural_test.cc

#include <cmath>

#include "adlmvdr/beamformer/beamformer.h"
#include "adlmvdr/masking/masking.h"
#include "adlmvdr/metrics/metrics.h"
#include "adlmvdr/neural/checkpoint.h"
#include "adlmvdr/neural/estimator.h"
#include "adlmvdr/neural/graph_dsp.h"
#include "adlmvdr/neural/gru.h"
#include "doctest.h"
#include "gradcheck.h"
#include "test_util.h"

using namespace adlmvdr;
using namespace adlmvdr::nn;
using namespace adlmvdr::testing;

namespace {

CTensor RandomCParam(std::mt19937_64 &rng, Shape shape, double scale = 1.0) {
  return {RandomParam(rng, shape, scale), RandomParam(rng, shape, scale)};
}

Tensor ProjectC(const CTensor &c) { return Add(Project(c.re, 5), Project(c.im, 6)); }

double MaxDiff(const ComplexArray &a, const ComplexArray &b) {
  REQUIRE(a.shape() == b.shape());
  double d = 0.0;
  for (size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// PSD stack [F, M, M] = B B^H + shift I built in-graph from a parameter B.
CTensor PsdFromParam(const CTensor &b, double shift) {
  const size_t f_n = b.dim(0), m_n = b.dim(1);
  const CTensor outer = CMulConj(CReshape(b, {f_n, m_n, 1, m_n}), CReshape(b, {f_n, 1, m_n, m_n}));
  CTensor a = CSum(outer, 3);
  std::vector<double> eye(m_n * m_n, 0.0);
  for (size_t i = 0; i < m_n; ++i) eye[i * m_n + i] = shift;
  return {Add(a.re, Tensor::Constant({m_n, m_n}, eye)), a.im};
}

// One GRU step composed from primitives, gate order r, z, n.
Tensor ComposedGruStep(const GruLayerParams &p, const Tensor &x, const Tensor &h) {
  const size_t H = p.hidden_dim;
  const Tensor gi = Add(MatMul(x, p.w_ih), p.b_ih);
  const Tensor gh = Add(MatMul(h, p.w_hh), p.b_hh);
  const Tensor r = Sigmoid(Add(Slice(gi, 1, 0, H), Slice(gh, 1, 0, H)));
  const Tensor z = Sigmoid(Add(Slice(gi, 1, H, H), Slice(gh, 1, H, H)));
  const Tensor n = Tanh(Add(Slice(gi, 1, 2 * H, H), Mul(r, Slice(gh, 1, 2 * H, H))));
  return Add(Mul(Sub(Tensor::Scalar(1.0), z), n), Mul(z, h));
}

}  // namespace

TEST_CASE("primitive gradients") {
  std::mt19937_64 rng(50);
  {
    const Tensor x = Tensor::Parameter({1}, {0.0});
    Tanh(x).Backward();
    CHECK(x.node()->grad[0] == 1.0);
  }
  {
    Tensor a = RandomParam(rng, {3, 4}), b = RandomParam(rng, {4, 2});
    CHECK(GradCheck([&] { return Project(MatMul(a, b)); }, {a, b}) < 1e-6);
  }
  Tensor a = RandomParam(rng, {2, 3, 4}), b = RandomParam(rng, {3, 1}), c = RandomParam(rng, {4});
  Tensor lw = RandomParam(rng, {4, 3}), lb = RandomParam(rng, {3});
  Tensor pos = Tensor::Parameter({2, 3, 4}, std::vector<double>(24, 0.0));
  for (size_t i = 0; i < 24; ++i) pos.mutable_value()[i] = 0.5 + std::fabs(a.value()[i]);
  struct Case {
    const char *name;
    std::function<Tensor()> f;
    std::vector<Tensor> in;
  };
  const std::vector<Case> cases = {
      {"add", [&] { return Project(Add(a, b)); }, {a, b}},
      {"sub", [&] { return Project(Sub(c, a)); }, {a, c}},
      {"mul", [&] { return Project(Mul(a, b)); }, {a, b}},
      {"div", [&] { return Project(Div(a, pos)); }, {a, pos}},
      {"scale", [&] { return Project(AddScalar(Scale(a, -1.7), 0.3)); }, {a}},
      {"tanh", [&] { return Project(Tanh(a)); }, {a}},
      {"sigmoid", [&] { return Project(Sigmoid(a)); }, {a}},
      {"relu", [&] { return Project(Relu(a)); }, {a}},
      {"exp", [&] { return Project(Exp(a)); }, {a}},
      {"log", [&] { return Project(Log(pos)); }, {pos}},
      {"sqrt", [&] { return Project(Sqrt(pos)); }, {pos}},
      {"square", [&] { return Project(Square(a)); }, {a}},
      {"clamp", [&] { return Project(Clamp(a, -0.4321, 0.5432)); }, {a}},
      {"prelu", [&] { return Project(PRelu(a, c)); }, {a, c}},
      {"sum", [&] { return Project(Sum(a, 1)); }, {a}},
      {"mean", [&] { return Project(Mean(a, 2, true)); }, {a}},
      {"sum_all", [&] { return Square(SumAll(a)); }, {a}},
      {"reshape", [&] { return Project(Reshape(a, {6, 4})); }, {a}},
      {"permute", [&] { return Project(Permute(a, {2, 0, 1})); }, {a}},
      {"transpose", [&] { return Project(Transpose(Reshape(a, {6, 4}))); }, {a}},
      {"slice", [&] { return Project(Slice(a, 1, 1, 2)); }, {a}},
      {"concat", [&] { return Project(Concat({a, pos}, 2)); }, {a, pos}},
      {"linear", [&] { return Project(Linear(a, lw, lb)); }, {a, lw, lb}},
      {"layer_norm", [&] { return Project(LayerNorm(Tanh(a), c, Scale(c, 0.5))); }, {a, c}},
  };
  for (const auto &k : cases) {
    const double err = GradCheck(k.f, k.in);
    INFO(k.name << " rel err " << err);
    CHECK(err < 1e-4);
  }

  Tensor x = RandomParam(rng, {9, 3}), w = RandomParam(rng, {3, 3, 2}), bias = RandomParam(rng, {2});
  for (size_t d : {1, 2, 4}) {
    const double err = GradCheck([&] { return Project(Conv1d(x, w, bias, d)); }, {x, w, bias});
    INFO("conv1d dilation " << d << " rel err " << err);
    CHECK(err < 1e-4);
  }
  CHECK_THROWS_AS(MatMul(a, b), ShapeError);
  CHECK_THROWS_AS(Add(a, RandomParam(rng, {2})), ShapeError);
}

TEST_CASE("conv1d identity kernel and causality") {
  std::mt19937_64 rng(51);
  const Tensor x = RandomParam(rng, {7, 3});
  std::vector<double> w(3 * 3 * 3, 0.0);
  for (size_t i = 0; i < 3; ++i) w[2 * 9 + i * 3 + i] = 1.0;  // tap at zero shift
  const Tensor y = Conv1d(x, Tensor::Constant({3, 3, 3}, w), Tensor::Zeros({3}), 2);
  CHECK(y.value() == x.value());

  // Shift-by-one kernel delays the sequence.
  std::vector<double> d(2 * 3 * 3, 0.0);
  for (size_t i = 0; i < 3; ++i) d[i * 3 + i] = 1.0;
  const Tensor z = Conv1d(x, Tensor::Constant({2, 3, 3}, d), Tensor::Zeros({3}), 1);
  for (size_t i = 0; i < 3; ++i) CHECK(z.value()[i] == 0.0);
  for (size_t i = 3; i < 21; ++i) CHECK(z.value()[i] == x.value()[i - 3]);
}

TEST_CASE("complex arithmetic") {
  std::mt19937_64 rng(52);
  CTensor a = RandomCParam(rng, {4, 3}), b = RandomCParam(rng, {4, 3});
  const ComplexArray p = ToComplex(CMul(a, b)), q = ToComplex(CDiv(a, b)),
                     r = ToComplex(CConjMul(a, b));
  const ComplexArray ac = ToComplex(a), bc = ToComplex(b);
  for (size_t i = 0; i < p.size(); ++i) {
    CHECK(std::abs(p[i] - ac[i] * bc[i]) < 1e-12);
    CHECK(std::abs(q[i] - ac[i] / bc[i]) < 1e-12);
    CHECK(std::abs(r[i] - std::conj(ac[i]) * bc[i]) < 1e-12);
  }
  CHECK(GradCheck([&] { return ProjectC(CDiv(CMul(a, a), b)); }, {a.re, a.im, b.re, b.im}) <
        1e-4);
}

TEST_CASE("crf and covariance graphs match the array versions") {
  std::mt19937_64 rng(53);
  const size_t m_n = 3, t_n = 6, f_n = 5;
  const Stft y = RandomStft(rng, m_n, t_n, f_n);
  CTensor filt = RandomCParam(rng, {t_n, f_n, 9});
  CrFilter cf;
  cf.data = ToComplex(filt);
  CHECK(MaxDiff(ToComplex(ApplyCrfGraph(filt, y.data, 1, 1)), ApplyCrf(cf, y).data) < 1e-12);

  const CTensor est = ApplyCrfGraph(filt, y.data, 1, 1);
  const CTensor mask = CenterTapGraph(filt);
  const Stft est_arr{ToComplex(est), y.config, y.signal_len, y.rate};
  const CrMask mask_arr{ToComplex(mask)};
  CHECK(MaxDiff(ToComplex(FramewiseCovGraph(est, mask)), FramewiseCov(est_arr, mask_arr).data) <
        1e-10);
  CHECK(MaxDiff(ToComplex(FramewiseCovGraph(est, mask, true)),
                FramewiseCov(est_arr, mask_arr, true).data) < 1e-10);
  CHECK(MaxDiff(ToComplex(UtteranceCovGraph(est, mask)), UtteranceCov(est_arr, mask_arr).data) <
        1e-10);

  const double err = GradCheck(
      [&] {
        const CTensor e = ApplyCrfGraph(filt, y.data, 1, 1);
        const CTensor mk = CenterTapGraph(filt);
        return Add(ProjectC(FramewiseCovGraph(e, mk)), ProjectC(UtteranceCovGraph(e, mk)));
      },
      {filt.re, filt.im});
  CHECK(err < 1e-4);
}

TEST_CASE("solve and steering graphs") {
  std::mt19937_64 rng(54);
  const size_t f_n = 4, m_n = 3;
  CTensor bmat = RandomCParam(rng, {f_n, m_n, m_n});
  CTensor rhs = RandomCParam(rng, {f_n, m_n});

  const CTensor phi = PsdFromParam(bmat, 0.2);
  const ComplexArray phi_arr = ToComplex(phi);
  const ComplexArray x = ToComplex(SolveLoadedGraph(phi, rhs));
  for (size_t f = 0; f < f_n; ++f) {
    const ComplexArray rc = ToComplex(rhs);
    const CVec b(&rc(f, 0), &rc(f, 0) + m_n);
    const CVec ref = SolveLoaded(CMat::FromSquare(&phi_arr(f, 0, 0), m_n), b);
    for (size_t i = 0; i < m_n; ++i) CHECK(std::abs(x(f, i) - ref[i]) < 1e-12);
  }
  CHECK(GradCheck([&] { return ProjectC(SolveLoadedGraph(PsdFromParam(bmat, 0.2), rhs)); },
                  {bmat.re, bmat.im, rhs.re, rhs.im}) < 1e-4);
  // Loading is part of the function: a large eps_rel exercises its gradient.
  CHECK(GradCheck([&] { return ProjectC(SolveLoadedGraph(PsdFromParam(bmat, 0.2), rhs, 0.3)); },
                  {bmat.re, bmat.im}) < 1e-4);

  const ComplexArray v = ToComplex(SteeringGraph(phi));
  const ComplexArray v_ref = SteeringFromCov(UttCov{phi_arr});
  CHECK(MaxDiff(v, v_ref) < 1e-7);
  const double err = GradCheck([&] { return ProjectC(SteeringGraph(PsdFromParam(bmat, 0.2))); },
                               {bmat.re, bmat.im}, 1e-6);
  MESSAGE("steering gradient rel err " << err);
  CHECK(err < 1e-4);

  // MVDR weights agree with the array implementation and stay distortionless.
  const ComplexArray h = ToComplex(MvdrWeightsGraph(phi, SteeringGraph(phi)));
  const ComplexArray h_ref = MvdrWeights(UttCov{phi_arr}, v_ref).data;
  CHECK(MaxDiff(h, h_ref) < 1e-7);
  CHECK(GradCheck(
            [&] {
              const CTensor p = PsdFromParam(bmat, 0.2);
              return ProjectC(MvdrWeightsGraph(p, SteeringGraph(p)));
            },
            {bmat.re, bmat.im}) < 1e-4);
}

TEST_CASE("adl weights graph") {
  std::mt19937_64 rng(55);
  const size_t t_n = 3, f_n = 4, m_n = 3;
  CTensor p = RandomCParam(rng, {t_n, f_n, m_n, m_n});
  CTensor v = RandomCParam(rng, {t_n, f_n, m_n});
  GraphReport rep;
  const ComplexArray h = ToComplex(AdlWeightsGraph(p, v, &rep));
  CHECK(MaxDiff(h, AdlWeights(ToComplex(p), ToComplex(v)).data) < 1e-12);
  CHECK(rep.floored_denominators == 0);
  CHECK(GradCheck([&] { return ProjectC(AdlWeightsGraph(p, v)); }, {p.re, p.im, v.re, v.im}) <
        1e-4);

  // Below the floor the phase is kept and the modulus pinned.
  CTensor z = RandomCParam(rng, {5}, 1e-11);
  size_t count = 0;
  const ComplexArray zf = ToComplex(FloorModulus(z, 1e-10, &count));
  CHECK(count == 5);
  for (size_t i = 0; i < 5; ++i) CHECK(std::abs(zf[i]) == doctest::Approx(1e-10));
  CHECK(GradCheck([&] { return ProjectC(FloorModulus(z, 1e-10)); }, {z.re, z.im}, 1e-14) < 1e-4);

  // Zero P gives floored, finite weights.
  CTensor zero{Tensor::Zeros({t_n, f_n, m_n, m_n}), Tensor::Zeros({t_n, f_n, m_n, m_n})};
  GraphReport zr;
  const CTensor hz = AdlWeightsGraph(zero, v, &zr);
  for (double w : hz.re.value()) CHECK(std::isfinite(w));
  CHECK(zr.floored_denominators == t_n * f_n);
}

TEST_CASE("apply weights, multitap and istft graphs") {
  std::mt19937_64 rng(56);
  const size_t m_n = 2, len = 2000;
  MultiWave w(m_n, len);
  for (auto &ch : w.channels) ch = RandomVector(rng, len);
  const Stft y = ForwardStft(w, {});
  const size_t t_n = y.NumFrames(), f_n = y.NumBins();

  CTensor hu = RandomCParam(rng, {f_n, m_n});
  const ComplexArray out = ToComplex(ApplyWeightsGraph(hu, y.data));
  const Stft ref = ApplyWeights(BeamWeightsUtt{ToComplex(hu)}, y);
  for (size_t t = 0; t < t_n; ++t)
    for (size_t f = 0; f < f_n; ++f) CHECK(std::abs(out(t, f) - ref.data(0, t, f)) < 1e-12);

  const Stft expanded = MultitapExpand(y, 2);
  CHECK(MaxDiff(ToComplex(MultitapExpandGraph(CConstant(y.data), 2)), expanded.data) == 0.0);

  // iSTFT of the reference channel reproduces the waveform.
  const CTensor ch0 = CReshape(CSlice(CConstant(y.data), 0, 0, 1), {t_n, f_n});
  const Tensor wave = IstftGraph(ch0, {}, len);
  double worst = 0.0;
  for (size_t n = 0; n < len; ++n) worst = std::max(worst, std::fabs(wave.value()[n] - w.channels[0][n]));
  CHECK(worst < 1e-10);

  std::mt19937_64 r2(57);
  CTensor spec = RandomCParam(r2, {5, 9});
  StftConfig small;
  small.fft_size = small.frame_len = 16;
  small.hop = 8;
  CHECK(GradCheck([&] { return Project(IstftGraph(spec, small, 40)); }, {spec.re, spec.im}) <
        1e-4);
}

TEST_CASE("si-snr loss") {
  std::mt19937_64 rng(58);
  const std::vector<double> ref = RandomVector(rng, 800);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor est = RandomParam(rng, {800});
    for (size_t i = 0; i < 800; ++i) est.mutable_value()[i] += 2.0 * ref[i];
    CHECK(std::fabs(SiSnrLoss(est, ref).item() + SiSnr(est.value(), ref)) < 1e-9);
    CHECK(GradCheck([&] { return SiSnrLoss(est, ref); }, {est}) < 1e-4);
    // Scale invariance: the gradient is orthogonal to the estimate itself.
    est.ZeroGrad();
    SiSnrLoss(est, ref).Backward();
    double dot = 0.0, ng = 0.0, ne = 0.0;
    for (size_t i = 0; i < 800; ++i) {
      dot += est.grad()[i] * est.value()[i];
      ng += est.grad()[i] * est.grad()[i];
      ne += est.value()[i] * est.value()[i];
    }
    CHECK(std::fabs(dot) < 1e-6 * std::sqrt(ng * ne));
  }
  Tensor same = Tensor::Parameter({800}, ref);
  CHECK(SiSnrLoss(same, ref).item() == -kScoreClampDb);
  CHECK_THROWS_AS(SiSnrLoss(same, std::vector<double>(800, 0.0)), NumericError);
}

TEST_CASE("gru cell") {
  ParamStore store;
  std::mt19937_64 rng(60);
  GruLayerParams p = MakeGruLayer("g", 2, 2, store, rng);

  // Zero weights and input keep the state at zero.
  {
    ParamStore zs;
    std::mt19937_64 r(1);
    GruLayerParams z = MakeGruLayer("z", 3, 4, zs, r);
    for (const auto &e : zs.entries()) {
      Tensor t = e.second;
      std::fill(t.mutable_value().begin(), t.mutable_value().end(), 0.0);
    }
    const Tensor out = GruLayer(z, Tensor::Zeros({5, 2, 3}));
    for (double v : out.value()) CHECK(v == 0.0);
  }

  // Hand-evaluated gate algebra for one step of a 2-unit cell.
  const std::vector<double> x = {0.3, -0.8}, h0 = {0.1, -0.2};
  const Tensor out = GruLayer(p, Tensor::Constant({1, 1, 2}, x), Tensor::Constant({1, 2}, h0));
  auto wi = [&](size_t i, size_t c) { return p.w_ih.value()[i * 6 + c]; };
  auto wh = [&](size_t i, size_t c) { return p.w_hh.value()[i * 6 + c]; };
  for (size_t j = 0; j < 2; ++j) {
    double gi[3], gh[3];
    for (size_t g = 0; g < 3; ++g) {
      const size_t c = g * 2 + j;
      gi[g] = x[0] * wi(0, c) + x[1] * wi(1, c) + p.b_ih.value()[c];
      gh[g] = h0[0] * wh(0, c) + h0[1] * wh(1, c) + p.b_hh.value()[c];
    }
    const double r = 1.0 / (1.0 + std::exp(-(gi[0] + gh[0])));
    const double z = 1.0 / (1.0 + std::exp(-(gi[1] + gh[1])));
    const double n = std::tanh(gi[2] + r * gh[2]);
    CHECK(std::fabs(out.value()[j] - ((1.0 - z) * n + z * h0[j])) < 1e-12);
  }
}

TEST_CASE("gru sequence and gradients") {
  ParamStore store;
  std::mt19937_64 rng(61);
  const size_t t_n = 6, b_n = 3, in = 4, hid = 5;
  GruLayerParams p = MakeGruLayer("g", in, hid, store, rng);
  Tensor seq = RandomParam(rng, {t_n, b_n, in});
  Tensor h0 = RandomParam(rng, {b_n, hid}, 0.5);

  // Whole sequence vs step-by-step with carried state.
  const Tensor whole = GruLayer(p, seq, h0);
  Tensor h = h0;
  for (size_t t = 0; t < t_n; ++t) {
    const Tensor step = GruLayer(p, Slice(seq, 0, t, 1), h);
    h = Reshape(step, {b_n, hid});
    for (size_t i = 0; i < b_n * hid; ++i) CHECK(h.value()[i] == whole.value()[t * b_n * hid + i]);
  }

  // Fused layer vs the composed primitive cell, values and gradients.
  auto composed = [&] {
    Tensor hc = h0;
    std::vector<Tensor> outs;
    for (size_t t = 0; t < t_n; ++t) {
      hc = ComposedGruStep(p, Reshape(Slice(seq, 0, t, 1), {b_n, in}), hc);
      outs.push_back(Reshape(hc, {1, b_n, hid}));
    }
    return Concat(outs, 0);
  };
  const Tensor comp = composed();
  for (size_t i = 0; i < comp.size(); ++i) CHECK(std::fabs(comp.value()[i] - whole.value()[i]) < 1e-14);

  std::vector<Tensor> inputs{seq, h0};
  for (const auto &[_, t] : store.entries()) inputs.push_back(t);
  for (auto &t : inputs) t.ZeroGrad();
  Project(GruLayer(p, seq, h0)).Backward();
  std::vector<std::vector<double>> fused;
  for (auto &t : inputs) fused.push_back(t.grad());
  for (auto &t : inputs) t.ZeroGrad();
  Project(composed()).Backward();
  for (size_t k = 0; k < inputs.size(); ++k)
    for (size_t i = 0; i < fused[k].size(); ++i)
      CHECK(std::fabs(fused[k][i] - inputs[k].grad()[i]) < 1e-12);

  CHECK(GradCheck([&] { return Project(GruLayer(p, seq, h0)); }, inputs) < 1e-4);
  CHECK_THROWS_AS(GruLayer(p, RandomParam(rng, {t_n, b_n, in + 1})), ShapeError);
}

TEST_CASE("gru-net architectures") {
  std::mt19937_64 rng(62);
  {
    // Published sizes at M = 15.
    ParamStore store;
    const size_t m = 15;
    GruNet v("v", 2 * m * m, {{500, 250}, SteeringNetOutput(m)}, store, rng);
    GruNet inv("inv", 2 * m * m, {{500, 500}, InverseNetOutput(m)}, store, rng);
    CHECK(store.Get("v.gru0.w_ih").shape() == Shape{450, 1500});
    CHECK(store.Get("v.gru1.w_ih").shape() == Shape{500, 750});
    CHECK(store.Get("v.fc.w").shape() == Shape{250, 30});
    CHECK(store.Get("inv.gru1.w_hh").shape() == Shape{500, 1500});
    CHECK(store.Get("inv.fc.w").shape() == Shape{500, 450});
  }
  ParamStore store;
  const size_t m = 6, t_n = 4, f_n = 5;
  GruNetConfig vc{{16, 8}, SteeringNetOutput(m)};
  GruNetConfig ic{{16, 16}, InverseNetOutput(m), GruInputNorm::kTrace};
  GruNet v("v", 2 * m * m, vc, store, rng);
  GruNet inv("inv", 2 * m * m, ic, store, rng);
  CHECK(vc.output_dim == 12);
  CTensor phi = RandomCParam(rng, {t_n, f_n, m, m});
  for (double &x : phi.re.mutable_value()) x = std::fabs(x);
  const CTensor sv = GruNetSteering(v, phi);
  const CTensor pinv = GruNetInverse(inv, phi);
  CHECK(sv.shape() == Shape{t_n, f_n, m});
  CHECK(pinv.shape() == Shape{t_n, f_n, m, m});
  for (double x : pinv.re.value()) CHECK(std::isfinite(x));
  const CTensor hw = AdlWeightsGraph(pinv, sv);
  for (double x : hw.re.value()) CHECK(std::isfinite(x));
  CHECK_THROWS_AS(GruNetSteering(inv, phi), ConfigError);

  // Small end-to-end gradient through both nets and the weight composition.
  ParamStore s2;
  GruNet v2("v", 8, {{3}, 4}, s2, rng), i2("i", 8, {{3}, 8, GruInputNorm::kTrace}, s2, rng);
  CTensor ph = RandomCParam(rng, {3, 2, 2, 2});
  for (double &x : ph.re.mutable_value()) x = 1.0 + std::fabs(x);
  std::vector<Tensor> params{ph.re, ph.im};
  for (const auto &[_, t] : s2.entries()) params.push_back(t);
  CHECK(GradCheck([&] { return ProjectC(AdlWeightsGraph(GruNetInverse(i2, ph), GruNetSteering(v2, ph))); },
                  params) < 1e-4);
}

TEST_CASE("filter estimator") {
  std::mt19937_64 rng(63);
  ParamStore store;
  EstimatorConfig cfg;
  cfg.channels = 8;
  const size_t d = 20, t_n = 70;
  FilterEstimator est("est", d, cfg, store, rng);
  Tensor feats = RandomParam(rng, {t_n, d}, 3.0);
  const FilterPair out = est.Forward(feats);
  CHECK(out.speech.shape() == Shape{t_n, 257, 9});
  CHECK(out.noise.shape() == Shape{t_n, 257, 9});
  for (double v : out.speech.re.value()) CHECK(std::fabs(v) <= cfg.mask_bound);
  for (double v : out.noise.im.value()) CHECK(std::fabs(v) <= cfg.mask_bound);

  // Receptive field probe: 1 + 2 * 2 * (1 + 2 + 4 + 8) = 61 frames.
  CHECK(cfg.ReceptiveField() == 61);
  const size_t probe = 65;
  auto frame = [&](const Tensor &f, size_t t) {
    const auto o = est.Forward(f);
    return std::vector<double>(o.speech.re.value().begin() + static_cast<long>(t * 257 * 9),
                               o.speech.re.value().begin() + static_cast<long>((t + 1) * 257 * 9));
  };
  const auto base = frame(feats, probe);
  Tensor far = Tensor::Constant(feats.shape(), feats.value());
  for (size_t k = 0; k < d; ++k) far.mutable_value()[(probe - 61) * d + k] += 5.0;  // just outside
  far.mutable_value()[(probe + 1) * d] += 5.0;                                       // future
  CHECK(frame(far, probe) == base);
  Tensor near = Tensor::Constant(feats.shape(), feats.value());
  near.mutable_value()[(probe - 60) * d] += 5.0;  // oldest frame inside
  CHECK(frame(near, probe) != base);

  CHECK_THROWS_AS(est.Forward(RandomParam(rng, {t_n, d + 1})), ShapeError);
  const double err = GradCheck(
      [&] {
        const FilterPair fp = est.Forward(Slice(feats, 0, 0, 6));
        return Add(ProjectC(fp.speech), ProjectC(fp.noise));
      },
      {store.Get("est.in.w"), store.Get("est.block3.conv.w"), store.Get("est.head.b"),
       store.Get("est.block0.norm.gamma"), store.Get("est.block5.prelu")});
  CHECK(err < 1e-4);
}

TEST_CASE("initialization determinism and checkpoints") {
  auto build = [](uint64_t seed, ParamStore &store) {
    std::mt19937_64 rng(seed);
    EstimatorConfig cfg;
    cfg.channels = 4;
    cfg.num_bins = 9;
    FilterEstimator e("est", 5, cfg, store, rng);
    GruNet g("v", 8, {{3, 2}, 4}, store, rng);
    return std::make_pair(e, g);
  };
  ParamStore a, b, c, d;
  auto [ea, ga] = build(3, a);
  build(3, b);
  build(4, d);
  const std::string sa = SerializeCheckpoint(Snapshot(a, "{}"));
  CHECK(sa == SerializeCheckpoint(Snapshot(b, "{}")));
  CHECK(sa != SerializeCheckpoint(Snapshot(d, "{}")));

  // Roundtrip into a differently seeded model restores bit-identical outputs.
  const auto dir = TempDir("ckpt");
  SaveCheckpoint(dir / "m.ckpt", Snapshot(a, "{\"m\": 2}"));
  const Checkpoint back = LoadCheckpoint(dir / "m.ckpt");
  CHECK(back.config_json == "{\"m\": 2}");
  auto [ec, gc] = build(4, c);
  Restore(back, c);
  std::mt19937_64 rng(9);
  const Tensor feats = RandomParam(rng, {7, 5});
  CHECK(ea.Forward(feats).speech.re.value() == ec.Forward(feats).speech.re.value());
  const Tensor seq = RandomParam(rng, {4, 2, 8});
  CHECK(ga.Forward(seq).value() == gc.Forward(seq).value());

  std::string bad = sa;
  bad[bad.size() / 2] ^= 1;
  CHECK_THROWS_AS(ParseCheckpoint(bad), FormatError);
  CHECK_THROWS_AS(ParseCheckpoint(sa.substr(0, 20)), FormatError);
  ParamStore other;
  std::mt19937_64 r2(1);
  GruNet g("v", 8, {{3}, 4}, other, r2);
  CHECK_THROWS_AS(Restore(back, other), FormatError);
  std::filesystem::remove_all(dir);
}
