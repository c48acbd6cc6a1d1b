// neural/graph_dsp.cc

#include "adlmvdr/neural/graph_dsp.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "adlmvdr/beamformer/beamformer.h"
#include "adlmvdr/metrics/metrics.h"

namespace adlmvdr::nn {

GraphReport &GraphReport::operator+=(const GraphReport &o) {
  cov_floored_bins += o.cov_floored_bins;
  loading_floor_hits += o.loading_floor_hits;
  cholesky_fallbacks += o.cholesky_fallbacks;
  eig_retries += o.eig_retries;
  small_eigengaps += o.small_eigengaps;
  floored_denominators += o.floored_denominators;
  return *this;
}

namespace {

cdouble At(const CTensor &c, size_t i) { return {c.re.value()[i], c.im.value()[i]}; }

void AddComplexGrad(Node *re, Node *im, size_t i, cdouble g) {
  if (re->requires_grad) re->Grad()[i] += g.real();
  if (im->requires_grad) im->Grad()[i] += g.imag();
}

std::vector<double> PackValues(const std::vector<cdouble> &v) {
  std::vector<double> out(2 * v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    out[i] = v[i].real();
    out[v.size() + i] = v[i].imag();
  }
  return out;
}

void RequireShape(const CTensor &c, size_t rank, const char *who) {
  if (c.re.shape() != c.im.shape() || c.re.rank() != rank)
    throw ShapeError(std::string(who) + ": unexpected shape " + ShapeString(c.re.shape()));
}

Tensor FloorNormalizer(const Tensor &norm, GraphReport *report) {
  if (report)
    for (double v : norm.value())
      if (v < kCovNormFloor) ++report->cov_floored_bins;
  return ClampMin(norm, kCovNormFloor);
}

}  // namespace

CTensor ApplyCrfGraph(const CTensor &filter, const ComplexArray &y, size_t time_half,
                      size_t freq_half) {
  RequireShape(filter, 3, "ApplyCrfGraph");
  const size_t taps = (2 * time_half + 1) * (2 * freq_half + 1);
  if (y.rank() != 3 || filter.dim(0) != y.dim(1) || filter.dim(1) != y.dim(2) ||
      filter.dim(2) != taps)
    throw ShapeError("ApplyCrfGraph: filter " + ShapeString(filter.shape()) +
                     " does not match spectrogram " + ShapeString(y.shape()));
  const size_t m_n = y.dim(0), t_n = y.dim(1), f_n = y.dim(2);
  const long L = static_cast<long>(time_half), K = static_cast<long>(freq_half);
  ComplexArray shifted({taps, m_n, t_n, f_n});
  for (long dt = -L; dt <= L; ++dt)
    for (long df = -K; df <= K; ++df) {
      const size_t tap = TapIndex(dt, df, time_half, freq_half);
      for (size_t m = 0; m < m_n; ++m)
        for (size_t t = 0; t < t_n; ++t) {
          const long ts = static_cast<long>(t) + dt;
          if (ts < 0 || ts >= static_cast<long>(t_n)) continue;
          for (size_t f = 0; f < f_n; ++f) {
            const long fs = static_cast<long>(f) + df;
            if (fs < 0 || fs >= static_cast<long>(f_n)) continue;
            shifted(tap, m, t, f) = y(m, static_cast<size_t>(ts), static_cast<size_t>(fs));
          }
        }
    }
  const CTensor w = CReshape(CPermute(filter, {2, 0, 1}), {taps, 1, t_n, f_n});
  return CSum(CMul(w, CConstant(shifted)), 0);
}

CTensor CenterTapGraph(const CTensor &filter) {
  RequireShape(filter, 3, "CenterTapGraph");
  const size_t c = filter.dim(2) / 2;
  return CReshape(CSlice(filter, 2, c, 1), {filter.dim(0), filter.dim(1)});
}

CTensor FramewiseCovGraph(const CTensor &est, const CTensor &mask, bool per_frame_norm,
                          GraphReport *report) {
  RequireShape(est, 3, "FramewiseCovGraph");
  RequireShape(mask, 2, "FramewiseCovGraph");
  const size_t m_n = est.dim(0), t_n = est.dim(1), f_n = est.dim(2);
  if (mask.dim(0) != t_n || mask.dim(1) != f_n)
    throw ShapeError("FramewiseCovGraph: mask does not match estimate");
  const CTensor s = CPermute(est, {1, 2, 0});
  const CTensor outer = CMulConj(CReshape(s, {t_n, f_n, m_n, 1}), CReshape(s, {t_n, f_n, 1, m_n}));
  Tensor norm;
  if (per_frame_norm)
    norm = Reshape(FloorNormalizer(CAbs2(mask), report), {t_n, f_n, 1, 1});
  else
    norm = Reshape(FloorNormalizer(Sum(CAbs2(mask), 0), report), {1, f_n, 1, 1});
  return {Div(outer.re, norm), Div(outer.im, norm)};
}

CTensor UtteranceCovGraph(const CTensor &est, const CTensor &mask, GraphReport *report) {
  RequireShape(est, 3, "UtteranceCovGraph");
  RequireShape(mask, 2, "UtteranceCovGraph");
  const size_t m_n = est.dim(0), t_n = est.dim(1), f_n = est.dim(2);
  if (mask.dim(0) != t_n || mask.dim(1) != f_n)
    throw ShapeError("UtteranceCovGraph: mask does not match estimate");
  const CTensor s = CPermute(est, {1, 2, 0});
  const CTensor outer =
      CSum(CMulConj(CReshape(s, {t_n, f_n, m_n, 1}), CReshape(s, {t_n, f_n, 1, m_n})), 0);
  const Tensor norm = Reshape(FloorNormalizer(Sum(CAbs2(mask), 0), report), {f_n, 1, 1});
  return {Div(outer.re, norm), Div(outer.im, norm)};
}

CTensor SolveLoadedGraph(const CTensor &a, const CTensor &b, double eps_rel,
                         GraphReport *report) {
  RequireShape(a, 3, "SolveLoadedGraph");
  RequireShape(b, 2, "SolveLoadedGraph");
  const size_t f_n = a.dim(0), d = a.dim(1);
  if (a.dim(2) != d || b.dim(0) != f_n || b.dim(1) != d)
    throw ShapeError("SolveLoadedGraph: a " + ShapeString(a.shape()) + ", b " +
                     ShapeString(b.shape()));
  std::vector<cdouble> x(f_n * d);
  std::vector<bool> floored(f_n, false);
  for (size_t f = 0; f < f_n; ++f) {
    CMat m(d, d);
    CVec rhs(d);
    for (size_t i = 0; i < d * d; ++i) m.entries()[i] = At(a, f * d * d + i);
    for (size_t i = 0; i < d; ++i) rhs[i] = At(b, f * d + i);
    LoadingReport lr;
    const CVec sol = SolveLoaded(m, rhs, eps_rel, &lr);
    floored[f] = lr.lambda <= kLoadingFloor;
    if (report) {
      report->loading_floor_hits += floored[f];
      report->cholesky_fallbacks += lr.cholesky_failed;
    }
    std::copy(sol.begin(), sol.end(), x.begin() + static_cast<long>(f * d));
  }
  Tensor packed = MakeResult({2, f_n, d}, PackValues(x), {a.re, a.im, b.re, b.im}, [&]() {
    Node *ar = a.re.node(), *ai = a.im.node(), *br = b.re.node(), *bi = b.im.node();
    return BackwardFn([=, x = std::move(x), floored = std::move(floored)](
                          const std::vector<double> &g) {
      const size_t half = f_n * d;
      for (size_t f = 0; f < f_n; ++f) {
        CMat m(d, d);
        CVec gx(d);
        for (size_t i = 0; i < d * d; ++i)
          m.entries()[i] = cdouble(ar->value[f * d * d + i], ai->value[f * d * d + i]);
        for (size_t i = 0; i < d; ++i) gx[i] = cdouble(g[f * d + i], g[half + f * d + i]);
        // The loaded matrix is Hermitian, so its inverse is its own adjoint.
        const CVec gb = SolveLoaded(m, gx, eps_rel);
        for (size_t i = 0; i < d; ++i) AddComplexGrad(br, bi, f * d + i, gb[i]);
        if (!ar->requires_grad && !ai->requires_grad) continue;
        const cdouble *xf = &x[f * d];
        double tr = 0.0;
        for (size_t i = 0; i < d; ++i) tr -= (gb[i] * std::conj(xf[i])).real();
        const double dlambda = floored[f] ? 0.0 : eps_rel / static_cast<double>(d) * tr;
        for (size_t i = 0; i < d; ++i)
          for (size_t j = 0; j < d; ++j) {
            const cdouble gij = -gb[i] * std::conj(xf[j]);
            const cdouble gji = -gb[j] * std::conj(xf[i]);
            cdouble ga = 0.5 * (gij + std::conj(gji));
            if (i == j) ga += dlambda;
            AddComplexGrad(ar, ai, f * d * d + i * d + j, ga);
          }
      }
    });
  });
  return Unpack(packed);
}

CTensor SteeringGraph(const CTensor &phi, size_t ref_channel, GraphReport *report) {
  RequireShape(phi, 3, "SteeringGraph");
  const size_t f_n = phi.dim(0), m_n = phi.dim(1);
  if (phi.dim(2) != m_n || ref_channel >= m_n)
    throw ShapeError("SteeringGraph: phi " + ShapeString(phi.shape()));
  ComplexArray sym({f_n, m_n, m_n});
  for (size_t f = 0; f < f_n; ++f)
    for (size_t i = 0; i < m_n; ++i)
      for (size_t j = 0; j < m_n; ++j) {
        const size_t ij = (f * m_n + i) * m_n + j, ji = (f * m_n + j) * m_n + i;
        sym[ij] = 0.5 * (At(phi, ij) + std::conj(At(phi, ji)));
      }
  BeamformerReport br;
  const ComplexArray steer =
      SteeringFromCov(UttCov{sym}, SteeringGauge::kReferenceRtf, ref_channel, &br);
  if (report) report->eig_retries += br.eig_failures;

  // Bins whose reference entry vanished keep the unit-norm gauge and pass no
  // gradient.
  std::vector<bool> rtf(f_n, false);
  for (size_t f = 0; f < f_n; ++f) rtf[f] = std::abs(steer(f, ref_channel) - 1.0) < 1e-12;

  const bool need = NeedsGrad({phi.re, phi.im});
  std::vector<Eigen::MatrixXcd> vecs;
  std::vector<Eigen::VectorXd> vals;
  if (need) {
    vecs.resize(f_n);
    vals.resize(f_n);
    for (size_t f = 0; f < f_n; ++f) {
      Eigen::MatrixXcd a(m_n, m_n);
      for (size_t i = 0; i < m_n; ++i)
        for (size_t j = 0; j < m_n; ++j) a(i, j) = sym(f, i, j);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a);
      vecs[f] = es.eigenvectors();
      vals[f] = es.eigenvalues();
      const double top = vals[f](m_n - 1);
      if (report && m_n > 1 && top > 0.0 && top - vals[f](m_n - 2) < 1e-8 * top)
        ++report->small_eigengaps;
    }
  }
  std::vector<cdouble> sv(steer.vec());
  Tensor packed = MakeResult({2, f_n, m_n}, PackValues(sv), {phi.re, phi.im}, [&]() {
    Node *pr = phi.re.node(), *pi = phi.im.node();
    return BackwardFn([=, vecs = std::move(vecs), vals = std::move(vals),
                       rtf = std::move(rtf)](const std::vector<double> &g) {
      const size_t half = f_n * m_n;
      const long n = static_cast<long>(m_n);
      for (size_t f = 0; f < f_n; ++f) {
        if (!rtf[f]) continue;
        const Eigen::MatrixXcd &u = vecs[f];
        const Eigen::VectorXcd u1 = u.col(n - 1);
        const cdouble ur = u1(static_cast<long>(ref_channel));
        const Eigen::VectorXcd v = u1 / ur;
        Eigen::VectorXcd gv(n);
        for (long i = 0; i < n; ++i)
          gv(i) = cdouble(g[f * m_n + static_cast<size_t>(i)], g[half + f * m_n + static_cast<size_t>(i)]);
        // v = u1 / u1[ref]: pull back through the gauge, then through u1.
        Eigen::VectorXcd gu = gv;
        gu(static_cast<long>(ref_channel)) -= v.dot(gv);
        gu /= std::conj(ur);
        Eigen::MatrixXcd ga = Eigen::MatrixXcd::Zero(n, n);
        for (long k = 0; k + 1 < n; ++k) {
          const cdouble beta = gu.dot(u.col(k)) / (vals[f](n - 1) - vals[f](k));
          ga += std::conj(beta) * u.col(k) * u1.adjoint();
        }
        const Eigen::MatrixXcd gs = 0.5 * (ga + ga.adjoint());
        for (size_t i = 0; i < m_n; ++i)
          for (size_t j = 0; j < m_n; ++j)
            AddComplexGrad(pr, pi, (f * m_n + i) * m_n + j,
                           gs(static_cast<long>(i), static_cast<long>(j)));
      }
    });
  });
  return Unpack(packed);
}

CTensor MvdrWeightsGraph(const CTensor &phi_nn, const CTensor &steer, double eps_rel,
                         GraphReport *report) {
  const CTensor x = SolveLoadedGraph(phi_nn, steer, eps_rel, report);
  const CTensor den = CSum(CConjMul(steer, x), 1, true);
  return CDiv(x, den);
}

CTensor FloorModulus(const CTensor &z, double floor, size_t *count) {
  const size_t n = z.re.size();
  std::vector<cdouble> out(n);
  for (size_t i = 0; i < n; ++i) {
    const cdouble v = At(z, i);
    const double mag = std::abs(v);
    if (mag >= floor) {
      out[i] = v;
      continue;
    }
    if (count) ++*count;
    out[i] = mag > 0.0 ? v * (floor / mag) : cdouble(floor);
  }
  Shape shape = z.shape();
  shape.insert(shape.begin(), 2);
  Tensor packed = MakeResult(shape, PackValues(out), {z.re, z.im}, [&]() {
    Node *zr = z.re.node(), *zi = z.im.node();
    return BackwardFn([=](const std::vector<double> &g) {
      for (size_t i = 0; i < n; ++i) {
        const double a = zr->value[i], b = zi->value[i];
        const double r = std::hypot(a, b);
        const double ga = g[i], gb = g[n + i];
        if (r >= floor) {
          AddComplexGrad(zr, zi, i, {ga, gb});
        } else if (r > 0.0) {
          // d(floor * z / |z|)
          const double s = floor / (r * r * r);
          AddComplexGrad(zr, zi, i,
                         {s * (ga * b * b - gb * a * b), s * (-ga * a * b + gb * a * a)});
        }
      }
    });
  });
  return Unpack(packed);
}

CTensor AdlWeightsGraph(const CTensor &p, const CTensor &steer, GraphReport *report) {
  RequireShape(p, 4, "AdlWeightsGraph");
  RequireShape(steer, 3, "AdlWeightsGraph");
  const size_t t_n = p.dim(0), f_n = p.dim(1), m_n = p.dim(2);
  if (p.dim(3) != m_n || steer.dim(0) != t_n || steer.dim(1) != f_n || steer.dim(2) != m_n)
    throw ShapeError("AdlWeightsGraph: P " + ShapeString(p.shape()) + ", v " +
                     ShapeString(steer.shape()));
  const CTensor x = CSum(CMul(p, CReshape(steer, {t_n, f_n, 1, m_n})), 3);
  CTensor den = CSum(CConjMul(steer, x), 2, true);
  size_t floored = 0;
  den = FloorModulus(den, kAdlDenominatorFloor, &floored);
  if (report) report->floored_denominators += floored;
  return CDiv(x, den);
}

CTensor ApplyWeightsGraph(const CTensor &h, const ComplexArray &y) {
  if (y.rank() != 3) throw ShapeError("ApplyWeightsGraph: spectrogram must be [D, T, F]");
  const size_t d = y.dim(0), t_n = y.dim(1), f_n = y.dim(2);
  ComplexArray yt({t_n, f_n, d});
  for (size_t m = 0; m < d; ++m)
    for (size_t t = 0; t < t_n; ++t)
      for (size_t f = 0; f < f_n; ++f) yt(t, f, m) = y(m, t, f);
  CTensor hw;
  if (h.re.rank() == 2 && h.dim(0) == f_n && h.dim(1) == d)
    hw = CReshape(h, {1, f_n, d});
  else if (h.re.rank() == 3 && h.dim(0) == t_n && h.dim(1) == f_n && h.dim(2) == d)
    hw = h;
  else
    throw ShapeError("ApplyWeightsGraph: weights " + ShapeString(h.shape()) +
                     " do not match spectrogram " + ShapeString(y.shape()));
  return CSum(CConjMul(hw, CConstant(yt)), 2);
}

CTensor MultitapExpandGraph(const CTensor &est, size_t taps) {
  RequireShape(est, 3, "MultitapExpandGraph");
  if (taps < 1) throw ShapeError("MultitapExpandGraph: taps must be >= 1");
  const size_t m_n = est.dim(0), t_n = est.dim(1), f_n = est.dim(2);
  std::vector<CTensor> parts{est};
  for (size_t d = 1; d < taps; ++d) {
    const size_t z = std::min(d, t_n);
    CTensor zeros{Tensor::Zeros({m_n, z, f_n}), Tensor::Zeros({m_n, z, f_n})};
    if (z == t_n)
      parts.push_back(zeros);
    else
      parts.push_back(CConcat({zeros, CSlice(est, 1, 0, t_n - z)}, 1));
  }
  return taps == 1 ? est : CConcat(parts, 0);
}

Tensor IstftGraph(const CTensor &spec, const StftConfig &config, size_t signal_len) {
  RequireShape(spec, 2, "IstftGraph");
  const size_t t_n = spec.dim(0), f_n = spec.dim(1);
  if (f_n != config.NumBins())
    throw ShapeError("IstftGraph: " + std::to_string(f_n) + " bins, config expects " +
                     std::to_string(config.NumBins()));
  std::vector<cdouble> frames(t_n * f_n);
  for (size_t i = 0; i < frames.size(); ++i) frames[i] = At(spec, i);
  std::vector<double> out(signal_len);
  InverseStftChannel(frames, t_n, config, signal_len, out);
  return MakeResult({signal_len}, std::move(out), {spec.re, spec.im}, [&]() {
    Node *sr = spec.re.node(), *si = spec.im.node();
    return BackwardFn([=](const std::vector<double> &g) {
      std::vector<cdouble> gf(t_n * f_n);
      InverseStftChannelAdjoint(g, t_n, config, signal_len, gf);
      for (size_t i = 0; i < gf.size(); ++i) AddComplexGrad(sr, si, i, gf[i]);
    });
  });
}

Tensor SiSnrLoss(const Tensor &est, std::span<const double> ref) {
  if (est.rank() != 1 || est.size() != ref.size())
    throw ShapeError("SiSnrLoss: estimate " + ShapeString(est.shape()) + ", reference of " +
                     std::to_string(ref.size()));
  const size_t n = ref.size();
  auto centred = [n](const double *p) {
    double mean = 0.0;
    for (size_t i = 0; i < n; ++i) mean += p[i];
    mean /= static_cast<double>(n);
    std::vector<double> c(p, p + n);
    for (double &v : c) v -= mean;
    return c;
  };
  const std::vector<double> x = centred(est.data()), r = centred(ref.data());
  double tt = 0.0, dot = 0.0;
  for (size_t i = 0; i < n; ++i) {
    tt += r[i] * r[i];
    dot += x[i] * r[i];
  }
  if (!(tt > 0.0)) throw NumericError("SiSnrLoss: zero reference");
  const double alpha = dot / tt;
  double s = 0.0, e = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double st = alpha * r[i];
    s += st * st;
    e += (x[i] - st) * (x[i] - st);
  }
  const double si = SiSnr(est.value(), ref);
  const bool active = s > 0.0 && e > 0.0 && std::fabs(si) < kScoreClampDb;
  return MakeResult({}, {-si}, {est}, [&]() {
    Node *ne = est.node();
    return BackwardFn([=](const std::vector<double> &g) {
      if (!active) return;
      // d si / dx = 10/ln10 * (2 r / dot - 2 (x - alpha r) / e); already
      // zero-mean, so centring passes it through unchanged.
      const double c = -g[0] * 10.0 / std::log(10.0);
      auto &d = ne->Grad();
      for (size_t i = 0; i < n; ++i)
        d[i] += c * (2.0 * r[i] / dot - 2.0 * (x[i] - alpha * r[i]) / e);
    });
  });
}

}  // namespace adlmvdr::nn
