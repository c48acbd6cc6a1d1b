// neural/gru.cc

#include "adlmvdr/neural/gru.h"

#include <Eigen/Dense>
#include <cmath>

namespace adlmvdr::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;
using RowVec = Eigen::Map<const Eigen::RowVectorXd>;

double Sigm(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

void GruLayerParams::Validate() const {
  const size_t h3 = 3 * hidden_dim;
  if (input_dim == 0 || hidden_dim == 0 || w_ih.shape() != Shape{input_dim, h3} ||
      w_hh.shape() != Shape{hidden_dim, h3} || b_ih.shape() != Shape{h3} ||
      b_hh.shape() != Shape{h3})
    throw ShapeError("GRU layer parameters inconsistent with " + std::to_string(input_dim) +
                     " -> " + std::to_string(hidden_dim));
}

GruLayerParams MakeGruLayer(const std::string &prefix, size_t input_dim, size_t hidden_dim,
                            ParamStore &store, std::mt19937_64 &rng) {
  GruLayerParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  const double bi = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double bh = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  p.w_ih = store.AddUniform(prefix + ".w_ih", {input_dim, 3 * hidden_dim}, bi, rng);
  p.w_hh = store.AddUniform(prefix + ".w_hh", {hidden_dim, 3 * hidden_dim}, bh, rng);
  p.b_ih = store.AddUniform(prefix + ".b_ih", {3 * hidden_dim}, bh, rng);
  p.b_hh = store.AddUniform(prefix + ".b_hh", {3 * hidden_dim}, bh, rng);
  return p;
}

Tensor GruLayer(const GruLayerParams &p, const Tensor &x, const Tensor &h0) {
  p.Validate();
  if (x.rank() != 3 || x.dim(2) != p.input_dim)
    throw ShapeError("GRU input " + ShapeString(x.shape()) + " does not match input dim " +
                     std::to_string(p.input_dim));
  const long t_n = static_cast<long>(x.dim(0)), b_n = static_cast<long>(x.dim(1)),
             in = static_cast<long>(p.input_dim), h = static_cast<long>(p.hidden_dim);
  if (h0.defined() && h0.shape() != Shape{x.dim(1), p.hidden_dim})
    throw ShapeError("GRU initial state " + ShapeString(h0.shape()));

  // Input projections one step at a time, so a sequence split into pieces
  // reproduces the whole-sequence result bit for bit.
  const MapC w_ih(p.w_ih.data(), in, 3 * h);
  RowMat gi(t_n * b_n, 3 * h);
  for (long t = 0; t < t_n; ++t)
    gi.middleRows(t * b_n, b_n).noalias() = MapC(x.data() + t * b_n * in, b_n, in) * w_ih;
  gi.rowwise() += RowVec(p.b_ih.data(), 3 * h);
  const MapC w_hh(p.w_hh.data(), h, 3 * h);
  const RowVec b_hh(p.b_hh.data(), 3 * h);

  // Hidden states, gates and the recurrent candidate term per step, kept
  // for backward.
  RowMat hs(t_n * b_n, h), rs(t_n * b_n, h), zs(t_n * b_n, h), ns(t_n * b_n, h),
      ghn(t_n * b_n, h);
  RowMat hprev = h0.defined() ? RowMat(MapC(h0.data(), b_n, h)) : RowMat::Zero(b_n, h);
  RowMat gh(b_n, 3 * h);
  for (long t = 0; t < t_n; ++t) {
    gh.noalias() = hprev * w_hh;
    gh.rowwise() += b_hh;
    auto ht = hs.middleRows(t * b_n, b_n);
    for (long b = 0; b < b_n; ++b) {
      const long row = t * b_n + b;
      for (long j = 0; j < h; ++j) {
        const double r = Sigm(gi(row, j) + gh(b, j));
        const double z = Sigm(gi(row, h + j) + gh(b, h + j));
        const double hn = gh(b, 2 * h + j);
        const double n = std::tanh(gi(row, 2 * h + j) + r * hn);
        rs(row, j) = r;
        zs(row, j) = z;
        ns(row, j) = n;
        ghn(row, j) = hn;
        ht(b, j) = (1.0 - z) * n + z * hprev(b, j);
      }
    }
    hprev = ht;
  }

  std::vector<double> out(hs.data(), hs.data() + hs.size());
  std::vector<Tensor> parents{x, p.w_ih, p.w_hh, p.b_ih, p.b_hh};
  if (h0.defined()) parents.push_back(h0);
  return MakeResult({x.dim(0), x.dim(1), p.hidden_dim}, std::move(out), parents, [&]() {
    Node *nx = x.node(), *nwi = p.w_ih.node(), *nwh = p.w_hh.node(), *nbi = p.b_ih.node(),
         *nbh = p.b_hh.node();
    Node *nh0 = h0.defined() ? h0.node() : nullptr;
    return BackwardFn([=, hs = std::move(hs), rs = std::move(rs), zs = std::move(zs), ns = std::move(ns),
                       ghn = std::move(ghn)](const std::vector<double> &g) {
      const MapC G(g.data(), t_n * b_n, h);
      const MapC whh(nwh->value.data(), h, 3 * h);
      RowMat dgi(t_n * b_n, 3 * h);
      RowMat dgh(b_n, 3 * h);
      RowMat dh_next = RowMat::Zero(b_n, h);
      RowMat dwhh = RowMat::Zero(h, 3 * h);
      Eigen::RowVectorXd dbhh = Eigen::RowVectorXd::Zero(3 * h);
      for (long t = t_n - 1; t >= 0; --t) {
        for (long b = 0; b < b_n; ++b) {
          const long row = t * b_n + b;
          for (long j = 0; j < h; ++j) {
            const double hp = t > 0 ? hs((t - 1) * b_n + b, j)
                                    : (nh0 ? nh0->value[static_cast<size_t>(b * h + j)] : 0.0);
            const double dh = G(row, j) + dh_next(b, j);
            const double r = rs(row, j), z = zs(row, j), n = ns(row, j);
            const double dn = dh * (1.0 - z);
            const double dz = dh * (hp - n);
            const double dan = dn * (1.0 - n * n);
            const double dr = dan * ghn(row, j);
            const double dar = dr * r * (1.0 - r);
            const double daz = dz * z * (1.0 - z);
            dgi(row, j) = dar;
            dgi(row, h + j) = daz;
            dgi(row, 2 * h + j) = dan;
            dgh(b, j) = dar;
            dgh(b, h + j) = daz;
            dgh(b, 2 * h + j) = dan * r;
            dh_next(b, j) = dh * z;
          }
        }
        if (t > 0)
          dwhh.noalias() += hs.middleRows((t - 1) * b_n, b_n).transpose() * dgh;
        else if (nh0)
          dwhh.noalias() += MapC(nh0->value.data(), b_n, h).transpose() * dgh;
        dbhh += dgh.colwise().sum();
        dh_next.noalias() += dgh * whh.transpose();
      }
      if (nwh->requires_grad) Map(nwh->Grad().data(), h, 3 * h) += dwhh;
      if (nbh->requires_grad)
        Eigen::Map<Eigen::RowVectorXd>(nbh->Grad().data(), 3 * h) += dbhh;
      if (nbi->requires_grad)
        Eigen::Map<Eigen::RowVectorXd>(nbi->Grad().data(), 3 * h) += dgi.colwise().sum();
      if (nwi->requires_grad)
        Map(nwi->Grad().data(), in, 3 * h).noalias() +=
            MapC(nx->value.data(), t_n * b_n, in).transpose() * dgi;
      if (nx->requires_grad)
        Map(nx->Grad().data(), t_n * b_n, in).noalias() +=
            dgi * MapC(nwi->value.data(), in, 3 * h).transpose();
      if (nh0 && nh0->requires_grad) Map(nh0->Grad().data(), b_n, h) += dh_next;
    });
  });
}

Tensor GruForward(const std::vector<GruLayerParams> &layers, const Tensor &seq) {
  if (layers.empty()) throw ConfigError("GRU stack needs at least one layer");
  Tensor h = seq;
  for (const auto &l : layers) h = GruLayer(l, h);
  return h;
}

void GruNetConfig::Validate() const {
  if (hidden.empty()) throw ConfigError("GRU-Net needs at least one hidden layer");
  for (size_t v : hidden)
    if (v == 0) throw ConfigError("GRU-Net hidden size must be positive");
  if (output_dim == 0) throw ConfigError("GRU-Net output size must be positive");
}

GruNet::GruNet(const std::string &prefix, size_t input_dim, const GruNetConfig &config,
               ParamStore &store, std::mt19937_64 &rng)
    : config_(config), input_dim_(input_dim) {
  config_.Validate();
  size_t in = input_dim;
  for (size_t i = 0; i < config_.hidden.size(); ++i) {
    layers_.push_back(
        MakeGruLayer(prefix + ".gru" + std::to_string(i), in, config_.hidden[i], store, rng));
    in = config_.hidden[i];
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  fc_w_ = store.AddUniform(prefix + ".fc.w", {in, config_.output_dim}, bound, rng);
  fc_b_ = store.AddUniform(prefix + ".fc.b", {config_.output_dim}, bound, rng);
}

Tensor GruNet::Forward(const Tensor &seq) const {
  if (seq.rank() != 3 || seq.dim(2) != input_dim_)
    throw ShapeError("GRU-Net input " + ShapeString(seq.shape()) + ", expected last dim " +
                     std::to_string(input_dim_));
  return Linear(GruForward(layers_, seq), fc_w_, fc_b_);
}

namespace {

// [T, F, M, M] complex -> [T, F, 2 M^2] real (re block, then im block).
Tensor FlattenCov(const CTensor &phi) {
  const size_t t_n = phi.dim(0), f_n = phi.dim(1), m_n = phi.dim(2);
  return Concat({Reshape(phi.re, {t_n, f_n, m_n * m_n}), Reshape(phi.im, {t_n, f_n, m_n * m_n})},
                2);
}

// Per-bin mean over frames of Re tr(phi), [1, F, 1], floored.
Tensor MeanTrace(const CTensor &phi) {
  const size_t m_n = phi.dim(2);
  std::vector<double> eye(m_n * m_n, 0.0);
  for (size_t i = 0; i < m_n; ++i) eye[i * m_n + i] = 1.0;
  const Tensor diag = Mul(phi.re, Tensor::Constant({m_n, m_n}, std::move(eye)));
  const Tensor tr = Sum(Sum(diag, 3), 2);  // [T, F]
  return Reshape(ClampMin(Mean(tr, 0), 1e-10), {1, phi.dim(1), 1});
}

void CheckCov(const GruNet &net, const CTensor &phi, const char *who) {
  if (phi.re.rank() != 4 || phi.dim(2) != phi.dim(3))
    throw ShapeError(std::string(who) + ": covariance must be [T, F, M, M], got " +
                     ShapeString(phi.shape()));
  const size_t m_n = phi.dim(2);
  if (net.input_dim() != 2 * m_n * m_n)
    throw ConfigError(std::string(who) + ": network expects " + std::to_string(net.input_dim()) +
                      " inputs, covariance gives " + std::to_string(2 * m_n * m_n));
}

}  // namespace

CTensor GruNetSteering(const GruNet &net, const CTensor &phi_ss) {
  CheckCov(net, phi_ss, "GruNetSteering");
  const size_t m_n = phi_ss.dim(2);
  if (net.config().output_dim != SteeringNetOutput(m_n))
    throw ConfigError("GruNetSteering: output size must be 2M");
  Tensor in = FlattenCov(phi_ss);
  if (net.config().input_norm == GruInputNorm::kTrace) in = Div(in, MeanTrace(phi_ss));
  const Tensor out = net.Forward(in);
  return {Slice(out, 2, 0, m_n), Slice(out, 2, m_n, m_n)};
}

CTensor GruNetInverse(const GruNet &net, const CTensor &phi_nn) {
  CheckCov(net, phi_nn, "GruNetInverse");
  const size_t t_n = phi_nn.dim(0), f_n = phi_nn.dim(1), m_n = phi_nn.dim(2);
  if (net.config().output_dim != InverseNetOutput(m_n))
    throw ConfigError("GruNetInverse: output size must be 2M^2");
  Tensor in = FlattenCov(phi_nn);
  Tensor out;
  if (net.config().input_norm == GruInputNorm::kTrace) {
    const Tensor s = MeanTrace(phi_nn);
    out = Div(net.Forward(Div(in, s)), s);
  } else {
    out = net.Forward(in);
  }
  const size_t mm = m_n * m_n;
  return {Reshape(Slice(out, 2, 0, mm), {t_n, f_n, m_n, m_n}),
          Reshape(Slice(out, 2, mm, mm), {t_n, f_n, m_n, m_n})};
}

}  // namespace adlmvdr::nn
