// adlmvdr/metrics/metrics.cc

#include "adlmvdr/metrics/metrics.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adlmvdr/base/error.h"

namespace adlmvdr {

namespace {

void CheckPair(std::span<const double> est, std::span<const double> ref, const char *who) {
  if (est.size() != ref.size())
    throw ShapeError(std::string(who) + ": length mismatch " + std::to_string(est.size()) +
                     " vs " + std::to_string(ref.size()));
  if (ref.empty()) throw ShapeError(std::string(who) + ": empty signals");
}

std::vector<double> Centered(std::span<const double> x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  std::vector<double> out(x.begin(), x.end());
  for (double &v : out) v -= mean;
  return out;
}

double Energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

double ClampedRatioDb(double num, double den) {
  if (den <= 0.0) return num > 0.0 ? kScoreClampDb : -kScoreClampDb;
  if (num <= 0.0) return -kScoreClampDb;
  return std::clamp(10.0 * std::log10(num / den), -kScoreClampDb, kScoreClampDb);
}

// Scale-invariant ratio of est against the direction of target.
double ProjectionRatioDb(const std::vector<double> &est, const std::vector<double> &target) {
  const double tt = Energy(target);
  if (!(tt > 0.0)) throw NumericError("metrics: zero reference");
  double dot = 0.0;
  for (size_t i = 0; i < est.size(); ++i) dot += est[i] * target[i];
  const double alpha = dot / tt;
  double s = 0.0, e = 0.0;
  for (size_t i = 0; i < est.size(); ++i) {
    const double st = alpha * target[i];
    s += st * st;
    e += (est[i] - st) * (est[i] - st);
  }
  return ClampedRatioDb(s, e);
}

}  // namespace

double SiSnr(std::span<const double> est, std::span<const double> ref) {
  CheckPair(est, ref, "SiSnr");
  return ProjectionRatioDb(Centered(est), Centered(ref));
}

double Snr(std::span<const double> est, std::span<const double> ref) {
  CheckPair(est, ref, "Snr");
  const double r = Energy(ref);
  if (!(r > 0.0)) throw NumericError("Snr: zero reference");
  double e = 0.0;
  for (size_t i = 0; i < est.size(); ++i) e += (est[i] - ref[i]) * (est[i] - ref[i]);
  return ClampedRatioDb(r, e);
}

double SdrProj(std::span<const double> est, std::span<const double> ref,
               size_t filter_len) {
  CheckPair(est, ref, "SdrProj");
  if (filter_len < 1) throw ConfigError("SdrProj: filter_len must be >= 1");
  const std::vector<double> e = Centered(est), r = Centered(ref);
  if (filter_len == 1) return ProjectionRatioDb(e, r);
  const size_t n = r.size();
  const size_t taps = std::min(filter_len, n);

  // Normal equations G g = p over the delayed copies of r (zero before the
  // start). G is Toeplitz up to the truncated tail, which the recursion
  // G(j+1, k+1) = G(j, k) - r[n-1-j] r[n-1-k] removes exactly.
  std::vector<double> acf(taps, 0.0), xcf(taps, 0.0);
  for (size_t k = 0; k < taps; ++k)
    for (size_t i = k; i < n; ++i) {
      acf[k] += r[i] * r[i - k];
      xcf[k] += e[i] * r[i - k];
    }
  const Eigen::Index l = static_cast<Eigen::Index>(taps);
  Eigen::MatrixXd gram(l, l);
  for (Eigen::Index k = 0; k < l; ++k) gram(0, k) = acf[static_cast<size_t>(k)];
  for (Eigen::Index j = 1; j < l; ++j)
    for (Eigen::Index k = j; k < l; ++k)
      gram(j, k) = gram(j - 1, k - 1) - r[n - static_cast<size_t>(j)] * r[n - static_cast<size_t>(k)];
  for (Eigen::Index j = 1; j < l; ++j)
    for (Eigen::Index k = 0; k < j; ++k) gram(j, k) = gram(k, j);
  const double load = 1e-10 * gram.trace() / static_cast<double>(l);
  gram.diagonal().array() += std::max(load, 1e-300);
  const Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(xcf.data(), l);
  const Eigen::VectorXd g = gram.ldlt().solve(p);

  std::vector<double> filtered(n, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (size_t k = 0; k < taps && k <= i; ++k) filtered[i] += g[static_cast<Eigen::Index>(k)] * r[i - k];
  return ProjectionRatioDb(e, filtered);
}

}  // namespace adlmvdr
