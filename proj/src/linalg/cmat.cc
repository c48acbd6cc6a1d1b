// adlmvdr/linalg/cmat.cc

#include "adlmvdr/linalg/cmat.h"

#include <algorithm>
#include <cmath>
#include <optional>

#include "adlmvdr/base/error.h"

namespace adlmvdr {

namespace {

constexpr double kAsymmetryTol = 1e-8;

void RequireSquareFinite(const CMat &a, const char *who) {
  if (!a.square() || a.rows() == 0)
    throw ShapeError(std::string(who) + ": matrix must be square and non-empty");
  if (!a.AllFinite()) throw NumericError(std::string(who) + ": NaN/Inf entry");
}

CMat Symmetrized(const CMat &a, const char *who) {
  const double scale = std::max(1.0, a.MaxAbs());
  if (HermitianAsymmetry(a) > kAsymmetryTol * scale)
    throw NumericError(std::string(who) + ": matrix is not Hermitian");
  CMat s(a.rows(), a.cols());
  for (size_t i = 0; i < a.rows(); ++i)
    for (size_t j = 0; j < a.cols(); ++j)
      s(i, j) = 0.5 * (a(i, j) + std::conj(a(j, i)));
  return s;
}

CMat Loaded(const CMat &a, double eps_rel, LoadingReport *report, const char *who) {
  RequireSquareFinite(a, who);
  CMat s = Symmetrized(a, who);
  const double lambda = LoadingLambda(s, eps_rel);
  for (size_t i = 0; i < s.rows(); ++i) s(i, i) += lambda;
  if (report) report->lambda = lambda;
  return s;
}

// Lower-triangular L with a = L L^H, or nullopt on a non-positive pivot.
std::optional<CMat> Cholesky(const CMat &a) {
  const size_t n = a.rows();
  CMat l(n, n);
  for (size_t j = 0; j < n; ++j) {
    double d = a(j, j).real();
    for (size_t k = 0; k < j; ++k) d -= std::norm(l(j, k));
    if (!(d > 0.0)) return std::nullopt;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (size_t i = j + 1; i < n; ++i) {
      cdouble v = a(i, j);
      for (size_t k = 0; k < j; ++k) v -= l(i, k) * std::conj(l(j, k));
      l(i, j) = v / ljj;
    }
  }
  return l;
}

// Solves L L^H x = b in place.
void CholeskySolveInPlace(const CMat &l, CVec &x) {
  const size_t n = l.rows();
  for (size_t i = 0; i < n; ++i) {
    cdouble v = x[i];
    for (size_t k = 0; k < i; ++k) v -= l(i, k) * x[k];
    x[i] = v / l(i, i);
  }
  for (size_t ii = n; ii-- > 0;) {
    cdouble v = x[ii];
    for (size_t k = ii + 1; k < n; ++k) v -= std::conj(l(k, ii)) * x[k];
    x[ii] = v / l(ii, ii);
  }
}

// Gauss-Jordan with partial pivoting on [a | rhs]; rhs has rhs_cols columns.
CMat GaussJordan(CMat a, CMat rhs) {
  const size_t n = a.rows();
  for (size_t col = 0; col < n; ++col) {
    size_t piv = col;
    for (size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    if (std::abs(a(piv, col)) == 0.0)
      throw NumericError("GaussJordan: singular matrix");
    if (piv != col) {
      for (size_t j = 0; j < n; ++j) std::swap(a(col, j), a(piv, j));
      for (size_t j = 0; j < rhs.cols(); ++j) std::swap(rhs(col, j), rhs(piv, j));
    }
    const cdouble inv = 1.0 / a(col, col);
    for (size_t j = 0; j < n; ++j) a(col, j) *= inv;
    for (size_t j = 0; j < rhs.cols(); ++j) rhs(col, j) *= inv;
    for (size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const cdouble f = a(r, col);
      if (f == cdouble(0.0)) continue;
      for (size_t j = 0; j < n; ++j) a(r, j) -= f * a(col, j);
      for (size_t j = 0; j < rhs.cols(); ++j) rhs(r, j) -= f * rhs(col, j);
    }
  }
  return rhs;
}

size_t ArgMaxModulus(const CVec &v) {
  size_t best = 0;
  for (size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  return best;
}

}  // namespace

CMat::CMat(size_t rows, size_t cols, std::vector<cdouble> entries)
    : rows_(rows), cols_(cols), a_(std::move(entries)) {
  if (a_.size() != rows * cols) throw ShapeError("CMat: entry count mismatch");
}

CMat CMat::FromSquare(const cdouble *p, size_t n) {
  return CMat(n, n, std::vector<cdouble>(p, p + n * n));
}

CMat CMat::Identity(size_t n) {
  CMat m(n, n);
  for (size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

CMat CMat::Diagonal(std::span<const cdouble> diag) {
  CMat m(diag.size(), diag.size());
  for (size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

CMat &CMat::operator+=(const CMat &b) {
  if (rows_ != b.rows_ || cols_ != b.cols_) throw ShapeError("CMat +=: shape mismatch");
  for (size_t i = 0; i < a_.size(); ++i) a_[i] += b.a_[i];
  return *this;
}

CMat &CMat::operator*=(cdouble s) {
  for (auto &v : a_) v *= s;
  return *this;
}

double CMat::FrobeniusNorm() const {
  double s = 0.0;
  for (const auto &v : a_) s += std::norm(v);
  return std::sqrt(s);
}

double CMat::MaxAbs() const {
  double m = 0.0;
  for (const auto &v : a_) m = std::max(m, std::abs(v));
  return m;
}

cdouble CMat::Trace() const {
  cdouble t = 0.0;
  for (size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
  return t;
}

bool CMat::AllFinite() const {
  return std::all_of(a_.begin(), a_.end(), [](const cdouble &v) {
    return std::isfinite(v.real()) && std::isfinite(v.imag());
  });
}

CMat operator+(CMat a, const CMat &b) { return a += b; }

CMat operator-(const CMat &a, const CMat &b) {
  CMat out = a;
  out += -1.0 * b;
  return out;
}

CMat operator*(cdouble s, CMat a) { return a *= s; }

CMat Hermitian(const CMat &a) {
  CMat out(a.cols(), a.rows());
  for (size_t i = 0; i < a.rows(); ++i)
    for (size_t j = 0; j < a.cols(); ++j) out(j, i) = std::conj(a(i, j));
  return out;
}

CMat MatMul(const CMat &a, const CMat &b) {
  if (a.cols() != b.rows())
    throw ShapeError("MatMul: inner dimensions differ (" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + ")");
  CMat out(a.rows(), b.cols());
  for (size_t i = 0; i < a.rows(); ++i)
    for (size_t k = 0; k < a.cols(); ++k) {
      const cdouble aik = a(i, k);
      for (size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

CVec MatVec(const CMat &a, const CVec &x) {
  if (a.cols() != x.size()) throw ShapeError("MatVec: dimension mismatch");
  CVec out(a.rows());
  for (size_t i = 0; i < a.rows(); ++i) {
    cdouble s = 0.0;
    for (size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    out[i] = s;
  }
  return out;
}

CMat Outer(const CVec &x, const CVec &y) {
  CMat out(x.size(), y.size());
  for (size_t i = 0; i < x.size(); ++i)
    for (size_t j = 0; j < y.size(); ++j) out(i, j) = x[i] * std::conj(y[j]);
  return out;
}

cdouble Dot(const CVec &x, const CVec &y) {
  if (x.size() != y.size()) throw ShapeError("Dot: dimension mismatch");
  cdouble s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) s += std::conj(x[i]) * y[i];
  return s;
}

double Norm(const CVec &x) { return std::sqrt(Dot(x, x).real()); }

double HermitianAsymmetry(const CMat &a) {
  if (!a.square()) throw ShapeError("HermitianAsymmetry: matrix must be square");
  double m = 0.0;
  for (size_t i = 0; i < a.rows(); ++i)
    for (size_t j = i; j < a.cols(); ++j)
      m = std::max(m, std::abs(a(i, j) - std::conj(a(j, i))));
  return m;
}

double LoadingLambda(const CMat &a, double eps_rel) {
  const double mean_diag = a.Trace().real() / static_cast<double>(a.rows());
  return std::max(eps_rel * mean_diag, kLoadingFloor);
}

CMat InvLoaded(const CMat &a, double eps_rel, LoadingReport *report) {
  const CMat s = Loaded(a, eps_rel, report, "InvLoaded");
  const size_t n = s.rows();
  CMat inv(n, n);
  if (auto l = Cholesky(s)) {
    for (size_t j = 0; j < n; ++j) {
      CVec col(n, 0.0);
      col[j] = 1.0;
      CholeskySolveInPlace(*l, col);
      for (size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    }
  } else {
    if (report) report->cholesky_failed = true;
    inv = GaussJordan(s, CMat::Identity(n));
  }
  CMat out(n, n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) out(i, j) = 0.5 * (inv(i, j) + std::conj(inv(j, i)));
  return out;
}

CVec SolveLoaded(const CMat &a, const CVec &b, double eps_rel, LoadingReport *report) {
  if (a.rows() != b.size()) throw ShapeError("SolveLoaded: dimension mismatch");
  const CMat s = Loaded(a, eps_rel, report, "SolveLoaded");
  if (auto l = Cholesky(s)) {
    CVec x = b;
    CholeskySolveInPlace(*l, x);
    return x;
  }
  if (report) report->cholesky_failed = true;
  CMat rhs(b.size(), 1, b);
  return GaussJordan(s, rhs).entries();
}

void FixPhaseGauge(CVec &v) {
  if (v.empty()) return;
  const cdouble p = v[ArgMaxModulus(v)];
  const double mag = std::abs(p);
  if (mag == 0.0) return;
  const cdouble rot = std::conj(p) / mag;
  for (auto &x : v) x *= rot;
}

CVec PrincipalEigvec(const CMat &a, const EigenOptions &options) {
  RequireSquareFinite(a, "PrincipalEigvec");
  const size_t n = a.rows();
  const double fro = a.FrobeniusNorm();
  CVec v(n, 0.0);
  if (fro == 0.0) {
    v[0] = 1.0;
    return v;
  }

  CMat power = (1.0 / fro) * a;
  for (int s = 0; s < options.squarings; ++s) {
    power = MatMul(power, power);
    const double f = power.FrobeniusNorm();
    if (f == 0.0 || !std::isfinite(f)) break;
    power *= 1.0 / f;
  }

  // Start from the column of largest norm; it has a nonzero component along
  // the principal direction unless a is degenerate.
  size_t best = 0;
  double best_norm = -1.0;
  for (size_t j = 0; j < n; ++j) {
    double c = 0.0;
    for (size_t i = 0; i < n; ++i) c += std::norm(a(i, j));
    if (c > best_norm) best_norm = c, best = j;
  }
  for (size_t i = 0; i < n; ++i) v[i] = a(i, best);
  double nv = Norm(v);
  for (auto &x : v) x /= nv;

  for (int it = 0; it <= options.max_iter; ++it) {
    const CVec av = MatVec(a, v);
    const cdouble lambda = Dot(v, av);
    double res = 0.0;
    for (size_t i = 0; i < n; ++i) res += std::norm(av[i] - lambda * v[i]);
    if (std::sqrt(res) <= options.tol * fro) {
      FixPhaseGauge(v);
      return v;
    }
    if (it == options.max_iter) break;
    v = MatVec(power, v);
    nv = Norm(v);
    if (nv == 0.0 || !std::isfinite(nv))
      throw ConvergenceError("PrincipalEigvec: iterate collapsed to zero");
    for (auto &x : v) x /= nv;
  }
  throw ConvergenceError("PrincipalEigvec: no convergence after " +
                         std::to_string(options.max_iter) + " iterations");
}

}  // namespace adlmvdr
