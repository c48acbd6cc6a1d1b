// adlmvdr/linalg/cmat.h
//
// Small dense complex matrices: the classical MVDR pieces (loaded
// inversion and principal-eigenvector extraction) that the recurrent
// estimators replace. Sizes stay below ~64x64.

#ifndef ADLMVDR_LINALG_CMAT_H_
#define ADLMVDR_LINALG_CMAT_H_

#include <cstddef>
#include <span>
#include <vector>

#include "adlmvdr/base/ndarray.h"

namespace adlmvdr {

using CVec = std::vector<cdouble>;

class CMat {
 public:
  CMat() = default;
  CMat(size_t rows, size_t cols) : rows_(rows), cols_(cols), a_(rows * cols) {}
  CMat(size_t rows, size_t cols, std::vector<cdouble> entries);
  // Copies an n x n block stored row-major at p.
  static CMat FromSquare(const cdouble *p, size_t n);
  static CMat Identity(size_t n);
  static CMat Diagonal(std::span<const cdouble> diag);

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  cdouble &operator()(size_t i, size_t j) { return a_[i * cols_ + j]; }
  const cdouble &operator()(size_t i, size_t j) const { return a_[i * cols_ + j]; }
  const std::vector<cdouble> &entries() const { return a_; }
  std::vector<cdouble> &entries() { return a_; }

  CMat &operator+=(const CMat &b);
  CMat &operator*=(cdouble s);

  double FrobeniusNorm() const;
  double MaxAbs() const;
  cdouble Trace() const;
  bool AllFinite() const;

 private:
  size_t rows_ = 0, cols_ = 0;
  std::vector<cdouble> a_;
};

CMat operator+(CMat a, const CMat &b);
CMat operator-(const CMat &a, const CMat &b);
CMat operator*(cdouble s, CMat a);

CMat Hermitian(const CMat &a);
CMat MatMul(const CMat &a, const CMat &b);
CVec MatVec(const CMat &a, const CVec &x);
// x y^H
CMat Outer(const CVec &x, const CVec &y);
// x^H y
cdouble Dot(const CVec &x, const CVec &y);
double Norm(const CVec &x);
// max |a_ij - conj(a_ji)|
double HermitianAsymmetry(const CMat &a);

inline constexpr double kDefaultLoadingRel = 1e-6;
inline constexpr double kLoadingFloor = 1e-10;

// lambda = max(eps_rel * Re(trace(a)) / n, 1e-10).
double LoadingLambda(const CMat &a, double eps_rel);

struct LoadingReport {
  double lambda = 0.0;
  bool cholesky_failed = false;  // fell back to pivoted elimination
};

// (sym(a) + lambda I)^{-1}, sym(a) = (a + a^H) / 2. Cholesky first,
// Gauss-Jordan with partial pivoting when Cholesky meets a non-positive pivot.
// The result is symmetrized. Throws on non-square or non-finite input.
CMat InvLoaded(const CMat &a, double eps_rel = kDefaultLoadingRel,
               LoadingReport *report = nullptr);

// (sym(a) + lambda I)^{-1} b without forming the inverse.
CVec SolveLoaded(const CMat &a, const CVec &b, double eps_rel = kDefaultLoadingRel,
                 LoadingReport *report = nullptr);

struct EigenOptions {
  double tol = 1e-8;
  int max_iter = 200;
  // Each iteration applies a^(2^squarings); squaring sharpens the eigengap
  // so matrices with close leading eigenvalues still converge.
  int squarings = 3;
};

// Unit-norm principal eigenvector of a Hermitian PSD matrix by power
// iteration, gauge fixed so the largest-modulus entry is real positive.
// Converged when |a v - (v^H a v) v| <= tol * |a|_F. A zero matrix yields e_0.
// Throws ConvergenceError after max_iter iterations.
CVec PrincipalEigvec(const CMat &a, const EigenOptions &options = {});

// Rotates v so its largest-modulus entry is real positive.
void FixPhaseGauge(CVec &v);

}  // namespace adlmvdr

#endif  // ADLMVDR_LINALG_CMAT_H_
