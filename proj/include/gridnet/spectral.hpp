#pragma once

#include "gridnet/common.hpp"

namespace gridnet {

/// Raised when an eigenvector of a complex symmetric matrix cannot be
/// normalized to v^T v = 1 (|v^T v| below threshold), or when the
/// normalized basis fails the complex-orthogonality residual.
struct DegenerateDecomposition : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};

/// Eigenbasis of a complex symmetric shift operator: S = U Lambda U^T with
/// U^T U = I (complex-orthogonal, no conjugation). Columns are ordered by
/// ascending |lambda|; ties broken by complex argument.
struct SpectralBasis {
  CVec eigenvalues;  // sorted
  CMat U;

  int nodes() const { return static_cast<int>(U.rows()); }
};

struct PseudospectrumQuery {
  double epsilon = 0.0;
  int angle_resolution = 48;  // coarse polar grid size
  double tol = 1e-6;          // radius refinement tolerance
};

SpectralBasis spectral_decompose(const CMat& S);

/// x_hat = U^T x.
CVec gft(const SpectralBasis& basis, const CVec& x);

/// x = U x_hat.
CVec igft(const SpectralBasis& basis, const CVec& x_hat);

/// Largest |z| with sigma_min(zI - S) <= eps, located by a polar grid
/// search with radial bisection and local angle refinement. The search is
/// seeded on the eigenvalue disks, so the result always dominates the
/// spectral radius; it never exceeds sigma_max(S) + eps.
double pseudospectral_radius(const CMat& S, const PseudospectrumQuery& query);

inline double pseudospectral_radius(const CMat& S, double eps, double tol = 1e-6) {
  return pseudospectral_radius(S, PseudospectrumQuery{eps, 48, tol});
}

}  // namespace gridnet
