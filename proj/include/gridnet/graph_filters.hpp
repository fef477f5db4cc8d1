#pragma once

#include "gridnet/spectral.hpp"

namespace gridnet {

/// Coefficients h_{k,t} of a graph-temporal filter: rows index the shift
/// power k = 0..K, columns the time tap t = 0..K_t-1. A single column is a
/// pure spatial filter.
struct FilterCoefficients {
  CMat h;  // (K+1) x K_t

  int spatial_order() const { return static_cast<int>(h.rows()) - 1; }
  int temporal_taps() const { return static_cast<int>(h.cols()); }

  static FilterCoefficients spatial(const CVec& coeffs) {
    FilterCoefficients f;
    f.h = coeffs;
    return f;
  }
};

/// w = sum_k h_k S^k x, evaluated by iterated shifts (S^k is never formed).
CVec apply_polynomial_filter(const CMat& S, const CVec& h, const CVec& x);

/// Matrix form sum_k h_k S^k, built column by column; test and bound
/// helper, O(K n^3).
CMat polynomial_filter_matrix(const CMat& S, const CVec& h);

/// Spectral response h~(lambda_i) = sum_k h_k lambda_i^k.
CVec transfer_function(const SpectralBasis& basis, const CVec& h);

/// Causal graph-temporal convolution w_t = sum_tau sum_k h_{k,tau} S^k
/// x_{t-tau}, zero-padded before t = 0. Output has the input's length.
CMat apply_temporal_graph_filter(const CMat& S, const FilterCoefficients& coeffs,
                                 const CMat& x_series);

/// Joint transfer function at point z: entry i = sum_t sum_k h_{k,t}
/// lambda_i^k z^{-t}.
CVec joint_transfer(const SpectralBasis& basis, const FilterCoefficients& coeffs,
                    cxd z);

}  // namespace gridnet
