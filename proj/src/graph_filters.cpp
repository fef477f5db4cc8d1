#include "gridnet/graph_filters.hpp"

namespace gridnet {

CVec apply_polynomial_filter(const CMat& S, const CVec& h, const CVec& x) {
  if (S.rows() != S.cols() || S.rows() != x.size())
    throw InvalidArgument("apply_polynomial_filter: dimension mismatch");
  if (h.size() == 0)
    throw InvalidArgument("apply_polynomial_filter: empty coefficients");
  CVec shifted = x;
  CVec w = h(0) * x;
  for (Eigen::Index k = 1; k < h.size(); ++k) {
    shifted = S * shifted;
    w += h(k) * shifted;
  }
  return w;
}

CMat polynomial_filter_matrix(const CMat& S, const CVec& h) {
  const Eigen::Index n = S.rows();
  CMat shifted = CMat::Identity(n, n);
  CMat out = h(0) * CMat::Identity(n, n);
  for (Eigen::Index k = 1; k < h.size(); ++k) {
    shifted = S * shifted;
    out += h(k) * shifted;
  }
  return out;
}

CVec transfer_function(const SpectralBasis& basis, const CVec& h) {
  const Eigen::Index n = basis.eigenvalues.size();
  CVec response = CVec::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    cxd pw{1.0, 0.0};
    for (Eigen::Index k = 0; k < h.size(); ++k) {
      response(i) += h(k) * pw;
      pw *= basis.eigenvalues(i);
    }
  }
  return response;
}

CMat apply_temporal_graph_filter(const CMat& S, const FilterCoefficients& coeffs,
                                 const CMat& x_series) {
  if (S.rows() != x_series.rows())
    throw InvalidArgument("apply_temporal_graph_filter: dimension mismatch");
  if (x_series.cols() < 1)
    throw InvalidArgument("apply_temporal_graph_filter: empty series");
  const int order = coeffs.spatial_order();
  const int taps = coeffs.temporal_taps();
  const Eigen::Index len = x_series.cols();

  // Precompute S^k X once; each output step is then a coefficient sum.
  std::vector<CMat> shifted(order + 1);
  shifted[0] = x_series;
  for (int k = 1; k <= order; ++k) shifted[k] = S * shifted[k - 1];

  CMat out = CMat::Zero(x_series.rows(), len);
  for (Eigen::Index t = 0; t < len; ++t)
    for (int tau = 0; tau <= std::min<Eigen::Index>(t, taps - 1); ++tau)
      for (int k = 0; k <= order; ++k)
        out.col(t) += coeffs.h(k, tau) * shifted[k].col(t - tau);
  return out;
}

CVec joint_transfer(const SpectralBasis& basis, const FilterCoefficients& coeffs,
                    cxd z) {
  if (z == cxd{0.0, 0.0})
    throw InvalidArgument("joint_transfer: z must be nonzero");
  const Eigen::Index n = basis.eigenvalues.size();
  const int order = coeffs.spatial_order();
  const int taps = coeffs.temporal_taps();
  const cxd zinv = cxd{1.0, 0.0} / z;

  CVec response = CVec::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    cxd zpow{1.0, 0.0};
    for (int t = 0; t < taps; ++t) {
      cxd lpow{1.0, 0.0};
      for (int k = 0; k <= order; ++k) {
        response(i) += coeffs.h(k, t) * lpow * zpow;
        lpow *= basis.eigenvalues(i);
      }
      zpow *= zinv;
    }
  }
  return response;
}

}  // namespace gridnet
