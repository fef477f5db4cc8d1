#include "gridnet/spectral.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace gridnet {

SpectralBasis spectral_decompose(const CMat& S) {
  const Eigen::Index n = S.rows();
  if (n == 0 || S.cols() != n)
    throw InvalidArgument("spectral_decompose: matrix must be square");
  const double scale = std::max(1.0, S.norm());
  if ((S - S.transpose()).norm() > 1e-10 * scale)
    throw InvalidArgument("spectral_decompose: matrix is not complex symmetric");

  Eigen::ComplexEigenSolver<CMat> es(S, /*computeEigenvectors=*/true);
  if (es.info() != Eigen::Success)
    throw NumericalFailure("spectral_decompose: eigensolver failed");

  CVec lambda = es.eigenvalues();
  CMat V = es.eigenvectors();

  // Normalize to v^T v = 1 (transpose, not adjoint). A vanishing v^T v
  // means the complex-orthogonal basis does not exist for this matrix.
  for (Eigen::Index i = 0; i < n; ++i) {
    const cxd q = V.col(i).transpose() * V.col(i);
    if (std::abs(q) < 1e-10)
      throw DegenerateDecomposition(
          "spectral_decompose: quasi-null eigenvector (v^T v ~ 0)");
    V.col(i) /= std::sqrt(q);
  }

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double ma = std::abs(lambda(a)), mb = std::abs(lambda(b));
    if (ma != mb) return ma < mb;
    return std::arg(lambda(a)) < std::arg(lambda(b));
  });

  SpectralBasis basis;
  basis.eigenvalues = CVec(n);
  basis.U = CMat(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    basis.eigenvalues(i) = lambda(order[i]);
    basis.U.col(i) = V.col(order[i]);
  }

  const double ortho = (basis.U.transpose() * basis.U - CMat::Identity(n, n)).norm();
  if (ortho > 1e-8)
    throw DegenerateDecomposition(
        "spectral_decompose: basis failed U^T U = I within 1e-8");
  const double recon =
      (S - basis.U * basis.eigenvalues.asDiagonal() * basis.U.transpose()).norm();
  if (recon > 1e-8 * scale)
    throw DegenerateDecomposition(
        "spectral_decompose: reconstruction residual above 1e-8");
  return basis;
}

CVec gft(const SpectralBasis& basis, const CVec& x) {
  if (x.size() != basis.U.rows()) throw InvalidArgument("gft: dimension mismatch");
  return basis.U.transpose() * x;
}

CVec igft(const SpectralBasis& basis, const CVec& x_hat) {
  if (x_hat.size() != basis.U.rows())
    throw InvalidArgument("igft: dimension mismatch");
  return basis.U * x_hat;
}

namespace {

// sigma_min(zI - T) for upper-triangular T, by inverse iteration on the
// Hermitian square: two triangular solves per step, O(n^2). Intermediate
// estimates can only overestimate sigma_min, which keeps the grid search a
// valid inner approximation.
double sigma_min_shifted(const CMat& T, cxd z) {
  const Eigen::Index n = T.rows();
  CMat A = -T;
  A.diagonal().array() += z;

  double dmin = A.diagonal().cwiseAbs().minCoeff();
  if (dmin < 1e-290) return 0.0;  // z numerically on the spectrum

  const auto upper = A.triangularView<Eigen::Upper>();
  CVec w = CVec::Constant(n, cxd{1.0, 0.0});
  w(0) = cxd{1.0, 0.3};  // break symmetry against unlucky orthogonal starts
  w /= w.norm();

  double sigma = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 40; ++it) {
    const CVec u = upper.adjoint().solve(w);
    const CVec y = upper.solve(u);
    const double mu = y.norm();
    if (!(mu > 0.0) || !std::isfinite(mu)) return 0.0;
    const double next = 1.0 / std::sqrt(mu);
    const bool settled = std::abs(next - sigma) <= 1e-4 * next;
    sigma = next;
    if (settled && it >= 3) break;
    w = y / mu;
  }
  return sigma;
}

// Largest radius r in (r_from, r_hi] with sigma_min(r e^{i th} I - T) <= eps,
// or r_from when the ray offers no improvement. Coarse upward scan followed
// by bisection against the first infeasible point above.
double improve_along_ray(const CMat& T, double theta, double eps,
                         double r_from, double r_hi, double tol) {
  if (r_hi <= r_from + tol) return r_from;
  const cxd dir{std::cos(theta), std::sin(theta)};
  const int steps = 32;
  const double step = std::max(tol, (r_hi - r_from) / steps);

  double best = -1.0;
  for (double r = r_from + step; r <= r_hi + 0.5 * step; r += step) {
    const double rc = std::min(r, r_hi);
    if (sigma_min_shifted(T, rc * dir) <= eps) best = rc;
  }
  if (best < 0.0) return r_from;

  double lo = best;                          // feasible
  double hi = std::min(best + step, r_hi);   // infeasible or cap
  if (hi <= lo) return lo;
  if (sigma_min_shifted(T, hi * dir) <= eps) return hi;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (sigma_min_shifted(T, mid * dir) <= eps)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

}  // namespace

double pseudospectral_radius(const CMat& S, const PseudospectrumQuery& query) {
  const Eigen::Index n = S.rows();
  if (n == 0 || S.cols() != n)
    throw InvalidArgument("pseudospectral_radius: matrix must be square");
  if (query.epsilon < 0.0)
    throw InvalidArgument("pseudospectral_radius: epsilon must be >= 0");
  const double eps = query.epsilon;
  const double tol = query.tol;

  Eigen::ComplexSchur<CMat> schur(S, /*computeU=*/false);
  if (schur.info() != Eigen::Success)
    throw NumericalFailure("pseudospectral_radius: Schur decomposition failed");
  const CMat& T = schur.matrixT();

  const CVec lambda = T.diagonal();
  Eigen::Index imax = 0;
  lambda.cwiseAbs().maxCoeff(&imax);
  const double rho = std::abs(lambda(imax));
  if (eps == 0.0) return rho;

  const double r_hi = operator_norm(S) + eps;
  const double r_lo = std::max(0.0, rho - eps);

  // The eps-disk around the outermost eigenvalue certifies this radius.
  double r_star = std::max(r_lo, rho + eps * (1.0 - 1e-9));
  double best_theta =
      (rho > 0.0) ? std::arg(lambda(imax)) : 0.0;

  std::vector<double> angles;
  const int res = std::max(8, query.angle_resolution);
  angles.reserve(res + n);
  for (int k = 0; k < res; ++k) angles.push_back(2.0 * M_PI * k / res);
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::abs(lambda(i)) > 0.0) angles.push_back(std::arg(lambda(i)));

  for (double theta : angles) {
    const double r = improve_along_ray(T, theta, eps, r_star, r_hi, tol);
    if (r > r_star) {
      r_star = r;
      best_theta = theta;
    }
  }

  // Local angle refinement around the best ray.
  double dtheta = M_PI / res;
  while (dtheta * std::max(r_star, 1.0) > tol) {
    bool moved = false;
    for (double theta : {best_theta - dtheta, best_theta + dtheta}) {
      const double r = improve_along_ray(T, theta, eps, r_star, r_hi, tol);
      if (r > r_star) {
        r_star = r;
        best_theta = theta;
        moved = true;
      }
    }
    if (!moved) dtheta *= 0.5;
  }
  return std::min(r_star, r_hi);
}

}  // namespace gridnet
