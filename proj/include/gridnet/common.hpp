#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gridnet {

using cxd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using IVec = Eigen::VectorXi;

inline constexpr cxd imag_unit{0.0, 1.0};

/// Thrown when an input violates an operation's preconditions.
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an iterative numerical procedure fails to converge or
/// produces non-finite values.
struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Deterministic random stream. Wraps a 64-bit Mersenne twister but
/// generates uniforms and normals itself so that sequences do not depend
/// on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  int uniform_int(int n) {
    return static_cast<int>(uniform() * static_cast<double>(n));
  }

  /// Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  /// Circular complex normal with E|z|^2 = sd^2.
  cxd cnormal(double sd = 1.0) {
    const double s = sd / std::sqrt(2.0);
    return {s * normal(), s * normal()};
  }

  CVec cnormal_vec(Eigen::Index n, double sd = 1.0) {
    CVec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = cnormal(sd);
    return v;
  }

  CMat cnormal_mat(Eigen::Index rows, Eigen::Index cols, double sd = 1.0) {
    CMat m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = cnormal(sd);
    return m;
  }

  /// Derive an independent child stream; used to give submodules their
  /// own reproducible sequences.
  Rng spawn(std::uint64_t salt) {
    return Rng(engine_() ^ (salt * 0x9e3779b97f4a7c15ULL));
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Largest singular value (operator 2-norm).
double operator_norm(const CMat& m);

/// Spectral radius max|lambda|.
double spectral_radius(const CMat& m);

inline bool all_finite(const CMat& m) { return m.allFinite(); }
inline bool all_finite(const CVec& v) { return v.allFinite(); }

}  // namespace gridnet
