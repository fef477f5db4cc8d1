#pragma once

#include <string>

#include "gridnet/graph_filters.hpp"

namespace gridnet {

/// Raised when a bound is evaluated outside its domain of validity
/// (e.g. the geometric-series permutation bound at eps >= 1).
struct BoundDomainError : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

/// Lower-triangular map M relating |filter coefficient perturbations| to
/// Bernstein polynomial coefficients on [0, rho_eps]:
///   M[m,k] = (-1)^(m-k) C(K,m) C(m,k) / rho_eps^m,  k <= m.
/// max_i [M^-1 |delta|]_i dominates max_{0<=x<=rho_eps} sum |delta_k| x^k.
struct BernsteinMap {
  int order = 0;
  double rho_eps = 1.0;
  RMat M;
};

BernsteinMap build_bernstein_map(int order, double rho_eps);

/// b = M^-1 d by forward substitution.
RVec bernstein_solve(const BernsteinMap& map, const RVec& d);

/// max_i [M^-1 |h_hat - h|]_i; dominates the spectral radius of the
/// filter-coefficient perturbation polynomial over the eps-pseudospectrum.
double transfer_error_bound(const CVec& h, const CVec& h_hat, double rho_eps);

/// M = max_{l=0..K} sum_{k=l}^K |h_k| C(k,l) sigma_max^(k-l).
double permutation_constant(const CVec& h, double sigma_max);

/// M * eps (1 - eps^K) / (1 - eps); requires 0 <= eps < 1.
double permutation_error_bound(const CVec& h, const CMat& S, double eps);
double permutation_error_bound_sigma(const CVec& h, double sigma_max, double eps);

struct BoundConstants {
  double mu1 = 1.0;
  double zeta1 = 0.0;
  double mu2 = 1.0;
  double zeta2 = 0.0;
};

/// mu1 (transfer + zeta1) + permutation: triangle-inequality composition
/// covering simultaneous coefficient and shift-operator changes.
double gcn_permutation_bound(const CVec& h, const CVec& h_hat, const CMat& S,
                             double eps, const BoundConstants& c = {});

/// One graph-filter feature layer followed by dense complex layers; the
/// unit used by the layer-propagation bound and its empirical checks.
struct FilterNetwork {
  CMat gso;
  CVec filter;              // h, length K+1
  std::vector<CMat> layers; // Theta_1 .. Theta_L
};

/// y = Theta_L CReLU(... CReLU(Theta_1 CReLU(H(S) x))); the final layer is
/// linear.
CVec filter_network_forward(const FilterNetwork& net, const CVec& x);

struct PropagationBound {
  double delta_L = 0.0;         // with-constants recursion value
  double chain_two_layer = 0.0; // sigma(Theta_1) |H - H_hat|_2 + dw_1 |H_hat|_2
};

/// Layer-propagation bound for ||y - y_hat|| over unit-ball inputs.
/// delta_L follows the Psi_1/Psi_2 recursion; chain_two_layer is the
/// constant-free intermediate inequality checked empirically.
PropagationBound layer_propagation_bound(const FilterNetwork& base,
                                         const FilterNetwork& perturbed,
                                         double eps,
                                         const BoundConstants& c = {});

/// Gaussian matrix rescaled to the operator-norm sphere |E|_2 = eps.
CMat random_perturbation(Eigen::Index n, double eps, Rng& rng);

/// Monte-Carlo falsifiers: deterministic given seed, running max over
/// trials of the realized quantity for perturbations on the eps-sphere.
double empirical_worst_transfer(const CMat& S, const CVec& h, const CVec& h_hat,
                                double eps, int trials, std::uint64_t seed);
double empirical_worst_permutation(const CMat& S, const CVec& h, double eps,
                                   int trials, std::uint64_t seed);

/// Verdict of one perturbation experiment.
struct BoundReport {
  std::string experiment;
  std::string kind;  // transfer | permutation | gcn | layer
  double theoretical = 0.0;
  double empirical = 0.0;
  int trials = 0;
  bool satisfied = true;
  double epsilon = 0.0;
  int order = 0;
  int nodes = 0;
  std::uint64_t seed = 0;
};

inline bool bound_satisfied(double empirical, double theoretical) {
  return empirical <= theoretical + 1e-9 * std::abs(theoretical) + 1e-12;
}

/// Transfer-error experiment: per trial draws E on the eps-sphere, evaluates the
/// bound at rho_eps(S + E) and the realized rho(sum delta_k S_hat^k);
/// satisfied only if every trial is.
BoundReport run_transfer_experiment(const CMat& S, const CVec& h, const CVec& h_hat,
                                    double eps, int trials, std::uint64_t seed,
                                    const PseudospectrumQuery& pq = {});

/// Shift-perturbation experiment: realized |H(S_hat) - H(S)|_2 against the
/// geometric-series bound.
BoundReport run_permutation_experiment(const CMat& S, const CVec& h, double eps,
                                       int trials, std::uint64_t seed);

/// Joint coefficient+shift experiment: realized rho(H_hat(S_hat) - H(S)) against the
/// composed bound at the configured constants.
BoundReport run_gcn_experiment(const CMat& S, const CVec& h, const CVec& h_hat,
                               double eps, int trials, std::uint64_t seed,
                               const BoundConstants& c = {},
                               const PseudospectrumQuery& pq = {});

/// Two-layer propagation experiment: max ||y - y_hat|| over unit-ball inputs
/// against the constant-free two-layer chain value.
BoundReport run_layer_experiment(const FilterNetwork& base,
                                 const FilterNetwork& perturbed, double eps,
                                 int n_inputs, std::uint64_t seed);

}  // namespace gridnet
