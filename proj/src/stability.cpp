#include "gridnet/stability.hpp"

#include <cmath>

#include "gridnet/cplx_nn.hpp"

namespace gridnet {

namespace {

double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return r;
}

}  // namespace

BernsteinMap build_bernstein_map(int order, double rho_eps) {
  if (rho_eps <= 0.0)
    throw InvalidArgument("build_bernstein_map: rho_eps must be > 0");
  if (order < 0) throw InvalidArgument("build_bernstein_map: order must be >= 0");

  BernsteinMap map;
  map.order = order;
  map.rho_eps = rho_eps;
  map.M = RMat::Zero(order + 1, order + 1);
  for (int m = 0; m <= order; ++m) {
    const double scale = std::pow(rho_eps, -m);
    for (int k = 0; k <= m; ++k) {
      const double sign = ((m - k) % 2 == 0) ? 1.0 : -1.0;
      map.M(m, k) = sign * binom(order, m) * binom(m, k) * scale;
    }
  }
  return map;
}

RVec bernstein_solve(const BernsteinMap& map, const RVec& d) {
  const int n = map.order + 1;
  if (d.size() != n) throw InvalidArgument("bernstein_solve: length mismatch");
  RVec b(n);
  for (int m = 0; m < n; ++m) {
    double acc = d(m);
    for (int k = 0; k < m; ++k) acc -= map.M(m, k) * b(k);
    b(m) = acc / map.M(m, m);
  }
  return b;
}

double transfer_error_bound(const CVec& h, const CVec& h_hat, double rho_eps) {
  if (h.size() != h_hat.size())
    throw InvalidArgument("transfer_error_bound: coefficient length mismatch");
  const int order = static_cast<int>(h.size()) - 1;
  const BernsteinMap map = build_bernstein_map(order, rho_eps);
  const RVec delta_abs = (h_hat - h).cwiseAbs();
  return bernstein_solve(map, delta_abs).maxCoeff();
}

double permutation_constant(const CVec& h, double sigma_max) {
  if (sigma_max < 0.0)
    throw InvalidArgument("permutation_constant: sigma_max must be >= 0");
  const int order = static_cast<int>(h.size()) - 1;
  double best = 0.0;
  for (int l = 0; l <= order; ++l) {
    double sum = 0.0;
    for (int k = l; k <= order; ++k)
      sum += std::abs(h(k)) * binom(k, l) * std::pow(sigma_max, k - l);
    best = std::max(best, sum);
  }
  return best;
}

double permutation_error_bound_sigma(const CVec& h, double sigma_max, double eps) {
  if (eps < 0.0 || eps >= 1.0)
    throw BoundDomainError(
        "permutation_error_bound: geometric form requires 0 <= eps < 1");
  const int order = static_cast<int>(h.size()) - 1;
  const double m = permutation_constant(h, sigma_max);
  return m * eps * (1.0 - std::pow(eps, order)) / (1.0 - eps);
}

double permutation_error_bound(const CVec& h, const CMat& S, double eps) {
  return permutation_error_bound_sigma(h, operator_norm(S), eps);
}

double gcn_permutation_bound(const CVec& h, const CVec& h_hat, const CMat& S,
                             double eps, const BoundConstants& c) {
  const double rho_eps = pseudospectral_radius(S, eps);
  const double transfer = transfer_error_bound(h, h_hat, rho_eps);
  const double perm = permutation_error_bound(h, S, eps);
  return c.mu1 * (transfer + c.zeta1) + perm;
}

CVec filter_network_forward(const FilterNetwork& net, const CVec& x) {
  CVec z = crelu(CVec(apply_polynomial_filter(net.gso, net.filter, x)));
  const size_t depth = net.layers.size();
  for (size_t l = 0; l < depth; ++l) {
    CVec u = net.layers[l] * z;
    z = (l + 1 < depth) ? crelu(u) : u;
  }
  return z;
}

PropagationBound layer_propagation_bound(const FilterNetwork& base,
                                         const FilterNetwork& perturbed,
                                         double eps, const BoundConstants& c) {
  if (base.layers.size() != perturbed.layers.size() || base.layers.empty())
    throw InvalidArgument("layer_propagation_bound: layer count mismatch");
  if (base.filter.size() != perturbed.filter.size())
    throw InvalidArgument("layer_propagation_bound: filter length mismatch");

  const size_t depth = base.layers.size();
  std::vector<double> dw(depth), sig(depth), sig_hat(depth);
  for (size_t l = 0; l < depth; ++l) {
    dw[l] = operator_norm(base.layers[l] - perturbed.layers[l]);
    sig[l] = operator_norm(base.layers[l]);
    sig_hat[l] = operator_norm(perturbed.layers[l]);
  }

  // Psi_1 bounds |H_hat(S_hat)|_2, Psi_2 bounds |H_hat(S_hat) - H(S)|_2,
  // both through the Bernstein map at rho_eps of the perturbed shift.
  const double rho_eps = pseudospectral_radius(perturbed.gso, eps);
  const BernsteinMap map =
      build_bernstein_map(static_cast<int>(base.filter.size()) - 1, rho_eps);
  const double psi1 =
      c.mu2 *
      (bernstein_solve(map, RVec(perturbed.filter.cwiseAbs())).maxCoeff() +
       c.zeta2);
  const double transfer =
      bernstein_solve(map, RVec((perturbed.filter - base.filter).cwiseAbs()))
          .maxCoeff();
  const double psi2 = c.mu1 * (transfer + c.zeta1) +
                      permutation_error_bound(base.filter, base.gso, eps);

  PropagationBound out;
  double delta = dw[0] * psi1 + sig[0] * psi2;  // Delta_1
  double hat_prod = 1.0;
  for (size_t l = 1; l < depth; ++l) {
    hat_prod *= sig_hat[l - 1];
    delta = sig[l] * delta + dw[l] * hat_prod * psi1;
  }
  out.delta_L = delta;

  const CMat filt = polynomial_filter_matrix(base.gso, base.filter);
  const CMat filt_hat = polynomial_filter_matrix(perturbed.gso, perturbed.filter);
  out.chain_two_layer =
      sig[0] * operator_norm(filt - filt_hat) + dw[0] * operator_norm(filt_hat);
  return out;
}

CMat random_perturbation(Eigen::Index n, double eps, Rng& rng) {
  if (eps == 0.0) return CMat::Zero(n, n);
  CMat e = rng.cnormal_mat(n, n);
  const double nrm = operator_norm(e);
  if (nrm == 0.0) return CMat::Zero(n, n);
  return e * (eps / nrm);
}

double empirical_worst_transfer(const CMat& S, const CVec& h, const CVec& h_hat,
                                double eps, int trials, std::uint64_t seed) {
  if (trials < 1) throw InvalidArgument("empirical_worst_transfer: trials >= 1");
  Rng rng(seed);
  const CVec delta = h_hat - h;
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const CMat s_hat = S + random_perturbation(S.rows(), eps, rng);
    worst = std::max(worst, spectral_radius(polynomial_filter_matrix(s_hat, delta)));
  }
  return worst;
}

double empirical_worst_permutation(const CMat& S, const CVec& h, double eps,
                                   int trials, std::uint64_t seed) {
  if (trials < 1)
    throw InvalidArgument("empirical_worst_permutation: trials >= 1");
  Rng rng(seed);
  const CMat base = polynomial_filter_matrix(S, h);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const CMat s_hat = S + random_perturbation(S.rows(), eps, rng);
    worst = std::max(worst,
                     operator_norm(polynomial_filter_matrix(s_hat, h) - base));
  }
  return worst;
}

BoundReport run_transfer_experiment(const CMat& S, const CVec& h, const CVec& h_hat,
                                    double eps, int trials, std::uint64_t seed,
                                    const PseudospectrumQuery& pq) {
  Rng rng(seed);
  const CVec delta = h_hat - h;
  BoundReport report;
  report.kind = "transfer";
  report.trials = trials;
  report.epsilon = eps;
  report.order = static_cast<int>(h.size()) - 1;
  report.nodes = static_cast<int>(S.rows());
  report.seed = seed;

  PseudospectrumQuery query = pq;
  query.epsilon = eps;
  for (int t = 0; t < trials; ++t) {
    const CMat s_hat = S + random_perturbation(S.rows(), eps, rng);
    const double rho_eps = pseudospectral_radius(s_hat, query);
    const double bound = transfer_error_bound(h, h_hat, rho_eps);
    const double realized = spectral_radius(polynomial_filter_matrix(s_hat, delta));
    if (!bound_satisfied(realized, bound)) report.satisfied = false;
    if (realized >= report.empirical) {
      report.empirical = realized;
      report.theoretical = bound;
    }
  }
  return report;
}

BoundReport run_permutation_experiment(const CMat& S, const CVec& h, double eps,
                                       int trials, std::uint64_t seed) {
  BoundReport report;
  report.kind = "permutation";
  report.trials = trials;
  report.epsilon = eps;
  report.order = static_cast<int>(h.size()) - 1;
  report.nodes = static_cast<int>(S.rows());
  report.seed = seed;
  report.theoretical = permutation_error_bound(h, S, eps);
  report.empirical = empirical_worst_permutation(S, h, eps, trials, seed);
  report.satisfied = bound_satisfied(report.empirical, report.theoretical);
  return report;
}

BoundReport run_gcn_experiment(const CMat& S, const CVec& h, const CVec& h_hat,
                               double eps, int trials, std::uint64_t seed,
                               const BoundConstants& c,
                               const PseudospectrumQuery& pq) {
  Rng rng(seed);
  BoundReport report;
  report.kind = "gcn";
  report.trials = trials;
  report.epsilon = eps;
  report.order = static_cast<int>(h.size()) - 1;
  report.nodes = static_cast<int>(S.rows());
  report.seed = seed;

  const CMat base = polynomial_filter_matrix(S, h);
  const double perm = permutation_error_bound(h, S, eps);
  PseudospectrumQuery query = pq;
  query.epsilon = eps;
  for (int t = 0; t < trials; ++t) {
    const CMat s_hat = S + random_perturbation(S.rows(), eps, rng);
    const double rho_eps = pseudospectral_radius(s_hat, query);
    const double bound =
        c.mu1 * (transfer_error_bound(h, h_hat, rho_eps) + c.zeta1) + perm;
    const double realized =
        spectral_radius(polynomial_filter_matrix(s_hat, h_hat) - base);
    if (!bound_satisfied(realized, bound)) report.satisfied = false;
    if (realized >= report.empirical) {
      report.empirical = realized;
      report.theoretical = bound;
    }
  }
  return report;
}

BoundReport run_layer_experiment(const FilterNetwork& base,
                                 const FilterNetwork& perturbed, double eps,
                                 int n_inputs, std::uint64_t seed) {
  if (base.layers.size() != 1 || perturbed.layers.size() != 1)
    throw InvalidArgument(
        "run_layer_experiment: the proof-chain check is for the two-layer "
        "model (one filter layer, one dense layer)");
  Rng rng(seed);
  BoundReport report;
  report.kind = "layer";
  report.trials = n_inputs;
  report.epsilon = eps;
  report.order = static_cast<int>(base.filter.size()) - 1;
  report.nodes = static_cast<int>(base.gso.rows());
  report.seed = seed;
  report.theoretical = layer_propagation_bound(base, perturbed, eps).chain_two_layer;

  const Eigen::Index n = base.gso.rows();
  for (int t = 0; t < n_inputs; ++t) {
    CVec x = rng.cnormal_vec(n);
    const double nrm = x.norm();
    if (nrm > 0.0) x *= rng.uniform() / nrm;  // uniform radius in the unit ball
    const double realized =
        (filter_network_forward(base, x) - filter_network_forward(perturbed, x))
            .norm();
    report.empirical = std::max(report.empirical, realized);
  }
  report.satisfied = bound_satisfied(report.empirical, report.theoretical);
  return report;
}

}  // namespace gridnet
