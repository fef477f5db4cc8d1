#include "gridnet/sensing.hpp"

#include <algorithm>

#include <Eigen/SVD>

namespace gridnet {

namespace {

double submatrix_sigma_min(const CMat& u_k, const std::vector<int>& rows) {
  CMat sub(rows.size(), u_k.cols());
  for (size_t r = 0; r < rows.size(); ++r) sub.row(r) = u_k.row(rows[r]);
  Eigen::JacobiSVD<CMat> svd(sub);
  return svd.singularValues().minCoeff();
}

}  // namespace

SensorPlan greedy_sensor_placement(const SpectralBasis& basis, int freq_count,
                                   int m) {
  const int n = basis.nodes();
  if (freq_count < 1 || freq_count > n)
    throw InvalidArgument("greedy_sensor_placement: bad frequency count");
  if (m < freq_count)
    throw InvalidArgument("greedy_sensor_placement: need m >= |K|");
  if (m > n) throw InvalidArgument("greedy_sensor_placement: m exceeds node count");

  const CMat u_k = basis.U.leftCols(freq_count);

  SensorPlan plan;
  plan.frequency_count = freq_count;
  std::vector<char> taken(n, 0);
  std::vector<int> candidate;
  for (int step = 0; step < m; ++step) {
    int best_bus = -1;
    double best_sigma = -1.0;
    for (int b = 0; b < n; ++b) {
      if (taken[b]) continue;
      candidate = plan.buses;
      candidate.push_back(b);
      const double s = submatrix_sigma_min(u_k, candidate);
      if (s > best_sigma) {  // strict: ties resolve to the lowest index
        best_sigma = s;
        best_bus = b;
      }
    }
    taken[best_bus] = 1;
    plan.buses.push_back(best_bus);
    plan.step_sigma.push_back(best_sigma);
    plan.sigma_min = best_sigma;
  }
  return plan;
}

namespace {

CMat pseudo_inverse(const CMat& a, double rel_cutoff = 1e-12) {
  Eigen::JacobiSVD<CMat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? rel_cutoff * sv(0) : 0.0;
  RVec inv = RVec::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) inv(i) = 1.0 / sv(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

}  // namespace

RlsSolver::RlsSolver(const MeasurementOperator& op, const CMat& S, double mu1) {
  if (mu1 < 0.0) throw InvalidArgument("RlsSolver: mu1 must be >= 0");
  if (S.rows() != op.nodes() || S.cols() != op.nodes())
    throw InvalidArgument("RlsSolver: GSO shape mismatch");
  const CMat h_nat = op.natural();
  const CMat normal_eq = h_nat.adjoint() * h_nat + mu1 * S;
  map_ = pseudo_inverse(normal_eq) * h_nat.adjoint();
}

CVec RlsSolver::recover(const CVec& z) const {
  if (z.size() != map_.cols()) throw InvalidArgument("RlsSolver: z length mismatch");
  return map_ * z;
}

CMat RlsSolver::recover_window(const CMat& z_window) const {
  if (z_window.rows() != map_.cols())
    throw InvalidArgument("RlsSolver: window shape mismatch");
  return map_ * z_window;
}

CVec rls_recover(const CVec& z, const MeasurementOperator& op, const CMat& S,
                 double mu1) {
  return RlsSolver(op, S, mu1).recover(z);
}

AttackInstance stealthy_attack(const AdmittanceModel& model,
                               const std::vector<int>& observed,
                               const std::vector<int>& compromised, double alpha,
                               Rng& rng) {
  AttackInstance attack;
  attack.compromised = compromised;
  attack.alpha = alpha;
  attack.delta_x = CVec::Zero(model.node_count);
  if (compromised.empty()) return attack;

  std::vector<char> in_c(model.node_count, 0);
  for (int b : compromised) {
    if (b < 0 || b >= model.node_count)
      throw InvalidArgument("stealthy_attack: compromised bus out of range");
    in_c[b] = 1;
  }
  std::vector<int> honest;  // P = A \ C
  for (int b : observed) {
    if (!in_c[b]) honest.push_back(b);
  }

  const int c_size = static_cast<int>(compromised.size());
  CVec combo;
  if (honest.empty()) {
    // No honest sensor constrains the perturbation.
    combo = rng.cnormal_vec(c_size);
  } else {
    CMat y_pc(honest.size(), c_size);
    for (size_t r = 0; r < honest.size(); ++r)
      for (int c = 0; c < c_size; ++c)
        y_pc(r, c) = model.Y(honest[r], compromised[c]);

    Eigen::JacobiSVD<CMat> svd(y_pc, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double sigma_max = sv.size() > 0 ? sv(0) : 0.0;
    const double cutoff = 1e-10 * std::max(sigma_max, 1e-300);
    int null_dim = c_size - static_cast<int>(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) <= cutoff) ++null_dim;
    if (null_dim == 0)
      throw NoNullSpace("stealthy_attack: Y_PC has full column rank");

    const CMat basis = svd.matrixV().rightCols(null_dim);
    combo = basis * rng.cnormal_vec(null_dim);
  }

  const double peak = combo.cwiseAbs().maxCoeff();
  if (peak <= 0.0) throw NoNullSpace("stealthy_attack: degenerate combination");
  combo *= alpha / peak;
  for (int c = 0; c < c_size; ++c) attack.delta_x(compromised[c]) = combo(c);
  return attack;
}

AttackInstance sample_feasible_attack(const AdmittanceModel& model,
                                      const std::vector<int>& observed,
                                      int c_size, double alpha, Rng& rng,
                                      int max_retries, std::vector<int>* chosen) {
  if (c_size < 1 || c_size > static_cast<int>(observed.size()))
    throw InvalidArgument("sample_feasible_attack: bad |C|");
  std::vector<int> pool = observed;
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    // Partial Fisher-Yates: first c_size entries are the candidate C.
    for (int i = 0; i < c_size; ++i) {
      const int pick = i + rng.uniform_int(static_cast<int>(pool.size()) - i);
      std::swap(pool[i], pool[pick]);
    }
    std::vector<int> c(pool.begin(), pool.begin() + c_size);
    std::sort(c.begin(), c.end());
    try {
      AttackInstance attack = stealthy_attack(model, observed, c, alpha, rng);
      // Reject combinations with a structurally dead entry so the label
      // support is exactly C.
      double smallest = attack.alpha;
      for (int b : c) smallest = std::min(smallest, std::abs(attack.delta_x(b)));
      if (smallest < 1e-9 * alpha) continue;
      if (chosen) *chosen = c;
      return attack;
    } catch (const NoNullSpace&) {
      continue;
    }
  }
  throw NoNullSpace("sample_feasible_attack: no feasible |C|-subset found");
}

IVec make_labels(const CVec& delta_x, const std::vector<int>& observed) {
  IVec labels = IVec::Zero(observed.size());
  for (size_t i = 0; i < observed.size(); ++i)
    labels(i) = std::abs(delta_x(observed[i])) > 0.0 ? 1 : 0;
  return labels;
}

WindowedDataset build_dataset(const PhasorSeries& voltages,
                              const MeasurementOperator& op,
                              const AdmittanceModel& model,
                              const DatasetParams& params, std::uint64_t seed) {
  const int total = voltages.steps();
  const int window = params.window;
  const int horizon = params.horizon;
  if (window < 1 || horizon < 0)
    throw InvalidArgument("build_dataset: bad window/horizon");
  if (total < window + horizon)
    throw InvalidArgument("build_dataset: series shorter than T + H");
  if (voltages.nodes() != model.node_count)
    throw InvalidArgument("build_dataset: series/model node mismatch");

  Rng rng(seed);
  const RlsSolver solver(op, model.Y, params.mu1);
  const int m2 = 2 * op.a_size();

  WindowedDataset data;
  data.params = params;
  data.a_size = op.a_size();
  data.nodes = model.node_count;

  for (int t = window - 1; t + horizon < total; ++t) {
    Sample sample;
    sample.t = t;

    switch (params.mode) {
      case DatasetMode::Clean:
        sample.attacked = false;
        break;
      case DatasetMode::Attacked:
        sample.attacked = true;
        break;
      case DatasetMode::Hybrid:
        sample.attacked = rng.uniform() < params.hybrid_rate;
        break;
    }

    CVec delta = CVec::Zero(model.node_count);
    if (sample.attacked) {
      const AttackInstance attack =
          sample_feasible_attack(model, op.observed, params.c_size, params.alpha,
                                 rng, params.attack_retries);
      delta = attack.delta_x;
    }

    // The perturbation persists over the whole window of an attacked sample.
    sample.z_window = CMat(m2, window);
    for (int c = 0; c < window; ++c) {
      const CVec v = voltages.values.col(t - window + 1 + c) + delta;
      sample.z_window.col(c) = observe(op, v, rng);
    }
    sample.xhat_window = solver.recover_window(sample.z_window);

    sample.target_x = voltages.values.col(t + horizon);
    sample.z_target = observe(op, CVec(voltages.values.col(t + horizon)), rng);
    sample.labels = make_labels(delta, op.observed);
    data.samples.push_back(std::move(sample));
  }
  return data;
}

}  // namespace gridnet
