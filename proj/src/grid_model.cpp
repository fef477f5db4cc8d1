#include "gridnet/grid_model.hpp"

#include <algorithm>
#include <queue>

#include <Eigen/LU>

namespace gridnet {

double operator_norm(const CMat& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  Eigen::JacobiSVD<CMat> svd(m);
  return svd.singularValues()(0);
}

double spectral_radius(const CMat& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::ComplexEigenSolver<CMat> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

CVec MeasurementOperator::permute(const CVec& v) const {
  CVec x(v.size());
  for (Eigen::Index p = 0; p < v.size(); ++p) x(p) = v(perm[p]);
  return x;
}

CVec MeasurementOperator::unpermute(const CVec& x) const {
  CVec v(x.size());
  for (Eigen::Index p = 0; p < x.size(); ++p) v(perm[p]) = x(p);
  return v;
}

CMat MeasurementOperator::natural() const {
  CMat hn(H.rows(), H.cols());
  for (Eigen::Index p = 0; p < H.cols(); ++p) hn.col(perm[p]) = H.col(p);
  return hn;
}

namespace {

bool connected(const std::vector<Branch>& branches, int node_count) {
  std::vector<std::vector<int>> adj(node_count);
  for (const auto& b : branches) {
    adj[b.from].push_back(b.to);
    adj[b.to].push_back(b.from);
  }
  std::vector<char> seen(node_count, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int visited = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int w : adj[u])
      if (!seen[w]) {
        seen[w] = 1;
        ++visited;
        q.push(w);
      }
  }
  return visited == node_count;
}

}  // namespace

AdmittanceModel build_admittance(const std::vector<Branch>& branches,
                                 int node_count, int slack,
                                 const CVec* node_shunts) {
  if (branches.empty()) throw InvalidArgument("build_admittance: no branches");
  if (node_count < 2) throw InvalidArgument("build_admittance: need >= 2 buses");
  if (slack < 0 || slack >= node_count)
    throw InvalidArgument("build_admittance: slack index out of range");
  if (node_shunts && node_shunts->size() != node_count)
    throw InvalidArgument("build_admittance: shunt vector length mismatch");

  for (const auto& b : branches) {
    if (b.from < 0 || b.from >= node_count || b.to < 0 || b.to >= node_count)
      throw InvalidArgument("build_admittance: branch index out of range");
    if (b.from == b.to)
      throw InvalidArgument("build_admittance: self-loop branch");
    if (b.series_admittance == cxd{0.0, 0.0})
      throw InvalidArgument("build_admittance: zero series admittance");
  }
  if (!connected(branches, node_count))
    throw InvalidArgument("build_admittance: graph is disconnected");

  AdmittanceModel model;
  model.node_count = node_count;
  model.slack = slack;
  model.Y = CMat::Zero(node_count, node_count);
  for (const auto& b : branches) {
    model.Y(b.from, b.to) -= b.series_admittance;
    model.Y(b.to, b.from) -= b.series_admittance;
    model.Y(b.from, b.from) += b.series_admittance + b.shunt_from;
    model.Y(b.to, b.to) += b.series_admittance + b.shunt_to;
  }
  if (node_shunts)
    model.Y.diagonal() += *node_shunts;
  return model;
}

CVec solve_voltages(const AdmittanceModel& model, const CVec& injections,
                    cxd slack_voltage, double tol, int max_iter) {
  const int n = model.node_count;
  if (injections.size() != n - 1)
    throw InvalidArgument("solve_voltages: expected one injection per non-slack bus");

  const auto ns = model.non_slack();
  CMat ynn(n - 1, n - 1);
  CVec yns(n - 1);
  for (int r = 0; r < n - 1; ++r) {
    yns(r) = model.Y(ns[r], model.slack);
    for (int c = 0; c < n - 1; ++c) ynn(r, c) = model.Y(ns[r], ns[c]);
  }

  Eigen::PartialPivLU<CMat> lu(ynn);
  if ((lu.matrixLU().diagonal().array().abs() < 1e-14).any())
    throw NumericalFailure("solve_voltages: Y_NN is singular");

  CVec vn = CVec::Constant(n - 1, cxd{1.0, 0.0});
  bool ok = false;
  for (int it = 0; it < max_iter; ++it) {
    const CVec inj_current =
        (injections.array() / vn.array()).conjugate().matrix();
    const CVec next = lu.solve(inj_current - yns * slack_voltage);
    if (!next.allFinite())
      throw NumericalFailure("solve_voltages: iteration diverged");
    const double delta = (next - vn).cwiseAbs().maxCoeff();
    vn = next;
    if (delta < tol) {
      ok = true;
      break;
    }
  }
  if (!ok)
    throw NumericalFailure("solve_voltages: no convergence (infeasible loading?)");

  CVec v(n);
  v(model.slack) = slack_voltage;
  for (int r = 0; r < n - 1; ++r) v(ns[r]) = vn(r);

  // Contract check: power balance off the slack bus.
  const CVec s = v.array() * (model.Y * v).array().conjugate();
  double resid = 0.0;
  for (int r = 0; r < n - 1; ++r)
    resid = std::max(resid, std::abs(s(ns[r]) - injections(r)));
  if (resid > 1e-6)
    throw NumericalFailure("solve_voltages: residual above tolerance");
  return v;
}

CVec apparent_power(const CVec& v, const AdmittanceModel& model) {
  if (v.size() != model.node_count)
    throw InvalidArgument("apparent_power: dimension mismatch");
  return (v.array() * (model.Y * v).array().conjugate()).matrix();
}

PhasorSeries synth_load_series(int node_count, int slack, int steps,
                               std::uint64_t seed,
                               const LoadProfileParams& params) {
  if (steps < 1) throw InvalidArgument("synth_load_series: steps must be >= 1");
  Rng rng(seed);

  PhasorSeries series;
  series.quantity = Quantity::Injection;
  series.values = CMat::Zero(node_count, steps);

  std::vector<double> scale(node_count), phase(node_count), noise(node_count, 0.0);
  for (int b = 0; b < node_count; ++b) {
    scale[b] = rng.uniform(1.0 - params.bus_spread, 1.0 + params.bus_spread);
    phase[b] = rng.uniform(0.0, 2.0 * M_PI);
  }

  const double innovation_sd =
      params.noise_sd * std::sqrt(std::max(0.0, 1.0 - params.ar_coeff * params.ar_coeff));
  for (int t = 0; t < steps; ++t) {
    const double day_angle = 2.0 * M_PI * t / params.steps_per_day;
    for (int b = 0; b < node_count; ++b) {
      if (b == slack) continue;
      noise[b] = params.ar_coeff * noise[b] + innovation_sd * rng.normal();
      const double level =
          1.0 + params.daily_amplitude * std::sin(day_angle + phase[b]) + noise[b];
      series.values(b, t) = params.mean_injection * scale[b] * level;
    }
  }
  return series;
}

PhasorSeries solve_series(const AdmittanceModel& model,
                          const PhasorSeries& injections,
                          cxd slack_voltage) {
  const auto ns = model.non_slack();
  PhasorSeries out;
  out.quantity = Quantity::Voltage;
  out.step_hours = injections.step_hours;
  out.values = CMat(model.node_count, injections.steps());
  CVec sn(model.node_count - 1);
  for (int t = 0; t < injections.steps(); ++t) {
    for (size_t r = 0; r < ns.size(); ++r) sn(r) = injections.values(ns[r], t);
    out.values.col(t) = solve_voltages(model, sn, slack_voltage);
  }
  return out;
}

MeasurementOperator build_measurement_operator(const AdmittanceModel& model,
                                               const std::vector<int>& observed,
                                               double noise_sd) {
  if (observed.empty())
    throw InvalidArgument("build_measurement_operator: empty observed set");
  std::vector<char> in_a(model.node_count, 0);
  for (int b : observed) {
    if (b < 0 || b >= model.node_count)
      throw InvalidArgument("build_measurement_operator: bus out of range");
    if (in_a[b])
      throw InvalidArgument("build_measurement_operator: duplicate bus");
    in_a[b] = 1;
  }

  MeasurementOperator op;
  op.observed = observed;
  op.noise_sd = noise_sd;
  for (int b = 0; b < model.node_count; ++b)
    if (!in_a[b]) op.hidden.push_back(b);
  op.perm = op.observed;
  op.perm.insert(op.perm.end(), op.hidden.begin(), op.hidden.end());

  const int n = model.node_count;
  const int m = op.a_size();
  op.H = CMat::Zero(2 * m, n);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c)
      op.H(r, c) = model.Y(op.perm[r], op.perm[c]);  // [Y_AA  Y_AU]
  for (int r = 0; r < m; ++r) op.H(m + r, r) = cxd{1.0, 0.0};
  return op;
}

CVec observe(const MeasurementOperator& op, const CVec& v, Rng& rng) {
  if (v.size() != op.nodes()) throw InvalidArgument("observe: dimension mismatch");
  CVec z = op.apply(v);
  if (op.noise_sd > 0.0)
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) += rng.cnormal(op.noise_sd);
  return z;
}

}  // namespace gridnet
