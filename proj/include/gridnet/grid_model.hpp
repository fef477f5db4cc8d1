#pragma once

#include <optional>

#include "gridnet/common.hpp"

namespace gridnet {

/// A transmission line between two buses, pi-model: series admittance plus
/// an optional half-shunt at each endpoint.
struct Branch {
  int from = 0;
  int to = 0;
  cxd series_admittance{0.0, 0.0};
  cxd shunt_from{0.0, 0.0};
  cxd shunt_to{0.0, 0.0};
};

/// Bus admittance matrix Y with its provenance. Y is complex symmetric
/// (Y == Y^T, not conjugate-symmetric) and doubles as the graph shift
/// operator for everything downstream.
struct AdmittanceModel {
  int node_count = 0;
  int slack = 0;
  CMat Y;

  std::vector<int> non_slack() const {
    std::vector<int> idx;
    idx.reserve(node_count - 1);
    for (int i = 0; i < node_count; ++i)
      if (i != slack) idx.push_back(i);
    return idx;
  }
};

enum class Quantity { Voltage, Current, Injection };

/// Time series of complex bus values, one column per step.
struct PhasorSeries {
  CMat values;  // |V| x T
  Quantity quantity = Quantity::Voltage;
  double step_hours = 1.0;

  int steps() const { return static_cast<int>(values.cols()); }
  int nodes() const { return static_cast<int>(values.rows()); }
};

/// Stacked measurement map z = H x for x = [v_A; v_U] (observed buses
/// first). Top block gives the injected currents at the observed buses,
/// bottom block selects their voltages.
struct MeasurementOperator {
  std::vector<int> observed;    // A, in selection order
  std::vector<int> hidden;      // U = V \ A, ascending
  std::vector<int> perm;        // position -> bus, A then U
  CMat H;                       // (2|A|) x |V|, acts on permuted x
  double noise_sd = 0.0;

  int a_size() const { return static_cast<int>(observed.size()); }
  int nodes() const { return static_cast<int>(H.cols()); }

  /// Reorder a natural-index vector into the operator's [A; U] order.
  CVec permute(const CVec& v) const;
  /// Inverse of permute().
  CVec unpermute(const CVec& x) const;
  /// H applied to a natural-index voltage vector.
  CVec apply(const CVec& v) const { return H * permute(v); }
  /// H with columns back in natural bus order.
  CMat natural() const;
};

/// Per-bus load synthesis parameters. Loads are drawn as a seeded daily
/// sinusoid plus AR(1) noise, scaled so the power flow stays feasible.
struct LoadProfileParams {
  cxd mean_injection{-0.03, -0.01};  // per-unit; negative = consumption
  double daily_amplitude = 0.4;      // relative swing of the sinusoid
  double noise_sd = 0.05;            // relative AR(1) noise level
  double ar_coeff = 0.8;
  double bus_spread = 0.5;           // per-bus magnitude in [1-s, 1+s)
  int steps_per_day = 24;
};

/// Assemble Y from branch data. Parallel branches are admittance-summed;
/// node_shunts (optional, length |V|) adds to the diagonal.
/// Throws InvalidArgument on bad indices or a disconnected graph.
AdmittanceModel build_admittance(const std::vector<Branch>& branches,
                                 int node_count, int slack,
                                 const CVec* node_shunts = nullptr);

/// Fixed-point power flow: iterates v_N <- Y_NN^-1((s_N / v_N)* - Y_NS v_S)
/// from a flat start until the step change drops below tol. The returned
/// voltages satisfy |s - v .* (Yv)*|_inf <= 1e-6 off the slack bus.
/// Throws NumericalFailure when the loading is infeasible.
CVec solve_voltages(const AdmittanceModel& model, const CVec& injections,
                    cxd slack_voltage, double tol = 1e-8, int max_iter = 100);

/// s = v .* (Yv)* elementwise.
CVec apparent_power(const CVec& v, const AdmittanceModel& model);

/// Seeded synthetic injection series (|V| x steps); slack row is zero.
PhasorSeries synth_load_series(int node_count, int slack, int steps,
                               std::uint64_t seed,
                               const LoadProfileParams& params = {});

/// Solve the power flow for every column of an injection series.
PhasorSeries solve_series(const AdmittanceModel& model,
                          const PhasorSeries& injections,
                          cxd slack_voltage = cxd{1.0, 0.0});

/// Block operator [[Y_AA, Y_AU], [I, 0]] under the (A then U) ordering.
MeasurementOperator build_measurement_operator(const AdmittanceModel& model,
                                               const std::vector<int>& observed,
                                               double noise_sd);

/// z = H x + eps with circular complex Gaussian noise of std dev
/// operator.noise_sd (total: E|eps_i|^2 = sd^2).
CVec observe(const MeasurementOperator& op, const CVec& v, Rng& rng);

}  // namespace gridnet
