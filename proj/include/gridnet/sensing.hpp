#pragma once

#include "gridnet/grid_model.hpp"
#include "gridnet/spectral.hpp"

namespace gridnet {

/// Raised when Y_PC has no (numerical) null space, i.e. the requested
/// compromised set cannot carry a stealthy perturbation.
struct NoNullSpace : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};

/// Result of greedy sensor placement over the low-frequency eigenbasis.
struct SensorPlan {
  std::vector<int> buses;      // A, in selection order
  int frequency_count = 0;     // |K|
  double sigma_min = 0.0;      // achieved on the selected rows of U_K
  std::vector<double> step_sigma;  // sigma_min after each greedy addition
};

/// A stealthy measurement perturbation: support on the compromised sensor
/// set C, invisible on honest-sensor current rows (Y[A\C, C] dx_C = 0).
struct AttackInstance {
  std::vector<int> compromised;  // C, subset of A
  CVec delta_x;                  // |V|, zero off C, |.|_inf = alpha
  double alpha = 0.0;
};

/// Greedy forward selection of m sensor buses maximizing sigma_min of the
/// selected-row submatrix of U_K (the |K| lowest-|lambda| eigenvectors).
/// Ties go to the lowest bus index; deterministic.
SensorPlan greedy_sensor_placement(const SpectralBasis& basis, int freq_count,
                                   int m);

/// Closed-form regularized recovery x = (H^H H + mu1 S)^+ H^H z, via SVD
/// pseudo-inverse with relative cutoff 1e-12. Returns natural bus order.
CVec rls_recover(const CVec& z, const MeasurementOperator& op, const CMat& S,
                 double mu1);

/// Precomputed RLS map for repeated recoveries with one operator.
class RlsSolver {
 public:
  RlsSolver(const MeasurementOperator& op, const CMat& S, double mu1);
  CVec recover(const CVec& z) const;
  CMat recover_window(const CMat& z_window) const;

 private:
  CMat map_;  // |V| x 2|A|, already un-permuted
};

/// Draw a stealthy perturbation on C: a seeded unit combination of the
/// null-space basis of Y[A\C, C], scaled to |dx_C|_inf = alpha. Singular
/// values <= 1e-10 sigma_max count as null. Throws NoNullSpace when the
/// set is infeasible. C may be empty (returns the zero perturbation).
AttackInstance stealthy_attack(const AdmittanceModel& model,
                               const std::vector<int>& observed,
                               const std::vector<int>& compromised, double alpha,
                               Rng& rng);

/// Repeatedly samples |C|-subsets of A until one is feasible.
AttackInstance sample_feasible_attack(const AdmittanceModel& model,
                                      const std::vector<int>& observed,
                                      int c_size, double alpha, Rng& rng,
                                      int max_retries = 500,
                                      std::vector<int>* chosen = nullptr);

/// Label i = 1 iff delta_x is nonzero at the i-th observed bus.
IVec make_labels(const CVec& delta_x, const std::vector<int>& observed);

enum class DatasetMode { Clean, Attacked, Hybrid };

struct DatasetParams {
  DatasetMode mode = DatasetMode::Clean;
  int window = 10;        // T
  int horizon = 0;        // H
  double mu1 = 1e-6;      // RLS regularization for X_hat inputs
  double alpha = 0.1;     // attack magnitude
  int c_size = 5;         // |C| per attacked sample
  double hybrid_rate = 0.5;
  int attack_retries = 500;
};

/// One windowed sample: measurements, RLS-recovered inputs, and either the
/// regression target (with its measurement pair) or localization labels.
struct Sample {
  int t = 0;                // window end index
  CMat z_window;            // 2|A| x T
  CMat xhat_window;         // |V| x T
  CVec target_x;            // x_{t+H} (regression)
  CVec z_target;            // measurement at t+H: [i_A; v_A] + noise
  IVec labels;              // |A| (classification)
  bool attacked = false;
};

struct WindowedDataset {
  std::vector<Sample> samples;
  DatasetParams params;
  int a_size = 0;
  int nodes = 0;
};

/// Slide a T-window over the series, observe through the operator (seeded
/// noise), optionally inject per-sample stealthy attacks, and recover
/// X_hat per column. Sample order follows the time index.
WindowedDataset build_dataset(const PhasorSeries& voltages,
                              const MeasurementOperator& op,
                              const AdmittanceModel& model,
                              const DatasetParams& params, std::uint64_t seed);

}  // namespace gridnet
