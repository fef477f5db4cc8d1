#pragma once

#include "gridnet/common.hpp"

namespace gridnet {

/// Raised when training produces a non-finite loss.
struct TrainingDivergence : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};

/// Separate ReLUs on the real and imaginary parts; subgradient 0 at 0.
CVec crelu(const CVec& t);
CMat crelu(const CMat& t);

enum class HeadKind { Regression, Classification };

struct StgcnConfig {
  int nodes = 0;              // |V|
  int window = 10;            // T
  int spatial_order = 5;      // K; the coefficient stack has K+1 matrices
  int temporal_channels = 10; // K_t
  int graph_channels = 10;    // G
  std::vector<int> hidden_widths = {64, 64};
  HeadKind head = HeadKind::Regression;
  int output_dim = 0;         // |V| for regression, |A| for classification

  int flat_dim() const { return nodes * graph_channels; }

  bool operator==(const StgcnConfig&) const = default;
};

/// All trainable parameters. Complex weights carry complex biases; the
/// classification head is real-valued over stacked [Re; Im] features.
struct StgcnModel {
  StgcnConfig cfg;
  CMat temporal_kernel;            // T x K_t
  CVec temporal_bias;              // K_t
  std::vector<CMat> graph_coeffs;  // K+1 matrices, each K_t x G
  CVec graph_bias;                 // G
  std::vector<CMat> dense_w;
  std::vector<CVec> dense_b;
  CMat head_w;                     // regression: output_dim x last width
  CVec head_b;
  RMat head_w_re;                  // classification: output_dim x 2*last width
  RVec head_b_re;
};

/// Seeded complex Glorot init: each real plane uniform with variance
/// 1/(fan_in + fan_out); biases zero.
StgcnModel init_stgcn(const StgcnConfig& cfg, std::uint64_t seed);

/// Gradients in the same shapes as the parameters. A complex entry packs
/// (dL/dRe, dL/dIm) of the matching parameter.
struct GradientSet {
  CMat temporal_kernel;
  CVec temporal_bias;
  std::vector<CMat> graph_coeffs;
  CVec graph_bias;
  std::vector<CMat> dense_w;
  std::vector<CVec> dense_b;
  CMat head_w;
  CVec head_b;
  RMat head_w_re;
  RVec head_b_re;

  void setZero(const StgcnModel& like);
  GradientSet& operator+=(const GradientSet& other);
  GradientSet& operator*=(double scale);
};

/// X_bar = X Gamma: full-window linear map onto K_t temporal channels.
CMat temporal_conv(const CMat& kernel, const CMat& x);

/// CReLU(sum_k S^k X_bar H_k), Horner-style over k.
CMat graph_conv(const CMat& gso, const std::vector<CMat>& coeffs,
                const CMat& xbar);

/// Everything backward() needs; holds the GSO and a shape stamp so a cache
/// from a different model or input is rejected.
struct ForwardCache {
  CMat gso;
  CMat x;
  CMat xbar;
  std::vector<CMat> shift_pows;  // S^k X_bar
  CMat graph_pre;
  CMat graph_act;
  CVec flat;
  std::vector<CVec> dense_pre;
  std::vector<CVec> dense_act;
  CVec head_pre;     // regression
  CVec y_reg;
  RVec head_pre_re;  // classification
  RVec y_cls;
  StgcnConfig stamp;
};

struct ForwardResult {
  CVec regression;     // split-tanh output, |Re|,|Im| < 1
  RVec classification; // sigmoid output in (0,1)
  ForwardCache cache;
};

/// Full pass through temporal conv, graph conv, dense stack and head.
/// Throws NumericalFailure on non-finite activations.
ForwardResult forward(const StgcnModel& model, const CMat& gso, const CMat& x);

struct LossValue {
  double value = 0.0;
  CVec grad;  // packed complex d/d(prediction)
};

struct LossValueReal {
  double value = 0.0;
  RVec grad;
};

/// |y - target|^2 + mu2 |v_A .* conj(i_A) - [y .* (S y)*]_A|^2, with |.|^2
/// the sum of squared complex moduli; S is the raw (unnormalized) shift.
LossValue loss_forecast(const CVec& y, const CVec& target, const CVec& v_meas_a,
                        const CVec& i_meas_a, const CMat& S,
                        const std::vector<int>& observed, double mu2);

/// Squared error sum over sigmoid outputs against binary labels.
LossValueReal loss_localization(const RVec& y, const RVec& labels);

/// Backprop from d(loss)/d(output). The regression overload takes a packed
/// complex gradient, the classification overload a real one.
GradientSet backward(const StgcnModel& model, const ForwardCache& cache,
                     const CVec& grad_output);
GradientSet backward(const StgcnModel& model, const ForwardCache& cache,
                     const RVec& grad_output);

struct TrainSample {
  CMat input;   // |V| x T
  CVec target;  // regression target (may be empty for classification)
  CVec v_meas;  // observed-bus voltages at the target step
  CVec i_meas;  // observed-bus currents at the target step
  RVec labels;  // classification labels (may be empty for regression)
};

struct TrainOptions {
  double lr = 2e-3;
  int epochs = 50;
  int batch = 32;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double mu2 = 0.0;
  CMat physics_gso;           // raw S for the forecast physics term
  std::vector<int> observed;  // A for the physics term
  cxd output_offset{0.0, 0.0};  // added to the regression head output
  bool shuffle = true;
};

struct TrainResult {
  StgcnModel model;  // best-validation snapshot
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = -1;
};

/// Sample loss + output gradient under the training options (applies the
/// output offset and physics term for regression).
LossValue sample_loss_regression(const StgcnModel& model, const ForwardResult& fwd,
                                 const TrainSample& sample,
                                 const TrainOptions& opt);

double average_loss(const StgcnModel& model, const CMat& gso,
                    const std::vector<TrainSample>& set, const TrainOptions& opt);

/// Adam on each real plane independently; deterministic given the seed.
/// Throws TrainingDivergence on a non-finite loss.
TrainResult train(const StgcnModel& init, const CMat& gso,
                  const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set,
                  const TrainOptions& opt);

}  // namespace gridnet
