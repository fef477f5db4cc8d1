#pragma once

#include <map>

#include "gridnet/common.hpp"

namespace gridnet {

/// Classification / regression quality summary. Undefined ratios (zero
/// denominators) are reported as 0 and flagged.
struct MetricsReport {
  double mse = 0.0;  // mean squared complex modulus of the error
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long tp = 0, fp = 0, tn = 0, fn = 0;
  bool precision_defined = true;
  bool recall_defined = true;
  bool f1_defined = true;
  std::map<int, double> accuracy_by_positive_count;  // per-|C| breakdown
};

/// Regression: mean over all entries of |prediction - truth|^2.
MetricsReport compute_regression_metrics(const CMat& predictions,
                                         const CMat& truth);

/// Classification: probabilities thresholded against binary truth; rows are
/// labels, columns samples. accuracy = (TP+TN)/total, precision = TP/(TP+FP),
/// recall = TP/(TP+FN), F1 = 2PR/(P+R).
MetricsReport compute_classification_metrics(const RMat& probabilities,
                                             const Eigen::MatrixXi& truth,
                                             double threshold);

}  // namespace gridnet
