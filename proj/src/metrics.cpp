#include "gridnet/metrics.hpp"

namespace gridnet {

MetricsReport compute_regression_metrics(const CMat& predictions,
                                         const CMat& truth) {
  if (predictions.rows() != truth.rows() || predictions.cols() != truth.cols())
    throw InvalidArgument("compute_regression_metrics: shape mismatch");
  if (predictions.size() == 0)
    throw InvalidArgument("compute_regression_metrics: empty input");
  MetricsReport report;
  report.mse =
      (predictions - truth).cwiseAbs2().sum() / static_cast<double>(truth.size());
  return report;
}

MetricsReport compute_classification_metrics(const RMat& probabilities,
                                             const Eigen::MatrixXi& truth,
                                             double threshold) {
  if (probabilities.rows() != truth.rows() || probabilities.cols() != truth.cols())
    throw InvalidArgument("compute_classification_metrics: shape mismatch");
  if (probabilities.size() == 0)
    throw InvalidArgument("compute_classification_metrics: empty input");
  if (threshold <= 0.0 || threshold >= 1.0)
    throw InvalidArgument("compute_classification_metrics: threshold in (0,1)");

  MetricsReport report;
  std::map<int, std::pair<long, long>> by_count;  // positives -> (correct, total)
  double sq = 0.0;
  for (Eigen::Index c = 0; c < truth.cols(); ++c) {
    const int positives = truth.col(c).sum();
    auto& bucket = by_count[positives];
    for (Eigen::Index r = 0; r < truth.rows(); ++r) {
      const bool pred = probabilities(r, c) >= threshold;
      const bool actual = truth(r, c) != 0;
      if (pred && actual) ++report.tp;
      if (pred && !actual) ++report.fp;
      if (!pred && actual) ++report.fn;
      if (!pred && !actual) ++report.tn;
      if (pred == actual) ++bucket.first;
      ++bucket.second;
      const double err = probabilities(r, c) - static_cast<double>(truth(r, c));
      sq += err * err;
    }
  }

  const long total = report.tp + report.fp + report.tn + report.fn;
  report.mse = sq / static_cast<double>(total);
  report.accuracy = static_cast<double>(report.tp + report.tn) / total;

  if (report.tp + report.fp > 0)
    report.precision = static_cast<double>(report.tp) / (report.tp + report.fp);
  else
    report.precision_defined = false;
  if (report.tp + report.fn > 0)
    report.recall = static_cast<double>(report.tp) / (report.tp + report.fn);
  else
    report.recall_defined = false;
  if (report.precision + report.recall > 0.0)
    report.f1 = 2.0 * report.precision * report.recall /
                (report.precision + report.recall);
  else
    report.f1_defined = false;

  for (const auto& [count, bucket] : by_count)
    report.accuracy_by_positive_count[count] =
        static_cast<double>(bucket.first) / bucket.second;
  return report;
}

}  // namespace gridnet
