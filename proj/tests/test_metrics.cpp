#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gridnet/metrics.hpp"
#include "test_support.hpp"

using namespace gridnet;

TEST_CASE("perfect classification") {
  Eigen::MatrixXi truth(3, 4);
  truth << 1, 0, 0, 1, 0, 1, 0, 0, 0, 0, 1, 1;
  const RMat probs = truth.cast<double>();
  const auto m = compute_classification_metrics(probs, truth, 0.5);
  CHECK(m.accuracy == doctest::Approx(1.0));
  CHECK(m.f1 == doctest::Approx(1.0));
  CHECK(m.precision == doctest::Approx(1.0));
  CHECK(m.recall == doctest::Approx(1.0));
}

TEST_CASE("known confusion counts") {
  // TP=1, FP=1, FN=0, TN=1 -> precision .5, recall 1, F1 2/3
  Eigen::MatrixXi truth(3, 1);
  truth << 1, 0, 0;
  RMat probs(3, 1);
  probs << 0.9, 0.8, 0.1;
  const auto m = compute_classification_metrics(probs, truth, 0.5);
  CHECK(m.tp == 1);
  CHECK(m.fp == 1);
  CHECK(m.fn == 0);
  CHECK(m.tn == 1);
  CHECK(m.precision == doctest::Approx(0.5));
  CHECK(m.recall == doctest::Approx(1.0));
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(m.accuracy == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("random pair matches an independent counting oracle") {
  Rng rng(3);
  const int labels = 10, samples = 100;
  Eigen::MatrixXi truth(labels, samples);
  RMat probs(labels, samples);
  for (int c = 0; c < samples; ++c)
    for (int r = 0; r < labels; ++r) {
      truth(r, c) = rng.uniform() < 0.3 ? 1 : 0;
      probs(r, c) = rng.uniform();
    }
  const double thr = 0.4;
  const auto m = compute_classification_metrics(probs, truth, thr);

  long tp = 0, fp = 0, tn = 0, fn = 0;
  for (int c = 0; c < samples; ++c)
    for (int r = 0; r < labels; ++r) {
      const bool pred = probs(r, c) >= thr;
      const bool act = truth(r, c) == 1;
      tp += pred && act;
      fp += pred && !act;
      tn += !pred && !act;
      fn += !pred && act;
    }
  CHECK(m.tp == tp);
  CHECK(m.fp == fp);
  CHECK(m.tn == tn);
  CHECK(m.fn == fn);
  CHECK(m.accuracy == doctest::Approx(double(tp + tn) / (labels * samples)));
  // identity: F1 = 2PR/(P+R) recomputed independently
  const double p = double(tp) / (tp + fp), r = double(tp) / (tp + fn);
  CHECK(m.f1 == doctest::Approx(2 * p * r / (p + r)));
  // identity: accuracy * total = TP + TN
  CHECK(m.accuracy * labels * samples == doctest::Approx(double(tp + tn)));
}

TEST_CASE("degenerate denominators are flagged and zeroed") {
  Eigen::MatrixXi truth(2, 2);
  truth << 0, 0, 0, 0;
  RMat probs(2, 2);
  probs << 0.1, 0.2, 0.3, 0.1;  // nothing predicted positive
  const auto m = compute_classification_metrics(probs, truth, 0.5);
  CHECK_FALSE(m.precision_defined);
  CHECK_FALSE(m.recall_defined);
  CHECK_FALSE(m.f1_defined);
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 0.0);
  CHECK(m.f1 == 0.0);
  CHECK(m.accuracy == doctest::Approx(1.0));
}

TEST_CASE("per-positive-count accuracy breakdown") {
  Eigen::MatrixXi truth(2, 3);
  truth << 1, 0, 1, 1, 0, 0;  // columns have 2, 0, 1 positives
  RMat probs(2, 3);
  probs << 1, 0, 0, 1, 0, 0;
  const auto m = compute_classification_metrics(probs, truth, 0.5);
  CHECK(m.accuracy_by_positive_count.at(2) == doctest::Approx(1.0));
  CHECK(m.accuracy_by_positive_count.at(0) == doctest::Approx(1.0));
  CHECK(m.accuracy_by_positive_count.at(1) == doctest::Approx(0.5));
}

TEST_CASE("regression mse is the mean squared complex modulus") {
  Rng rng(7);
  const CMat pred = rng.cnormal_mat(4, 5);
  const CMat truth = rng.cnormal_mat(4, 5);
  const auto m = compute_regression_metrics(pred, truth);
  double acc = 0.0;
  for (int c = 0; c < 5; ++c)
    for (int r = 0; r < 4; ++r) acc += std::norm(pred(r, c) - truth(r, c));
  CHECK(m.mse == doctest::Approx(acc / 20.0));
  CHECK(compute_regression_metrics(pred, pred).mse == 0.0);
}

TEST_CASE("shape and threshold validation") {
  Eigen::MatrixXi truth(2, 2);
  truth.setZero();
  CHECK_THROWS_AS(compute_classification_metrics(RMat::Zero(2, 3), truth, 0.5),
                  InvalidArgument);
  CHECK_THROWS_AS(compute_classification_metrics(RMat::Zero(2, 2), truth, 1.0),
                  InvalidArgument);
  CHECK_THROWS_AS(
      compute_regression_metrics(CMat::Zero(2, 2), CMat::Zero(3, 2)),
      InvalidArgument);
}
