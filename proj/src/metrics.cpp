#include "dtwin/ml.hpp"

namespace dtwin {

Metrics metrics_from_counts(int64_t tp, int64_t fp, int64_t fn, int64_t tn) {
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  int64_t total = tp + fp + fn + tn;
  m.accuracy = total > 0 ? static_cast<double>(tp + tn) / static_cast<double>(total) : 0.0;
  // empty-denominator convention: a classifier that never had the chance to
  // be wrong on a side scores 1.0 there
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0;
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                      : 0.0;
  return m;
}

Metrics metrics_from_predictions(const std::vector<int>& predicted,
                                 const std::vector<int>& actual) {
  if (predicted.size() != actual.size()) {
    fail(Errc::dimension_mismatch, "prediction/label vectors differ in length");
  }
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (size_t i = 0; i < predicted.size(); ++i) {
    if (actual[i] == 1) {
      (predicted[i] == 1 ? tp : fn) += 1;
    } else {
      (predicted[i] == 1 ? fp : tn) += 1;
    }
  }
  return metrics_from_counts(tp, fp, fn, tn);
}

Metrics evaluate(const TrainedModel& model, const Dataset& test) {
  if (test.rows() == 0) fail(Errc::empty_test_set, "evaluation needs >= 1 sample");
  std::vector<int> predicted(static_cast<size_t>(test.rows()));
  std::vector<int> actual(static_cast<size_t>(test.rows()));
  for (Eigen::Index i = 0; i < test.rows(); ++i) {
    predicted[static_cast<size_t>(i)] = model.predict(test.X.row(i).transpose()).label;
    actual[static_cast<size_t>(i)] = test.y[i];
  }
  return metrics_from_predictions(predicted, actual);
}

}  // namespace dtwin
