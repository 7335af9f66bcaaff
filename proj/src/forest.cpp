#include <chrono>
#include <cmath>

#include "dtwin/ml.hpp"

namespace dtwin {

const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::random_forest: return "random_forest";
    case ModelKind::linear_svm: return "linear_svm";
    case ModelKind::mlp: return "mlp";
  }
  return "unknown";
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "random_forest" || name == "rf") return ModelKind::random_forest;
  if (name == "linear_svm" || name == "svm") return ModelKind::linear_svm;
  if (name == "mlp") return ModelKind::mlp;
  fail(Errc::corrupt_model_file, "unknown model kind: " + name);
}

void Hyperparams::validate() const {
  if (rf_estimators < 1) throw std::invalid_argument("rf_estimators must be >= 1");
  if (rf_max_depth < 1) throw std::invalid_argument("rf_max_depth must be >= 1");
  for (int w : mlp_layers) {
    if (w < 1) throw std::invalid_argument("mlp layer widths must be >= 1");
  }
  if (mlp_learning_rate <= 0.0) throw std::invalid_argument("learning rate must be > 0");
  if (mlp_batch < 1) throw std::invalid_argument("mlp_batch must be >= 1");
  if (svm_lambda <= 0.0) throw std::invalid_argument("svm_lambda must be > 0");
}

Dataset Dataset::from_vectors(const std::vector<FeatureVector>& vs) {
  Dataset d;
  if (vs.empty()) return d;
  Eigen::Index dim = vs[0].x.size();
  d.X.resize(static_cast<Eigen::Index>(vs.size()), dim);
  d.y.resize(static_cast<Eigen::Index>(vs.size()));
  for (size_t i = 0; i < vs.size(); ++i) {
    if (vs[i].x.size() != dim) {
      fail(Errc::dimension_mismatch, "feature vectors of mixed dimension");
    }
    d.X.row(static_cast<Eigen::Index>(i)) = vs[i].x.transpose();
    d.y[static_cast<Eigen::Index>(i)] = vs[i].label;
  }
  return d;
}

TrainedModel train_random_forest(const Dataset& train, const Hyperparams& hp) {
  hp.validate();
  if (train.rows() == 0) fail(Errc::empty_training_set, "random forest needs >= 1 sample");
  auto t0 = std::chrono::steady_clock::now();

  int d = static_cast<int>(train.cols());
  int mtry = std::max(1, static_cast<int>(std::llround(std::sqrt(static_cast<double>(d)))));
  Rng master(hp.seed);

  ForestParams forest;
  forest.trees.reserve(static_cast<size_t>(hp.rf_estimators));
  Dataset boot;
  boot.X.resize(train.rows(), train.cols());
  boot.y.resize(train.rows());
  for (int t = 0; t < hp.rf_estimators; ++t) {
    Rng tree_rng = master.split(static_cast<uint64_t>(t));
    for (Eigen::Index i = 0; i < train.rows(); ++i) {
      auto j = static_cast<Eigen::Index>(tree_rng.index(static_cast<size_t>(train.rows())));
      boot.X.row(i) = train.X.row(j);
      boot.y[i] = train.y[j];
    }
    forest.trees.push_back(train_decision_tree(boot, hp.rf_max_depth, tree_rng.u64(),
                                               hp.rf_min_samples_split, mtry));
  }

  TrainedModel model;
  model.kind = ModelKind::random_forest;
  model.input_dimension = d;
  model.params = std::move(forest);
  model.seed = hp.seed;
  model.epochs = 0;
  model.hp = hp;
  model.fit_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return model;
}

Prediction TrainedModel::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != input_dimension) {
    fail(Errc::dimension_mismatch, "input has dimension " + std::to_string(x.size()) +
                                       ", model expects " + std::to_string(input_dimension));
  }
  Prediction out;
  switch (kind) {
    case ModelKind::random_forest: {
      const auto& trees = forest().trees;
      int64_t ones = 0;
      Eigen::RowVectorXd row = x.transpose();
      for (const auto& t : trees) ones += t.predict(row);
      auto n = static_cast<int64_t>(trees.size());
      out.score = static_cast<double>(ones) / static_cast<double>(n);
      out.label = ones * 2 > n ? 1 : 0;  // exact tie falls to class 0
      break;
    }
    case ModelKind::linear_svm: {
      const auto& p = svm();
      double margin = p.w.dot(x) + p.b;
      out.score = sigmoid(margin);
      out.label = margin > 0.0 ? 1 : 0;  // zero margin falls to class 0
      break;
    }
    case ModelKind::mlp: {
      Eigen::MatrixXd X = x.transpose();
      out.score = mlp_forward(mlp(), X)[0];
      out.label = out.score >= 0.5 ? 1 : 0;  // inclusive threshold
      break;
    }
  }
  return out;
}

TrainedModel train_model(const Dataset& train, const Hyperparams& hp) {
  switch (hp.kind) {
    case ModelKind::random_forest: return train_random_forest(train, hp);
    case ModelKind::linear_svm: return train_linear_svm(train, hp);
    case ModelKind::mlp: return train_mlp(train, hp);
  }
  fail(Errc::corrupt_model_file, "bad model kind");
}

}  // namespace dtwin
