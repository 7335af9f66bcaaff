#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dtwin/common.hpp"
#include "dtwin/data.hpp"

namespace dtwin {

enum class ModelKind { random_forest, linear_svm, mlp };

const char* model_kind_name(ModelKind k);
ModelKind model_kind_from_name(const std::string& name);

struct Hyperparams {
  ModelKind kind = ModelKind::random_forest;
  int rf_estimators = 100;
  int rf_max_depth = 16;
  int rf_min_samples_split = 2;
  std::vector<int> mlp_layers = {11, 11, 11};  // hidden widths
  int mlp_epochs = 50;
  double mlp_learning_rate = 0.01;
  int mlp_batch = 32;
  double svm_lambda = 1e-3;
  int svm_epochs = 30;
  uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

// Dense training/evaluation set: one row per sample, binary labels.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXi y;

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index cols() const { return X.cols(); }

  static Dataset from_vectors(const std::vector<FeatureVector>& vs);
};

// --------------------------------------------------------------------------
// Decision tree / random forest

struct TreeNode {
  bool leaf = true;
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int label = 0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  int predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

// Gini-impurity splits, majority leaves (ties to class 0). features_per_split
// < 1 means all features are candidates at every split.
DecisionTree train_decision_tree(const Dataset& train, int max_depth, uint64_t seed,
                                 int min_samples_split = 2, int features_per_split = 0);

struct ForestParams {
  std::vector<DecisionTree> trees;
};

struct SvmParams {
  Eigen::VectorXd w;
  double b = 0.0;
};

struct MlpParams {
  std::vector<Eigen::MatrixXd> W;  // layer l: (out x in)
  std::vector<Eigen::VectorXd> b;
};

struct Prediction {
  int label = 0;
  double score = 0.0;
};

struct TrainedModel {
  ModelKind kind = ModelKind::random_forest;
  int input_dimension = 0;
  int class_count = 2;
  std::variant<ForestParams, SvmParams, MlpParams> params;
  std::string schema;       // dataset schema the preprocessor was fitted on
  std::string fingerprint;  // preprocessor fingerprint
  std::optional<Preprocessor> preprocessor;
  uint64_t seed = 0;
  int epochs = 0;
  double fit_time_ms = 0.0;  // in-memory only; deliberately not serialized
  Hyperparams hp;

  Prediction predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  const ForestParams& forest() const { return std::get<ForestParams>(params); }
  const SvmParams& svm() const { return std::get<SvmParams>(params); }
  const MlpParams& mlp() const { return std::get<MlpParams>(params); }
};

TrainedModel train_random_forest(const Dataset& train, const Hyperparams& hp);
TrainedModel train_linear_svm(const Dataset& train, const Hyperparams& hp);
TrainedModel train_mlp(const Dataset& train, const Hyperparams& hp);
TrainedModel train_model(const Dataset& train, const Hyperparams& hp);

// Binds the fitted preprocessor to the model: schema name, fingerprint and
// the serving-side transform travel with the parameters from then on.
void attach_preprocessor(TrainedModel& model, Preprocessor pp);

// --------------------------------------------------------------------------
// MLP internals, exposed for gradient verification and benchmarks.

// widths includes input and output: {d, h1, ..., 1}
MlpParams mlp_init(const std::vector<int>& widths, Rng& rng);
MlpParams mlp_zero(const std::vector<int>& widths);
std::vector<int> mlp_widths(const MlpParams& p);
Eigen::VectorXd mlp_flatten(const MlpParams& p);
MlpParams mlp_unflatten(const Eigen::VectorXd& flat, const std::vector<int>& widths);
// batch forward probability of class 1
Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::MatrixXd& X);
// hidden pre-activations per layer; finite-difference checks compare the
// ReLU active set at perturbed points to detect kink crossings
std::vector<Eigen::MatrixXd> mlp_hidden_preactivations(const MlpParams& p,
                                                       const Eigen::MatrixXd& X);
double mlp_loss(const MlpParams& p, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
MlpParams mlp_gradients(const MlpParams& p, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

double sigmoid(double z);

// --------------------------------------------------------------------------
// Metrics

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

Metrics metrics_from_counts(int64_t tp, int64_t fp, int64_t fn, int64_t tn);
Metrics metrics_from_predictions(const std::vector<int>& predicted,
                                 const std::vector<int>& actual);
// class 1 (anomalous / malicious) is the positive class
Metrics evaluate(const TrainedModel& model, const Dataset& test);

// --------------------------------------------------------------------------
// Portable model file (magic "DTM1"); payload is little-endian f64 words
// guarded by a CRC32. Round-trips preserve predictions bit-exactly.

std::string model_to_bytes(const TrainedModel& model);
TrainedModel model_from_bytes(std::string_view bytes);
size_t save_model(const TrainedModel& model, const std::string& path);  // bytes written
TrainedModel load_model(const std::string& path);

}  // namespace dtwin
