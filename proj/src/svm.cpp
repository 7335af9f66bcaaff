#include <chrono>
#include <numeric>

#include "dtwin/ml.hpp"

namespace dtwin {

// Pegasos-style stochastic subgradient descent on the L2-regularized hinge
// loss. The bias rides along as a constant input feature so it shares the
// shrinkage schedule; leaving it unregularized lets the huge early 1/(lambda
// t) steps park it somewhere no later correction can reach. Iterates from the
// second half of training are averaged to damp step noise. Zero epochs leaves
// the initialization (all-zero weights), which classifies everything as
// class 0.
TrainedModel train_linear_svm(const Dataset& train, const Hyperparams& hp) {
  hp.validate();
  if (train.rows() == 0) fail(Errc::empty_training_set, "svm needs >= 1 sample");
  auto t0 = std::chrono::steady_clock::now();

  Eigen::Index d = train.cols();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d + 1);  // [weights; bias]

  Rng rng(hp.seed);
  std::vector<int> order(static_cast<size_t>(train.rows()));
  std::iota(order.begin(), order.end(), 0);

  uint64_t total_steps =
      static_cast<uint64_t>(hp.svm_epochs) * static_cast<uint64_t>(train.rows());
  uint64_t average_from = total_steps / 2 + 1;
  Eigen::VectorXd w_sum = Eigen::VectorXd::Zero(d + 1);
  uint64_t averaged = 0;

  Eigen::VectorXd xi(d + 1);
  uint64_t t = 0;
  for (int epoch = 0; epoch < hp.svm_epochs; ++epoch) {
    rng.shuffle(order);
    for (int i : order) {
      ++t;
      double eta = 1.0 / (hp.svm_lambda * static_cast<double>(t));
      double yi = train.y[i] == 1 ? 1.0 : -1.0;
      xi.head(d) = train.X.row(i).transpose();
      xi[d] = 1.0;
      double margin = yi * w.dot(xi);
      w *= (1.0 - eta * hp.svm_lambda);
      if (margin < 1.0) w += eta * yi * xi;
      if (t >= average_from) {
        w_sum += w;
        ++averaged;
      }
    }
  }
  if (averaged > 0) w = w_sum / static_cast<double>(averaged);

  SvmParams p;
  p.w = w.head(d);
  p.b = w[d];

  TrainedModel model;
  model.kind = ModelKind::linear_svm;
  model.input_dimension = static_cast<int>(train.cols());
  model.params = std::move(p);
  model.seed = hp.seed;
  model.epochs = hp.svm_epochs;
  model.hp = hp;
  model.fit_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return model;
}

}  // namespace dtwin
