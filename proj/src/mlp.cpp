#include <chrono>
#include <cmath>
#include <numeric>

#include "dtwin/ml.hpp"

namespace dtwin {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

namespace {

constexpr double kProbEps = 1e-12;

struct ForwardPass {
  std::vector<Eigen::MatrixXd> z;  // pre-activations per affine layer
  std::vector<Eigen::MatrixXd> a;  // a[0] = input, a[l] = activation after layer l
};

ForwardPass forward(const MlpParams& p, const Eigen::MatrixXd& X) {
  ForwardPass f;
  f.a.push_back(X);
  for (size_t l = 0; l < p.W.size(); ++l) {
    Eigen::MatrixXd z = (f.a.back() * p.W[l].transpose()).rowwise() + p.b[l].transpose();
    Eigen::MatrixXd a;
    if (l + 1 < p.W.size()) {
      a = z.cwiseMax(0.0);  // ReLU hidden
    } else {
      a = z.unaryExpr([](double v) { return sigmoid(v); });
    }
    f.z.push_back(std::move(z));
    f.a.push_back(std::move(a));
  }
  return f;
}

double bce(const Eigen::MatrixXd& prob, const Eigen::VectorXd& y) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < prob.rows(); ++i) {
    double a = std::clamp(prob(i, 0), kProbEps, 1.0 - kProbEps);
    total += y[i] > 0.5 ? -std::log(a) : -std::log(1.0 - a);
  }
  return total / static_cast<double>(prob.rows());
}

MlpParams backward(const MlpParams& p, const ForwardPass& f, const Eigen::VectorXd& y) {
  MlpParams g;
  g.W.resize(p.W.size());
  g.b.resize(p.b.size());
  auto n = static_cast<double>(f.a[0].rows());

  // sigmoid + BCE collapse to (a - y) at the output pre-activation
  Eigen::MatrixXd delta = (f.a.back().col(0) - y).matrix() / n;
  for (size_t l = p.W.size(); l-- > 0;) {
    g.W[l] = delta.transpose() * f.a[l];
    g.b[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd grad_a = delta * p.W[l];
      delta = grad_a.cwiseProduct(
          f.z[l - 1].unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
    }
  }
  return g;
}

}  // namespace

MlpParams mlp_init(const std::vector<int>& widths, Rng& rng) {
  MlpParams p;
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    int fan_in = widths[l];
    int fan_out = widths[l + 1];
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Eigen::MatrixXd W(fan_out, fan_in);
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      for (Eigen::Index c = 0; c < W.cols(); ++c) {
        W(r, c) = rng.uniform(-limit, limit);
      }
    }
    p.W.push_back(std::move(W));
    p.b.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return p;
}

MlpParams mlp_zero(const std::vector<int>& widths) {
  MlpParams p;
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    p.W.push_back(Eigen::MatrixXd::Zero(widths[l + 1], widths[l]));
    p.b.push_back(Eigen::VectorXd::Zero(widths[l + 1]));
  }
  return p;
}

std::vector<int> mlp_widths(const MlpParams& p) {
  std::vector<int> widths;
  widths.push_back(static_cast<int>(p.W.front().cols()));
  for (const auto& W : p.W) widths.push_back(static_cast<int>(W.rows()));
  return widths;
}

Eigen::VectorXd mlp_flatten(const MlpParams& p) {
  Eigen::Index total = 0;
  for (size_t l = 0; l < p.W.size(); ++l) total += p.W[l].size() + p.b[l].size();
  Eigen::VectorXd flat(total);
  Eigen::Index at = 0;
  for (size_t l = 0; l < p.W.size(); ++l) {
    for (Eigen::Index r = 0; r < p.W[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < p.W[l].cols(); ++c) flat[at++] = p.W[l](r, c);
    }
    for (Eigen::Index r = 0; r < p.b[l].size(); ++r) flat[at++] = p.b[l][r];
  }
  return flat;
}

MlpParams mlp_unflatten(const Eigen::VectorXd& flat, const std::vector<int>& widths) {
  MlpParams p = mlp_zero(widths);
  Eigen::Index at = 0;
  for (size_t l = 0; l < p.W.size(); ++l) {
    for (Eigen::Index r = 0; r < p.W[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < p.W[l].cols(); ++c) p.W[l](r, c) = flat[at++];
    }
    for (Eigen::Index r = 0; r < p.b[l].size(); ++r) p.b[l][r] = flat[at++];
  }
  if (at != flat.size()) fail(Errc::dimension_mismatch, "flat parameter vector has wrong length");
  return p;
}

Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::MatrixXd& X) {
  return forward(p, X).a.back().col(0);
}

std::vector<Eigen::MatrixXd> mlp_hidden_preactivations(const MlpParams& p,
                                                       const Eigen::MatrixXd& X) {
  ForwardPass f = forward(p, X);
  f.z.pop_back();  // the output layer has no kink
  return std::move(f.z);
}

double mlp_loss(const MlpParams& p, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return bce(forward(p, X).a.back(), y);
}

MlpParams mlp_gradients(const MlpParams& p, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  ForwardPass f = forward(p, X);
  return backward(p, f, y);
}

TrainedModel train_mlp(const Dataset& train, const Hyperparams& hp) {
  hp.validate();
  if (train.rows() == 0) fail(Errc::empty_training_set, "mlp needs >= 1 sample");
  auto t0 = std::chrono::steady_clock::now();

  std::vector<int> widths;
  widths.push_back(static_cast<int>(train.cols()));
  for (int w : hp.mlp_layers) widths.push_back(w);
  widths.push_back(1);

  Rng rng(hp.seed);
  MlpParams p = mlp_init(widths, rng);
  Eigen::VectorXd y = train.y.cast<double>();

  std::vector<int> order(static_cast<size_t>(train.rows()));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < hp.mlp_epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(hp.mlp_batch)) {
      size_t count = std::min(static_cast<size_t>(hp.mlp_batch), order.size() - start);
      Eigen::MatrixXd Xb(count, train.cols());
      Eigen::VectorXd yb(count);
      for (size_t k = 0; k < count; ++k) {
        Xb.row(static_cast<Eigen::Index>(k)) = train.X.row(order[start + k]);
        yb[static_cast<Eigen::Index>(k)] = y[order[start + k]];
      }
      MlpParams g = mlp_gradients(p, Xb, yb);
      for (size_t l = 0; l < p.W.size(); ++l) {
        p.W[l] -= hp.mlp_learning_rate * g.W[l];
        p.b[l] -= hp.mlp_learning_rate * g.b[l];
      }
    }
    double loss = mlp_loss(p, train.X, y);
    if (!std::isfinite(loss)) {
      fail(Errc::non_finite_loss, "training diverged at epoch " + std::to_string(epoch));
    }
  }

  TrainedModel model;
  model.kind = ModelKind::mlp;
  model.input_dimension = static_cast<int>(train.cols());
  model.params = std::move(p);
  model.seed = hp.seed;
  model.epochs = hp.mlp_epochs;
  model.hp = hp;
  model.fit_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return model;
}

}  // namespace dtwin
