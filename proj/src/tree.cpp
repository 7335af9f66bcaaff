#include <algorithm>
#include <cmath>
#include <numeric>

#include "dtwin/ml.hpp"

namespace dtwin {

namespace {

struct Builder {
  const Dataset& data;
  int max_depth;
  int min_samples_split;
  int features_per_split;
  Rng rng;
  std::vector<TreeNode> nodes;

  int majority(const std::vector<int>& idx) const {
    int64_t ones = 0;
    for (int i : idx) ones += data.y[i];
    int64_t zeros = static_cast<int64_t>(idx.size()) - ones;
    return ones > zeros ? 1 : 0;  // ties break to class 0
  }

  static double gini(int64_t zeros, int64_t ones) {
    int64_t n = zeros + ones;
    if (n == 0) return 0.0;
    double p0 = static_cast<double>(zeros) / static_cast<double>(n);
    double p1 = static_cast<double>(ones) / static_cast<double>(n);
    return 1.0 - p0 * p0 - p1 * p1;
  }

  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
  };

  // candidate features: a seeded subset without replacement, or all of them
  std::vector<int> candidate_features() {
    int d = static_cast<int>(data.cols());
    std::vector<int> all(d);
    std::iota(all.begin(), all.end(), 0);
    if (features_per_split < 1 || features_per_split >= d) return all;
    for (int k = 0; k < features_per_split; ++k) {
      size_t j = k + rng.index(all.size() - k);
      std::swap(all[k], all[j]);
    }
    all.resize(features_per_split);
    return all;
  }

  bool best_split(const std::vector<int>& idx, Split& out) {
    bool found = false;
    double best = std::numeric_limits<double>::infinity();
    int64_t total_ones = 0;
    for (int i : idx) total_ones += data.y[i];
    int64_t total = static_cast<int64_t>(idx.size());

    std::vector<int> order;
    for (int f : candidate_features()) {
      order = idx;
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        double va = data.X(a, f), vb = data.X(b, f);
        return va < vb || (va == vb && a < b);
      });
      int64_t left_ones = 0;
      for (size_t k = 0; k + 1 < order.size(); ++k) {
        left_ones += data.y[order[k]];
        double v = data.X(order[k], f);
        double next = data.X(order[k + 1], f);
        if (!(v < next)) continue;
        auto left_n = static_cast<int64_t>(k + 1);
        int64_t right_n = total - left_n;
        double weighted = (static_cast<double>(left_n) * gini(left_n - left_ones, left_ones) +
                           static_cast<double>(right_n) *
                               gini(right_n - (total_ones - left_ones), total_ones - left_ones)) /
                          static_cast<double>(total);
        if (weighted < best - 1e-12) {
          best = weighted;
          double mid = v + (next - v) / 2.0;
          if (!(mid < next)) mid = v;  // adjacent floats; keep routing consistent
          out = Split{f, mid, weighted};
          found = true;
        }
      }
    }
    return found;
  }

  int build(const std::vector<int>& idx, int depth) {
    int node_id = static_cast<int>(nodes.size());
    nodes.emplace_back();

    int64_t ones = 0;
    for (int i : idx) ones += data.y[i];
    bool pure = ones == 0 || ones == static_cast<int64_t>(idx.size());

    Split split;
    if (pure || depth >= max_depth || static_cast<int>(idx.size()) < min_samples_split ||
        !best_split(idx, split) ||
        split.impurity >= gini(static_cast<int64_t>(idx.size()) - ones, ones) - 1e-12) {
      nodes[node_id].leaf = true;
      nodes[node_id].label = majority(idx);
      return node_id;
    }

    std::vector<int> left_idx, right_idx;
    for (int i : idx) {
      (data.X(i, split.feature) <= split.threshold ? left_idx : right_idx).push_back(i);
    }
    // sorted distinct values guarantee both sides non-empty, but guard anyway
    if (left_idx.empty() || right_idx.empty()) {
      nodes[node_id].leaf = true;
      nodes[node_id].label = majority(idx);
      return node_id;
    }

    nodes[node_id].leaf = false;
    nodes[node_id].feature = split.feature;
    nodes[node_id].threshold = split.threshold;
    int left = build(left_idx, depth + 1);
    int right = build(right_idx, depth + 1);
    nodes[node_id].left = left;
    nodes[node_id].right = right;
    return node_id;
  }
};

}  // namespace

int DecisionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  int i = 0;
  while (!nodes[i].leaf) {
    i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  }
  return nodes[i].label;
}

DecisionTree train_decision_tree(const Dataset& train, int max_depth, uint64_t seed,
                                 int min_samples_split, int features_per_split) {
  if (train.rows() == 0) fail(Errc::empty_training_set, "decision tree needs >= 1 sample");
  Builder b{train, max_depth, min_samples_split, features_per_split, Rng(seed), {}};
  std::vector<int> idx(train.rows());
  std::iota(idx.begin(), idx.end(), 0);
  b.build(idx, 0);
  DecisionTree tree;
  tree.nodes = std::move(b.nodes);
  return tree;
}

}  // namespace dtwin
