// Random forest black box: bagged CART trees with Gini splits, native
// missing-value routing and per-tree leaf access. The forest is the model
// being explained downstream, so leaves keep integer class counts (exact
// arithmetic for attribution conservation) and every query exposes the
// reached leaf ids.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "protolens/dataset.hpp"

namespace protolens {

struct TreeNode {
  // Internal node iff left >= 0. Leaves keep class_counts; leaf_id is the
  // node's index within its tree.
  int feature = -1;
  double threshold = 0.0;
  bool missing_goes_left = false;
  int left = -1;
  int right = -1;
  std::vector<std::int64_t> class_counts;

  bool is_leaf() const { return left < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // node id = index, root = 0

  // Derived per-node class counts (internal nodes = sum of descendants).
  // Rebuilt by finalize(); not serialized.
  std::vector<std::vector<std::int64_t>> node_counts;
  std::vector<std::int64_t> node_totals;

  int route(std::span<const double> row) const;
  void finalize(int n_classes);
};

struct ForestParams {
  int n_trees = 100;
  int max_depth = 8;
  int min_leaf = 1;
  // 0 means ceil(sqrt(d)), resolved at fit time.
  int features_per_split = 0;
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

using LeafVector = std::vector<std::int32_t>;

class TrainedForest {
 public:
  std::vector<Tree> trees;
  int n_classes = 0;
  std::vector<std::string> feature_names;
  ForestParams train_params;  // resolved values actually used

  std::size_t n_features() const { return feature_names.size(); }
  std::size_t n_trees() const { return trees.size(); }

  std::vector<double> predict_proba(std::span<const double> row) const;
  // argmax of predict_proba; ties resolved to the lowest class index.
  int predict(std::span<const double> row) const;
  LeafVector leaf_assignment(std::span<const double> row) const;

  void check_row(std::span<const double> row) const;
};

TrainedForest fit_forest(const Dataset& train, const ForestParams& params,
                         std::uint64_t seed);

// Versioned JSON; load(save(f)) is structurally identical to f.
std::string save_forest(const TrainedForest& forest);
TrainedForest load_forest(const std::string& bytes);

}  // namespace protolens
