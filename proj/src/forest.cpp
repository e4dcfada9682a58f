#include "protolens/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "protolens/errors.hpp"
#include "protolens/rng.hpp"

namespace protolens {

namespace {

double gini(const std::vector<std::int64_t>& counts, std::int64_t total) {
  if (total == 0) return 0.0;
  double sum_sq = 0.0;
  for (std::int64_t c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

struct SplitChoice {
  bool found = false;
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  bool missing_goes_left = false;
};

// Better-gain ordering with deterministic tie-breaks: higher gain, then
// lower feature index, then lower threshold.
bool improves(const SplitChoice& cand, const SplitChoice& best) {
  if (!best.found) return true;
  if (cand.gain != best.gain) return cand.gain > best.gain;
  if (cand.feature != best.feature) return cand.feature < best.feature;
  return cand.threshold < best.threshold;
}

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const ForestParams& params, int n_classes,
              Rng rng)
      : data_(data), params_(params), n_classes_(n_classes), rng_(std::move(rng)) {}

  Tree build(const std::vector<std::size_t>& rows) {
    tree_.nodes.clear();
    grow(rows, 0);
    tree_.finalize(n_classes_);
    return std::move(tree_);
  }

 private:
  std::vector<std::int64_t> count_classes(const std::vector<std::size_t>& rows) const {
    std::vector<std::int64_t> counts(n_classes_, 0);
    for (std::size_t r : rows) counts[data_.labels[r]]++;
    return counts;
  }

  std::vector<int> sample_features() {
    const int d = static_cast<int>(data_.n_features());
    const int k = params_.features_per_split;
    if (k >= d) {
      std::vector<int> all(d);
      std::iota(all.begin(), all.end(), 0);
      return all;
    }
    // Partial Fisher-Yates over feature indices.
    std::vector<int> pool(d);
    std::iota(pool.begin(), pool.end(), 0);
    std::vector<int> picked;
    picked.reserve(k);
    for (int i = 0; i < k; ++i) {
      const auto j = i + static_cast<int>(rng_.bounded(d - i));
      std::swap(pool[i], pool[j]);
      picked.push_back(pool[i]);
    }
    return picked;
  }

  SplitChoice best_split(const std::vector<std::size_t>& rows) {
    SplitChoice best;
    const auto candidates = sample_features();
    std::vector<std::pair<double, int>> vals;  // (value, label) of non-missing rows
    for (int f : candidates) {
      vals.clear();
      std::int64_t n_missing = 0;
      for (std::size_t r : rows) {
        const double v = data_.at(r, f);
        if (is_missing(v)) {
          ++n_missing;
        } else {
          vals.emplace_back(v, data_.labels[r]);
        }
      }
      if (vals.size() < 2) continue;
      std::sort(vals.begin(), vals.end());

      std::vector<std::int64_t> left(n_classes_, 0);
      std::vector<std::int64_t> right(n_classes_, 0);
      for (const auto& [v, y] : vals) right[y]++;
      const auto n_known = static_cast<std::int64_t>(vals.size());
      const double parent_impurity = gini(right, n_known);

      std::int64_t n_left = 0;
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        left[vals[i].second]++;
        right[vals[i].second]--;
        ++n_left;
        if (vals[i].first == vals[i + 1].first) continue;

        const std::int64_t n_right = n_known - n_left;
        const bool miss_left = n_left >= n_right;  // majority direction, ties left
        const std::int64_t full_left = n_left + (miss_left ? n_missing : 0);
        const std::int64_t full_right = n_right + (miss_left ? 0 : n_missing);
        if (full_left < params_.min_leaf || full_right < params_.min_leaf) continue;

        const double child_impurity =
            (static_cast<double>(n_left) * gini(left, n_left) +
             static_cast<double>(n_right) * gini(right, n_right)) /
            static_cast<double>(n_known);
        const double gain = parent_impurity - child_impurity;
        if (gain <= 0.0) continue;

        SplitChoice cand;
        cand.found = true;
        cand.gain = gain;
        cand.feature = f;
        cand.threshold = vals[i].first + (vals[i + 1].first - vals[i].first) / 2.0;
        cand.missing_goes_left = miss_left;
        if (improves(cand, best)) best = cand;
      }
    }
    return best;
  }

  int make_leaf(std::vector<std::int64_t> counts) {
    const int id = static_cast<int>(tree_.nodes.size());
    TreeNode node;
    node.class_counts = std::move(counts);
    tree_.nodes.push_back(std::move(node));
    return id;
  }

  int grow(const std::vector<std::size_t>& rows, int depth) {
    auto counts = count_classes(rows);
    const bool pure =
        std::count_if(counts.begin(), counts.end(),
                      [](std::int64_t c) { return c > 0; }) <= 1;
    if (depth >= params_.max_depth || pure ||
        rows.size() < 2 * static_cast<std::size_t>(params_.min_leaf)) {
      return make_leaf(std::move(counts));
    }

    const SplitChoice split = best_split(rows);
    if (!split.found) return make_leaf(std::move(counts));

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows) {
      const double v = data_.at(r, split.feature);
      const bool go_left =
          is_missing(v) ? split.missing_goes_left : v <= split.threshold;
      (go_left ? left_rows : right_rows).push_back(r);
    }

    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.nodes[id].feature = split.feature;
    tree_.nodes[id].threshold = split.threshold;
    tree_.nodes[id].missing_goes_left = split.missing_goes_left;
    const int left_id = grow(left_rows, depth + 1);
    const int right_id = grow(right_rows, depth + 1);
    tree_.nodes[id].left = left_id;
    tree_.nodes[id].right = right_id;
    return id;
  }

  const Dataset& data_;
  const ForestParams& params_;
  int n_classes_;
  Rng rng_;
  Tree tree_;
};

}  // namespace

int Tree::route(std::span<const double> row) const {
  int id = 0;
  while (!nodes[id].is_leaf()) {
    const TreeNode& n = nodes[id];
    const double v = row[n.feature];
    const bool go_left = is_missing(v) ? n.missing_goes_left : v <= n.threshold;
    id = go_left ? n.left : n.right;
  }
  return id;
}

void Tree::finalize(int n_classes) {
  node_counts.assign(nodes.size(), {});
  node_totals.assign(nodes.size(), 0);
  // Post-order accumulation; node ids may appear in any order in `nodes`.
  std::vector<std::pair<int, bool>> stack{{0, false}};
  while (!stack.empty()) {
    auto [id, expanded] = stack.back();
    stack.pop_back();
    if (nodes[id].is_leaf()) {
      node_counts[id] = nodes[id].class_counts;
    } else if (!expanded) {
      stack.emplace_back(id, true);
      stack.emplace_back(nodes[id].left, false);
      stack.emplace_back(nodes[id].right, false);
      continue;
    } else {
      node_counts[id].assign(n_classes, 0);
      for (int child : {nodes[id].left, nodes[id].right}) {
        for (int c = 0; c < n_classes; ++c) {
          node_counts[id][c] += node_counts[child][c];
        }
      }
    }
    node_totals[id] =
        std::accumulate(node_counts[id].begin(), node_counts[id].end(),
                        std::int64_t{0});
  }
}

void TrainedForest::check_row(std::span<const double> row) const {
  if (row.size() != n_features()) {
    fail(ErrorCode::DimensionMismatch,
         "row has " + std::to_string(row.size()) + " cells, forest expects " +
             std::to_string(n_features()));
  }
}

std::vector<double> TrainedForest::predict_proba(
    std::span<const double> row) const {
  check_row(row);
  std::vector<double> proba(n_classes, 0.0);
  for (const Tree& tree : trees) {
    const int leaf = tree.route(row);
    const auto total = static_cast<double>(tree.node_totals[leaf]);
    for (int c = 0; c < n_classes; ++c) {
      proba[c] += static_cast<double>(tree.node_counts[leaf][c]) / total;
    }
  }
  for (double& p : proba) p /= static_cast<double>(trees.size());
  return proba;
}

int TrainedForest::predict(std::span<const double> row) const {
  const auto proba = predict_proba(row);
  return static_cast<int>(std::max_element(proba.begin(), proba.end()) -
                          proba.begin());
}

LeafVector TrainedForest::leaf_assignment(std::span<const double> row) const {
  check_row(row);
  LeafVector leaves;
  leaves.reserve(trees.size());
  for (const Tree& tree : trees) {
    leaves.push_back(static_cast<std::int32_t>(tree.route(row)));
  }
  return leaves;
}

TrainedForest fit_forest(const Dataset& train, const ForestParams& params,
                         std::uint64_t seed) {
  train.validate();
  if (params.n_trees < 1 || params.max_depth < 1 || params.min_leaf < 1) {
    fail(ErrorCode::InvalidParams,
         "n_trees, max_depth and min_leaf must all be >= 1");
  }

  TrainedForest forest;
  forest.n_classes = static_cast<int>(train.n_classes());
  forest.feature_names = train.feature_names;
  forest.train_params = params;
  forest.train_params.seed = seed;
  if (params.features_per_split <= 0) {
    forest.train_params.features_per_split = static_cast<int>(
        std::ceil(std::sqrt(static_cast<double>(train.n_features()))));
  }

  const std::size_t n = train.n_rows();
  forest.trees.reserve(params.n_trees);
  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(t));
    std::vector<std::size_t> rows(n);
    if (params.bootstrap) {
      for (std::size_t i = 0; i < n; ++i) {
        rows[i] = static_cast<std::size_t>(rng.bounded(n));
      }
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    TreeBuilder builder(train, forest.train_params, forest.n_classes,
                        std::move(rng));
    forest.trees.push_back(builder.build(rows));
  }
  return forest;
}

namespace {

using nlohmann::json;

json node_to_json(const TreeNode& n, int id) {
  if (n.is_leaf()) {
    return json{{"kind", "leaf"},
                {"leaf_id", id},
                {"class_counts", n.class_counts}};
  }
  return json{{"kind", "internal"},
              {"feature", n.feature},
              {"threshold", n.threshold},
              {"missing_goes_left", n.missing_goes_left},
              {"left", n.left},
              {"right", n.right}};
}

void validate_tree(const Tree& tree, std::size_t d, int n_classes) {
  const auto n_nodes = tree.nodes.size();
  if (n_nodes == 0) fail(ErrorCode::CorruptPayload, "tree has no nodes");
  std::vector<int> seen(n_nodes, 0);
  std::vector<int> stack{0};
  std::size_t visited = 0;
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    if (id < 0 || static_cast<std::size_t>(id) >= n_nodes || seen[id]) {
      fail(ErrorCode::CorruptPayload, "node graph is not a tree");
    }
    seen[id] = 1;
    ++visited;
    const TreeNode& n = tree.nodes[id];
    if (n.is_leaf()) {
      if (n.class_counts.size() != static_cast<std::size_t>(n_classes)) {
        fail(ErrorCode::CorruptPayload, "leaf class_counts length mismatch");
      }
      std::int64_t total = 0;
      for (std::int64_t c : n.class_counts) {
        if (c < 0) fail(ErrorCode::CorruptPayload, "negative leaf count");
        total += c;
      }
      if (total < 1) fail(ErrorCode::CorruptPayload, "empty leaf");
    } else {
      if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= d) {
        fail(ErrorCode::CorruptPayload, "split feature out of range");
      }
      if (!std::isfinite(n.threshold)) {
        fail(ErrorCode::CorruptPayload, "non-finite threshold");
      }
      if (n.right < 0) fail(ErrorCode::CorruptPayload, "internal node missing child");
      stack.push_back(n.left);
      stack.push_back(n.right);
    }
  }
  if (visited != n_nodes) {
    fail(ErrorCode::CorruptPayload, "unreachable nodes in tree");
  }
}

}  // namespace

std::string save_forest(const TrainedForest& forest) {
  json doc;
  doc["format_version"] = 1;
  doc["n_classes"] = forest.n_classes;
  doc["feature_names"] = forest.feature_names;
  json trees = json::array();
  for (const Tree& tree : forest.trees) {
    json nodes = json::array();
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      nodes.push_back(node_to_json(tree.nodes[i], static_cast<int>(i)));
    }
    trees.push_back(json{{"nodes", std::move(nodes)}});
  }
  doc["trees"] = std::move(trees);
  doc["train_params"] = json{
      {"n_trees", forest.train_params.n_trees},
      {"max_depth", forest.train_params.max_depth},
      {"min_leaf", forest.train_params.min_leaf},
      {"features_per_split", forest.train_params.features_per_split},
      {"bootstrap", forest.train_params.bootstrap},
      {"seed", forest.train_params.seed},
  };
  return doc.dump(2) + "\n";
}

TrainedForest load_forest(const std::string& bytes) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::exception& e) {
    fail(ErrorCode::CorruptPayload, std::string("not valid JSON: ") + e.what());
  }

  try {
    if (!doc.contains("format_version") ||
        !doc["format_version"].is_number_integer()) {
      fail(ErrorCode::CorruptPayload, "missing format_version");
    }
    if (doc["format_version"].get<int>() != 1) {
      fail(ErrorCode::VersionMismatch,
           "unsupported format_version " + doc["format_version"].dump());
    }

    TrainedForest forest;
    forest.n_classes = doc.at("n_classes").get<int>();
    forest.feature_names =
        doc.at("feature_names").get<std::vector<std::string>>();
    if (forest.n_classes < 2 || forest.feature_names.empty()) {
      fail(ErrorCode::CorruptPayload, "invalid n_classes or feature_names");
    }

    for (const json& jt : doc.at("trees")) {
      Tree tree;
      for (const json& jn : jt.at("nodes")) {
        TreeNode node;
        const auto kind = jn.at("kind").get<std::string>();
        if (kind == "leaf") {
          node.class_counts =
              jn.at("class_counts").get<std::vector<std::int64_t>>();
        } else if (kind == "internal") {
          node.feature = jn.at("feature").get<int>();
          node.threshold = jn.at("threshold").get<double>();
          node.missing_goes_left = jn.at("missing_goes_left").get<bool>();
          node.left = jn.at("left").get<int>();
          node.right = jn.at("right").get<int>();
          if (node.left < 0 || node.right < 0) {
            fail(ErrorCode::CorruptPayload, "invalid child id");
          }
        } else {
          fail(ErrorCode::CorruptPayload, "unknown node kind '" + kind + "'");
        }
        tree.nodes.push_back(std::move(node));
      }
      validate_tree(tree, forest.feature_names.size(), forest.n_classes);
      tree.finalize(forest.n_classes);
      forest.trees.push_back(std::move(tree));
    }
    if (forest.trees.empty()) {
      fail(ErrorCode::CorruptPayload, "forest has no trees");
    }

    const json& tp = doc.at("train_params");
    forest.train_params.n_trees = tp.at("n_trees").get<int>();
    forest.train_params.max_depth = tp.at("max_depth").get<int>();
    forest.train_params.min_leaf = tp.at("min_leaf").get<int>();
    forest.train_params.features_per_split =
        tp.at("features_per_split").get<int>();
    forest.train_params.bootstrap = tp.at("bootstrap").get<bool>();
    forest.train_params.seed = tp.at("seed").get<std::uint64_t>();
    return forest;
  } catch (const json::exception& e) {
    fail(ErrorCode::CorruptPayload, std::string("schema error: ") + e.what());
  }
}

}  // namespace protolens
