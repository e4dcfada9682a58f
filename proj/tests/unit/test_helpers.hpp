// Shared fixtures for the unit suites: scratch directories, random dataset
// generation and small hand-built forests.
#pragma once

#include <atomic>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "protolens/dataset.hpp"
#include "protolens/forest.hpp"
#include "protolens/rng.hpp"

namespace test_helpers {

inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::atomic<unsigned> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("protolens_" + tag + "_" + std::to_string(::getpid()) +
                    "_" + std::to_string(counter.fetch_add(1)));
  std::filesystem::create_directories(dir);
  return dir;
}

// Random numeric dataset. The first C rows take labels 0..C-1 so label
// names are always in first-appearance order and no class is empty.
inline protolens::Dataset random_dataset(protolens::Rng& rng, std::size_t n,
                                         std::size_t d, int n_classes,
                                         double missing_prob = 0.0,
                                         double class_shift = 0.0) {
  protolens::Dataset ds;
  for (std::size_t f = 0; f < d; ++f) {
    ds.feature_names.push_back("f" + std::to_string(f));
  }
  for (int c = 0; c < n_classes; ++c) {
    ds.label_names.push_back("c" + std::to_string(c));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int label =
        i < static_cast<std::size_t>(n_classes)
            ? static_cast<int>(i)
            : static_cast<int>(rng.bounded(static_cast<std::uint64_t>(n_classes)));
    ds.labels.push_back(label);
    for (std::size_t f = 0; f < d; ++f) {
      if (missing_prob > 0.0 && rng.uniform() < missing_prob) {
        ds.cells.push_back(protolens::missing_cell());
      } else {
        ds.cells.push_back(rng.normal() + class_shift * label);
      }
    }
  }
  return ds;
}

// Bit-exact row fingerprint (NaN-safe) for multiset comparisons.
inline std::vector<std::uint64_t> row_key(const protolens::Dataset& ds,
                                          std::size_t i) {
  std::vector<std::uint64_t> key;
  for (double v : ds.row(i)) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    key.push_back(bits);
  }
  key.push_back(static_cast<std::uint64_t>(ds.labels[i]));
  return key;
}

// One leaf-only tree with the given class counts.
inline protolens::Tree leaf_tree(std::vector<std::int64_t> counts) {
  protolens::Tree tree;
  protolens::TreeNode leaf;
  leaf.class_counts = std::move(counts);
  tree.nodes.push_back(std::move(leaf));
  tree.finalize(static_cast<int>(tree.nodes[0].class_counts.size()));
  return tree;
}

// Root split on `feature` at `threshold`, two leaves.
inline protolens::Tree stump_tree(int feature, double threshold,
                                  std::vector<std::int64_t> left_counts,
                                  std::vector<std::int64_t> right_counts,
                                  bool missing_goes_left = true) {
  protolens::Tree tree;
  protolens::TreeNode root;
  root.feature = feature;
  root.threshold = threshold;
  root.missing_goes_left = missing_goes_left;
  root.left = 1;
  root.right = 2;
  const int n_classes = static_cast<int>(left_counts.size());
  protolens::TreeNode left, right;
  left.class_counts = std::move(left_counts);
  right.class_counts = std::move(right_counts);
  tree.nodes.push_back(std::move(root));
  tree.nodes.push_back(std::move(left));
  tree.nodes.push_back(std::move(right));
  tree.finalize(n_classes);
  return tree;
}

inline protolens::TrainedForest manual_forest(std::vector<protolens::Tree> trees,
                                              int n_classes, std::size_t d) {
  protolens::TrainedForest forest;
  forest.trees = std::move(trees);
  forest.n_classes = n_classes;
  for (std::size_t f = 0; f < d; ++f) {
    forest.feature_names.push_back("f" + std::to_string(f));
  }
  forest.train_params.n_trees = static_cast<int>(forest.trees.size());
  return forest;
}

inline std::string data_file(const std::string& name) {
  return std::string(PROTOLENS_DATA_DIR) + "/" + name;
}

}  // namespace test_helpers
