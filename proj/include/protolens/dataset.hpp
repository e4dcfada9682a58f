// Tabular dataset container and ingestion: CSV loading with missing-value
// markers, label encoding, stratified splitting and mean imputation.
//
// Cells are doubles; a missing cell is stored as quiet NaN and must be
// tested with is_missing(). Every non-missing cell is finite. Labels are
// encoded in first-appearance order, so a dataset produced by load_csv (or
// the bundled generators) round-trips through save_csv cell- and
// label-order-exactly.
#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace protolens {

inline double missing_cell() {
  return std::numeric_limits<double>::quiet_NaN();
}

inline bool is_missing(double v) { return v != v; }

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<double> cells;  // row-major, n_rows x n_features
  std::vector<int> labels;    // indices into label_names
  std::vector<std::string> label_names;

  std::size_t n_rows() const { return labels.size(); }
  std::size_t n_features() const { return feature_names.size(); }
  std::size_t n_classes() const { return label_names.size(); }

  double at(std::size_t row, std::size_t feature) const {
    return cells[row * n_features() + feature];
  }
  std::span<const double> row(std::size_t i) const {
    return {cells.data() + i * n_features(), n_features()};
  }

  // Rows of this dataset at the given source indices; labels and names kept.
  Dataset subset(const std::vector<std::size_t>& indices) const;

  // Throws on any invariant violation (n >= 1, d >= 1, C >= 2, finite
  // non-missing cells, labels in range).
  void validate() const;
};

struct SplitPair {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_indices;  // into the source dataset
  std::vector<std::size_t> test_indices;
  std::uint64_t seed = 0;
  double test_fraction = 0.0;
};

Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::vector<std::string>& missing_tokens);

// RFC-4180 output; missing cells become empty fields, doubles are printed
// with the shortest round-trip representation.
void save_csv(const Dataset& ds, const std::string& path);
std::string dataset_to_csv(const Dataset& ds);

// Deterministic per-class split. Test count per class is
// round(class_count * test_fraction) clamped to [1, class_count - 1].
SplitPair stratified_split(const Dataset& ds, double test_fraction,
                           std::uint64_t seed);

// Per-feature mean of the non-missing values; 0.0 for all-missing columns.
std::vector<double> feature_means(const Dataset& ds);

Dataset impute_with_means(const Dataset& ds, const std::vector<double>& means);

// Replaces every missing cell by the mean of its own column. Idempotent.
Dataset mean_impute(const Dataset& ds);

}  // namespace protolens
