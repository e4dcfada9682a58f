// Per-instance feature attribution for the forest's predicted probability.
//
// The fast default walks each tree's decision path and credits every split
// with the change in node-mean probability (path attribution). The exact
// Shapley oracle enumerates all 2^d feature subsets against a background
// dataset and is limited to d <= 12; it exists to validate semantics, not
// to run at scale.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "protolens/dataset.hpp"
#include "protolens/forest.hpp"

namespace protolens {

enum class Estimator { saabas, shapley_oracle };

const char* estimator_name(Estimator e);
Estimator parse_estimator(const std::string& name);

struct AttributionVector {
  std::vector<double> phi;  // signed, one entry per feature
  double bias = 0.0;
  int target_class = 0;
  Estimator estimator = Estimator::saabas;
};

// bias + sum(phi) equals predict_proba(x)[target_class] up to float
// accumulation.
AttributionVector saabas_attribution(const TrainedForest& forest,
                                     std::span<const double> row,
                                     int target_class);

// Exact interventional Shapley values of
//   v(S) = mean_b predict_proba(compose(x on S, b off S))[target_class]
// over the background rows. bias = v(empty set).
AttributionVector shapley_bruteforce(const TrainedForest& forest,
                                     std::span<const double> row,
                                     const Dataset& background,
                                     int target_class);

struct AttributionMatrix {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> phi;     // row-major n x d
  std::vector<double> bias;    // length n
  std::vector<int> target_class;
  Estimator estimator = Estimator::saabas;

  std::span<const double> row(std::size_t i) const {
    return {phi.data() + i * d, d};
  }
};

// Row i explains x_i for its own predicted class. For the Shapley oracle the
// background defaults to ds itself.
AttributionMatrix attribution_matrix(const TrainedForest& forest,
                                     const Dataset& ds, Estimator estimator,
                                     const Dataset* background = nullptr);

// header: feature names, "bias", "class"
std::string attribution_matrix_csv(const AttributionMatrix& m,
                                   const std::vector<std::string>& feature_names);

}  // namespace protolens
