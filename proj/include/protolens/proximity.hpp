// Prediction-space distance between instances: one minus the fraction of
// trees in which both instances land in the same leaf. Every distance is an
// integer multiple of 1/T.
#pragma once

#include <string>
#include <vector>

#include "protolens/dataset.hpp"
#include "protolens/forest.hpp"

namespace protolens {

struct DistanceMatrix {
  std::size_t n = 0;
  std::vector<double> values;  // row-major n x n, symmetric, zero diagonal

  double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

double tree_distance(const LeafVector& a, const LeafVector& b);

// Leaf vectors are computed once per instance (n routing passes, not n^2).
DistanceMatrix distance_matrix(const TrainedForest& forest, const Dataset& ds);

std::string distance_matrix_csv(const DistanceMatrix& m);

}  // namespace protolens
