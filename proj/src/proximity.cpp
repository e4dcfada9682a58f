#include "protolens/proximity.hpp"

#include <charconv>

#include "protolens/errors.hpp"

namespace protolens {

double tree_distance(const LeafVector& a, const LeafVector& b) {
  if (a.size() != b.size()) {
    fail(ErrorCode::LengthMismatch, "leaf vectors come from different forests");
  }
  std::size_t agree = 0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t] == b[t]) ++agree;
  }
  return static_cast<double>(a.size() - agree) / static_cast<double>(a.size());
}

DistanceMatrix distance_matrix(const TrainedForest& forest, const Dataset& ds) {
  const std::size_t n = ds.n_rows();
  std::vector<LeafVector> leaves;
  leaves.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    leaves.push_back(forest.leaf_assignment(ds.row(i)));
  }

  DistanceMatrix m;
  m.n = n;
  m.values.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = tree_distance(leaves[i], leaves[j]);
      m.values[i * n + j] = d;
      m.values[j * n + i] = d;
    }
  }
  return m;
}

std::string distance_matrix_csv(const DistanceMatrix& m) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t j = 0; j < m.n; ++j) {
      auto res = std::to_chars(buf, buf + sizeof(buf), m.at(i, j));
      out.append(buf, res.ptr);
      out += j + 1 < m.n ? ',' : '\n';
    }
  }
  return out;
}

}  // namespace protolens
