#include "protolens/attribution.hpp"

#include <bit>
#include <charconv>
#include <cmath>

#include "protolens/errors.hpp"

namespace protolens {

const char* estimator_name(Estimator e) {
  switch (e) {
    case Estimator::saabas: return "saabas";
    case Estimator::shapley_oracle: return "shapley_oracle";
  }
  return "?";
}

Estimator parse_estimator(const std::string& name) {
  if (name == "saabas") return Estimator::saabas;
  if (name == "shapley_oracle") return Estimator::shapley_oracle;
  fail(ErrorCode::ConfigInvalid, "unknown estimator '" + name + "'");
}

namespace {

void check_target(const TrainedForest& forest, int target_class) {
  if (target_class < 0 || target_class >= forest.n_classes) {
    fail(ErrorCode::IndexOutOfRange,
         "target_class " + std::to_string(target_class) + " out of range");
  }
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

AttributionVector saabas_attribution(const TrainedForest& forest,
                                     std::span<const double> row,
                                     int target_class) {
  forest.check_row(row);
  check_target(forest, target_class);

  AttributionVector out;
  out.phi.assign(forest.n_features(), 0.0);
  out.target_class = target_class;
  out.estimator = Estimator::saabas;

  const auto n_trees = static_cast<double>(forest.trees.size());
  for (const Tree& tree : forest.trees) {
    auto mean_at = [&](int id) {
      return static_cast<double>(tree.node_counts[id][target_class]) /
             static_cast<double>(tree.node_totals[id]);
    };
    int id = 0;
    out.bias += mean_at(0) / n_trees;
    while (!tree.nodes[id].is_leaf()) {
      const TreeNode& n = tree.nodes[id];
      const double v = row[n.feature];
      const bool go_left = is_missing(v) ? n.missing_goes_left : v <= n.threshold;
      const int child = go_left ? n.left : n.right;
      out.phi[n.feature] += (mean_at(child) - mean_at(id)) / n_trees;
      id = child;
    }
  }
  return out;
}

AttributionVector shapley_bruteforce(const TrainedForest& forest,
                                     std::span<const double> row,
                                     const Dataset& background,
                                     int target_class) {
  forest.check_row(row);
  check_target(forest, target_class);
  const auto d = forest.n_features();
  if (d > 12) {
    fail(ErrorCode::TooManyFeatures,
         "brute-force Shapley supports at most 12 features, got " +
             std::to_string(d));
  }
  if (background.n_rows() == 0) {
    fail(ErrorCode::EmptyBackground, "background dataset is empty");
  }
  if (background.n_features() != d) {
    fail(ErrorCode::DimensionMismatch, "background feature count mismatch");
  }

  // v[S] for every subset bitmask S.
  const std::size_t n_subsets = std::size_t{1} << d;
  std::vector<double> v(n_subsets, 0.0);
  std::vector<double> composed(d);
  const auto n_bg = background.n_rows();
  for (std::size_t mask = 0; mask < n_subsets; ++mask) {
    double acc = 0.0;
    for (std::size_t b = 0; b < n_bg; ++b) {
      const auto bg_row = background.row(b);
      for (std::size_t l = 0; l < d; ++l) {
        composed[l] = (mask >> l) & 1 ? row[l] : bg_row[l];
      }
      acc += forest.predict_proba(composed)[target_class];
    }
    v[mask] = acc / static_cast<double>(n_bg);
  }

  // weight(|S|) = |S|! (d - |S| - 1)! / d!   (exact in double for d <= 12)
  std::vector<double> factorial(d + 1, 1.0);
  for (std::size_t i = 1; i <= d; ++i) {
    factorial[i] = factorial[i - 1] * static_cast<double>(i);
  }
  std::vector<double> weight(d);
  for (std::size_t s = 0; s < d; ++s) {
    weight[s] = factorial[s] * factorial[d - s - 1] / factorial[d];
  }

  AttributionVector out;
  out.phi.assign(d, 0.0);
  out.bias = v[0];
  out.target_class = target_class;
  out.estimator = Estimator::shapley_oracle;
  for (std::size_t l = 0; l < d; ++l) {
    const std::size_t bit = std::size_t{1} << l;
    double phi = 0.0;
    for (std::size_t mask = 0; mask < n_subsets; ++mask) {
      if (mask & bit) continue;
      const auto s = static_cast<std::size_t>(std::popcount(mask));
      phi += weight[s] * (v[mask | bit] - v[mask]);
    }
    out.phi[l] = phi;
  }
  return out;
}

AttributionMatrix attribution_matrix(const TrainedForest& forest,
                                     const Dataset& ds, Estimator estimator,
                                     const Dataset* background) {
  if (ds.n_features() != forest.n_features()) {
    fail(ErrorCode::DimensionMismatch, "dataset feature count mismatch");
  }
  const Dataset& bg = background ? *background : ds;

  AttributionMatrix m;
  m.n = ds.n_rows();
  m.d = ds.n_features();
  m.estimator = estimator;
  m.phi.resize(m.n * m.d);
  m.bias.resize(m.n);
  m.target_class.resize(m.n);
  for (std::size_t i = 0; i < m.n; ++i) {
    const auto row = ds.row(i);
    const int target = forest.predict(row);
    const AttributionVector a =
        estimator == Estimator::saabas
            ? saabas_attribution(forest, row, target)
            : shapley_bruteforce(forest, row, bg, target);
    std::copy(a.phi.begin(), a.phi.end(), m.phi.begin() + i * m.d);
    m.bias[i] = a.bias;
    m.target_class[i] = target;
  }
  return m;
}

std::string attribution_matrix_csv(
    const AttributionMatrix& m, const std::vector<std::string>& feature_names) {
  if (feature_names.size() != m.d) {
    fail(ErrorCode::LengthMismatch, "feature name count mismatch");
  }
  std::string out;
  for (const auto& name : feature_names) {
    out += name;
    out += ',';
  }
  out += "bias,class\n";
  for (std::size_t i = 0; i < m.n; ++i) {
    for (double v : m.row(i)) {
      out += format_double(v);
      out += ',';
    }
    out += format_double(m.bias[i]);
    out += ',';
    out += std::to_string(m.target_class[i]);
    out += '\n';
  }
  return out;
}

}  // namespace protolens
