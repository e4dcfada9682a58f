#include "protolens/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "protolens/errors.hpp"

namespace protolens {

SurrogateModel::SurrogateModel(const PrototypeSet& prototypes,
                               const TrainedForest& forest, const Dataset& train)
    : forest_(forest) {
  if (prototypes.indices.empty()) {
    fail(ErrorCode::EmptyPrototypeSet, "surrogate needs at least one prototype");
  }
  for (std::size_t pos = 0; pos < prototypes.indices.size(); ++pos) {
    const std::size_t idx = prototypes.indices[pos];
    if (idx >= train.n_rows()) {
      fail(ErrorCode::IndexOutOfRange, "prototype index outside training set");
    }
    leaves_.push_back(forest.leaf_assignment(train.row(idx)));
    labels_.push_back(prototypes.labels[pos]);
    indices_.push_back(idx);
  }
}

SurrogateModel::Prediction SurrogateModel::predict(
    std::span<const double> row) const {
  const LeafVector leaves = forest_.leaf_assignment(row);
  std::size_t best = 0;
  double best_dist = tree_distance(leaves, leaves_[0]);
  for (std::size_t pos = 1; pos < leaves_.size(); ++pos) {
    const double d = tree_distance(leaves, leaves_[pos]);
    if (d < best_dist) {  // strict: ties keep the earlier prototype
      best_dist = d;
      best = pos;
    }
  }
  return {labels_[best], best, indices_[best], best_dist};
}

nlohmann::json fidelity_report_to_json(const FidelityReport& r) {
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& pc : r.per_class) {
    per_class.push_back({{"class", pc.class_index},
                         {"agree", pc.agree},
                         {"total", pc.total}});
  }
  return {{"method", r.method},
          {"fidelity", r.fidelity},
          {"size", r.size},
          {"per_class", std::move(per_class)},
          {"config", r.config_echo}};
}

FidelityReport fidelity(const PrototypeSet& prototypes,
                        const TrainedForest& forest, const Dataset& train,
                        const Dataset& test, const std::string& method,
                        nlohmann::json config_echo) {
  if (test.n_rows() == 0) fail(ErrorCode::EmptyTestSet, "test set is empty");
  SurrogateModel surrogate(prototypes, forest, train);

  FidelityReport report;
  report.method = method;
  report.size = surrogate.size();
  report.config_echo = std::move(config_echo);
  report.per_class.resize(forest.n_classes);
  for (int c = 0; c < forest.n_classes; ++c) report.per_class[c].class_index = c;

  std::size_t agree = 0;
  for (std::size_t i = 0; i < test.n_rows(); ++i) {
    const auto row = test.row(i);
    const int bb = forest.predict(row);
    const int sg = surrogate.predict(row).label;
    report.per_class[bb].total++;
    if (bb == sg) {
      report.per_class[bb].agree++;
      ++agree;
    }
  }
  report.fidelity = static_cast<double>(agree) / static_cast<double>(test.n_rows());
  return report;
}

namespace {

// ---- baselines -----------------------------------------------------------

struct GaussianNb {
  std::vector<double> log_prior;              // C
  std::vector<std::vector<double>> mean;      // C x d
  std::vector<std::vector<double>> var;       // C x d, floored

  int predict(std::span<const double> row) const {
    int best = 0;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < log_prior.size(); ++c) {
      double ll = log_prior[c];
      for (std::size_t f = 0; f < row.size(); ++f) {
        const double diff = row[f] - mean[c][f];
        ll += -0.5 * std::log(2.0 * 3.14159265358979323846 * var[c][f]) -
              diff * diff / (2.0 * var[c][f]);
      }
      if (ll > best_ll) {
        best_ll = ll;
        best = static_cast<int>(c);
      }
    }
    return best;
  }
};

GaussianNb fit_nb(const Dataset& train) {
  const std::size_t C = train.n_classes();
  const std::size_t d = train.n_features();
  GaussianNb nb;
  nb.log_prior.assign(C, 0.0);
  nb.mean.assign(C, std::vector<double>(d, 0.0));
  nb.var.assign(C, std::vector<double>(d, 0.0));
  std::vector<std::size_t> counts(C, 0);
  for (std::size_t i = 0; i < train.n_rows(); ++i) {
    const int y = train.labels[i];
    counts[y]++;
    for (std::size_t f = 0; f < d; ++f) nb.mean[y][f] += train.at(i, f);
  }
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t f = 0; f < d; ++f) {
      nb.mean[c][f] /= static_cast<double>(counts[c]);
    }
    nb.log_prior[c] = std::log(static_cast<double>(counts[c]) /
                               static_cast<double>(train.n_rows()));
  }
  for (std::size_t i = 0; i < train.n_rows(); ++i) {
    const int y = train.labels[i];
    for (std::size_t f = 0; f < d; ++f) {
      const double diff = train.at(i, f) - nb.mean[y][f];
      nb.var[y][f] += diff * diff;
    }
  }
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t f = 0; f < d; ++f) {
      nb.var[c][f] = std::max(nb.var[c][f] / static_cast<double>(counts[c]), 1e-9);
    }
  }
  return nb;
}

struct LogisticRegression {
  // Weights are C x (d+1); the last column is the intercept on standardized
  // features.
  std::vector<double> weights;
  std::vector<double> feat_mean, feat_std;
  std::size_t C = 0, d = 0;

  int predict(std::span<const double> row) const {
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < C; ++c) {
      double s = weights[c * (d + 1) + d];
      for (std::size_t f = 0; f < d; ++f) {
        s += weights[c * (d + 1) + f] * (row[f] - feat_mean[f]) / feat_std[f];
      }
      if (s > best_score) {
        best_score = s;
        best = static_cast<int>(c);
      }
    }
    return best;
  }
};

LogisticRegression fit_lr(const Dataset& train) {
  constexpr double kLambda = 1e-4;
  constexpr double kGradTol = 1e-6;
  constexpr int kMaxIter = 10000;

  const std::size_t C = train.n_classes();
  const std::size_t d = train.n_features();
  const std::size_t n = train.n_rows();

  LogisticRegression lr;
  lr.C = C;
  lr.d = d;
  lr.feat_mean.assign(d, 0.0);
  lr.feat_std.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < d; ++f) lr.feat_mean[f] += train.at(i, f);
  }
  for (std::size_t f = 0; f < d; ++f) lr.feat_mean[f] /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < d; ++f) {
      const double diff = train.at(i, f) - lr.feat_mean[f];
      lr.feat_std[f] += diff * diff;
    }
  }
  for (std::size_t f = 0; f < d; ++f) {
    lr.feat_std[f] = std::sqrt(lr.feat_std[f] / static_cast<double>(n));
    if (lr.feat_std[f] < 1e-12) lr.feat_std[f] = 1.0;
  }

  // Standardized design matrix with an intercept column.
  std::vector<double> X(n * (d + 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < d; ++f) {
      X[i * (d + 1) + f] = (train.at(i, f) - lr.feat_mean[f]) / lr.feat_std[f];
    }
    X[i * (d + 1) + d] = 1.0;
  }

  lr.weights.assign(C * (d + 1), 0.0);
  std::vector<double> grad(C * (d + 1));
  std::vector<double> scores(C);

  // Fixed step from the smoothness bound of the softmax loss on
  // standardized features: L <= 0.5 * (d + 1) + lambda.
  const double step = 1.0 / (0.5 * static_cast<double>(d + 1) + kLambda);

  for (int iter = 0; iter < kMaxIter; ++iter) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* xi = &X[i * (d + 1)];
      double max_s = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < C; ++c) {
        double s = 0.0;
        for (std::size_t f = 0; f <= d; ++f) {
          s += lr.weights[c * (d + 1) + f] * xi[f];
        }
        scores[c] = s;
        max_s = std::max(max_s, s);
      }
      double z = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        scores[c] = std::exp(scores[c] - max_s);
        z += scores[c];
      }
      for (std::size_t c = 0; c < C; ++c) {
        const double err =
            scores[c] / z - (train.labels[i] == static_cast<int>(c) ? 1.0 : 0.0);
        for (std::size_t f = 0; f <= d; ++f) {
          grad[c * (d + 1) + f] += err * xi[f];
        }
      }
    }
    double grad_norm_sq = 0.0;
    for (std::size_t k = 0; k < grad.size(); ++k) {
      grad[k] = grad[k] / static_cast<double>(n) + kLambda * lr.weights[k];
      grad_norm_sq += grad[k] * grad[k];
    }
    if (std::sqrt(grad_norm_sq) < kGradTol) break;
    for (std::size_t k = 0; k < grad.size(); ++k) {
      lr.weights[k] -= step * grad[k];
    }
  }
  return lr;
}

}  // namespace

const char* baseline_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::naive_bayes: return "naive_bayes";
    case BaselineKind::logistic_regression: return "logistic_regression";
    case BaselineKind::decision_tree: return "decision_tree";
  }
  return "?";
}

FidelityReport baseline_fit_predict(BaselineKind kind, const Dataset& train_proxy,
                                    const Dataset& test_proxy) {
  train_proxy.validate();
  if (test_proxy.n_rows() == 0) fail(ErrorCode::EmptyTestSet, "test set is empty");

  const std::size_t C = train_proxy.n_classes();
  std::vector<std::size_t> class_counts(C, 0);
  for (int y : train_proxy.labels) class_counts[y]++;
  for (std::size_t c = 0; c < C; ++c) {
    if (class_counts[c] == 0) {
      fail(ErrorCode::DegenerateClass,
           "class " + std::to_string(c) + " absent from proxy labels");
    }
  }

  // Baseline protocol: mean imputation with the training means.
  const auto means = feature_means(train_proxy);
  const Dataset train = impute_with_means(train_proxy, means);
  const Dataset test = impute_with_means(test_proxy, means);

  FidelityReport report;
  report.method = baseline_name(kind);
  report.per_class.resize(C);
  for (std::size_t c = 0; c < C; ++c) {
    report.per_class[c].class_index = static_cast<int>(c);
  }

  std::vector<int> predictions(test.n_rows());
  switch (kind) {
    case BaselineKind::naive_bayes: {
      const GaussianNb nb = fit_nb(train);
      for (std::size_t i = 0; i < test.n_rows(); ++i) {
        predictions[i] = nb.predict(test.row(i));
      }
      report.size = 2 * C * train.n_features();
      break;
    }
    case BaselineKind::logistic_regression: {
      const LogisticRegression lr = fit_lr(train);
      for (std::size_t i = 0; i < test.n_rows(); ++i) {
        predictions[i] = lr.predict(test.row(i));
      }
      report.size = C * (train.n_features() + 1);
      break;
    }
    case BaselineKind::decision_tree: {
      ForestParams params;
      params.n_trees = 1;
      params.max_depth = 15;
      params.min_leaf = 1;
      params.features_per_split = static_cast<int>(train.n_features());
      params.bootstrap = false;
      const TrainedForest tree = fit_forest(train, params, 0);
      for (std::size_t i = 0; i < test.n_rows(); ++i) {
        predictions[i] = tree.predict(test.row(i));
      }
      report.size = tree.trees[0].nodes.size();
      break;
    }
  }

  std::size_t agree = 0;
  for (std::size_t i = 0; i < test.n_rows(); ++i) {
    const int bb = test.labels[i];
    report.per_class[bb].total++;
    if (predictions[i] == bb) {
      report.per_class[bb].agree++;
      ++agree;
    }
  }
  report.fidelity = static_cast<double>(agree) / static_cast<double>(test.n_rows());
  return report;
}

// ---- Wilcoxon signed-rank test --------------------------------------------

WilcoxonResult wilcoxon_signed_rank(
    const std::vector<std::pair<double, double>>& pairs, WilcoxonMode mode) {
  std::vector<double> diffs;
  for (const auto& [a, b] : pairs) {
    if (a != b) diffs.push_back(a - b);
  }
  if (diffs.empty()) {
    fail(ErrorCode::AllZeroDifferences, "all paired differences are zero");
  }
  const std::size_t n = diffs.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(diffs[a]) < std::fabs(diffs[b]);
  });

  // Mid-ranks, doubled so that every rank is integral.
  std::vector<std::int64_t> rank2(n, 0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n &&
           std::fabs(diffs[order[j + 1]]) == std::fabs(diffs[order[i]])) {
      ++j;
    }
    const std::int64_t r2 = static_cast<std::int64_t>(i + j) + 2;  // 2*(avg rank)
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
    i = j + 1;
  }

  std::int64_t w_plus2 = 0, total2 = 0;
  for (std::size_t k = 0; k < n; ++k) {
    total2 += rank2[k];
    if (diffs[k] > 0) w_plus2 += rank2[k];
  }
  const std::int64_t w_minus2 = total2 - w_plus2;
  const std::int64_t w2 = std::min(w_plus2, w_minus2);

  WilcoxonResult res;
  res.w = static_cast<double>(w2) / 2.0;
  res.n = n;

  const bool use_exact = mode == WilcoxonMode::exact ||
                         (mode == WilcoxonMode::auto_select && n <= 20);
  if (use_exact) {
    // Distribution of W+ (doubled) over all 2^n sign assignments.
    std::vector<double> count(total2 + 1, 0.0);
    count[0] = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::int64_t r = rank2[k];
      for (std::int64_t s = total2; s >= r; --s) {
        count[s] += count[s - r];
      }
    }
    double hits = 0.0;
    for (std::int64_t s = 0; s <= total2; ++s) {
      if (std::min(s, total2 - s) <= w2) hits += count[s];
    }
    res.p = std::min(1.0, hits / std::pow(2.0, static_cast<double>(n)));
    res.exact = true;
  } else {
    // Normal approximation with tie and continuity corrections. The tie
    // term uses the standard sum of (t^3 - t) over tie groups.
    const double nn = static_cast<double>(n);
    const double mu = nn * (nn + 1.0) / 4.0;
    double tie_sum = 0.0;
    i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n &&
             std::fabs(diffs[order[j + 1]]) == std::fabs(diffs[order[i]])) {
        ++j;
      }
      const double t = static_cast<double>(j - i + 1);
      tie_sum += t * t * t - t;
      i = j + 1;
    }
    const double var =
        nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_sum / 48.0;
    const double z = (res.w - mu + 0.5) / std::sqrt(var);
    res.p = std::min(1.0, std::erfc(-z / std::sqrt(2.0)));
    res.exact = false;
  }
  return res;
}

// ---- mask statistics -------------------------------------------------------

namespace {

// Inclusive linear interpolation (the R-7 rule) over sorted values.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

MaskStatistics mask_statistics(const std::vector<FeatureMask>& masks) {
  if (masks.empty()) fail(ErrorCode::EmptyInput, "no masks given");
  const std::size_t d = masks[0].size();

  MaskStatistics stats;
  stats.n_masks = masks.size();
  stats.per_feature_counts.assign(d, 0);
  std::vector<double> lengths;
  lengths.reserve(masks.size());
  for (const FeatureMask& m : masks) {
    if (m.size() != d) fail(ErrorCode::LengthMismatch, "mask length mismatch");
    std::size_t pop = 0;
    for (std::size_t f = 0; f < d; ++f) {
      if (m[f]) {
        stats.per_feature_counts[f]++;
        ++pop;
      }
    }
    lengths.push_back(static_cast<double>(pop));
  }
  std::sort(lengths.begin(), lengths.end());
  stats.min = lengths.front();
  stats.max = lengths.back();
  stats.q1 = quantile_sorted(lengths, 0.25);
  stats.median = quantile_sorted(lengths, 0.5);
  stats.q3 = quantile_sorted(lengths, 0.75);
  stats.mean = std::accumulate(lengths.begin(), lengths.end(), 0.0) /
               static_cast<double>(lengths.size());
  return stats;
}

nlohmann::json mask_statistics_to_json(const MaskStatistics& s) {
  return {{"per_feature_counts", s.per_feature_counts},
          {"n_masks", s.n_masks},
          {"lengths",
           {{"min", s.min},
            {"q1", s.q1},
            {"median", s.median},
            {"mean", s.mean},
            {"q3", s.q3},
            {"max", s.max}}}};
}

}  // namespace protolens
