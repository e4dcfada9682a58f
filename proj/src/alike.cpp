#include "protolens/alike.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "protolens/errors.hpp"

namespace protolens {

const char* similarity_op_name(SimilarityOp op) {
  switch (op) {
    case SimilarityOp::hadamard: return "hadamard";
    case SimilarityOp::one_minus_l1: return "one_minus_l1";
    case SimilarityOp::one_minus_l2: return "one_minus_l2";
  }
  return "?";
}

SimilarityOp parse_similarity_op(const std::string& name) {
  if (name == "hadamard") return SimilarityOp::hadamard;
  if (name == "one_minus_l1") return SimilarityOp::one_minus_l1;
  if (name == "one_minus_l2") return SimilarityOp::one_minus_l2;
  fail(ErrorCode::ConfigInvalid, "unknown similarity operator '" + name + "'");
}

const char* mask_strategy_name(MaskStrategy s) {
  switch (s) {
    case MaskStrategy::mean_threshold: return "mean_threshold";
    case MaskStrategy::top_sqrt: return "top_sqrt";
    case MaskStrategy::top_log: return "top_log";
  }
  return "?";
}

MaskStrategy parse_mask_strategy(const std::string& name) {
  if (name == "mean_threshold") return MaskStrategy::mean_threshold;
  if (name == "top_sqrt") return MaskStrategy::top_sqrt;
  if (name == "top_log") return MaskStrategy::top_log;
  fail(ErrorCode::ConfigInvalid, "unknown mask strategy '" + name + "'");
}

std::vector<double> preprocess_scores(std::span<const double> phi,
                                      const AlikeConfig& cfg) {
  std::vector<double> out(phi.begin(), phi.end());
  if (cfg.ignore_direction) {
    for (double& v : out) v = std::fabs(v);
  }
  if (cfg.normalize_similarity) {
    double sum_sq = 0.0;
    for (double v : out) sum_sq += v * v;
    if (sum_sq > 0.0) {
      for (double& v : out) v = v * v / sum_sq;
    } else {
      std::fill(out.begin(), out.end(), 0.0);
    }
  }
  return out;
}

std::vector<double> preprocess_scores(const AttributionVector& phi,
                                      const AlikeConfig& cfg) {
  return preprocess_scores(std::span<const double>(phi.phi), cfg);
}

std::vector<double> combine(std::span<const double> a,
                            std::span<const double> b, SimilarityOp op) {
  if (a.size() != b.size()) {
    fail(ErrorCode::LengthMismatch, "score vectors differ in length");
  }
  std::vector<double> w(a.size());
  switch (op) {
    case SimilarityOp::hadamard:
      for (std::size_t l = 0; l < w.size(); ++l) w[l] = a[l] * b[l];
      break;
    case SimilarityOp::one_minus_l1:
      for (std::size_t l = 0; l < w.size(); ++l) w[l] = 1.0 - std::fabs(a[l] - b[l]);
      break;
    case SimilarityOp::one_minus_l2:
      for (std::size_t l = 0; l < w.size(); ++l) {
        w[l] = 1.0 - (a[l] - b[l]) * (a[l] - b[l]);
      }
      break;
  }
  return w;
}

namespace {

std::size_t argmax_lowest(std::span<const double> w) {
  std::size_t best = 0;
  for (std::size_t l = 1; l < w.size(); ++l) {
    if (w[l] > w[best]) best = l;
  }
  return best;
}

}  // namespace

FeatureMask mask_mean(std::span<const double> w) {
  const double mean =
      std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  FeatureMask m(w.size(), 0);
  bool any = false;
  for (std::size_t l = 0; l < w.size(); ++l) {
    if (w[l] > mean) {
      m[l] = 1;
      any = true;
    }
  }
  if (!any) m[argmax_lowest(w)] = 1;
  return m;
}

std::size_t topk_count(std::size_t d, MaskStrategy strategy) {
  const double dd = static_cast<double>(d);
  double k = strategy == MaskStrategy::top_sqrt ? std::ceil(std::sqrt(dd))
                                                : std::ceil(std::log(dd));
  if (k < 1.0) k = 1.0;
  return std::min(d, static_cast<std::size_t>(k));
}

FeatureMask mask_topk(std::span<const double> w, MaskStrategy strategy) {
  if (strategy == MaskStrategy::mean_threshold) {
    fail(ErrorCode::InvalidParams, "mask_topk needs a top-k strategy");
  }
  const std::size_t k = topk_count(w.size(), strategy);
  std::vector<std::size_t> order(w.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Stable sort by descending weight keeps lower indices first on ties.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
  FeatureMask m(w.size(), 0);
  for (std::size_t i = 0; i < k; ++i) m[order[i]] = 1;
  return m;
}

FeatureMask make_mask(std::span<const double> w, MaskStrategy strategy) {
  return strategy == MaskStrategy::mean_threshold ? mask_mean(w)
                                                  : mask_topk(w, strategy);
}

AlikeResult alike_from_scores(std::span<const double> phi_x,
                              std::span<const double> phi_p,
                              const AlikeConfig& cfg) {
  const auto x_hat = preprocess_scores(phi_x, cfg);
  const auto p_hat = preprocess_scores(phi_p, cfg);
  AlikeResult res;
  res.weights = combine(x_hat, p_hat, cfg.op);
  res.mask = make_mask(res.weights, cfg.mask_strategy);
  return res;
}

AlikeResult identify_alike_parts(const TrainedForest& forest,
                                 std::span<const double> x,
                                 std::span<const double> p,
                                 const AlikeConfig& cfg, Estimator estimator,
                                 const Dataset* background) {
  auto attribute = [&](std::span<const double> row) {
    const int target = forest.predict(row);
    if (estimator == Estimator::saabas) {
      return saabas_attribution(forest, row, target);
    }
    if (!background) {
      fail(ErrorCode::EmptyBackground,
           "shapley_oracle needs a background dataset");
    }
    return shapley_bruteforce(forest, row, *background, target);
  };
  const AttributionVector phi_x = attribute(x);
  const AttributionVector phi_p = attribute(p);
  return alike_from_scores(phi_x.phi, phi_p.phi, cfg);
}

}  // namespace protolens
