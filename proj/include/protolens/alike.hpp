// Alike-part identification: given the attribution vectors of an instance
// and its nearest prototype, preprocess the scores, combine them with a
// similarity operator and threshold the resulting weights into a binary
// feature mask that marks the features both explanations agree on.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "protolens/attribution.hpp"

namespace protolens {

enum class SimilarityOp { hadamard, one_minus_l1, one_minus_l2 };
enum class MaskStrategy { mean_threshold, top_sqrt, top_log };

const char* similarity_op_name(SimilarityOp op);
SimilarityOp parse_similarity_op(const std::string& name);
const char* mask_strategy_name(MaskStrategy s);
MaskStrategy parse_mask_strategy(const std::string& name);

struct AlikeConfig {
  bool ignore_direction = true;
  bool normalize_similarity = true;
  SimilarityOp op = SimilarityOp::hadamard;
  MaskStrategy mask_strategy = MaskStrategy::mean_threshold;
};

using FeatureMask = std::vector<std::uint8_t>;  // 0/1 per feature

// Absolute value first (if ignore_direction), then normalization to
// entry^2 / sum of squares (if normalize_similarity); an all-zero vector
// normalizes to all zeros.
std::vector<double> preprocess_scores(std::span<const double> phi,
                                      const AlikeConfig& cfg);
std::vector<double> preprocess_scores(const AttributionVector& phi,
                                      const AlikeConfig& cfg);

// Elementwise similarity of two preprocessed score vectors.
std::vector<double> combine(std::span<const double> a,
                            std::span<const double> b, SimilarityOp op);

// m[l] = 1 iff w[l] > mean(w), strictly; if no weight clears the mean the
// single largest weight is kept (ties to the lowest index) so a mask is
// never empty.
FeatureMask mask_mean(std::span<const double> w);

// Keeps the k = ceil(sqrt(d)) or ceil(ln d) largest weights, k >= 1,
// ties to the lowest index.
FeatureMask mask_topk(std::span<const double> w, MaskStrategy strategy);

FeatureMask make_mask(std::span<const double> w, MaskStrategy strategy);

std::size_t topk_count(std::size_t d, MaskStrategy strategy);

struct AlikeResult {
  std::vector<double> weights;
  FeatureMask mask;
};

// Full pipeline for one (instance, prototype) pair. Each side is attributed
// for its own predicted class. background is required only for the Shapley
// oracle (defaults to none -> EmptyBackground).
AlikeResult identify_alike_parts(const TrainedForest& forest,
                                 std::span<const double> x,
                                 std::span<const double> p,
                                 const AlikeConfig& cfg, Estimator estimator,
                                 const Dataset* background = nullptr);

// Same pipeline starting from already-computed attribution vectors.
AlikeResult alike_from_scores(std::span<const double> phi_x,
                              std::span<const double> phi_p,
                              const AlikeConfig& cfg);

}  // namespace protolens
