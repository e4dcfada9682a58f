// Evaluation of a prototype set: the 1-NN surrogate in tree distance, its
// fidelity against the black box, three interpretable baselines trained on
// black-box labels, the Wilcoxon signed-rank test and mask statistics.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "protolens/alike.hpp"
#include "protolens/dataset.hpp"
#include "protolens/forest.hpp"
#include "protolens/proximity.hpp"
#include "protolens/selection.hpp"

namespace protolens {

// 1-NN classifier over the prototypes, measured in tree distance. Ties go to
// the earlier prototype in selection order.
class SurrogateModel {
 public:
  SurrogateModel(const PrototypeSet& prototypes, const TrainedForest& forest,
                 const Dataset& train);

  struct Prediction {
    int label;
    std::size_t prototype_pos;    // position within the prototype set
    std::size_t prototype_index;  // training-row index
    double distance;
  };

  Prediction predict(std::span<const double> row) const;
  std::size_t size() const { return labels_.size(); }

 private:
  const TrainedForest& forest_;
  std::vector<LeafVector> leaves_;
  std::vector<int> labels_;
  std::vector<std::size_t> indices_;
};

struct PerClassAgreement {
  int class_index = 0;
  std::size_t agree = 0;
  std::size_t total = 0;
};

struct FidelityReport {
  std::string method;
  double fidelity = 0.0;
  std::size_t size = 0;  // prototype count or baseline model size
  std::vector<PerClassAgreement> per_class;  // keyed by black-box prediction
  nlohmann::json config_echo;
};

nlohmann::json fidelity_report_to_json(const FidelityReport& r);

FidelityReport fidelity(const PrototypeSet& prototypes,
                        const TrainedForest& forest, const Dataset& train,
                        const Dataset& test, const std::string& method,
                        nlohmann::json config_echo = {});

enum class BaselineKind { naive_bayes, logistic_regression, decision_tree };

const char* baseline_name(BaselineKind kind);

// Both datasets must carry black-box predictions as labels (proxy-model
// protocol). Inputs are mean-imputed with the training means. Reported
// fidelity is agreement with the test labels.
FidelityReport baseline_fit_predict(BaselineKind kind, const Dataset& train_proxy,
                                    const Dataset& test_proxy);

enum class WilcoxonMode { auto_select, exact, normal_approx };

struct WilcoxonResult {
  double w = 0.0;       // min(W+, W-)
  double p = 0.0;       // two-sided
  std::size_t n = 0;    // non-zero differences used
  bool exact = false;
};

// Zero differences are dropped; |differences| are ranked with mid-ranks.
// Exact p enumerates all sign assignments for n <= 20, otherwise a normal
// approximation with tie correction and continuity correction is used.
WilcoxonResult wilcoxon_signed_rank(
    const std::vector<std::pair<double, double>>& pairs,
    WilcoxonMode mode = WilcoxonMode::auto_select);

struct MaskStatistics {
  std::vector<std::size_t> per_feature_counts;
  std::size_t n_masks = 0;
  double min = 0, q1 = 0, median = 0, mean = 0, q3 = 0, max = 0;
};

nlohmann::json mask_statistics_to_json(const MaskStatistics& s);

// Quartiles use inclusive linear interpolation over the sorted popcounts;
// the median is the usual middle / mean-of-two rule.
MaskStatistics mask_statistics(const std::vector<FeatureMask>& masks);

}  // namespace protolens
