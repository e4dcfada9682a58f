// Prototype selection over the tree-proximity space. The assignment cost of
// instance i to prototype j is dist(i,j) + beta * fi(i,j), where fi is the
// summed similarity of the two preprocessed attribution vectors; beta = 0
// recovers the plain k-medoid objective and the fi machinery is skipped
// entirely (fi may be null in that case).
//
// All greedy steps break ties by the lowest candidate index, so results are
// independent of evaluation order.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "protolens/alike.hpp"
#include "protolens/attribution.hpp"
#include "protolens/proximity.hpp"

namespace protolens {

enum class SelectionAlgorithm { gkm, sma, apete };

const char* selection_algorithm_name(SelectionAlgorithm a);
SelectionAlgorithm parse_selection_algorithm(const std::string& name);

struct SelectionConfig {
  SelectionAlgorithm algorithm = SelectionAlgorithm::gkm;
  double beta = 0.0;
  AlikeConfig alike;            // preprocessing + operator reused for fi
  int k_per_class = 1;          // gkm
  int m_total = 1;              // sma
  double apete_threshold = 0.05;  // apete, in (0,1)
};

struct FiMatrix {
  std::size_t n = 0;
  std::vector<double> values;  // row-major n x n

  double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

// fi(x, p) = sum_l (phi_x_hat[l] o phi_p_hat[l])
double fi_term(std::span<const double> phi_x_hat,
               std::span<const double> phi_p_hat, SimilarityOp op);

// Pairwise fi over all rows of an attribution matrix, preprocessed per cfg.
FiMatrix fi_matrix(const AttributionMatrix& attributions,
                   const AlikeConfig& cfg);

double assignment_cost(std::size_t i, std::size_t j, const DistanceMatrix& dist,
                       const FiMatrix* fi, double beta);

struct PrototypeSet {
  std::vector<std::size_t> indices;    // training-row indices, selection order
  std::vector<int> labels;             // black-box prediction at each index
  std::vector<double> objective_trace; // full objective after each addition
};

double objective(const std::vector<std::size_t>& prototypes,
                 const DistanceMatrix& dist, const FiMatrix* fi, double beta);

struct SelectionContext {
  const DistanceMatrix& dist;
  const FiMatrix* fi = nullptr;   // may be null iff beta == 0
  std::span<const int> predicted; // black-box labels, one per training row
  double beta = 0.0;
};

// Greedy k-medoids within each predicted class; both objective terms are
// restricted to the class members during candidate scoring.
PrototypeSet select_gkm(const SelectionContext& ctx, int k_per_class);

// Global greedy: each step adds the candidate with the largest marginal
// objective decrease across all instances.
PrototypeSet select_sma(const SelectionContext& ctx, int m_total);

// Same greedy core as select_sma with an automatic stop: once every
// predicted class holds at least one prototype, a candidate whose relative
// improvement (f_prev - f_new) / f_prev falls below the threshold is not
// added and selection ends. Until then candidates are drawn from classes
// that still lack a prototype, which guarantees the per-class floor.
PrototypeSet select_apete(const SelectionContext& ctx, double threshold);

PrototypeSet run_selection(const SelectionContext& ctx,
                           const SelectionConfig& cfg);

}  // namespace protolens
