#include "protolens/selection.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

#include "protolens/errors.hpp"

namespace protolens {

const char* selection_algorithm_name(SelectionAlgorithm a) {
  switch (a) {
    case SelectionAlgorithm::gkm: return "gkm";
    case SelectionAlgorithm::sma: return "sma";
    case SelectionAlgorithm::apete: return "apete";
  }
  return "?";
}

SelectionAlgorithm parse_selection_algorithm(const std::string& name) {
  if (name == "gkm") return SelectionAlgorithm::gkm;
  if (name == "sma") return SelectionAlgorithm::sma;
  if (name == "apete") return SelectionAlgorithm::apete;
  fail(ErrorCode::ConfigInvalid, "unknown selection algorithm '" + name + "'");
}

double fi_term(std::span<const double> phi_x_hat,
               std::span<const double> phi_p_hat, SimilarityOp op) {
  const auto w = combine(phi_x_hat, phi_p_hat, op);
  double sum = 0.0;
  for (double v : w) sum += v;
  return sum;
}

FiMatrix fi_matrix(const AttributionMatrix& attributions,
                   const AlikeConfig& cfg) {
  const std::size_t n = attributions.n;
  std::vector<std::vector<double>> hat(n);
  for (std::size_t i = 0; i < n; ++i) {
    hat[i] = preprocess_scores(attributions.row(i), cfg);
  }
  FiMatrix m;
  m.n = n;
  m.values.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = fi_term(hat[i], hat[j], cfg.op);
      m.values[i * n + j] = v;
      m.values[j * n + i] = v;  // all provided operators are symmetric
    }
  }
  return m;
}

double assignment_cost(std::size_t i, std::size_t j, const DistanceMatrix& dist,
                       const FiMatrix* fi, double beta) {
  if (i >= dist.n || j >= dist.n) {
    fail(ErrorCode::IndexOutOfRange, "assignment_cost index out of range");
  }
  double cost = dist.at(i, j);
  if (beta != 0.0) {
    if (!fi) fail(ErrorCode::InvalidParams, "beta != 0 requires an fi matrix");
    cost += beta * fi->at(i, j);
  }
  return cost;
}

double objective(const std::vector<std::size_t>& prototypes,
                 const DistanceMatrix& dist, const FiMatrix* fi, double beta) {
  if (prototypes.empty()) {
    fail(ErrorCode::EmptyPrototypeSet, "objective of an empty prototype set");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < dist.n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j : prototypes) {
      best = std::min(best, assignment_cost(i, j, dist, fi, beta));
    }
    total += best;
  }
  return total;
}

namespace {

void check_context(const SelectionContext& ctx) {
  if (ctx.predicted.size() != ctx.dist.n) {
    fail(ErrorCode::LengthMismatch, "predicted labels do not match matrix");
  }
  if (ctx.beta < 0.0) {
    fail(ErrorCode::InvalidParams, "beta must be non-negative");
  }
  if (ctx.beta != 0.0 && (!ctx.fi || ctx.fi->n != ctx.dist.n)) {
    fail(ErrorCode::InvalidParams, "beta != 0 requires a matching fi matrix");
  }
}

// Greedy evaluation helper: objective over `instances` if `candidate` were
// added on top of the current per-instance minima.
double objective_if_added(const std::vector<std::size_t>& instances,
                          const std::vector<double>& current_min,
                          std::size_t candidate, const SelectionContext& ctx) {
  double total = 0.0;
  for (std::size_t i : instances) {
    total += std::min(current_min[i],
                      assignment_cost(i, candidate, ctx.dist, ctx.fi, ctx.beta));
  }
  return total;
}

void commit(std::size_t chosen, std::vector<double>& current_min,
            const SelectionContext& ctx) {
  for (std::size_t i = 0; i < ctx.dist.n; ++i) {
    current_min[i] = std::min(
        current_min[i], assignment_cost(i, chosen, ctx.dist, ctx.fi, ctx.beta));
  }
}

double sum_all(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

std::vector<std::vector<std::size_t>> members_by_class(
    const SelectionContext& ctx) {
  int max_label = 0;
  for (int y : ctx.predicted) max_label = std::max(max_label, y);
  std::vector<std::vector<std::size_t>> members(max_label + 1);
  for (std::size_t i = 0; i < ctx.predicted.size(); ++i) {
    members[ctx.predicted[i]].push_back(i);
  }
  return members;
}

}  // namespace

PrototypeSet select_gkm(const SelectionContext& ctx, int k_per_class) {
  check_context(ctx);
  if (k_per_class < 1) fail(ErrorCode::InvalidParams, "k_per_class must be >= 1");

  const auto members = members_by_class(ctx);
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (!members[c].empty() &&
        members[c].size() < static_cast<std::size_t>(k_per_class)) {
      fail(ErrorCode::ClassTooSmall,
           "predicted class " + std::to_string(c) + " has " +
               std::to_string(members[c].size()) + " instances, needs " +
               std::to_string(k_per_class));
    }
  }

  PrototypeSet out;
  const auto inf = std::numeric_limits<double>::infinity();
  std::vector<double> global_min(ctx.dist.n, inf);

  for (const auto& cls : members) {
    if (cls.empty()) continue;
    std::vector<double> class_min(ctx.dist.n, inf);  // within-class minima
    std::vector<std::uint8_t> taken(ctx.dist.n, 0);
    for (int step = 0; step < k_per_class; ++step) {
      double best_obj = inf;
      std::size_t best_cand = 0;
      bool found = false;
      for (std::size_t cand : cls) {
        if (taken[cand]) continue;
        const double obj = objective_if_added(cls, class_min, cand, ctx);
        if (!found || obj < best_obj) {
          found = true;
          best_obj = obj;
          best_cand = cand;
        }
      }
      taken[best_cand] = 1;
      out.indices.push_back(best_cand);
      out.labels.push_back(ctx.predicted[best_cand]);
      for (std::size_t i : cls) {
        class_min[i] = std::min(
            class_min[i],
            assignment_cost(i, best_cand, ctx.dist, ctx.fi, ctx.beta));
      }
      commit(best_cand, global_min, ctx);
      out.objective_trace.push_back(sum_all(global_min));
    }
  }
  return out;
}

PrototypeSet select_sma(const SelectionContext& ctx, int m_total) {
  check_context(ctx);
  if (m_total < 1) fail(ErrorCode::InvalidParams, "m_total must be >= 1");
  if (static_cast<std::size_t>(m_total) > ctx.dist.n) {
    fail(ErrorCode::MTooLarge, "m_total exceeds the number of instances");
  }

  PrototypeSet out;
  const auto inf = std::numeric_limits<double>::infinity();
  std::vector<double> current_min(ctx.dist.n, inf);
  std::vector<std::uint8_t> taken(ctx.dist.n, 0);
  std::vector<std::size_t> all(ctx.dist.n);
  std::iota(all.begin(), all.end(), std::size_t{0});

  for (int step = 0; step < m_total; ++step) {
    double best_obj = inf;
    std::size_t best_cand = 0;
    bool found = false;
    for (std::size_t cand = 0; cand < ctx.dist.n; ++cand) {
      if (taken[cand]) continue;
      const double obj = objective_if_added(all, current_min, cand, ctx);
      if (!found || obj < best_obj) {
        found = true;
        best_obj = obj;
        best_cand = cand;
      }
    }
    taken[best_cand] = 1;
    out.indices.push_back(best_cand);
    out.labels.push_back(ctx.predicted[best_cand]);
    commit(best_cand, current_min, ctx);
    out.objective_trace.push_back(best_obj);
  }
  return out;
}

PrototypeSet select_apete(const SelectionContext& ctx, double threshold) {
  check_context(ctx);
  if (!(threshold > 0.0 && threshold < 1.0)) {
    fail(ErrorCode::InvalidParams, "apete_threshold must lie in (0, 1)");
  }

  std::set<int> classes(ctx.predicted.begin(), ctx.predicted.end());
  std::set<int> uncovered = classes;

  PrototypeSet out;
  const auto inf = std::numeric_limits<double>::infinity();
  std::vector<double> current_min(ctx.dist.n, inf);
  std::vector<std::uint8_t> taken(ctx.dist.n, 0);
  std::vector<std::size_t> all(ctx.dist.n);
  std::iota(all.begin(), all.end(), std::size_t{0});

  while (true) {
    const bool floor_phase = !uncovered.empty();
    double best_obj = inf;
    std::size_t best_cand = 0;
    bool found = false;
    for (std::size_t cand = 0; cand < ctx.dist.n; ++cand) {
      if (taken[cand]) continue;
      if (floor_phase && !uncovered.count(ctx.predicted[cand])) continue;
      const double obj = objective_if_added(all, current_min, cand, ctx);
      if (!found || obj < best_obj) {
        found = true;
        best_obj = obj;
        best_cand = cand;
      }
    }
    if (!found) break;  // no unselected candidate left

    if (!floor_phase) {
      const double f_prev = out.objective_trace.back();
      if (f_prev <= 0.0) break;  // nothing left to improve
      const double rel = (f_prev - best_obj) / f_prev;
      if (rel < threshold) break;  // triggering candidate is not added
    }

    taken[best_cand] = 1;
    out.indices.push_back(best_cand);
    out.labels.push_back(ctx.predicted[best_cand]);
    uncovered.erase(ctx.predicted[best_cand]);
    commit(best_cand, current_min, ctx);
    out.objective_trace.push_back(best_obj);
  }
  return out;
}

PrototypeSet run_selection(const SelectionContext& ctx,
                           const SelectionConfig& cfg) {
  switch (cfg.algorithm) {
    case SelectionAlgorithm::gkm: return select_gkm(ctx, cfg.k_per_class);
    case SelectionAlgorithm::sma: return select_sma(ctx, cfg.m_total);
    case SelectionAlgorithm::apete: return select_apete(ctx, cfg.apete_threshold);
  }
  fail(ErrorCode::Internal, "unreachable selection algorithm");
}

}  // namespace protolens
