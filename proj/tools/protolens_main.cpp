// protolens command-line front end: train, select, explain, evaluate, sweep.
// Every run is driven by a JSON config (flags override a few fields) and all
// outputs are deterministic for a fixed config, including sweep CSVs at any
// thread count. Errors are emitted as one-line JSON on stderr with a stable
// code.

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "protolens/alike.hpp"
#include "protolens/attribution.hpp"
#include "protolens/dataset.hpp"
#include "protolens/errors.hpp"
#include "protolens/forest.hpp"
#include "protolens/proximity.hpp"
#include "protolens/selection.hpp"
#include "protolens/surrogate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace protolens;

namespace {

constexpr const char* kVersion = "0.1.0";

// ---- logging ---------------------------------------------------------------

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3 };

LogLevel log_threshold() {
  static LogLevel level = [] {
    const char* env = std::getenv("PROTOLENS_LOG");
    if (!env) return LogLevel::warn;
    const std::string v(env);
    if (v == "debug") return LogLevel::debug;
    if (v == "info") return LogLevel::info;
    if (v == "error") return LogLevel::error;
    return LogLevel::warn;
  }();
  return level;
}

void log_at(LogLevel level, const std::string& msg) {
  static const char* names[] = {"debug", "info", "warn", "error"};
  if (level >= log_threshold()) {
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
  }
}

void log_info(const std::string& msg) { log_at(LogLevel::info, msg); }
void log_warn(const std::string& msg) { log_at(LogLevel::warn, msg); }

// ---- small utilities --------------------------------------------------------

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string read_file(const fs::path& path, ErrorCode missing_code) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(missing_code, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) fail(ErrorCode::IoError, "short write to '" + path.string() + "'");
}

// Atomic-enough for resume: readers either see the whole file or none.
void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  write_file(tmp, content);
  fs::rename(tmp, path);
}

// ---- configuration -----------------------------------------------------------

struct SweepGrid {
  std::vector<SelectionAlgorithm> algorithms;
  std::vector<Estimator> estimators;
  std::vector<SimilarityOp> operators;
  std::vector<bool> ignore_direction;
  std::vector<bool> normalize;
  std::vector<MaskStrategy> mask_strategies;
  std::vector<double> betas;
  std::string pairing = "dataset_algorithm";
};

struct RunConfig {
  std::string dataset_path;
  std::string label_column;
  std::vector<std::string> missing_tokens;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 42;
  ForestParams forest;
  std::uint64_t forest_seed = 42;
  Estimator estimator = Estimator::saabas;
  AlikeConfig alike;
  SelectionConfig selection;
  std::string output_dir = "out";
  std::optional<SweepGrid> sweep;
  json echo;  // validated config as parsed, for run metadata
};

void check_known_keys(const json& obj, const std::string& where,
                      std::initializer_list<const char*> known) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool ok = false;
    for (const char* k : known) {
      if (key == k) { ok = true; break; }
    }
    if (!ok) fail(ErrorCode::ConfigInvalid, where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::ConfigInvalid, std::string("bad type for '") + key + "'");
  }
}

SweepGrid parse_sweep(const json& j) {
  check_known_keys(j, "sweep",
                   {"algorithms", "estimators", "operators", "ignore_direction",
                    "normalize", "mask_strategies", "betas", "pairing"});
  SweepGrid grid;
  for (const auto& s : get_or<std::vector<std::string>>(j, "algorithms", {"gkm"})) {
    grid.algorithms.push_back(parse_selection_algorithm(s));
  }
  for (const auto& s : get_or<std::vector<std::string>>(j, "estimators", {"saabas"})) {
    grid.estimators.push_back(parse_estimator(s));
  }
  for (const auto& s : get_or<std::vector<std::string>>(j, "operators", {"hadamard"})) {
    grid.operators.push_back(parse_similarity_op(s));
  }
  grid.ignore_direction = get_or<std::vector<bool>>(j, "ignore_direction", {true});
  grid.normalize = get_or<std::vector<bool>>(j, "normalize", {true});
  for (const auto& s : get_or<std::vector<std::string>>(j, "mask_strategies",
                                                        {"mean_threshold"})) {
    grid.mask_strategies.push_back(parse_mask_strategy(s));
  }
  grid.betas = get_or<std::vector<double>>(j, "betas", {0.0});
  grid.pairing = get_or<std::string>(j, "pairing", "dataset_algorithm");
  if (grid.pairing != "dataset" && grid.pairing != "dataset_algorithm" &&
      grid.pairing != "dataset_algorithm_estimator") {
    fail(ErrorCode::ConfigInvalid, "sweep.pairing: unknown value '" + grid.pairing + "'");
  }
  if (grid.algorithms.empty() || grid.estimators.empty() ||
      grid.operators.empty() || grid.ignore_direction.empty() ||
      grid.normalize.empty() || grid.mask_strategies.empty() ||
      grid.betas.empty()) {
    fail(ErrorCode::ConfigInvalid, "sweep: every grid axis needs >= 1 value");
  }
  for (double b : grid.betas) {
    if (b < 0.0) fail(ErrorCode::ConfigInvalid, "sweep.betas must be >= 0");
  }
  return grid;
}

RunConfig load_config(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path, ErrorCode::ConfigInvalid));
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigInvalid, std::string("config is not valid JSON: ") + e.what());
  }
  check_known_keys(doc, "config",
                   {"dataset", "split", "forest", "estimator", "alike",
                    "selection", "output_dir", "sweep"});

  RunConfig cfg;
  cfg.echo = doc;

  if (!doc.contains("dataset")) fail(ErrorCode::ConfigInvalid, "missing 'dataset'");
  const json& ds = doc["dataset"];
  check_known_keys(ds, "dataset", {"path", "label_column", "missing_tokens"});
  if (!ds.contains("path") || !ds.contains("label_column")) {
    fail(ErrorCode::ConfigInvalid, "dataset.path and dataset.label_column are required");
  }
  cfg.dataset_path = ds.at("path").get<std::string>();
  cfg.label_column = ds.at("label_column").get<std::string>();
  cfg.missing_tokens = get_or<std::vector<std::string>>(ds, "missing_tokens", {});

  const json split = doc.value("split", json::object());
  check_known_keys(split, "split", {"test_fraction", "seed"});
  cfg.test_fraction = get_or<double>(split, "test_fraction", 0.2);
  cfg.split_seed = get_or<std::uint64_t>(split, "seed", 42);
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) {
    fail(ErrorCode::ConfigInvalid, "split.test_fraction must be in (0, 1)");
  }

  const json forest = doc.value("forest", json::object());
  check_known_keys(forest, "forest",
                   {"n_trees", "max_depth", "min_leaf", "features_per_split",
                    "bootstrap", "seed"});
  cfg.forest.n_trees = get_or<int>(forest, "n_trees", 100);
  cfg.forest.max_depth = get_or<int>(forest, "max_depth", 8);
  cfg.forest.min_leaf = get_or<int>(forest, "min_leaf", 1);
  cfg.forest.features_per_split = get_or<int>(forest, "features_per_split", 0);
  cfg.forest.bootstrap = get_or<bool>(forest, "bootstrap", true);
  cfg.forest_seed = get_or<std::uint64_t>(forest, "seed", 42);
  if (cfg.forest.n_trees < 1 || cfg.forest.max_depth < 1 || cfg.forest.min_leaf < 1) {
    fail(ErrorCode::ConfigInvalid, "forest params must be >= 1");
  }

  cfg.estimator = parse_estimator(get_or<std::string>(doc, "estimator", "saabas"));

  const json alike = doc.value("alike", json::object());
  check_known_keys(alike, "alike",
                   {"ignore_direction", "normalize_similarity", "operator",
                    "mask_strategy"});
  cfg.alike.ignore_direction = get_or<bool>(alike, "ignore_direction", true);
  cfg.alike.normalize_similarity = get_or<bool>(alike, "normalize_similarity", true);
  cfg.alike.op = parse_similarity_op(get_or<std::string>(alike, "operator", "hadamard"));
  cfg.alike.mask_strategy =
      parse_mask_strategy(get_or<std::string>(alike, "mask_strategy", "mean_threshold"));

  const json sel = doc.value("selection", json::object());
  check_known_keys(sel, "selection",
                   {"algorithm", "beta", "k_per_class", "m_total", "apete_threshold"});
  cfg.selection.algorithm =
      parse_selection_algorithm(get_or<std::string>(sel, "algorithm", "gkm"));
  cfg.selection.beta = get_or<double>(sel, "beta", 0.0);
  cfg.selection.k_per_class = get_or<int>(sel, "k_per_class", 1);
  cfg.selection.m_total = get_or<int>(sel, "m_total", 1);
  cfg.selection.apete_threshold = get_or<double>(sel, "apete_threshold", 0.05);
  cfg.selection.alike = cfg.alike;
  if (cfg.selection.beta < 0.0) {
    fail(ErrorCode::ConfigInvalid, "selection.beta must be >= 0");
  }

  cfg.output_dir = get_or<std::string>(doc, "output_dir", "out");

  if (doc.contains("sweep")) cfg.sweep = parse_sweep(doc["sweep"]);

  if (!fs::exists(cfg.dataset_path)) {
    fail(ErrorCode::DatasetNotFound, "dataset '" + cfg.dataset_path + "' does not exist");
  }
  return cfg;
}

std::string dataset_stem(const RunConfig& cfg) {
  return fs::path(cfg.dataset_path).stem().string();
}

// ---- shared pipeline pieces ---------------------------------------------------

struct LoadedRun {
  Dataset full;
  SplitPair split;
  TrainedForest forest;
};

Dataset load_dataset(const RunConfig& cfg) {
  return load_csv(cfg.dataset_path, cfg.label_column, cfg.missing_tokens);
}

json split_to_json(const RunConfig& cfg, const SplitPair& split) {
  return {{"dataset_path", cfg.dataset_path},
          {"label_column", cfg.label_column},
          {"seed", split.seed},
          {"test_fraction", split.test_fraction},
          {"train_indices", split.train_indices},
          {"test_indices", split.test_indices}};
}

SplitPair split_from_json(const Dataset& full, const json& j) {
  SplitPair split;
  split.seed = j.at("seed").get<std::uint64_t>();
  split.test_fraction = j.at("test_fraction").get<double>();
  split.train_indices = j.at("train_indices").get<std::vector<std::size_t>>();
  split.test_indices = j.at("test_indices").get<std::vector<std::size_t>>();
  split.train = full.subset(split.train_indices);
  split.test = full.subset(split.test_indices);
  return split;
}

// Loads the artifacts written by `train` from the output directory.
LoadedRun load_run(const RunConfig& cfg) {
  LoadedRun run;
  run.full = load_dataset(cfg);
  const fs::path out(cfg.output_dir);
  const std::string split_text =
      read_file(out / "split.json", ErrorCode::ArtifactNotFound);
  json split_doc;
  try {
    split_doc = json::parse(split_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::CorruptPayload, std::string("split.json: ") + e.what());
  }
  run.split = split_from_json(run.full, split_doc);
  run.forest =
      load_forest(read_file(out / "forest.json", ErrorCode::ArtifactNotFound));
  return run;
}

std::vector<int> predicted_labels(const TrainedForest& forest, const Dataset& ds) {
  std::vector<int> labels(ds.n_rows());
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    labels[i] = forest.predict(ds.row(i));
  }
  return labels;
}

Dataset relabel_with_forest(const Dataset& ds, const TrainedForest& forest) {
  Dataset proxy = ds;
  proxy.labels = predicted_labels(forest, ds);
  return proxy;
}

json alike_to_json(const AlikeConfig& alike) {
  return {{"ignore_direction", alike.ignore_direction},
          {"normalize_similarity", alike.normalize_similarity},
          {"operator", similarity_op_name(alike.op)},
          {"mask_strategy", mask_strategy_name(alike.mask_strategy)}};
}

json selection_config_to_json(const RunConfig& cfg) {
  json j = {{"alike", alike_to_json(cfg.alike)},
            {"estimator", estimator_name(cfg.estimator)}};
  switch (cfg.selection.algorithm) {
    case SelectionAlgorithm::gkm:
      j["k_per_class"] = cfg.selection.k_per_class;
      break;
    case SelectionAlgorithm::sma:
      j["m_total"] = cfg.selection.m_total;
      break;
    case SelectionAlgorithm::apete:
      j["apete_threshold"] = cfg.selection.apete_threshold;
      break;
  }
  return j;
}

PrototypeSet prototypes_from_json(const json& doc) {
  PrototypeSet p;
  for (const json& jp : doc.at("prototypes")) {
    p.indices.push_back(jp.at("index").get<std::size_t>());
    p.labels.push_back(jp.at("label").get<int>());
  }
  p.objective_trace = doc.at("objective_trace").get<std::vector<double>>();
  return p;
}

// Selection pipeline over an already-loaded run; reused by select and sweep.
PrototypeSet run_selection_pipeline(const TrainedForest& forest,
                                    const Dataset& train,
                                    const DistanceMatrix& dist,
                                    const std::vector<int>& predicted,
                                    const SelectionConfig& selection,
                                    Estimator estimator,
                                    const AttributionMatrix* attr) {
  SelectionContext ctx{dist, nullptr, predicted, selection.beta};
  FiMatrix fi;
  if (selection.beta != 0.0) {
    AttributionMatrix local;
    if (!attr) {
      local = attribution_matrix(forest, train, estimator);
      attr = &local;
    }
    fi = fi_matrix(*attr, selection.alike);
    ctx.fi = &fi;
  }
  return run_selection(ctx, selection);
}

// ---- commands -------------------------------------------------------------------

int cmd_train(const RunConfig& cfg) {
  const Dataset full = load_dataset(cfg);
  const SplitPair split = stratified_split(full, cfg.test_fraction, cfg.split_seed);
  const TrainedForest forest = fit_forest(split.train, cfg.forest, cfg.forest_seed);

  const fs::path out(cfg.output_dir);
  fs::create_directories(out);
  write_file(out / "forest.json", save_forest(forest));
  write_file(out / "split.json", split_to_json(cfg, split).dump(2) + "\n");
  const json meta = {{"tool", "protolens"},
                     {"version", kVersion},
                     {"forest_seed", cfg.forest_seed},
                     {"split_seed", cfg.split_seed},
                     {"config", cfg.echo}};
  write_file(out / "run_meta.json", meta.dump(2) + "\n");
  log_info("trained " + std::to_string(forest.n_trees()) + " trees on " +
           std::to_string(split.train.n_rows()) + " rows");
  return 0;
}

int cmd_select(const RunConfig& cfg) {
  const LoadedRun run = load_run(cfg);
  const Dataset& train = run.split.train;
  const DistanceMatrix dist = distance_matrix(run.forest, train);
  const std::vector<int> predicted = predicted_labels(run.forest, train);

  const PrototypeSet prototypes = run_selection_pipeline(
      run.forest, train, dist, predicted, cfg.selection, cfg.estimator, nullptr);

  json jp = json::array();
  for (std::size_t i = 0; i < prototypes.indices.size(); ++i) {
    jp.push_back({{"index", prototypes.indices[i]}, {"label", prototypes.labels[i]}});
  }
  const json doc = {{"algorithm", selection_algorithm_name(cfg.selection.algorithm)},
                    {"beta", cfg.selection.beta},
                    {"config", selection_config_to_json(cfg)},
                    {"prototypes", std::move(jp)},
                    {"objective_trace", prototypes.objective_trace}};
  const fs::path out(cfg.output_dir);
  fs::create_directories(out);
  write_file(out / "prototypes.json", doc.dump(2) + "\n");
  log_info("selected " + std::to_string(prototypes.indices.size()) + " prototypes");
  return 0;
}

std::vector<std::size_t> parse_instances(const std::string& spec, std::size_t n) {
  std::vector<std::size_t> ids;
  if (spec == "all") {
    ids.resize(n);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    return ids;
  }
  std::stringstream ss(spec);
  std::string token;
  while (std::getline(ss, token, ',')) {
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
      fail(ErrorCode::UnknownInstanceId, "bad instance id '" + token + "'");
    }
    if (value >= n) {
      fail(ErrorCode::UnknownInstanceId,
           "instance " + token + " out of range (split has " +
               std::to_string(n) + " rows)");
    }
    ids.push_back(value);
  }
  if (ids.empty()) fail(ErrorCode::UnknownInstanceId, "empty instance list");
  return ids;
}

int cmd_explain(const RunConfig& cfg, const std::string& which_split,
                const std::string& instances_spec) {
  const LoadedRun run = load_run(cfg);
  const Dataset& train = run.split.train;
  const fs::path out(cfg.output_dir);
  const json pdoc = json::parse(
      read_file(out / "prototypes.json", ErrorCode::ArtifactNotFound));
  const PrototypeSet prototypes = prototypes_from_json(pdoc);

  const Dataset& target = which_split == "train" ? run.split.train : run.split.test;
  const auto ids = parse_instances(instances_spec, target.n_rows());

  SurrogateModel surrogate(prototypes, run.forest, train);
  std::string lines;
  for (std::size_t id : ids) {
    const auto row = target.row(id);
    const int predicted = run.forest.predict(row);
    const auto nearest = surrogate.predict(row);
    const AlikeResult alike =
        identify_alike_parts(run.forest, row, train.row(nearest.prototype_index),
                             cfg.alike, cfg.estimator, &train);
    const json rec = {{"instance_id", id},
                      {"prototype_id", nearest.prototype_index},
                      {"predicted_class", predicted},
                      {"weights", alike.weights},
                      {"mask", alike.mask},
                      {"operator", similarity_op_name(cfg.alike.op)},
                      {"strategy", mask_strategy_name(cfg.alike.mask_strategy)},
                      {"estimator", estimator_name(cfg.estimator)}};
    lines += rec.dump() + "\n";
  }
  write_file(out / "explanations.jsonl", lines);
  log_info("explained " + std::to_string(ids.size()) + " instances");
  return 0;
}

// Masks for every test row against its nearest prototype, using precomputed
// attribution rows where available.
std::vector<FeatureMask> test_masks(const TrainedForest& forest,
                                    const Dataset& train, const Dataset& test,
                                    const PrototypeSet& prototypes,
                                    const AlikeConfig& alike, Estimator estimator,
                                    const AttributionMatrix* train_attr) {
  SurrogateModel surrogate(prototypes, forest, train);
  std::vector<FeatureMask> masks;
  masks.reserve(test.n_rows());
  for (std::size_t i = 0; i < test.n_rows(); ++i) {
    const auto row = test.row(i);
    const auto nearest = surrogate.predict(row);
    AlikeResult res;
    if (train_attr) {
      const int target = forest.predict(row);
      const AttributionVector phi_x =
          estimator == Estimator::saabas
              ? saabas_attribution(forest, row, target)
              : shapley_bruteforce(forest, row, train, target);
      res = alike_from_scores(phi_x.phi, train_attr->row(nearest.prototype_index),
                              alike);
    } else {
      res = identify_alike_parts(forest, row, train.row(nearest.prototype_index),
                                 alike, estimator, &train);
    }
    masks.push_back(std::move(res.mask));
  }
  return masks;
}

int cmd_evaluate(const RunConfig& cfg) {
  const LoadedRun run = load_run(cfg);
  const Dataset& train = run.split.train;
  const Dataset& test = run.split.test;
  const fs::path out(cfg.output_dir);
  const json pdoc = json::parse(
      read_file(out / "prototypes.json", ErrorCode::ArtifactNotFound));
  const PrototypeSet prototypes = prototypes_from_json(pdoc);
  const std::string method = pdoc.at("algorithm").get<std::string>();

  const FidelityReport surrogate_report =
      fidelity(prototypes, run.forest, train, test, method,
               selection_config_to_json(cfg));

  // Baselines train on the black box's own predictions.
  const Dataset train_proxy = relabel_with_forest(train, run.forest);
  const Dataset test_proxy = relabel_with_forest(test, run.forest);
  std::vector<FidelityReport> baselines;
  for (BaselineKind kind : {BaselineKind::naive_bayes,
                            BaselineKind::logistic_regression,
                            BaselineKind::decision_tree}) {
    baselines.push_back(baseline_fit_predict(kind, train_proxy, test_proxy));
  }

  const auto masks = test_masks(run.forest, train, test, prototypes, cfg.alike,
                                cfg.estimator, nullptr);
  const MaskStatistics stats = mask_statistics(masks);

  json jbase = json::array();
  for (const auto& r : baselines) jbase.push_back(fidelity_report_to_json(r));
  const json doc = {{"surrogate", fidelity_report_to_json(surrogate_report)},
                    {"baselines", std::move(jbase)},
                    {"mask_statistics", mask_statistics_to_json(stats)}};

  std::string csv = "method,fidelity,size\n";
  auto add_row = [&](const FidelityReport& r) {
    csv += r.method + "," + format_double(r.fidelity) + "," +
           std::to_string(r.size) + "\n";
  };
  add_row(surrogate_report);
  for (const auto& r : baselines) add_row(r);

  write_file(out / "evaluation.json", doc.dump(2) + "\n");
  write_file(out / "evaluation.csv", csv);
  log_info("surrogate fidelity " + format_double(surrogate_report.fidelity));
  return 0;
}

// ---- sweep ----------------------------------------------------------------------

struct SweepCell {
  SelectionAlgorithm algorithm;
  Estimator estimator;
  SimilarityOp op;
  bool ignore_direction;
  bool normalize;
  MaskStrategy mask_strategy;
  double beta;

  std::string key() const {
    return std::string(selection_algorithm_name(algorithm)) + "__" +
           estimator_name(estimator) + "__" + similarity_op_name(op) +
           "__dir" + (ignore_direction ? "1" : "0") + "__norm" +
           (normalize ? "1" : "0") + "__" + mask_strategy_name(mask_strategy) +
           "__beta" + format_double(beta);
  }
};

std::vector<SweepCell> enumerate_cells(const SweepGrid& grid) {
  std::vector<SweepCell> cells;
  for (auto algorithm : grid.algorithms)
    for (auto estimator : grid.estimators)
      for (auto op : grid.operators)
        for (bool dir : grid.ignore_direction)
          for (bool norm : grid.normalize)
            for (auto strategy : grid.mask_strategies)
              for (double beta : grid.betas) {
                cells.push_back({algorithm, estimator, op, dir, norm, strategy, beta});
              }
  return cells;
}

json compute_cell(const SweepCell& cell, const RunConfig& cfg,
                  const LoadedRun& run, const DistanceMatrix& dist,
                  const std::vector<int>& predicted,
                  const AttributionMatrix& attr) {
  SelectionConfig selection = cfg.selection;
  selection.algorithm = cell.algorithm;
  selection.beta = cell.beta;
  selection.alike = {cell.ignore_direction, cell.normalize, cell.op,
                     cell.mask_strategy};

  const PrototypeSet prototypes =
      run_selection_pipeline(run.forest, run.split.train, dist, predicted,
                             selection, cell.estimator, &attr);
  const FidelityReport report =
      fidelity(prototypes, run.forest, run.split.train, run.split.test,
               selection_algorithm_name(cell.algorithm));
  const auto masks =
      test_masks(run.forest, run.split.train, run.split.test, prototypes,
                 selection.alike, cell.estimator, &attr);
  double mean_len = 0.0;
  for (const auto& m : masks) {
    mean_len += static_cast<double>(std::count(m.begin(), m.end(), 1));
  }
  mean_len /= static_cast<double>(masks.size());

  return {{"key", cell.key()},
          {"n_prototypes", prototypes.indices.size()},
          {"fidelity", report.fidelity},
          {"mean_mask_len", mean_len}};
}

int cmd_sweep(const RunConfig& cfg, int threads) {
  if (!cfg.sweep) fail(ErrorCode::ConfigInvalid, "config has no 'sweep' section");
  const SweepGrid& grid = *cfg.sweep;

  // Reuse train artifacts if present so interrupted sweeps resume; otherwise
  // train in place.
  const fs::path out(cfg.output_dir);
  if (!fs::exists(out / "forest.json") || !fs::exists(out / "split.json")) {
    cmd_train(cfg);
  }
  const LoadedRun run = load_run(cfg);
  const DistanceMatrix dist = distance_matrix(run.forest, run.split.train);
  const std::vector<int> predicted = predicted_labels(run.forest, run.split.train);

  // Attribution matrices are shared read-only across cells.
  std::vector<AttributionMatrix> attrs;
  for (Estimator estimator : grid.estimators) {
    attrs.push_back(attribution_matrix(run.forest, run.split.train, estimator));
  }

  const std::vector<SweepCell> cells = enumerate_cells(grid);
  const fs::path cell_dir = out / "sweep_cells";
  fs::create_directories(cell_dir);

  auto cell_valid = [&](const SweepCell& cell) {
    const fs::path path = cell_dir / (cell.key() + ".json");
    if (!fs::exists(path)) return false;
    try {
      const json doc = json::parse(read_file(path, ErrorCode::IoError));
      return doc.at("key").get<std::string>() == cell.key() &&
             doc.contains("n_prototypes") && doc.contains("fidelity") &&
             doc.contains("mean_mask_len");
    } catch (...) {
      return false;
    }
  };

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cell_valid(cells[i])) todo.push_back(i);
  }
  log_info("sweep: " + std::to_string(cells.size()) + " cells, " +
           std::to_string(todo.size()) + " to compute");

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= todo.size() || failed.load()) return;
      const SweepCell& cell = cells[todo[slot]];
      try {
        std::size_t attr_idx = 0;
        for (std::size_t e = 0; e < grid.estimators.size(); ++e) {
          if (grid.estimators[e] == cell.estimator) attr_idx = e;
        }
        const json doc =
            compute_cell(cell, cfg, run, dist, predicted, attrs[attr_idx]);
        write_file_atomic(cell_dir / (cell.key() + ".json"), doc.dump(2) + "\n");
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) first_error = e.what();
      }
    }
  };

  const int n_workers = std::max(1, threads);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failed.load()) fail(ErrorCode::Internal, "sweep cell failed: " + first_error);

  // Merge in grid order; cell outputs are independent of thread count.
  const std::string dataset = dataset_stem(cfg);
  std::string csv =
      "dataset,algorithm,estimator,operator,ignore_direction,normalize,"
      "mask_strategy,beta,n_prototypes,fidelity,mean_mask_len\n";
  struct RowInfo {
    SweepCell cell;
    double fidelity;
  };
  std::vector<RowInfo> rows;
  for (const SweepCell& cell : cells) {
    const json doc =
        json::parse(read_file(cell_dir / (cell.key() + ".json"), ErrorCode::IoError));
    csv += dataset;
    csv += ',';
    csv += selection_algorithm_name(cell.algorithm);
    csv += ',';
    csv += estimator_name(cell.estimator);
    csv += ',';
    csv += similarity_op_name(cell.op);
    csv += ',';
    csv += cell.ignore_direction ? "true" : "false";
    csv += ',';
    csv += cell.normalize ? "true" : "false";
    csv += ',';
    csv += mask_strategy_name(cell.mask_strategy);
    csv += ',';
    csv += format_double(cell.beta);
    csv += ',';
    csv += std::to_string(doc.at("n_prototypes").get<std::size_t>());
    csv += ',';
    csv += format_double(doc.at("fidelity").get<double>());
    csv += ',';
    csv += format_double(doc.at("mean_mask_len").get<double>());
    csv += '\n';
    rows.push_back({cell, doc.at("fidelity").get<double>()});
  }
  write_file(out / "sweep.csv", csv);

  // Wilcoxon: best beta=0 fidelity vs best beta>0 fidelity per pairing group.
  auto group_key = [&](const SweepCell& cell) {
    std::string key = dataset;
    if (grid.pairing != "dataset") {
      key += std::string("|") + selection_algorithm_name(cell.algorithm);
    }
    if (grid.pairing == "dataset_algorithm_estimator") {
      key += std::string("|") + estimator_name(cell.estimator);
    }
    return key;
  };
  std::vector<std::string> group_order;
  std::map<std::string, std::pair<std::optional<double>, std::optional<double>>> groups;
  for (const RowInfo& row : rows) {
    const std::string key = group_key(row.cell);
    if (!groups.count(key)) group_order.push_back(key);
    auto& [best0, best_pos] = groups[key];
    auto& slot = row.cell.beta == 0.0 ? best0 : best_pos;
    if (!slot || row.fidelity > *slot) slot = row.fidelity;
  }

  json jpairs = json::array();
  std::vector<std::pair<double, double>> pairs;
  for (const std::string& key : group_order) {
    const auto& [best0, best_pos] = groups[key];
    if (best0 && best_pos) {
      pairs.emplace_back(*best0, *best_pos);
      jpairs.push_back({{"key", key}, {"beta0", *best0}, {"beta_pos", *best_pos}});
    }
  }
  json wdoc = {{"pairing", grid.pairing}, {"pairs", std::move(jpairs)}};
  if (pairs.empty()) {
    wdoc["status"] = "insufficient_pairs";
    log_warn("sweep grid has no beta=0 / beta>0 pairs to compare");
  } else {
    try {
      const WilcoxonResult res = wilcoxon_signed_rank(pairs);
      wdoc["status"] = "ok";
      wdoc["n_nonzero"] = res.n;
      wdoc["W"] = res.w;
      wdoc["p"] = res.p;
      wdoc["exact"] = res.exact;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AllZeroDifferences) throw;
      wdoc["status"] = "all_zero_differences";
    }
  }
  write_file(out / "wilcoxon.json", wdoc.dump(2) + "\n");
  log_info("sweep finished: " + std::to_string(cells.size()) + " rows");
  return 0;
}

// ---- entry ------------------------------------------------------------------------

void emit_error(ErrorCode code, const std::string& message) {
  const json doc = {{"error", {{"code", error_code_name(code)}, {"message", message}}}};
  std::cerr << doc.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prototype-based explanations for tree ensembles"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, out_override, split_name = "test", instances = "all";
  std::uint64_t seed_override = 0;
  bool has_seed = false;
  int threads = 1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "run configuration JSON")->required();
    cmd->add_option("--out", out_override, "override output directory");
    cmd->add_option("--seed", seed_override, "override split and forest seeds")
        ->each([&](const std::string&) { has_seed = true; });
    cmd->add_option("--threads", threads, "worker threads (sweep only)");
    return cmd;
  };

  CLI::App* train = add_common(app.add_subcommand("train", "fit the forest and split"));
  CLI::App* select = add_common(app.add_subcommand("select", "select prototypes"));
  CLI::App* explain = add_common(app.add_subcommand("explain", "emit alike-part records"));
  explain->add_option("--split", split_name, "train or test")
      ->check(CLI::IsMember({"train", "test"}));
  explain->add_option("--instances", instances, "comma-separated ids or 'all'");
  CLI::App* evaluate =
      add_common(app.add_subcommand("evaluate", "fidelity, baselines and mask stats"));
  CLI::App* sweep = add_common(app.add_subcommand("sweep", "grid sweep with resume"));

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = load_config(config_path);
    if (!out_override.empty()) cfg.output_dir = out_override;
    if (has_seed) {
      cfg.split_seed = seed_override;
      cfg.forest_seed = seed_override;
    }
    if (train->parsed()) return cmd_train(cfg);
    if (select->parsed()) return cmd_select(cfg);
    if (explain->parsed()) return cmd_explain(cfg, split_name, instances);
    if (evaluate->parsed()) return cmd_evaluate(cfg);
    if (sweep->parsed()) return cmd_sweep(cfg, threads);
    emit_error(ErrorCode::ConfigInvalid, "no subcommand");
    return 1;
  } catch (const Error& e) {
    emit_error(e.code(), e.what());
    return 1;
  } catch (const std::exception& e) {
    emit_error(ErrorCode::Internal, e.what());
    return 1;
  }
}
