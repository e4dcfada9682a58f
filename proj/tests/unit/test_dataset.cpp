#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "protolens/dataset.hpp"
#include "protolens/errors.hpp"
#include "protolens/synthetic.hpp"
#include "test_helpers.hpp"

using namespace protolens;
namespace fs = std::filesystem;

namespace {

fs::path write_temp_csv(const std::string& content) {
  const auto dir = test_helpers::scratch_dir("csv");
  const auto path = dir / "data.csv";
  std::ofstream(path) << content;
  return path;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("load_csv parses a small file with a missing cell") {
  const auto path = write_temp_csv("a,b,y\n1,2,pos\n3,,neg\n5,6,pos\n");
  const Dataset ds = load_csv(path.string(), "y", {""});
  CHECK(ds.n_rows() == 3);
  CHECK(ds.n_features() == 2);
  CHECK(ds.feature_names == std::vector<std::string>{"a", "b"});
  CHECK(ds.at(0, 0) == 1.0);
  CHECK(is_missing(ds.at(1, 1)));
  CHECK(ds.labels == std::vector<int>{0, 1, 0});
  CHECK(ds.label_names == std::vector<std::string>{"pos", "neg"});
}

TEST_CASE("load_csv rejects a single-class label column") {
  const auto path = write_temp_csv("a,y\n1,p\n2,p\n");
  CHECK_THROWS_WITH_AS(load_csv(path.string(), "y", {}),
                       doctest::Contains("classes"), Error);
  try {
    load_csv(path.string(), "y", {});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyDataset);
  }
}

TEST_CASE("load_csv error paths") {
  SUBCASE("unknown label column") {
    const auto path = write_temp_csv("a,y\n1,p\n");
    try {
      load_csv(path.string(), "z", {});
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnknownLabelColumn);
    }
  }
  SUBCASE("ragged row") {
    const auto path = write_temp_csv("a,b,y\n1,2,p\n1,q\n");
    try {
      load_csv(path.string(), "y", {});
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedCsv);
    }
  }
  SUBCASE("unparseable numeric cell") {
    const auto path = write_temp_csv("a,y\nxyz,p\n2,q\n");
    try {
      load_csv(path.string(), "y", {});
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedCsv);
    }
  }
  SUBCASE("non-finite cell is malformed, not missing") {
    const auto path = write_temp_csv("a,y\ninf,p\n2,q\n");
    try {
      load_csv(path.string(), "y", {});
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedCsv);
    }
  }
  SUBCASE("missing file") {
    try {
      load_csv("/nonexistent/nowhere.csv", "y", {});
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DatasetNotFound);
    }
  }
}

TEST_CASE("load_csv honors custom missing tokens and quoting") {
  const auto path = write_temp_csv(
      "\"a,x\",b,y\n1,NA,\"pos,1\"\n2,5,\"he said \"\"hi\"\"\"\n");
  const Dataset ds = load_csv(path.string(), "y", {"NA"});
  CHECK(ds.feature_names[0] == "a,x");
  CHECK(is_missing(ds.at(0, 1)));
  CHECK(ds.label_names[0] == "pos,1");
  CHECK(ds.label_names[1] == "he said \"hi\"");
}

TEST_CASE("bundled blobs2 matches its generation recipe byte for byte") {
  const Dataset ds = make_blobs2();
  CHECK(ds.n_rows() == 600);
  CHECK(ds.n_features() == 8);
  CHECK(ds.n_classes() == 2);
  std::size_t missing = 0;
  for (double v : ds.cells) {
    if (is_missing(v)) ++missing;
  }
  CHECK(missing == 0);

  std::ifstream in(test_helpers::data_file("blobs2.csv"), std::ios::binary);
  REQUIRE(in.good());
  std::string bundled((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  CHECK(dataset_to_csv(ds) == bundled);
}

TEST_CASE("csv round-trip is exact") {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const Dataset ds = test_helpers::random_dataset(rng, 30, 4, 3, 0.2);
    const auto dir = test_helpers::scratch_dir("roundtrip");
    const auto path = (dir / "ds.csv").string();
    save_csv(ds, path);
    const Dataset back = load_csv(path, "label", {});
    CHECK(back.feature_names == ds.feature_names);
    CHECK(back.label_names == ds.label_names);
    CHECK(back.labels == ds.labels);
    REQUIRE(back.cells.size() == ds.cells.size());
    for (std::size_t i = 0; i < ds.cells.size(); ++i) {
      if (is_missing(ds.cells[i])) {
        CHECK(is_missing(back.cells[i]));
      } else {
        CHECK(back.cells[i] == ds.cells[i]);
      }
    }
  }
}

TEST_CASE("stratified_split counts and determinism") {
  Rng rng(3);
  Dataset ds = test_helpers::random_dataset(rng, 20, 2, 2);
  // force exactly 10/10
  for (std::size_t i = 0; i < 20; ++i) ds.labels[i] = i < 10 ? 0 : 1;
  ds.labels[0] = 0;
  ds.labels[10] = 1;

  const SplitPair split = stratified_split(ds, 0.2, 7);
  std::map<int, int> test_counts;
  for (int y : split.test.labels) test_counts[y]++;
  CHECK(test_counts[0] == 2);
  CHECK(test_counts[1] == 2);
  CHECK(split.train.n_rows() == 16);

  const SplitPair again = stratified_split(ds, 0.2, 7);
  CHECK(again.test_indices == split.test_indices);
  CHECK(again.train_indices == split.train_indices);

  const SplitPair other_seed = stratified_split(ds, 0.2, 8);
  CHECK(other_seed.test_indices != split.test_indices);
}

TEST_CASE("stratified_split is a partition with per-class rounding") {
  Rng rng(11);
  Dataset ds = test_helpers::random_dataset(rng, 60, 3, 2);
  for (std::size_t i = 0; i < 60; ++i) ds.labels[i] = i < 50 ? 0 : 1;

  const SplitPair split = stratified_split(ds, 0.3, 5);
  std::map<int, int> test_counts;
  for (int y : split.test.labels) test_counts[y]++;
  CHECK(test_counts[0] == 15);
  CHECK(test_counts[1] == 3);

  // index sets are disjoint and cover the source
  std::vector<std::size_t> all = split.train_indices;
  all.insert(all.end(), split.test_indices.begin(), split.test_indices.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expected(60);
  std::iota(expected.begin(), expected.end(), std::size_t{0});
  CHECK(all == expected);

  // multiset of (row, label) pairs is preserved
  std::vector<std::vector<std::uint64_t>> source_keys, split_keys;
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    source_keys.push_back(test_helpers::row_key(ds, i));
  }
  for (std::size_t i = 0; i < split.train.n_rows(); ++i) {
    split_keys.push_back(test_helpers::row_key(split.train, i));
  }
  for (std::size_t i = 0; i < split.test.n_rows(); ++i) {
    split_keys.push_back(test_helpers::row_key(split.test, i));
  }
  std::sort(source_keys.begin(), source_keys.end());
  std::sort(split_keys.begin(), split_keys.end());
  CHECK(source_keys == split_keys);
}

TEST_CASE("stratified_split rejects tiny classes") {
  Dataset ds;
  ds.feature_names = {"a"};
  ds.label_names = {"x", "y"};
  ds.cells = {1, 2, 3};
  ds.labels = {0, 0, 1};
  try {
    stratified_split(ds, 0.5, 0);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ClassTooSmall);
  }
}

TEST_CASE("mean_impute fills missing cells with column means") {
  Dataset ds;
  ds.feature_names = {"a", "b", "c"};
  ds.label_names = {"x", "y"};
  ds.labels = {0, 1, 0};
  ds.cells = {1, 5, missing_cell(),
              missing_cell(), 5, missing_cell(),
              3, 5, missing_cell()};
  const Dataset imputed = mean_impute(ds);
  CHECK(imputed.at(1, 0) == 2.0);  // mean of {1, 3}
  CHECK(imputed.at(0, 1) == 5.0);  // untouched column
  CHECK(imputed.at(0, 2) == 0.0);  // all-missing column
  CHECK(imputed.at(2, 2) == 0.0);

  SUBCASE("idempotent") {
    const Dataset twice = mean_impute(imputed);
    CHECK(twice.cells == imputed.cells);
  }
}

TEST_CASE("mean_impute is idempotent on random data") {
  Rng rng(19);
  const Dataset ds = test_helpers::random_dataset(rng, 40, 5, 2, 0.3);
  const Dataset once = mean_impute(ds);
  const Dataset twice = mean_impute(once);
  CHECK(once.cells == twice.cells);
  for (double v : once.cells) CHECK(!is_missing(v));
}

}  // TEST_SUITE
