#include "protolens/synthetic.hpp"

#include "protolens/rng.hpp"

namespace protolens {

Dataset make_blobs2(std::uint64_t seed) {
  constexpr int kDims = 8;
  constexpr int kPerClass = 300;
  constexpr int kSignedDims = 3;
  constexpr double kShift = 1.5;

  Dataset ds;
  for (int f = 0; f < kDims; ++f) {
    ds.feature_names.push_back("f" + std::to_string(f));
  }
  ds.label_names = {"c0", "c1"};

  Rng rng(seed);
  for (int cls = 0; cls < 2; ++cls) {
    const double sign = cls == 0 ? 1.0 : -1.0;
    for (int i = 0; i < kPerClass; ++i) {
      for (int f = 0; f < kDims; ++f) {
        const double mean = f < kSignedDims ? sign * kShift : 0.0;
        ds.cells.push_back(mean + rng.normal());
      }
      ds.labels.push_back(cls);
    }
  }
  return ds;
}

}  // namespace protolens
