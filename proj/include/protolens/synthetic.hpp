// Bundled synthetic dataset generators. data/blobs2.csv in the repository is
// exactly the output of make_blobs2(); a test regenerates it and compares
// bytes, so the recipe below is normative.
#pragma once

#include <cstdint>

#include "protolens/dataset.hpp"

namespace protolens {

// Two isotropic Gaussian blobs in 8 dimensions, 300 rows per class:
//   class c0: mean +1.5 on features f0..f2, 0.0 elsewhere, unit variance
//   class c1: mean -1.5 on features f0..f2, 0.0 elsewhere, unit variance
// Rows 0..299 are c0, rows 300..599 are c1. Values come from Rng(seed),
// row-major (row by row, feature by feature), using the library's
// Box-Muller normal generator. Default seed is 42.
Dataset make_blobs2(std::uint64_t seed = 42);

}  // namespace protolens
