#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nial/rng.hpp"
#include "nial/tensor.hpp"

namespace nial {

using SignalMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Labeled signal matrix: one fixed-length segmented beat per row.
struct Dataset {
  SignalMatrix signals;     // B x L
  std::vector<int> labels;  // in [0, n_classes)
  int n_classes = 0;

  Index rows() const { return signals.rows(); }
  Index cols() const { return signals.cols(); }
};

// Mini-batch view in the [B' x 1 x L] channel form the model consumes.
struct Batch {
  Tensor signals;
  std::vector<int> labels;
};

// CSV rows are L decimal floats followed by one integer-valued label, no
// header. n_classes becomes max label + 1.
Dataset load_csv(const std::string& path, std::optional<Index> expected_len = std::nullopt);

// Inverse of load_csv for generated data; values round-trip exactly.
void write_csv(const Dataset& ds, const std::string& path);

// Per-row rescaling; constant rows map to all-zeros in both transforms.
Dataset normalize_minmax(const Dataset& ds);  // row min -> 0, row max -> 1
Dataset standardize(const Dataset& ds);       // per-row z-score, population std

// Per-class proportions preserved to within one sample; every class needs at
// least 2 members. Deterministic in the seed.
std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double train_frac,
                                             std::uint64_t seed);

// Covers every sample exactly once; the last batch may be short. A seed
// shuffles the sample order first.
std::vector<Batch> batches(const Dataset& ds, Index batch_size,
                           std::optional<std::uint64_t> shuffle_seed = std::nullopt);

// Synthetic stand-in for the ECG datasets: class k is a k+1-cycle sinusoid
// plus a class-positioned Gaussian bump, plus Gaussian noise.
Dataset synth_dataset(Index n_per_class, Index len, int n_classes, double noise_sigma,
                      std::uint64_t seed);

}  // namespace nial
