#pragma once

#include <string>
#include <vector>

#include "nial/tensor.hpp"

namespace nial {

// Counts: entry (i,j) = samples of true class i predicted as class j.
struct ConfusionMatrix {
  Eigen::MatrixXi counts;

  Index k() const { return counts.rows(); }
  long long total() const { return counts.sum(); }
};

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                          Index k);

double accuracy(const ConfusionMatrix& cm);  // trace / total

enum class F1Mode { kBinary, kMacro };

// Binary mode scores class 1; macro is the unweighted mean of per-class F1
// with 0/0 taken as 0.
double f1(const ConfusionMatrix& cm, F1Mode mode);

std::string render(const ConfusionMatrix& cm);

}  // namespace nial
