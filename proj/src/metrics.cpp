#include "nial/metrics.hpp"

#include <sstream>

#include "nial/errors.hpp"

namespace nial {

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                          Index k) {
  if (preds.size() != labels.size()) {
    throw ContractError("confusion: " + std::to_string(preds.size()) + " predictions vs " +
                        std::to_string(labels.size()) + " labels");
  }
  if (k < 1) throw ContractError("confusion: k must be >= 1");
  ConfusionMatrix cm;
  cm.counts = Eigen::MatrixXi::Zero(k, k);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int p = preds[i], y = labels[i];
    if (p < 0 || p >= k || y < 0 || y >= k) {
      throw ContractError("confusion: class out of range [0," + std::to_string(k) +
                          ") at index " + std::to_string(i));
    }
    cm.counts(y, p) += 1;
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ContractError("accuracy of an empty confusion matrix");
  return static_cast<double>(cm.counts.trace()) / static_cast<double>(cm.total());
}

namespace {

double f1_for_class(const ConfusionMatrix& cm, Index c) {
  const double tp = cm.counts(c, c);
  const double fp = cm.counts.col(c).sum() - tp;
  const double fn = cm.counts.row(c).sum() - tp;
  const double precision = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
  const double recall = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
  return (precision + recall) > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

}  // namespace

double f1(const ConfusionMatrix& cm, F1Mode mode) {
  if (cm.total() == 0) throw ContractError("f1 of an empty confusion matrix");
  if (mode == F1Mode::kBinary) {
    if (cm.k() != 2) {
      throw ContractError("binary f1 wants a 2x2 matrix, got " + std::to_string(cm.k()) + "x" +
                          std::to_string(cm.k()));
    }
    return f1_for_class(cm, 1);
  }
  double total = 0.0;
  for (Index c = 0; c < cm.k(); ++c) total += f1_for_class(cm, c);
  return total / static_cast<double>(cm.k());
}

std::string render(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "true\\pred";
  for (Index j = 0; j < cm.k(); ++j) out << '\t' << j;
  out << '\n';
  for (Index i = 0; i < cm.k(); ++i) {
    out << i;
    for (Index j = 0; j < cm.k(); ++j) out << '\t' << cm.counts(i, j);
    out << '\n';
  }
  return out.str();
}

}  // namespace nial
