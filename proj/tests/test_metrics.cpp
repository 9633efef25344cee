#include <algorithm>
#include <vector>

#include "doctest.h"
#include "nial/metrics.hpp"
#include "nial/rng.hpp"

using namespace nial;

namespace {

// Metrics recomputed from first principles, one pass over the raw pairs.
double brute_accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
  int hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i];
  return double(hits) / double(preds.size());
}

double brute_f1_class(const std::vector<int>& preds, const std::vector<int>& labels, int c) {
  int tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == c && labels[i] == c) ++tp;
    if (preds[i] == c && labels[i] != c) ++fp;
    if (preds[i] != c && labels[i] == c) ++fn;
  }
  const double p = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
  const double r = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
  return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
}

double brute_macro_f1(const std::vector<int>& preds, const std::vector<int>& labels, int k) {
  double total = 0.0;
  for (int c = 0; c < k; ++c) total += brute_f1_class(preds, labels, c);
  return total / double(k);
}

}  // namespace

TEST_CASE("confusion matrix tallies (true, predicted) pairs") {
  // One class-1 sample predicted correctly, one class-0 sample predicted as 1.
  ConfusionMatrix cm = confusion({1, 1}, {0, 1}, 2);
  CHECK(cm.counts(0, 0) == 0);
  CHECK(cm.counts(0, 1) == 1);
  CHECK(cm.counts(1, 0) == 0);
  CHECK(cm.counts(1, 1) == 1);
  CHECK(cm.total() == 2);
  CHECK(accuracy(cm) == 0.5);
}

TEST_CASE("confusion rejects mismatched or out-of-range inputs") {
  CHECK_THROWS_AS(confusion({0, 1}, {0}, 2), ContractError);
  CHECK_THROWS_AS(confusion({2}, {0}, 2), ContractError);
  CHECK_THROWS_AS(confusion({0}, {5}, 2), ContractError);
  CHECK_THROWS_AS(confusion({-1}, {0}, 2), ContractError);
  CHECK_THROWS_AS(confusion({}, {}, 0), ContractError);

  ConfusionMatrix empty = confusion({}, {}, 2);
  CHECK(empty.total() == 0);
  CHECK_THROWS_AS(accuracy(empty), ContractError);
  CHECK_THROWS_AS(f1(empty, F1Mode::kMacro), ContractError);
}

TEST_CASE("perfect predictions score 1.0 everywhere") {
  std::vector<int> y = {0, 1, 2, 1, 0, 2, 2};
  ConfusionMatrix cm = confusion(y, y, 3);
  CHECK(accuracy(cm) == 1.0);
  CHECK(f1(cm, F1Mode::kMacro) == 1.0);
  CHECK(cm.counts.trace() == 7);
}

TEST_CASE("binary f1 matches the tp=2 fp=1 fn=1 hand computation") {
  // Class 1: two hits, one false alarm, one miss -> precision 2/3, recall 2/3.
  std::vector<int> labels = {1, 1, 0, 1, 0};
  std::vector<int> preds = {1, 1, 1, 0, 0};
  ConfusionMatrix cm = confusion(preds, labels, 2);
  CHECK(f1(cm, F1Mode::kBinary) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  ConfusionMatrix three = confusion({0, 1, 2}, {0, 1, 2}, 3);
  CHECK_THROWS_AS(f1(three, F1Mode::kBinary), ContractError);
}

TEST_CASE("a class absent from both preds and labels scores f1 0") {
  // Class 2 never occurs: macro mean still divides by k = 3.
  std::vector<int> labels = {0, 1, 0, 1};
  std::vector<int> preds = {0, 1, 0, 1};
  ConfusionMatrix cm = confusion(preds, labels, 3);
  CHECK(f1(cm, F1Mode::kMacro) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(accuracy(cm) == 1.0);
}

TEST_CASE("all-wrong predictions score 0") {
  ConfusionMatrix cm = confusion({1, 0}, {0, 1}, 2);
  CHECK(accuracy(cm) == 0.0);
  CHECK(f1(cm, F1Mode::kBinary) == 0.0);
  CHECK(f1(cm, F1Mode::kMacro) == 0.0);
}

TEST_CASE("metrics agree with brute-force recomputation on random instances") {
  Rng rng(1234);
  for (int trial = 0; trial < 120; ++trial) {
    const int k = 2 + int(rng.below(5));
    const int n = 1 + int(rng.below(40));
    std::vector<int> preds, labels;
    for (int i = 0; i < n; ++i) {
      preds.push_back(int(rng.below(std::uint64_t(k))));
      labels.push_back(int(rng.below(std::uint64_t(k))));
    }
    ConfusionMatrix cm = confusion(preds, labels, k);

    REQUIRE(cm.total() == n);
    REQUIRE(accuracy(cm) == brute_accuracy(preds, labels));
    REQUIRE(f1(cm, F1Mode::kMacro) == brute_macro_f1(preds, labels, k));
    if (k == 2) REQUIRE(f1(cm, F1Mode::kBinary) == brute_f1_class(preds, labels, 1));

    // Row sums count true labels, column sums count predictions.
    for (int c = 0; c < k; ++c) {
      CHECK(cm.counts.row(c).sum() ==
            int(std::count(labels.begin(), labels.end(), c)));
      CHECK(cm.counts.col(c).sum() ==
            int(std::count(preds.begin(), preds.end(), c)));
    }
  }
}

TEST_CASE("metrics are invariant under sample reordering") {
  Rng rng(55);
  std::vector<int> preds, labels;
  for (int i = 0; i < 60; ++i) {
    preds.push_back(int(rng.below(4)));
    labels.push_back(int(rng.below(4)));
  }
  ConfusionMatrix a = confusion(preds, labels, 4);

  std::vector<std::size_t> order(preds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<int> preds2, labels2;
  for (std::size_t i : order) {
    preds2.push_back(preds[i]);
    labels2.push_back(labels[i]);
  }
  ConfusionMatrix b = confusion(preds2, labels2, 4);
  CHECK((a.counts.array() == b.counts.array()).all());
  CHECK(accuracy(a) == accuracy(b));
  CHECK(f1(a, F1Mode::kMacro) == f1(b, F1Mode::kMacro));
}

TEST_CASE("render lays out a labeled table") {
  ConfusionMatrix cm = confusion({1, 1}, {0, 1}, 2);
  const std::string table = render(cm);
  CHECK(table == "true\\pred\t0\t1\n0\t0\t1\n1\t0\t1\n");
}
