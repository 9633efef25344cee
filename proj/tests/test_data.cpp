#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "nial/data.hpp"

using namespace nial;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string write_temp(const std::string& name, const std::string& text) {
  const std::string path = temp_path(name);
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  out << text;
  REQUIRE(out.good());
  return path;
}

std::vector<int> class_counts(const Dataset& ds) {
  std::vector<int> counts(static_cast<std::size_t>(ds.n_classes), 0);
  for (int label : ds.labels) ++counts[static_cast<std::size_t>(label)];
  return counts;
}

bool same_signals(const SignalMatrix& a, const SignalMatrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

}  // namespace

TEST_CASE("load_csv parses rows of floats plus an integer label") {
  const std::string path = write_temp("nial_two_rows.csv",
                                      "0.1,0.5,0.9,0\n"
                                      "0.2,0.6,1.0,1\n");
  Dataset ds = load_csv(path);
  REQUIRE(ds.rows() == 2);
  REQUIRE(ds.cols() == 3);
  CHECK(ds.signals(0, 0) == 0.1);
  CHECK(ds.signals(0, 1) == 0.5);
  CHECK(ds.signals(0, 2) == 0.9);
  CHECK(ds.signals(1, 2) == 1.0);
  CHECK(ds.labels == std::vector<int>{0, 1});
  CHECK(ds.n_classes == 2);
}

TEST_CASE("load_csv tolerates blanks, padding and CRLF") {
  const std::string path = write_temp("nial_messy.csv",
                                      "\n"
                                      " 0.1 ,\t0.5 , 1\r\n"
                                      "\n"
                                      "2.0,-3.5,0\r\n"
                                      "   \n");
  Dataset ds = load_csv(path);
  REQUIRE(ds.rows() == 2);
  CHECK(ds.signals(0, 1) == 0.5);
  CHECK(ds.signals(1, 1) == -3.5);
  CHECK(ds.labels == std::vector<int>{1, 0});
}

TEST_CASE("load_csv names the line of each malformed row") {
  SUBCASE("ragged row") {
    const std::string path = write_temp("nial_ragged.csv", "1,2,0\n1,2,3,0\n");
    CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("line 2"), ParseError);
  }
  SUBCASE("non-numeric field") {
    const std::string path = write_temp("nial_alpha.csv", "1,x,0\n");
    CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("'x'"), ParseError);
  }
  SUBCASE("fractional label") {
    const std::string path = write_temp("nial_fraclabel.csv", "1,2,0\n1,2,1.5\n");
    CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("not an integer"), ParseError);
  }
  SUBCASE("negative label") {
    const std::string path = write_temp("nial_neglabel.csv", "1,2,-1\n");
    CHECK_THROWS_AS(load_csv(path), LabelError);
  }
  SUBCASE("row with no features") {
    const std::string path = write_temp("nial_lonely.csv", "0\n");
    CHECK_THROWS_AS(load_csv(path), ParseError);
  }
  SUBCASE("empty file") {
    const std::string path = write_temp("nial_empty.csv", "\n  \n");
    CHECK_THROWS_AS(load_csv(path), DatasetError);
  }
  SUBCASE("length contract") {
    const std::string path = write_temp("nial_len.csv", "1,2,3,0\n");
    CHECK_THROWS_AS(load_csv(path, 4), DatasetError);
    CHECK(load_csv(path, 3).cols() == 3);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_csv(temp_path("nial_does_not_exist.csv")), IoError);
  }
}

TEST_CASE("label gaps still set n_classes to max label + 1") {
  const std::string path = write_temp("nial_gap.csv", "1,2,0\n3,4,3\n");
  CHECK(load_csv(path).n_classes == 4);
}

TEST_CASE("write_csv then load_csv round-trips values exactly") {
  Dataset ds;
  ds.signals.resize(3, 4);
  ds.signals << 1.0 / 3.0, -2.5e-17, 3.141592653589793, 0.0,
                1e300, -1e-300, 0.1, 123456.789,
                -0.0, 42.0, 6.02e23, -7.25;
  ds.labels = {0, 2, 1};
  ds.n_classes = 3;

  const std::string path = temp_path("nial_roundtrip.csv");
  write_csv(ds, path);
  Dataset back = load_csv(path);

  REQUIRE(back.rows() == 3);
  REQUIRE(back.cols() == 4);
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 4; ++j) CHECK(back.signals(i, j) == ds.signals(i, j));
  }
  CHECK(back.labels == ds.labels);
}

TEST_CASE("minmax maps each row onto [0,1]") {
  Dataset ds;
  ds.signals.resize(2, 3);
  ds.signals << 0.0, 5.0, 10.0,
                7.0, 7.0, 7.0;
  ds.labels = {0, 0};
  ds.n_classes = 1;

  Dataset out = normalize_minmax(ds);
  CHECK(out.signals(0, 0) == 0.0);
  CHECK(out.signals(0, 1) == 0.5);
  CHECK(out.signals(0, 2) == 1.0);
  // Constant rows map to zeros rather than dividing by zero.
  CHECK(out.signals.row(1).isZero(0.0));
  // The input is left alone.
  CHECK(ds.signals(0, 1) == 5.0);
}

TEST_CASE("standardize gives per-row zero mean and unit variance") {
  Dataset ds;
  ds.signals.resize(2, 3);
  ds.signals << 1.0, 2.0, 3.0,
                -4.0, -4.0, -4.0;
  ds.labels = {0, 0};
  ds.n_classes = 1;

  Dataset out = standardize(ds);
  const double r = std::sqrt(1.5);  // 1 / population std of {1,2,3}
  CHECK(out.signals(0, 0) == doctest::Approx(-r).epsilon(1e-12));
  CHECK(out.signals(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(out.signals(0, 2) == doctest::Approx(r).epsilon(1e-12));
  CHECK(out.signals.row(1).isZero(0.0));

  Dataset big = synth_dataset(10, 32, 3, 0.1, 5);
  Dataset std_big = standardize(big);
  for (Index i = 0; i < std_big.rows(); ++i) {
    const double mean = std_big.signals.row(i).mean();
    const double var = (std_big.signals.row(i).array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("stratified split keeps per-class proportions") {
  Dataset ds;
  ds.signals.resize(10, 2);
  for (Index i = 0; i < 10; ++i) ds.signals.row(i) << double(i), double(i);
  ds.labels = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  ds.n_classes = 2;

  auto [train, val] = stratified_split(ds, 0.8, 3);
  CHECK(train.rows() == 8);
  CHECK(val.rows() == 2);
  CHECK(class_counts(train) == std::vector<int>{4, 4});
  CHECK(class_counts(val) == std::vector<int>{1, 1});
  CHECK(train.n_classes == 2);

  // Together the parts cover every sample exactly once.
  std::multiset<double> seen;
  for (Index i = 0; i < train.rows(); ++i) seen.insert(train.signals(i, 0));
  for (Index i = 0; i < val.rows(); ++i) seen.insert(val.signals(i, 0));
  std::multiset<double> want;
  for (Index i = 0; i < 10; ++i) want.insert(double(i));
  CHECK(seen == want);
}

TEST_CASE("stratified split is deterministic in the seed") {
  Dataset ds = synth_dataset(12, 8, 3, 0.2, 9);
  auto [t1, v1] = stratified_split(ds, 0.75, 42);
  auto [t2, v2] = stratified_split(ds, 0.75, 42);
  CHECK(same_signals(t1.signals, t2.signals));
  CHECK(same_signals(v1.signals, v2.signals));
  CHECK(t1.labels == t2.labels);

  auto [t3, v3] = stratified_split(ds, 0.75, 43);
  CHECK_FALSE(same_signals(t3.signals, t1.signals));
}

TEST_CASE("stratified split proportions hold within one sample per class") {
  Rng rng(77);
  Dataset ds;
  const Index n = 500;
  ds.signals.resize(n, 1);
  ds.labels.reserve(static_cast<std::size_t>(n));
  ds.n_classes = 4;
  for (Index i = 0; i < n; ++i) {
    ds.signals(i, 0) = double(i);
    ds.labels.push_back(int(rng.below(4)));
  }
  const std::vector<int> totals = class_counts(ds);

  for (double frac : {0.5, 0.7, 0.9}) {
    auto [train, val] = stratified_split(ds, frac, 11);
    const std::vector<int> got = class_counts(train);
    for (int c = 0; c < 4; ++c) {
      const auto want = std::clamp<long long>(std::llround(frac * totals[std::size_t(c)]), 1,
                                              totals[std::size_t(c)] - 1);
      CHECK(got[std::size_t(c)] == int(want));
    }
    CHECK(train.rows() + val.rows() == n);
  }
}

TEST_CASE("stratified split rejects undersized classes and bad fractions") {
  Dataset ds;
  ds.signals.resize(3, 1);
  ds.signals << 1, 2, 3;
  ds.labels = {0, 0, 1};
  ds.n_classes = 2;
  CHECK_THROWS_WITH_AS(stratified_split(ds, 0.8, 1), doctest::Contains("class 1"), SplitError);

  Dataset ok = synth_dataset(4, 4, 2, 0.0, 1);
  CHECK_THROWS_AS(stratified_split(ok, 0.0, 1), ContractError);
  CHECK_THROWS_AS(stratified_split(ok, 1.0, 1), ContractError);
}

TEST_CASE("batches cover the dataset with the documented sizes") {
  Dataset ds;
  ds.signals.resize(10, 3);
  for (Index i = 0; i < 10; ++i) ds.signals.row(i) << double(i), 0.0, 1.0;
  ds.labels = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  ds.n_classes = 10;

  std::vector<Batch> plain = batches(ds, 4);
  REQUIRE(plain.size() == 3);
  CHECK(plain[0].signals.shape() == Shape{4, 1, 3});
  CHECK(plain[1].signals.shape() == Shape{4, 1, 3});
  CHECK(plain[2].signals.shape() == Shape{2, 1, 3});
  // Unshuffled batches preserve dataset order.
  CHECK(plain[0].labels == std::vector<int>{0, 1, 2, 3});
  CHECK(plain[2].labels == std::vector<int>{8, 9});
  CHECK(plain[1].signals.at(0, 0, 0) == 4.0);

  std::vector<Batch> one = batches(ds, 32);
  REQUIRE(one.size() == 1);
  CHECK(one[0].signals.dim(0) == 10);

  CHECK_THROWS_AS(batches(ds, 0), ContractError);
}

TEST_CASE("shuffled batches are a seed-deterministic permutation") {
  Dataset ds;
  ds.signals.resize(9, 2);
  for (Index i = 0; i < 9; ++i) ds.signals.row(i) << double(i), -double(i);
  ds.labels = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  ds.n_classes = 9;

  auto flatten = [](const std::vector<Batch>& bs) {
    std::vector<int> order;
    for (const Batch& b : bs) order.insert(order.end(), b.labels.begin(), b.labels.end());
    return order;
  };

  std::vector<int> a = flatten(batches(ds, 4, 123));
  std::vector<int> b = flatten(batches(ds, 4, 123));
  std::vector<int> c = flatten(batches(ds, 4, 124));
  CHECK(a == b);
  CHECK(a != c);

  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8});

  // Signals travel with their labels.
  std::vector<Batch> bs = batches(ds, 4, 123);
  for (const Batch& batch : bs) {
    for (Index i = 0; i < batch.signals.dim(0); ++i) {
      CHECK(batch.signals.at(i, 0, 0) == double(batch.labels[std::size_t(i)]));
    }
  }
}

TEST_CASE("synth dataset matches its closed form at zero noise") {
  const Index len = 16;
  const int k_classes = 4;
  Dataset ds = synth_dataset(3, len, k_classes, 0.0, 99);
  REQUIRE(ds.rows() == 12);
  REQUIRE(ds.cols() == len);
  CHECK(ds.n_classes == k_classes);

  for (Index row = 0; row < ds.rows(); ++row) {
    const int k = ds.labels[std::size_t(row)];
    CHECK(k == int(row / 3));
    const double center = double(len) * (k + 0.5) / k_classes;
    const double width = double(len) / (4.0 * k_classes);
    const double two_pi = 2.0 * std::acos(-1.0);
    for (Index t = 0; t < len; ++t) {
      const double phase = two_pi * (k + 1) * double(t) / double(len);
      const double z = (double(t) - center) / width;
      const double want = 0.8 * std::sin(phase) + 1.25 * std::exp(-0.5 * z * z);
      CHECK(ds.signals(row, t) == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("synth dataset is seed deterministic and rejects bad shapes") {
  Dataset a = synth_dataset(5, 24, 3, 0.1, 7);
  Dataset b = synth_dataset(5, 24, 3, 0.1, 7);
  Dataset c = synth_dataset(5, 24, 3, 0.1, 8);
  CHECK(same_signals(a.signals, b.signals));
  CHECK_FALSE(same_signals(a.signals, c.signals));

  CHECK_THROWS_AS(synth_dataset(5, 24, 1, 0.1, 7), ContractError);
  CHECK_THROWS_AS(synth_dataset(0, 24, 3, 0.1, 7), ContractError);
  CHECK_THROWS_AS(synth_dataset(5, 1, 3, 0.1, 7), ContractError);
}

TEST_CASE("synth classes stay nearest-neighbour separable under noise") {
  const Index len = 64;
  const int k_classes = 4;
  Dataset train = synth_dataset(10, len, k_classes, 0.05, 1);
  Dataset test = synth_dataset(5, len, k_classes, 0.05, 2);

  int correct = 0;
  for (Index i = 0; i < test.rows(); ++i) {
    Index arg = 0;
    double best = (train.signals.row(0) - test.signals.row(i)).squaredNorm();
    for (Index j = 1; j < train.rows(); ++j) {
      const double d = (train.signals.row(j) - test.signals.row(i)).squaredNorm();
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    correct += train.labels[std::size_t(arg)] == test.labels[std::size_t(i)];
  }
  CHECK(double(correct) / double(test.rows()) >= 0.95);
}
