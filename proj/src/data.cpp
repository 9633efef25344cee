#include "nial/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "nial/kv_config.hpp"

namespace nial {

namespace {

double parse_field(const std::string& line, std::size_t begin, std::size_t end, int line_no) {
  while (begin < end && (line[begin] == ' ' || line[begin] == '\t')) ++begin;
  while (end > begin &&
         (line[end - 1] == ' ' || line[end - 1] == '\t' || line[end - 1] == '\r')) {
    --end;
  }
  double v = 0;
  const auto res = std::from_chars(line.data() + begin, line.data() + end, v);
  if (res.ec != std::errc() || res.ptr != line.data() + end || begin == end) {
    throw ParseError("line " + std::to_string(line_no) + ": field '" +
                     line.substr(begin, end - begin) + "' is not a number");
  }
  return v;
}

std::vector<double> parse_row(const std::string& line, int line_no) {
  std::vector<double> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    const std::size_t end = (comma == std::string::npos) ? line.size() : comma;
    fields.push_back(parse_field(line, start, end, line_no));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

Dataset load_csv(const std::string& path, std::optional<Index> expected_len) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path);

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  int line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    std::vector<double> fields = parse_row(line, line_no);
    if (fields.size() < 2) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": a row needs at least one feature and a label");
    }
    if (width == 0) {
      width = fields.size();
    } else if (fields.size() != width) {
      throw ParseError("line " + std::to_string(line_no) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(width));
    }
    const double raw_label = fields.back();
    if (raw_label != std::floor(raw_label) || !std::isfinite(raw_label)) {
      throw ParseError("line " + std::to_string(line_no) + ": label '" +
                       format_double(raw_label) + "' is not an integer");
    }
    if (raw_label < 0) {
      throw LabelError("line " + std::to_string(line_no) + ": negative label " +
                       format_double(raw_label));
    }
    labels.push_back(static_cast<int>(raw_label));
    fields.pop_back();
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw DatasetError("empty dataset: " + path);

  const Index len = static_cast<Index>(width - 1);
  if (expected_len && *expected_len != len) {
    throw DatasetError(path + " has rows of length " + std::to_string(len) + ", expected " +
                       std::to_string(*expected_len));
  }

  Dataset ds;
  ds.signals.resize(static_cast<Index>(rows.size()), len);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Index j = 0; j < len; ++j) ds.signals(static_cast<Index>(i), j) = rows[i][j];
  }
  ds.labels = std::move(labels);
  ds.n_classes = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  return ds;
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (Index i = 0; i < ds.rows(); ++i) {
    std::string row;
    for (Index j = 0; j < ds.cols(); ++j) {
      row += format_double(ds.signals(i, j));
      row += ',';
    }
    row += std::to_string(ds.labels[static_cast<std::size_t>(i)]);
    row += '\n';
    out << row;
  }
  out.flush();
  if (!out.good()) throw IoError("write failed: " + path);
}

Dataset normalize_minmax(const Dataset& ds) {
  Dataset out = ds;
  for (Index i = 0; i < out.rows(); ++i) {
    const double lo = out.signals.row(i).minCoeff();
    const double hi = out.signals.row(i).maxCoeff();
    if (hi == lo) {
      out.signals.row(i).setZero();
    } else {
      out.signals.row(i) = (out.signals.row(i).array() - lo) / (hi - lo);
    }
  }
  return out;
}

Dataset standardize(const Dataset& ds) {
  Dataset out = ds;
  const double n = static_cast<double>(out.cols());
  for (Index i = 0; i < out.rows(); ++i) {
    const double mean = out.signals.row(i).mean();
    const double var = (out.signals.row(i).array() - mean).square().sum() / n;
    if (var == 0.0) {
      out.signals.row(i).setZero();
    } else {
      out.signals.row(i) = (out.signals.row(i).array() - mean) / std::sqrt(var);
    }
  }
  return out;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double train_frac,
                                             std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw ContractError("train_frac must be in (0,1), got " + format_double(train_frac));
  }
  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(ds.n_classes));
  for (Index i = 0; i < ds.rows(); ++i) {
    by_class[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])].push_back(i);
  }

  std::vector<Index> train_idx, val_idx;
  for (int c = 0; c < ds.n_classes; ++c) {
    std::vector<Index>& members = by_class[static_cast<std::size_t>(c)];
    if (members.size() < 2) {
      throw SplitError("class " + std::to_string(c) + " has " +
                       std::to_string(members.size()) + " samples; need at least 2 to split");
    }
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(c)));
    rng.shuffle(members);
    const Index n = static_cast<Index>(members.size());
    Index n_train = static_cast<Index>(std::llround(train_frac * static_cast<double>(n)));
    n_train = std::clamp<Index>(n_train, 1, n - 1);
    train_idx.insert(train_idx.end(), members.begin(), members.begin() + n_train);
    val_idx.insert(val_idx.end(), members.begin() + n_train, members.end());
  }

  auto take = [&](const std::vector<Index>& idx) {
    Dataset part;
    part.signals.resize(static_cast<Index>(idx.size()), ds.cols());
    part.labels.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      part.signals.row(static_cast<Index>(i)) = ds.signals.row(idx[i]);
      part.labels.push_back(ds.labels[static_cast<std::size_t>(idx[i])]);
    }
    part.n_classes = ds.n_classes;
    return part;
  };
  return {take(train_idx), take(val_idx)};
}

std::vector<Batch> batches(const Dataset& ds, Index batch_size,
                           std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size < 1) throw ContractError("batch_size must be >= 1");
  std::vector<Index> order(static_cast<std::size_t>(ds.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    rng.shuffle(order);
  }

  std::vector<Batch> out;
  const Index len = ds.cols();
  for (Index start = 0; start < ds.rows(); start += batch_size) {
    const Index n = std::min(batch_size, ds.rows() - start);
    Batch b;
    b.signals = Tensor::zeros({n, 1, len});
    b.labels.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      const Index src = order[static_cast<std::size_t>(start + i)];
      for (Index j = 0; j < len; ++j) b.signals.values()[i * len + j] = ds.signals(src, j);
      b.labels.push_back(ds.labels[static_cast<std::size_t>(src)]);
    }
    out.push_back(std::move(b));
  }
  return out;
}

Dataset synth_dataset(Index n_per_class, Index len, int n_classes, double noise_sigma,
                      std::uint64_t seed) {
  if (n_classes < 2) throw ContractError("synth dataset wants n_classes >= 2");
  if (n_per_class < 1 || len < 2) {
    throw ContractError("synth dataset wants n_per_class >= 1 and len >= 2");
  }
  constexpr double kTwoPi = 6.283185307179586476925286766559;

  Dataset ds;
  ds.n_classes = n_classes;
  ds.signals.resize(n_per_class * n_classes, len);
  ds.labels.reserve(static_cast<std::size_t>(ds.signals.rows()));

  Rng rng(seed);
  Index row = 0;
  for (int k = 0; k < n_classes; ++k) {
    const double freq = static_cast<double>(k + 1);
    const double center =
        static_cast<double>(len) * (static_cast<double>(k) + 0.5) / static_cast<double>(n_classes);
    const double bump_width = static_cast<double>(len) / (4.0 * static_cast<double>(n_classes));
    for (Index s = 0; s < n_per_class; ++s, ++row) {
      for (Index t = 0; t < len; ++t) {
        const double phase = kTwoPi * freq * static_cast<double>(t) / static_cast<double>(len);
        const double offset = (static_cast<double>(t) - center) / bump_width;
        const double clean = 0.8 * std::sin(phase) + 1.25 * std::exp(-0.5 * offset * offset);
        ds.signals(row, t) = clean + noise_sigma * rng.gaussian();
      }
      ds.labels.push_back(k);
    }
  }
  return ds;
}

}  // namespace nial
