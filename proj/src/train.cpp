#include "nial/train.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

namespace nial {

namespace {

std::int64_t wall_clock_ms() {
  const auto now = std::chrono::steady_clock::now().time_since_epoch();
  return std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
}

Tensor loss_for(Index n_classes, const Tensor& logits, const std::vector<int>& labels) {
  if (n_classes == 1) return binary_cross_entropy(logits, labels);
  return categorical_cross_entropy(logits, labels);
}

std::vector<int> predictions(const Tensor& logits, Index n_classes) {
  const Index b = logits.dim(0);
  std::vector<int> preds;
  preds.reserve(static_cast<std::size_t>(b));
  if (n_classes == 1) {
    for (Index i = 0; i < b; ++i) preds.push_back(logits.values()[i] >= 0.0 ? 1 : 0);
    return preds;
  }
  for (Index i = 0; i < b; ++i) {
    Index best = 0;
    for (Index j = 1; j < n_classes; ++j) {
      if (logits.values()[i * n_classes + j] > logits.values()[i * n_classes + best]) best = j;
    }
    preds.push_back(static_cast<int>(best));
  }
  return preds;
}

void check_model_dataset(const ModelConfig& cfg, const Dataset& ds, const std::string& what) {
  if (ds.cols() != cfg.input_len) {
    throw ConfigError(what + " rows have length " + std::to_string(ds.cols()) +
                      " but the model wants input_len " + std::to_string(cfg.input_len));
  }
  const Index limit = cfg.n_classes == 1 ? 2 : cfg.n_classes;
  if (ds.n_classes > limit) {
    throw ConfigError(what + " has " + std::to_string(ds.n_classes) +
                      " classes but the model scores " + std::to_string(limit));
  }
}

Dataset prepare_dataset(const TrainConfig& config) {
  Dataset ds = config.data_csv.empty()
                   ? synth_dataset(config.synth.per_class, config.synth.len,
                                   config.synth.classes, config.synth.noise, config.seed)
                   : load_csv(config.data_csv,
                              config.expected_len > 0
                                  ? std::optional<Index>(config.expected_len)
                                  : std::nullopt);
  return apply_normalize(ds, config.normalize);
}

std::uint64_t epoch_shuffle_seed(std::uint64_t seed, Index epoch) {
  return mix_seed(mix_seed(seed, 0xba7c4), static_cast<std::uint64_t>(epoch));
}

}  // namespace

NormalizeMode normalize_mode_from_string(const std::string& s) {
  if (s == "none") return NormalizeMode::kNone;
  if (s == "minmax") return NormalizeMode::kMinMax;
  if (s == "standardize") return NormalizeMode::kStandardize;
  throw ConfigError("normalize mode must be none|minmax|standardize, got '" + s + "'");
}

Dataset apply_normalize(const Dataset& ds, NormalizeMode mode) {
  switch (mode) {
    case NormalizeMode::kNone: return ds;
    case NormalizeMode::kMinMax: return normalize_minmax(ds);
    case NormalizeMode::kStandardize: return standardize(ds);
  }
  throw ContractError("unhandled normalize mode");
}

TrainConfig TrainConfig::from_kv(const KvConfig& kv) {
  TrainConfig cfg;
  cfg.data_csv = kv.get_string("data.csv", cfg.data_csv);
  cfg.expected_len = kv.get_int("data.expected_len", cfg.expected_len);
  cfg.normalize = normalize_mode_from_string(kv.get_string("data.normalize", "minmax"));
  cfg.train_frac = kv.get_double("data.train_frac", cfg.train_frac);
  cfg.synth.classes = static_cast<int>(kv.get_int("data.synth.classes", cfg.synth.classes));
  cfg.synth.per_class = kv.get_int("data.synth.per_class", cfg.synth.per_class);
  cfg.synth.len = kv.get_int("data.synth.len", cfg.synth.len);
  cfg.synth.noise = kv.get_double("data.synth.noise", cfg.synth.noise);

  cfg.model = ModelConfig::from_kv(kv);

  cfg.epochs = kv.get_int("train.epochs", cfg.epochs);
  cfg.batch_size = kv.get_int("train.batch_size", cfg.batch_size);
  cfg.lr = kv.get_double("train.lr", cfg.lr);
  cfg.seed = static_cast<std::uint64_t>(kv.get_int("train.seed", 1));
  cfg.scheduler.kind =
      scheduler_kind_from_string(kv.get_string("train.scheduler", "adaptive"));
  cfg.scheduler.factor = kv.get_double("train.factor", cfg.scheduler.factor);
  cfg.scheduler.patience = static_cast<int>(kv.get_int("train.patience", cfg.scheduler.patience));
  cfg.scheduler.min_delta = kv.get_double("train.min_delta", cfg.scheduler.min_delta);
  cfg.scheduler.min_lr = kv.get_double("train.min_lr", cfg.scheduler.min_lr);
  cfg.early_stop = kv.get_bool("train.early_stop", cfg.early_stop);
  cfg.early_stop_patience =
      static_cast<int>(kv.get_int("train.early_stop_patience", cfg.early_stop_patience));

  cfg.out_dir = kv.get_string("out.dir", cfg.out_dir);

  const std::vector<std::string> leftover = kv.unread_keys();
  if (!leftover.empty()) throw ConfigError("unknown config key: " + leftover.front());
  return cfg;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be positive");
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw ConfigError("data.train_frac must be in (0,1)");
  }
  if (!(scheduler.factor > 0.0 && scheduler.factor < 1.0)) {
    throw ConfigError("train.factor must be in (0,1)");
  }
  if (scheduler.patience < 0) throw ConfigError("train.patience must be >= 0");
  if (scheduler.min_delta < 0.0) throw ConfigError("train.min_delta must be >= 0");
  if (scheduler.min_lr < 0.0) throw ConfigError("train.min_lr must be >= 0");
  if (early_stop_patience < 0) throw ConfigError("train.early_stop_patience must be >= 0");
  if (out_dir.empty()) throw ConfigError("out.dir must not be empty");
  model.validate();
}

const char* EpochRecord::csv_header() {
  return "epoch,train_loss,val_loss,val_accuracy,val_f1,lr,elapsed_ms";
}

std::string EpochRecord::csv_row() const {
  return std::to_string(epoch) + ',' + format_double(train_loss) + ',' +
         format_double(val_loss) + ',' + format_double(val_accuracy) + ',' +
         format_double(val_f1) + ',' + format_double(lr) + ',' + std::to_string(elapsed_ms);
}

EvalReport evaluate_model(NialModel& model, const Dataset& ds, Index batch_size) {
  if (ds.rows() == 0) throw ContractError("evaluate on an empty dataset");
  const bool was_training = model.training();
  model.set_training(false);
  NoGradGuard guard;

  const Index k_model = model.config().n_classes;
  double loss_sum = 0.0;
  std::vector<int> preds;
  preds.reserve(static_cast<std::size_t>(ds.rows()));
  for (const Batch& b : batches(ds, batch_size)) {
    Tensor logits = model.forward(b.signals);
    loss_sum += loss_for(k_model, logits, b.labels).value() *
                static_cast<double>(b.labels.size());
    for (int p : predictions(logits, k_model)) preds.push_back(p);
  }
  model.set_training(was_training);

  EvalReport report;
  report.n_samples = ds.rows();
  report.loss = loss_sum / static_cast<double>(ds.rows());
  report.f1_mode = k_model == 1 ? F1Mode::kBinary : F1Mode::kMacro;
  report.cm = confusion(preds, ds.labels, k_model == 1 ? 2 : k_model);
  report.accuracy = accuracy(report.cm);
  report.f1_score = f1(report.cm, report.f1_mode);
  return report;
}

TrainResult train(const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  const auto now = hooks.now_ms ? hooks.now_ms : std::function<std::int64_t()>(wall_clock_ms);

  Dataset full = prepare_dataset(config);
  check_model_dataset(config.model, full,
                      config.data_csv.empty() ? "synthetic data" : config.data_csv);
  auto [train_ds, val_ds] = stratified_split(full, config.train_frac, config.seed);

  NialModel model(config.model, config.seed);
  Adam opt(model.parameters(), config.lr);
  LrScheduler sched(config.scheduler, config.lr);
  EarlyStopping stop(config.early_stop_patience, config.scheduler.min_delta);

  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + config.out_dir);

  TrainResult result;
  result.log_path = config.out_dir + "/log.csv";
  result.final_checkpoint = config.out_dir + "/final.ckpt";
  const std::string best_path = config.out_dir + "/best.ckpt";

  std::ofstream log(result.log_path, std::ios::trunc);
  if (!log) throw IoError("cannot open log for writing: " + result.log_path);
  log << EpochRecord::csv_header() << '\n';
  log.flush();

  double best = std::numeric_limits<double>::infinity();
  for (Index epoch = 1; epoch <= config.epochs; ++epoch) {
    const std::int64_t t0 = now();
    model.set_training(true);

    double loss_sum = 0.0;
    Index seen = 0;
    Index batch_no = 0;
    for (const Batch& b : batches(train_ds, config.batch_size,
                                  epoch_shuffle_seed(config.seed, epoch))) {
      ++batch_no;
      model.zero_grad();
      GradTape tape;
      Tensor logits = model.forward(b.signals);
      Tensor loss = loss_for(config.model.n_classes, logits, b.labels);
      const double lv = loss.value();
      if (!std::isfinite(lv)) {
        throw DivergenceError("train loss is not finite at epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(batch_no));
      }
      tape.backward(loss);
      opt.step();
      loss_sum += lv * static_cast<double>(b.labels.size());
      seen += static_cast<Index>(b.labels.size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = opt.lr();
    rec.train_loss = loss_sum / static_cast<double>(seen);

    if (hooks.val_loss_override) {
      rec.val_loss = hooks.val_loss_override(epoch);
    } else {
      const EvalReport vr = evaluate_model(model, val_ds, config.batch_size);
      rec.val_loss = vr.loss;
      rec.val_accuracy = vr.accuracy;
      rec.val_f1 = vr.f1_score;
      if (!std::isfinite(rec.val_loss)) {
        throw DivergenceError("validation loss is not finite at epoch " +
                              std::to_string(epoch));
      }
    }

    opt.set_lr(sched.on_epoch_end(rec.val_loss));

    if (rec.val_loss < best) {
      best = rec.val_loss;
      result.best_val_loss = best;
      result.best_epoch = epoch;
      result.best_checkpoint = best_path;
      model.save(best_path);
    }

    rec.elapsed_ms = now() - t0;
    log << rec.csv_row() << '\n';
    log.flush();
    result.records.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);

    if (config.early_stop && stop.on_epoch_end(rec.val_loss)) {
      result.stopped_early = true;
      break;
    }
  }

  model.save(result.final_checkpoint);
  result.final_train_accuracy = evaluate_model(model, train_ds, config.batch_size).accuracy;
  return result;
}

EvalReport evaluate_checkpoint(const std::string& checkpoint_path, const std::string& data_csv,
                               NormalizeMode normalize, Index expected_len, Index batch_size) {
  NialModel model = NialModel::load(checkpoint_path);
  Dataset ds = load_csv(data_csv, expected_len > 0 ? std::optional<Index>(expected_len)
                                                   : std::nullopt);
  ds = apply_normalize(ds, normalize);
  check_model_dataset(model.config(), ds, data_csv);
  return evaluate_model(model, ds, batch_size);
}

BenchmarkReport benchmark_lr(const TrainConfig& base, double loss_threshold,
                             const TrainHooks& hooks) {
  if (!std::isfinite(loss_threshold)) {
    throw ConfigError("loss threshold must be finite");
  }
  auto run_one = [&](SchedulerKind kind, const char* subdir) {
    TrainConfig cfg = base;
    cfg.scheduler.kind = kind;
    cfg.out_dir = base.out_dir + "/" + subdir;
    const TrainResult res = train(cfg, hooks);

    BenchmarkRun run;
    run.scheduler = to_string(kind);
    run.records = res.records;
    for (const EpochRecord& rec : res.records) {
      run.wall_ms += rec.elapsed_ms;
      if (run.epochs_to_threshold < 0 && rec.val_loss <= loss_threshold) {
        run.epochs_to_threshold = rec.epoch;
      }
    }
    if (!res.records.empty()) {
      run.final_val_loss = res.records.back().val_loss;
      run.final_val_accuracy = res.records.back().val_accuracy;
    }
    return run;
  };

  BenchmarkReport report;
  report.loss_threshold = loss_threshold;
  report.adaptive = run_one(SchedulerKind::kAdaptive, "adaptive");
  report.static_lr = run_one(SchedulerKind::kStatic, "static");
  return report;
}

}  // namespace nial
