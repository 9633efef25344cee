#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nial/data.hpp"
#include "nial/kv_config.hpp"
#include "nial/metrics.hpp"
#include "nial/model.hpp"
#include "nial/optim.hpp"

namespace nial {

enum class NormalizeMode { kNone, kMinMax, kStandardize };

NormalizeMode normalize_mode_from_string(const std::string& s);  // ConfigError on junk
Dataset apply_normalize(const Dataset& ds, NormalizeMode mode);

// Parameters of the built-in generator, used when no CSV path is configured.
struct SynthSpec {
  int classes = 4;
  Index per_class = 200;
  Index len = 64;
  double noise = 0.05;
};

struct TrainConfig {
  std::string data_csv;     // empty means synthesize
  Index expected_len = 0;   // 0 disables the length check
  NormalizeMode normalize = NormalizeMode::kMinMax;
  double train_frac = 0.8;
  SynthSpec synth;

  ModelConfig model;

  Index epochs = 30;
  Index batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  SchedulerConfig scheduler;
  bool early_stop = true;
  int early_stop_patience = 10;

  std::string out_dir = "run";

  // Reads every key the trainer understands; leftovers in `kv` are rejected
  // as unknown (ConfigError), so typos fail fast.
  static TrainConfig from_kv(const KvConfig& kv);
  void validate() const;
};

struct EpochRecord {
  Index epoch = 0;  // 1-based
  double train_loss = 0;
  double val_loss = 0;
  double val_accuracy = 0;
  double val_f1 = 0;
  double lr = 0;  // lr in effect during this epoch
  std::int64_t elapsed_ms = 0;

  static const char* csv_header();  // epoch,train_loss,val_loss,val_accuracy,val_f1,lr,elapsed_ms
  std::string csv_row() const;
};

// Injection points: a fake clock makes logs reproducible down to elapsed_ms,
// the override replaces the whole validation pass so the scheduler can be
// driven with a chosen loss sequence, and on_epoch streams progress.
struct TrainHooks {
  std::function<std::int64_t()> now_ms;
  std::function<double(Index epoch)> val_loss_override;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> records;
  std::string log_path;
  std::string best_checkpoint;   // empty when no epoch completed
  std::string final_checkpoint;
  double best_val_loss = 0;
  Index best_epoch = 0;          // 0 when no epoch completed
  bool stopped_early = false;
  double final_train_accuracy = 0;
};

TrainResult train(const TrainConfig& config, const TrainHooks& hooks = {});

struct EvalReport {
  ConfusionMatrix cm;
  double loss = 0;
  double accuracy = 0;
  double f1_score = 0;
  F1Mode f1_mode = F1Mode::kMacro;
  Index n_samples = 0;
};

// Eval-mode pass over a whole dataset; the same routine produces the
// validation metrics inside train().
EvalReport evaluate_model(NialModel& model, const Dataset& ds, Index batch_size = 32);

// Loads the checkpoint, checks it against the CSV (input length, label
// range), then runs evaluate_model.
EvalReport evaluate_checkpoint(const std::string& checkpoint_path, const std::string& data_csv,
                               NormalizeMode normalize = NormalizeMode::kMinMax,
                               Index expected_len = 0, Index batch_size = 32);

struct BenchmarkRun {
  std::string scheduler;
  std::vector<EpochRecord> records;
  Index epochs_to_threshold = -1;  // -1 means never reached
  std::int64_t wall_ms = 0;
  double final_val_loss = 0;
  double final_val_accuracy = 0;
};

// Twin trainings from identical seeds, adaptive vs static lr.
struct BenchmarkReport {
  double loss_threshold = 0;
  BenchmarkRun adaptive;
  BenchmarkRun static_lr;
};

BenchmarkReport benchmark_lr(const TrainConfig& base, double loss_threshold,
                             const TrainHooks& hooks = {});

}  // namespace nial
