#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nial/train.hpp"

namespace {

using namespace nial;

void apply_overrides(KvConfig& kv, const std::vector<std::string>& overrides) {
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override '" + item + "' wants key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv.set(trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
  }
}

TrainConfig config_from_args(const std::string& path, const std::vector<std::string>& overrides) {
  KvConfig kv = KvConfig::parse_file(path);
  apply_overrides(kv, overrides);
  return TrainConfig::from_kv(kv);
}

void print_epoch(const EpochRecord& r) {
  std::cout << "epoch " << r.epoch << "  train_loss " << format_double(r.train_loss)
            << "  val_loss " << format_double(r.val_loss) << "  val_acc "
            << format_double(r.val_accuracy) << "  val_f1 " << format_double(r.val_f1)
            << "  lr " << format_double(r.lr) << "  " << r.elapsed_ms << " ms\n";
}

int run_train(const std::string& config_path, const std::vector<std::string>& overrides) {
  const TrainConfig cfg = config_from_args(config_path, overrides);
  TrainHooks hooks;
  hooks.on_epoch = print_epoch;
  const TrainResult res = train(cfg, hooks);

  std::cout << "completed epochs: " << res.records.size()
            << (res.stopped_early ? " (early stop)" : "") << '\n';
  if (res.best_epoch > 0) {
    std::cout << "best val_loss: " << format_double(res.best_val_loss) << " at epoch "
              << res.best_epoch << '\n'
              << "best checkpoint: " << res.best_checkpoint << '\n';
  }
  std::cout << "final train accuracy: " << format_double(res.final_train_accuracy) << '\n'
            << "final checkpoint: " << res.final_checkpoint << '\n'
            << "log: " << res.log_path << '\n';
  return 0;
}

int run_evaluate(const std::string& checkpoint, const std::string& data_csv,
                 const std::string& normalize, long long expected_len) {
  const EvalReport r = evaluate_checkpoint(checkpoint, data_csv,
                                           normalize_mode_from_string(normalize),
                                           static_cast<Index>(expected_len));
  std::cout << "samples: " << r.n_samples << '\n'
            << "loss: " << format_double(r.loss) << '\n'
            << "accuracy: " << format_double(r.accuracy) << '\n'
            << (r.f1_mode == F1Mode::kBinary ? "f1 (binary): " : "f1 (macro): ")
            << format_double(r.f1_score) << '\n'
            << "confusion matrix (rows true, cols predicted):\n"
            << render(r.cm);
  return 0;
}

void print_benchmark_run(const BenchmarkRun& run) {
  std::cout << run.scheduler << ":\n";
  if (run.epochs_to_threshold > 0) {
    std::cout << "  epochs to threshold: " << run.epochs_to_threshold << '\n';
  } else {
    std::cout << "  epochs to threshold: not reached\n";
  }
  std::cout << "  wall time: " << run.wall_ms << " ms\n"
            << "  final val_loss: " << format_double(run.final_val_loss) << '\n'
            << "  final val_accuracy: " << format_double(run.final_val_accuracy) << '\n'
            << "  lr trajectory:";
  for (const EpochRecord& rec : run.records) std::cout << ' ' << format_double(rec.lr);
  std::cout << '\n';
}

int run_benchmark(const std::string& config_path, const std::vector<std::string>& overrides,
                  double threshold) {
  const TrainConfig cfg = config_from_args(config_path, overrides);
  const BenchmarkReport rep = benchmark_lr(cfg, threshold);

  std::cout << "loss threshold: " << format_double(rep.loss_threshold) << '\n';
  print_benchmark_run(rep.adaptive);
  print_benchmark_run(rep.static_lr);
  if (rep.adaptive.epochs_to_threshold > 0 && rep.static_lr.epochs_to_threshold > 0) {
    const double ratio = static_cast<double>(rep.adaptive.epochs_to_threshold) /
                         static_cast<double>(rep.static_lr.epochs_to_threshold);
    std::cout << "epoch ratio (adaptive/static): " << format_double(ratio) << '\n';
  } else {
    std::cout << "epoch ratio (adaptive/static): n/a\n";
  }
  return 0;
}

int run_gen_synth(long long classes, long long per_class, long long len, double noise,
                  std::uint64_t seed, const std::string& out) {
  const Dataset ds = synth_dataset(static_cast<Index>(per_class), static_cast<Index>(len),
                                   static_cast<int>(classes), noise, seed);
  write_csv(ds, out);
  std::cout << "wrote " << ds.rows() << " rows of length " << ds.cols() << " ("
            << ds.n_classes << " classes) to " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NIAL heartbeat classifier: CNN + self-attention + adaptive LR"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  CLI::App* cmd_train = app.add_subcommand("train", "Train a model from a config file");
  cmd_train->add_option("--config", config_path, "key = value config file")->required();
  cmd_train->add_option("--set", overrides, "override a config key (key=value, repeatable)");

  std::string checkpoint, data_csv;
  std::string normalize = "minmax";
  long long expected_len = 0;
  CLI::App* cmd_eval = app.add_subcommand("evaluate", "Score a checkpoint on a CSV dataset");
  cmd_eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  cmd_eval->add_option("--data", data_csv, "dataset CSV")->required();
  cmd_eval->add_option("--normalize", normalize, "none|minmax|standardize (default minmax)");
  cmd_eval->add_option("--expected-len", expected_len, "required row length, 0 = any");

  double threshold = 0.0;
  CLI::App* cmd_bench =
      app.add_subcommand("benchmark-lr", "Adaptive vs static scheduler, same seed");
  cmd_bench->add_option("--config", config_path, "key = value config file")->required();
  cmd_bench->add_option("--loss-threshold", threshold, "target validation loss")->required();
  cmd_bench->add_option("--set", overrides, "override a config key (key=value, repeatable)");

  long long classes = 0, per_class = 0, len = 0;
  double noise = 0.0;
  std::uint64_t seed = 1;
  std::string out_path;
  CLI::App* cmd_gen = app.add_subcommand("gen-synth", "Write a synthetic dataset CSV");
  cmd_gen->add_option("--classes", classes, "number of classes (>= 2)")->required();
  cmd_gen->add_option("--per-class", per_class, "samples per class")->required();
  cmd_gen->add_option("--len", len, "samples per row")->required();
  cmd_gen->add_option("--noise", noise, "Gaussian noise sigma")->required();
  cmd_gen->add_option("--seed", seed, "RNG seed")->required();
  cmd_gen->add_option("--out", out_path, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << '\n';
    return 1;
  }

  try {
    if (cmd_train->parsed()) return run_train(config_path, overrides);
    if (cmd_eval->parsed()) return run_evaluate(checkpoint, data_csv, normalize, expected_len);
    if (cmd_bench->parsed()) return run_benchmark(config_path, overrides, threshold);
    if (cmd_gen->parsed()) {
      return run_gen_synth(classes, per_class, len, noise, seed, out_path);
    }
  } catch (const nial::NialError& e) {
    std::cerr << "error: " << e.category() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
