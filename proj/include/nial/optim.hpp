#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nial/tensor.hpp"

namespace nial {

// Adam with bias correction over a fixed parameter list. Step order follows
// the list order; state buffers mirror parameter shapes.
class Adam {
 public:
  Adam(std::vector<std::pair<std::string, Tensor>> params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  long long step_count() const { return t_; }

  // One update from the gradients currently held by the parameters.
  // ContractError naming the first parameter that has no gradient.
  void step();

 private:
  struct Slot {
    std::string name;
    Tensor param;
    Array m;
    Array v;
  };
  std::vector<Slot> slots_;
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
};

enum class SchedulerKind { kAdaptive, kStatic };

SchedulerKind scheduler_kind_from_string(const std::string& s);  // ConfigError on junk
std::string to_string(SchedulerKind kind);

struct SchedulerConfig {
  SchedulerKind kind = SchedulerKind::kAdaptive;
  double factor = 0.5;
  int patience = 3;
  double min_delta = 1e-4;
  double min_lr = 1e-6;
};

// Validation-loss-driven reduce-on-plateau (or the constant baseline).
// Improvement means val_loss < best - min_delta; after more than `patience`
// consecutive non-improvements the lr is multiplied by `factor` (clamped to
// min_lr) and the counter resets while best is retained.
class LrScheduler {
 public:
  LrScheduler(SchedulerConfig config, double initial_lr);

  // Returns the lr to use from the next epoch on. Non-finite val_loss under
  // the adaptive rule is a DivergenceError.
  double on_epoch_end(double val_loss);

  double lr() const { return lr_; }
  double best_val_loss() const { return best_; }
  int epochs_since_improvement() const { return counter_; }

 private:
  SchedulerConfig config_;
  double lr_;
  double best_;
  int counter_ = 0;
};

// Signals stop after more than stop_patience consecutive epochs without an
// improvement (same strict min_delta rule as the scheduler).
class EarlyStopping {
 public:
  EarlyStopping(int stop_patience, double min_delta);

  bool on_epoch_end(double val_loss);  // true means stop now

  int epochs_since_improvement() const { return counter_; }

 private:
  int stop_patience_;
  double min_delta_;
  double best_;
  int counter_ = 0;
};

}  // namespace nial
