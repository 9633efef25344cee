#include "nial/optim.hpp"

#include <cmath>
#include <limits>

#include "nial/errors.hpp"

namespace nial {

Adam::Adam(std::vector<std::pair<std::string, Tensor>> params, double lr, double beta1,
           double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto& [name, t] : params) {
    slots_.push_back({name, t, Array::Zero(t.size()), Array::Zero(t.size())});
  }
}

void Adam::step() {
  for (const Slot& s : slots_) {
    if (!s.param.has_grad()) {
      throw ContractError("adam: parameter '" + s.name + "' has no gradient");
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Slot& s : slots_) {
    const Array& g = s.param.grad();
    s.m = beta1_ * s.m + (1.0 - beta1_) * g;
    s.v = beta2_ * s.v + (1.0 - beta2_) * g.square();
    s.param.values() -= lr_ * (s.m / bc1) / ((s.v / bc2).sqrt() + eps_);
  }
}

SchedulerKind scheduler_kind_from_string(const std::string& s) {
  if (s == "adaptive") return SchedulerKind::kAdaptive;
  if (s == "static") return SchedulerKind::kStatic;
  throw ConfigError("scheduler kind must be 'adaptive' or 'static', got '" + s + "'");
}

std::string to_string(SchedulerKind kind) {
  return kind == SchedulerKind::kAdaptive ? "adaptive" : "static";
}

LrScheduler::LrScheduler(SchedulerConfig config, double initial_lr)
    : config_(config), lr_(initial_lr), best_(std::numeric_limits<double>::infinity()) {}

double LrScheduler::on_epoch_end(double val_loss) {
  if (config_.kind == SchedulerKind::kStatic) return lr_;
  if (!std::isfinite(val_loss)) {
    throw DivergenceError("validation loss is not finite");
  }
  if (val_loss < best_ - config_.min_delta) {
    best_ = val_loss;
    counter_ = 0;
  } else {
    ++counter_;
    if (counter_ > config_.patience) {
      lr_ = std::max(lr_ * config_.factor, config_.min_lr);
      counter_ = 0;
    }
  }
  return lr_;
}

EarlyStopping::EarlyStopping(int stop_patience, double min_delta)
    : stop_patience_(stop_patience),
      min_delta_(min_delta),
      best_(std::numeric_limits<double>::infinity()) {}

bool EarlyStopping::on_epoch_end(double val_loss) {
  if (val_loss < best_ - min_delta_) {
    best_ = val_loss;
    counter_ = 0;
  } else {
    ++counter_;
  }
  return counter_ > stop_patience_;
}

}  // namespace nial
