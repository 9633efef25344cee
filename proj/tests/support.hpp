#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "nial/model.hpp"

namespace nial_test {

using namespace nial;

// Finite-difference check for one model parameter against the gradient that
// backward() leaves on it. `loss_fn` must be a deterministic function of the
// current parameter values (eval mode, fixed inputs).
inline double param_grad_check(NialModel& model, Tensor param,
                               const std::function<Tensor()>& loss_fn, double h = 1e-5) {
  model.zero_grad();
  {
    GradTape tape;
    tape.backward(loss_fn());
  }
  const Array analytic = param.grad();

  Array numeric(param.size());
  {
    NoGradGuard guard;
    Array& v = param.values();
    for (Index i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + h;
      const double fp = loss_fn().value();
      v[i] = saved - h;
      const double fm = loss_fn().value();
      v[i] = saved;
      numeric[i] = (fp - fm) / (2.0 * h);
    }
  }

  double worst = 0.0;
  for (Index i = 0; i < numeric.size(); ++i) {
    const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric[i])});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

// The tiny whole-model configuration used by gradient checks.
inline ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.input_len = 32;
  cfg.conv_blocks = {{4, 3, 1, 1, 2, 2}};
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.ff_dim = 16;
  cfg.n_attn_layers = 1;
  cfg.dropout_p = 0.0;
  cfg.head_hidden = 8;
  cfg.n_classes = 3;
  return cfg;
}

inline Tensor random_batch(Index b, Index len, Rng& rng) {
  Tensor x = Tensor::zeros({b, 1, len});
  for (Index i = 0; i < x.size(); ++i) x.values()[i] = rng.uniform(-1.0, 1.0);
  return x;
}

}  // namespace nial_test
