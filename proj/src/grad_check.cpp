#include "nial/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace nial {

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  Tensor probe = x.clone();
  probe.set_requires_grad(true);

  {
    GradTape tape;
    Tensor loss = f(probe);
    tape.backward(loss);
  }
  const Array analytic = probe.grad();

  Array numeric(probe.size());
  {
    NoGradGuard guard;
    Array& v = probe.values();
    for (Index i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + h;
      const double fp = f(probe).value();
      v[i] = saved - h;
      const double fm = f(probe).value();
      v[i] = saved;
      numeric[i] = (fp - fm) / (2.0 * h);
    }
  }

  double worst = 0.0;
  for (Index i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric[i])});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace nial
