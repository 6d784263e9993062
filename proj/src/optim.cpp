#include <cmath>

#include "hrsar/train.hpp"

namespace hrsar {

AdamState make_adam(const WeightStore& w, double lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  AdamState s;
  s.lr = lr;
  s.m = w.cast<double>().zeros_like();
  s.v = s.m.zeros_like();
  return s;
}

void adam_step(AdamState& state, WeightStore& w, const GradStore<float>& g) {
  g.check_congruent(w);
  state.m.template cast<float>().check_congruent(w);
  for (const auto& t : g)
    for (float v : t.values)
      if (!std::isfinite(v)) throw NumericError("non-finite gradient in '" + t.name + "'");

  ++state.step;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < w.size(); ++k) {
    auto& p = w[k].values;
    const auto& gk = g[k].values;
    auto& m = state.m[k].values;
    auto& v = state.v[k].values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = gk[i];
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] = static_cast<float>(p[i] - state.lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

bool plateau_update(PlateauState& state, double metric) {
  if (!std::isfinite(metric)) throw NumericError("plateau schedule received a non-finite metric");
  if (!state.has_best || metric < state.best * (1.0 - state.threshold)) {
    state.best = metric;
    state.has_best = true;
    state.bad_epochs = 0;
    return false;
  }
  if (++state.bad_epochs > state.patience) {
    state.lr *= state.factor;
    state.bad_epochs = 0;
    return true;
  }
  return false;
}

}  // namespace hrsar
