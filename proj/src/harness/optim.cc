#include "mvp/optim.h"

#include <cmath>
#include <stdexcept>

namespace mvp {

Optimizer::Optimizer(OptimizerConfig config) : config_(std::move(config)) {
  if (config_.kind != "adamw" && config_.kind != "sgd") {
    throw std::invalid_argument("unknown optimizer '" + config_.kind + "'");
  }
  if (!(config_.lr > 0.0)) throw std::invalid_argument("lr must be > 0");
}

void Optimizer::Step(ParamSet& params, const ParamSet& grads) {
  ++t_;
  const double lr = config_.lr;
  const bool adam = config_.kind == "adamw";
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (auto& [name, w] : params.tensors()) {
    if (!grads.Contains(name)) continue;
    const Tensor& g = grads.Get(name);
    if (g.size() != w.size()) {
      throw std::invalid_argument("gradient shape mismatch for " + name);
    }
    const double decay = w.shape().size() >= 2 ? config_.weight_decay : 0.0;
    double* pw = w.data();
    const double* pg = g.data();
    if (!adam) {
      for (int64_t i = 0; i < w.size(); ++i) {
        pw[i] -= lr * (pg[i] + decay * pw[i]);
      }
      continue;
    }
    auto [mit, mnew] = m_.try_emplace(name, w.shape(), 0.0);
    auto [vit, vnew] = v_.try_emplace(name, w.shape(), 0.0);
    double* m = mit->second.data();
    double* v = vit->second.data();
    for (int64_t i = 0; i < w.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * pg[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * pg[i] * pg[i];
      const double step = (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
      pw[i] -= lr * (step + decay * pw[i]);
    }
  }
}

}  // namespace mvp
