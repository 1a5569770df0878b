#include "mvp/params.h"

#include <cmath>
#include <stdexcept>

namespace mvp {

void ParamSet::Add(const std::string& name, Tensor value) {
  if (!tensors_.emplace(name, std::move(value)).second) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
}

bool ParamSet::Contains(const std::string& name) const {
  return tensors_.count(name) > 0;
}

const Tensor& ParamSet::Get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw std::out_of_range("unknown parameter: " + name);
  }
  return it->second;
}

Tensor& ParamSet::Mutable(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw std::out_of_range("unknown parameter: " + name);
  }
  return it->second;
}

void ParamSet::Merge(const ParamSet& other) {
  for (const auto& [name, t] : other.tensors_) Add(name, t);
}

ParamSet ParamSet::WithPrefix(const std::string& prefix) const {
  ParamSet out;
  for (const auto& [name, t] : tensors_) {
    if (name.rfind(prefix, 0) == 0) out.Add(name, t);
  }
  return out;
}

int64_t ParamSet::NumScalars() const {
  int64_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

bool ParamSet::AllFinite() const {
  for (const auto& [name, t] : tensors_) {
    if (!t.AllFinite()) return false;
  }
  return true;
}

std::vector<std::string> ParamSet::Names() const {
  std::vector<std::string> names;
  names.reserve(tensors_.size());
  for (const auto& [name, t] : tensors_) names.push_back(name);
  return names;
}

Tensor ScaledNormal(Rng& rng, int64_t fan_in, int64_t fan_out) {
  if (fan_in <= 0 || fan_out <= 0) {
    throw std::invalid_argument("ScaledNormal dims must be positive");
  }
  Tensor w({fan_in, fan_out});
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : w.values()) v = rng.Normal() * s;
  return w;
}

Tensor ScaledNormalTable(Rng& rng, int64_t rows, int64_t cols) {
  Tensor w({rows, cols});
  const double s = 1.0 / std::sqrt(static_cast<double>(cols));
  for (double& v : w.values()) v = rng.Normal() * s;
  return w;
}

Binding::Binding(const ParamSet& params, bool trainable)
    : params_(params), trainable_(trainable) {}

Var Binding::operator()(const std::string& name) {
  auto it = leaves_.find(name);
  if (it != leaves_.end()) return it->second;
  Var leaf = Var::Leaf(params_.Get(name), trainable_);
  leaves_.emplace(name, leaf);
  return leaf;
}

ParamSet Binding::Gradients() const {
  ParamSet grads;
  for (const auto& [name, t] : params_.tensors()) {
    auto it = leaves_.find(name);
    grads.Add(name, it == leaves_.end() ? Tensor(t.shape(), 0.0)
                                        : it->second.grad());
  }
  return grads;
}

}  // namespace mvp
