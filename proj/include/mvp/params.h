#ifndef MVP_PARAMS_H_
#define MVP_PARAMS_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mvp/autograd.h"
#include "mvp/rng.h"
#include "mvp/tensor.h"

namespace mvp {

// Named parameter tensors. Ordered by name so iteration (serialization,
// optimizer updates, hashing) is deterministic.
class ParamSet {
 public:
  void Add(const std::string& name, Tensor value);
  bool Contains(const std::string& name) const;
  const Tensor& Get(const std::string& name) const;
  Tensor& Mutable(const std::string& name);

  // Inserts every tensor of `other`; names must not collide.
  void Merge(const ParamSet& other);
  // Subset whose names start with `prefix`.
  ParamSet WithPrefix(const std::string& prefix) const;

  int64_t NumScalars() const;
  bool AllFinite() const;
  std::vector<std::string> Names() const;

  const std::map<std::string, Tensor>& tensors() const { return tensors_; }
  std::map<std::string, Tensor>& tensors() { return tensors_; }

 private:
  std::map<std::string, Tensor> tensors_;
};

// Weight matrix [fan_in, fan_out] ~ N(0, 1/fan_in).
Tensor ScaledNormal(Rng& rng, int64_t fan_in, int64_t fan_out);
// Positional table [rows, cols] ~ N(0, 1/cols).
Tensor ScaledNormalTable(Rng& rng, int64_t rows, int64_t cols);

// Binds a ParamSet into one computation graph. Each parameter becomes a
// single leaf Var the first time it is requested, so repeated uses share one
// gradient accumulator.
class Binding {
 public:
  Binding(const ParamSet& params, bool trainable);

  Var operator()(const std::string& name);
  bool trainable() const { return trainable_; }

  // Gradients for every bound parameter after Backward(); parameters that
  // were never touched come back as zeros.
  ParamSet Gradients() const;

 private:
  const ParamSet& params_;
  bool trainable_;
  std::map<std::string, Var> leaves_;
};

}  // namespace mvp

#endif  // MVP_PARAMS_H_
