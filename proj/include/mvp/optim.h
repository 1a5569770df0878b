#ifndef MVP_OPTIM_H_
#define MVP_OPTIM_H_

#include <map>
#include <string>

#include "mvp/config.h"
#include "mvp/params.h"

namespace mvp {

// AdamW (decoupled weight decay) or plain SGD with weight decay. Decay
// applies to matrices only; biases, gains and 1-D tables are not decayed.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  // Updates every tensor of `params` that has an entry in `grads`.
  void Step(ParamSet& params, const ParamSet& grads);
  int64_t steps_taken() const { return t_; }

 private:
  OptimizerConfig config_;
  int64_t t_ = 0;
  std::map<std::string, Tensor> m_;
  std::map<std::string, Tensor> v_;
};

}  // namespace mvp

#endif  // MVP_OPTIM_H_
