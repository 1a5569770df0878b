#ifndef MVP_GRADCHECK_H_
#define MVP_GRADCHECK_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mvp/autograd.h"
#include "mvp/params.h"

namespace mvp {

inline constexpr double kGradcheckFloor = 1e-6;

struct GradcheckResult {
  std::string op;
  double max_rel_error = 0.0;
  int coordinates = 0;
  std::string worst;  // "<tensor>[<index>]" of the largest error
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::vector<std::string> nonfinite;
};

// Builds the checked function from bound inputs. Non-scalar outputs are
// reduced with a fixed random cotangent.
using GraphFn = std::function<Var(Binding&)>;

// Compares reverse-mode gradients with central differences (step eps) on a
// random subset of at least `min_coords` coordinates (all when fewer exist).
// Relative error = |a - fd| / max(|a|, |fd|, floor). The floor (1e-6) keeps
// gradients that are exactly zero in theory, such as attention key biases
// under the softmax shift invariance, from dividing round-off by round-off.
GradcheckResult CheckGradients(const std::string& name, const ParamSet& inputs,
                               const GraphFn& fn, uint64_t seed, double eps,
                               int min_coords = 32);

// Names accepted by FiniteDiffGradcheck.
std::vector<std::string> GradcheckOps();

// Runs the check for one named operation at a random point drawn from
// `seed`.
GradcheckResult FiniteDiffGradcheck(const std::string& op, uint64_t seed,
                                    double eps = 1e-5);

}  // namespace mvp

#endif  // MVP_GRADCHECK_H_
