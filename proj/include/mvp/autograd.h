#ifndef MVP_AUTOGRAD_H_
#define MVP_AUTOGRAD_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "mvp/tensor.h"

namespace mvp {

namespace internal {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows in
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this->grad and accumulates into inputs' grads.
  std::function<void(Node&)> backward;

  Tensor& GradBuffer();
};

}  // namespace internal

// Handle to a value in a dynamically built computation graph. Values are
// immutable once created; gradients are populated by Backward().
class Var {
 public:
  Var() = default;

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  int64_t rows() const { return node_->value.rows(); }
  int64_t cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return node_ != nullptr; }

  // Gradient of the last Backward() root with respect to this value; zeros
  // when nothing reached it.
  Tensor grad() const;

  static Var Leaf(Tensor value, bool requires_grad);
  static Var Constant(Tensor value) { return Leaf(std::move(value), false); }

  // Internal: builds an op node. `backward` is only kept when some input
  // requires a gradient.
  static Var Make(Tensor value, std::vector<Var> inputs,
                  std::function<void(internal::Node&)> backward);

  internal::Node* node() const { return node_.get(); }

 private:
  explicit Var(std::shared_ptr<internal::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<internal::Node> node_;
};

// Seeds d(root)/d(root) = 1 for a scalar root (or `seed` for any shape) and
// propagates through the graph in reverse topological order.
void Backward(const Var& root);
void Backward(const Var& root, const Tensor& seed);

// A copy of the value cut off from the graph.
Var Detach(const Var& x);

namespace ops {

// Matrix products on the 2-D row views.
Var MatMul(const Var& a, const Var& b);         // a[m,k] b[k,n]
Var MatMulTransB(const Var& a, const Var& b);   // a[m,k] b[n,k]^T
Var Transpose(const Var& a);
// x[m,k] w[k,n] + bias[n]; bias may be undefined.
Var Linear(const Var& x, const Var& w, const Var& bias);

Var Add(const Var& a, const Var& b);
Var Sub(const Var& a, const Var& b);
Var Mul(const Var& a, const Var& b);
Var Scale(const Var& a, double s);
// Adds p[r,c] to every consecutive block of r rows of x.
Var AddTiled(const Var& x, const Var& p);

Var Relu(const Var& x);
Var Gelu(const Var& x);
Var Sigmoid(const Var& x);

// Per-row layer normalization with learned gain/shift of width cols.
Var LayerNorm(const Var& x, const Var& gamma, const Var& beta,
              double eps = 1e-5);
Var L2NormalizeRows(const Var& x, double eps = 1e-12);

// Scaled dot-product attention over independent sequences: rows of q/k/v
// are grouped into consecutive blocks of `seq_len`, each block attending only
// within itself. Columns split into `heads` equal slices with scale
// 1/sqrt(cols/heads). With `causal`, position t attends to positions <= t.
Var MultiHeadAttention(const Var& q, const Var& k, const Var& v,
                       int64_t seq_len, int heads, bool causal);

Var Reshape(const Var& x, Shape shape);
Var GatherRows(const Var& x, const std::vector<int64_t>& index);
// Output row i = mean of x rows listed in groups[i].
Var RowMean(const Var& x, const std::vector<std::vector<int64_t>>& groups);
// Output element i = x element index[i]; result has `shape`.
Var GatherElements(const Var& x, const std::vector<int64_t>& index,
                   Shape shape);
Var ConcatRows(const std::vector<Var>& parts);
Var SliceRows(const Var& x, int64_t begin, int64_t end);

Var Sum(const Var& x);
Var Mean(const Var& x);

// Sum over rows of -log softmax(logits[i])[target[i]].
Var SoftmaxCrossEntropy(const Var& logits, const std::vector<int64_t>& target);
// Sum of -(y log p + (1-y) log(1-p)) with p clamped to [clamp, 1-clamp];
// clamped entries pass no gradient. `clamped` receives the clamp count.
Var BinaryCrossEntropy(const Var& p, const Tensor& y, double clamp,
                       int64_t* clamped = nullptr);

}  // namespace ops
}  // namespace mvp

#endif  // MVP_AUTOGRAD_H_
