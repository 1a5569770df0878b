#include "mvp/autograd.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>

namespace mvp {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using StrideMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using CStrideMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

MapMat View(Tensor& t) { return MapMat(t.data(), t.rows(), t.cols()); }
CMapMat View(const Tensor& t) { return CMapMat(t.data(), t.rows(), t.cols()); }

void Require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

void Require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

std::string Dims(const Var& v) { return ShapeToString(v.shape()); }

}  // namespace

namespace internal {

Tensor& Node::GradBuffer() {
  if (grad.size() != value.size() || grad.shape() != value.shape()) {
    grad = Tensor(value.shape(), 0.0);
  }
  return grad;
}

}  // namespace internal

using internal::Node;

Tensor Var::grad() const {
  if (node_->grad.shape() == node_->value.shape() &&
      node_->grad.size() == node_->value.size()) {
    return node_->grad;
  }
  return Tensor(node_->value.shape(), 0.0);
}

Var Var::Leaf(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Var(std::move(node));
}

Var Var::Make(Tensor value, std::vector<Var> inputs,
              std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool any = false;
  for (const Var& in : inputs) any = any || in.requires_grad();
  if (any) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (Var& in : inputs) node->inputs.push_back(std::move(in.node_));
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

void Backward(const Var& root) {
  Backward(root, Tensor(root.shape(), 1.0));
}

void Backward(const Var& root, const Tensor& seed) {
  Node* top = root.node();
  if (!top->requires_grad) return;
  if (seed.size() != top->value.size()) {
    throw std::invalid_argument("Backward seed shape mismatch");
  }
  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(top, 0);
  seen.insert(top);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) n->grad = Tensor();
  Tensor& g = top->GradBuffer();
  std::copy(seed.values().begin(), seed.values().end(), g.data());
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() == n->value.size()) n->backward(*n);
  }
}

Var Detach(const Var& x) { return Var::Constant(x.value()); }

namespace ops {

Var MatMul(const Var& a, const Var& b) {
  Require(a.cols() == b.rows(),
          "MatMul shape mismatch " + Dims(a) + " x " + Dims(b));
  Tensor out({a.rows(), b.cols()});
  View(out).noalias() = View(a.value()) * View(b.value());
  return Var::Make(std::move(out), {a, b}, [](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    auto g = View(std::as_const(self.grad));
    if (na.requires_grad) {
      View(na.GradBuffer()).noalias() += g * View(nb.value).transpose();
    }
    if (nb.requires_grad) {
      View(nb.GradBuffer()).noalias() += View(na.value).transpose() * g;
    }
  });
}

Var MatMulTransB(const Var& a, const Var& b) {
  Require(a.cols() == b.cols(),
          "MatMulTransB shape mismatch " + Dims(a) + " x " + Dims(b) + "^T");
  Tensor out({a.rows(), b.rows()});
  View(out).noalias() = View(a.value()) * View(b.value()).transpose();
  return Var::Make(std::move(out), {a, b}, [](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    auto g = View(std::as_const(self.grad));
    if (na.requires_grad) {
      View(na.GradBuffer()).noalias() += g * View(nb.value);
    }
    if (nb.requires_grad) {
      View(nb.GradBuffer()).noalias() += g.transpose() * View(na.value);
    }
  });
}

Var Transpose(const Var& a) {
  Tensor out({a.cols(), a.rows()});
  View(out) = View(a.value()).transpose();
  return Var::Make(std::move(out), {a}, [](Node& self) {
    Node& na = *self.inputs[0];
    View(na.GradBuffer()) += View(std::as_const(self.grad)).transpose();
  });
}

Var Linear(const Var& x, const Var& w, const Var& bias) {
  Require(x.cols() == w.rows(),
          "Linear shape mismatch " + Dims(x) + " x " + Dims(w));
  const bool has_bias = bias.defined();
  if (has_bias) {
    Require(bias.value().size() == w.cols(), "Linear bias width mismatch");
  }
  Shape shape = x.shape();
  shape.back() = w.cols();
  Tensor out(shape);
  auto o = View(out);
  o.noalias() = View(x.value()) * View(w.value());
  if (has_bias) {
    o.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.value().data(),
                                                        w.cols());
  }
  std::vector<Var> inputs = {x, w};
  if (has_bias) inputs.push_back(bias);
  return Var::Make(std::move(out), std::move(inputs), [](Node& self) {
    Node& nx = *self.inputs[0];
    Node& nw = *self.inputs[1];
    auto g = View(std::as_const(self.grad));
    if (nx.requires_grad) {
      View(nx.GradBuffer()).noalias() += g * View(nw.value).transpose();
    }
    if (nw.requires_grad) {
      View(nw.GradBuffer()).noalias() += View(nx.value).transpose() * g;
    }
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      Tensor& gb = self.inputs[2]->GradBuffer();
      Eigen::Map<Eigen::RowVectorXd>(gb.data(), gb.size()) +=
          g.colwise().sum();
    }
  });
}

namespace {

template <typename Fwd, typename BwdA, typename BwdB>
Var Elementwise(const Var& a, const Var& b, Fwd fwd, BwdA da, BwdB db,
                const char* name) {
  Require(a.value().size() == b.value().size(),
          std::string(name) + " size mismatch " + Dims(a) + " vs " + Dims(b));
  Tensor out(a.shape());
  const double* pa = a.value().data();
  const double* pb = b.value().data();
  for (int64_t i = 0; i < out.size(); ++i) out[i] = fwd(pa[i], pb[i]);
  return Var::Make(std::move(out), {a, b}, [da, db](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const double* g = self.grad.data();
    const int64_t n = self.value.size();
    if (na.requires_grad) {
      double* ga = na.GradBuffer().data();
      for (int64_t i = 0; i < n; ++i) {
        ga[i] += g[i] * da(na.value[i], nb.value[i]);
      }
    }
    if (nb.requires_grad) {
      double* gb = nb.GradBuffer().data();
      for (int64_t i = 0; i < n; ++i) {
        gb[i] += g[i] * db(na.value[i], nb.value[i]);
      }
    }
  });
}

template <typename Fwd, typename Deriv>
Var Unary(const Var& x, Fwd fwd, Deriv deriv) {
  Tensor out(x.shape());
  const double* px = x.value().data();
  for (int64_t i = 0; i < out.size(); ++i) out[i] = fwd(px[i]);
  return Var::Make(std::move(out), {x}, [deriv](Node& self) {
    Node& nx = *self.inputs[0];
    double* gx = nx.GradBuffer().data();
    const double* g = self.grad.data();
    for (int64_t i = 0; i < self.value.size(); ++i) {
      gx[i] += g[i] * deriv(nx.value[i], self.value[i]);
    }
  });
}

}  // namespace

Var Add(const Var& a, const Var& b) {
  return Elementwise(
      a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; },
      "Add");
}

Var Sub(const Var& a, const Var& b) {
  return Elementwise(
      a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; },
      "Sub");
}

Var Mul(const Var& a, const Var& b) {
  return Elementwise(
      a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; },
      "Mul");
}

Var Scale(const Var& a, double s) {
  return Unary(
      a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var AddTiled(const Var& x, const Var& p) {
  const int64_t block = p.rows();
  Require(x.cols() == p.cols() && block > 0 && x.rows() % block == 0,
          "AddTiled shape mismatch " + Dims(x) + " + " + Dims(p));
  Tensor out = x.value();
  const int64_t tiles = x.rows() / block;
  const int64_t span = p.value().size();
  for (int64_t t = 0; t < tiles; ++t) {
    double* dst = out.data() + t * span;
    for (int64_t i = 0; i < span; ++i) dst[i] += p.value()[i];
  }
  return Var::Make(std::move(out), {x, p}, [tiles, span](Node& self) {
    Node& nx = *self.inputs[0];
    Node& np = *self.inputs[1];
    if (nx.requires_grad) {
      double* gx = nx.GradBuffer().data();
      for (int64_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
    }
    if (np.requires_grad) {
      double* gp = np.GradBuffer().data();
      for (int64_t t = 0; t < tiles; ++t) {
        const double* src = self.grad.data() + t * span;
        for (int64_t i = 0; i < span; ++i) gp[i] += src[i];
      }
    }
  });
}

Var Relu(const Var& x) {
  return Unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Var Gelu(const Var& x) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  return Unary(
      x,
      [](double v) {
        return 0.5 * v * (1.0 + std::tanh(kC * (v + kA * v * v * v)));
      },
      [](double v, double) {
        const double t = std::tanh(kC * (v + kA * v * v * v));
        return 0.5 * (1.0 + t) +
               0.5 * v * (1.0 - t * t) * kC * (1.0 + 3.0 * kA * v * v);
      });
}

Var Sigmoid(const Var& x) {
  return Unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var LayerNorm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const int64_t r = x.rows();
  const int64_t c = x.cols();
  Require(gamma.value().size() == c && beta.value().size() == c,
          "LayerNorm parameter width mismatch for " + Dims(x));
  Tensor out(x.shape());
  auto xhat = std::make_shared<std::vector<double>>(x.value().size());
  auto inv_std = std::make_shared<std::vector<double>>(r);
  const double* g = gamma.value().data();
  const double* b = beta.value().data();
  for (int64_t i = 0; i < r; ++i) {
    const double* row = x.value().data() + i * c;
    double mean = 0.0;
    for (int64_t j = 0; j < c; ++j) mean += row[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (int64_t j = 0; j < c; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (int64_t j = 0; j < c; ++j) {
      const double h = (row[j] - mean) * is;
      (*xhat)[i * c + j] = h;
      out[i * c + j] = h * g[j] + b[j];
    }
  }
  return Var::Make(
      std::move(out), {x, gamma, beta}, [xhat, inv_std, r, c](Node& self) {
        Node& nx = *self.inputs[0];
        Node& ng = *self.inputs[1];
        Node& nb = *self.inputs[2];
        const double* dy = self.grad.data();
        if (ng.requires_grad) {
          double* dg = ng.GradBuffer().data();
          for (int64_t i = 0; i < r * c; ++i) dg[i % c] += dy[i] * (*xhat)[i];
        }
        if (nb.requires_grad) {
          double* db = nb.GradBuffer().data();
          for (int64_t i = 0; i < r * c; ++i) db[i % c] += dy[i];
        }
        if (nx.requires_grad) {
          double* dx = nx.GradBuffer().data();
          const double* gm = ng.value.data();
          for (int64_t i = 0; i < r; ++i) {
            double m1 = 0.0;
            double m2 = 0.0;
            for (int64_t j = 0; j < c; ++j) {
              const double dh = dy[i * c + j] * gm[j];
              m1 += dh;
              m2 += dh * (*xhat)[i * c + j];
            }
            m1 /= static_cast<double>(c);
            m2 /= static_cast<double>(c);
            for (int64_t j = 0; j < c; ++j) {
              const double dh = dy[i * c + j] * gm[j];
              dx[i * c + j] +=
                  (*inv_std)[i] * (dh - m1 - (*xhat)[i * c + j] * m2);
            }
          }
        }
      });
}

Var L2NormalizeRows(const Var& x, double eps) {
  const int64_t r = x.rows();
  const int64_t c = x.cols();
  Tensor out(x.shape());
  auto norms = std::make_shared<std::vector<double>>(r);
  for (int64_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < c; ++j) s += x.value()[i * c + j] * x.value()[i * c + j];
    const double n = std::max(std::sqrt(s), eps);
    (*norms)[i] = n;
    for (int64_t j = 0; j < c; ++j) out[i * c + j] = x.value()[i * c + j] / n;
  }
  return Var::Make(std::move(out), {x}, [norms, r, c](Node& self) {
    Node& nx = *self.inputs[0];
    double* dx = nx.GradBuffer().data();
    for (int64_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (int64_t j = 0; j < c; ++j) {
        dot += self.grad[i * c + j] * self.value[i * c + j];
      }
      for (int64_t j = 0; j < c; ++j) {
        dx[i * c + j] +=
            (self.grad[i * c + j] - self.value[i * c + j] * dot) / (*norms)[i];
      }
    }
  });
}

Var MultiHeadAttention(const Var& q, const Var& k, const Var& v,
                       int64_t seq_len, int heads, bool causal) {
  const int64_t d = q.cols();
  Require(k.cols() == d && v.cols() == d && q.rows() == k.rows() &&
              q.rows() == v.rows(),
          "attention q/k/v shape mismatch " + Dims(q) + " " + Dims(k) + " " +
              Dims(v));
  Require(heads > 0 && d % heads == 0,
          "attention width " + std::to_string(d) + " not divisible by " +
              std::to_string(heads) + " heads");
  Require(seq_len > 0 && q.rows() % seq_len == 0,
          "attention rows not a multiple of sequence length");
  const int64_t groups = q.rows() / seq_len;
  const int64_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const int64_t t = seq_len;
  auto probs =
      std::make_shared<Buffer>(groups * heads * t * t, 0.0);
  Tensor out({q.rows(), d});
  RowMat s(t, t);
  for (int64_t g = 0; g < groups; ++g) {
    for (int h = 0; h < heads; ++h) {
      const int64_t off = g * t * d + h * dh;
      CStrideMap qg(q.value().data() + off, t, dh, Eigen::OuterStride<>(d));
      CStrideMap kg(k.value().data() + off, t, dh, Eigen::OuterStride<>(d));
      CStrideMap vg(v.value().data() + off, t, dh, Eigen::OuterStride<>(d));
      StrideMap og(out.data() + off, t, dh, Eigen::OuterStride<>(d));
      s.noalias() = (qg * kg.transpose()) * scale;
      MapMat p(probs->data() + (g * heads + h) * t * t, t, t);
      for (int64_t i = 0; i < t; ++i) {
        const int64_t allowed = causal ? i + 1 : t;
        double mx = -std::numeric_limits<double>::infinity();
        for (int64_t j = 0; j < allowed; ++j) mx = std::max(mx, s(i, j));
        double z = 0.0;
        for (int64_t j = 0; j < allowed; ++j) {
          p(i, j) = std::exp(s(i, j) - mx);
          z += p(i, j);
        }
        for (int64_t j = 0; j < allowed; ++j) p(i, j) /= z;
      }
      og.noalias() = p * vg;
    }
  }
  return Var::Make(
      std::move(out), {q, k, v},
      [probs, groups, heads, t, d, dh, scale](Node& self) {
        Node& nq = *self.inputs[0];
        Node& nk = *self.inputs[1];
        Node& nv = *self.inputs[2];
        double* gq = nq.requires_grad ? nq.GradBuffer().data() : nullptr;
        double* gk = nk.requires_grad ? nk.GradBuffer().data() : nullptr;
        double* gv = nv.requires_grad ? nv.GradBuffer().data() : nullptr;
        RowMat dp(t, t);
        for (int64_t g = 0; g < groups; ++g) {
          for (int h = 0; h < heads; ++h) {
            const int64_t off = g * t * d + h * dh;
            const Eigen::OuterStride<> st(d);
            CStrideMap qg(nq.value.data() + off, t, dh, st);
            CStrideMap kg(nk.value.data() + off, t, dh, st);
            CStrideMap vg(nv.value.data() + off, t, dh, st);
            CStrideMap go(self.grad.data() + off, t, dh, st);
            CMapMat p(probs->data() + (g * heads + h) * t * t, t, t);
            if (gv) StrideMap(gv + off, t, dh, st).noalias() += p.transpose() * go;
            if (!gq && !gk) continue;
            dp.noalias() = go * vg.transpose();
            for (int64_t i = 0; i < t; ++i) {
              double dot = 0.0;
              for (int64_t j = 0; j < t; ++j) dot += dp(i, j) * p(i, j);
              for (int64_t j = 0; j < t; ++j) {
                dp(i, j) = p(i, j) * (dp(i, j) - dot) * scale;
              }
            }
            if (gq) StrideMap(gq + off, t, dh, st).noalias() += dp * kg;
            if (gk) {
              StrideMap(gk + off, t, dh, st).noalias() += dp.transpose() * qg;
            }
          }
        }
      });
}

Var Reshape(const Var& x, Shape shape) {
  Tensor out = x.value().Reshaped(std::move(shape));
  return Var::Make(std::move(out), {x}, [](Node& self) {
    Node& nx = *self.inputs[0];
    double* gx = nx.GradBuffer().data();
    for (int64_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
  });
}

Var GatherRows(const Var& x, const std::vector<int64_t>& index) {
  const int64_t c = x.cols();
  const int64_t r = x.rows();
  Tensor out({static_cast<int64_t>(index.size()), c});
  for (size_t i = 0; i < index.size(); ++i) {
    Require(index[i] >= 0 && index[i] < r, "GatherRows index out of range");
    std::copy_n(x.value().data() + index[i] * c, c, out.data() + i * c);
  }
  return Var::Make(std::move(out), {x}, [index, c](Node& self) {
    Node& nx = *self.inputs[0];
    double* gx = nx.GradBuffer().data();
    for (size_t i = 0; i < index.size(); ++i) {
      const double* src = self.grad.data() + i * c;
      double* dst = gx + index[i] * c;
      for (int64_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

Var RowMean(const Var& x, const std::vector<std::vector<int64_t>>& groups) {
  const int64_t c = x.cols();
  const int64_t r = x.rows();
  Tensor out({static_cast<int64_t>(groups.size()), c});
  for (size_t i = 0; i < groups.size(); ++i) {
    Require(!groups[i].empty(), "RowMean over an empty group");
    double* dst = out.data() + i * c;
    for (int64_t src : groups[i]) {
      Require(src >= 0 && src < r, "RowMean index out of range");
      const double* row = x.value().data() + src * c;
      for (int64_t j = 0; j < c; ++j) dst[j] += row[j];
    }
    const double inv = 1.0 / static_cast<double>(groups[i].size());
    for (int64_t j = 0; j < c; ++j) dst[j] *= inv;
  }
  return Var::Make(std::move(out), {x}, [groups, c](Node& self) {
    Node& nx = *self.inputs[0];
    double* gx = nx.GradBuffer().data();
    for (size_t i = 0; i < groups.size(); ++i) {
      const double inv = 1.0 / static_cast<double>(groups[i].size());
      const double* src = self.grad.data() + i * c;
      for (int64_t row : groups[i]) {
        double* dst = gx + row * c;
        for (int64_t j = 0; j < c; ++j) dst[j] += src[j] * inv;
      }
    }
  });
}

Var GatherElements(const Var& x, const std::vector<int64_t>& index,
                   Shape shape) {
  Require(NumElements(shape) == static_cast<int64_t>(index.size()),
          "GatherElements shape/index mismatch");
  Tensor out(std::move(shape));
  const int64_t n = x.value().size();
  for (size_t i = 0; i < index.size(); ++i) {
    Require(index[i] >= 0 && index[i] < n, "GatherElements out of range");
    out[i] = x.value()[index[i]];
  }
  return Var::Make(std::move(out), {x}, [index](Node& self) {
    Node& nx = *self.inputs[0];
    double* gx = nx.GradBuffer().data();
    for (size_t i = 0; i < index.size(); ++i) gx[index[i]] += self.grad[i];
  });
}

Var ConcatRows(const std::vector<Var>& parts) {
  Require(!parts.empty(), "ConcatRows of zero parts");
  const int64_t c = parts.front().cols();
  std::vector<Tensor> values;
  values.reserve(parts.size());
  for (const Var& p : parts) {
    Require(p.cols() == c, "ConcatRows column mismatch");
    values.push_back(p.value());
  }
  Tensor out = mvp::ConcatRows(values);
  return Var::Make(std::move(out), parts, [](Node& self) {
    int64_t offset = 0;
    for (auto& in : self.inputs) {
      const int64_t n = in->value.size();
      if (in->requires_grad) {
        double* g = in->GradBuffer().data();
        for (int64_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
      }
      offset += n;
    }
  });
}

Var SliceRows(const Var& x, int64_t begin, int64_t end) {
  Tensor out = x.value().RowSlice(begin, end);
  const int64_t c = x.cols();
  return Var::Make(std::move(out), {x}, [begin, c](Node& self) {
    Node& nx = *self.inputs[0];
    double* gx = nx.GradBuffer().data() + begin * c;
    for (int64_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
  });
}

Var Sum(const Var& x) {
  Tensor out(Shape{}, x.value().Sum());
  return Var::Make(std::move(out), {x}, [](Node& self) {
    Node& nx = *self.inputs[0];
    double* gx = nx.GradBuffer().data();
    for (int64_t i = 0; i < nx.value.size(); ++i) gx[i] += self.grad[0];
  });
}

Var Mean(const Var& x) {
  return Scale(Sum(x), 1.0 / static_cast<double>(x.value().size()));
}

Var SoftmaxCrossEntropy(const Var& logits,
                        const std::vector<int64_t>& target) {
  const int64_t r = logits.rows();
  const int64_t c = logits.cols();
  Require(static_cast<int64_t>(target.size()) == r,
          "SoftmaxCrossEntropy target count mismatch");
  auto probs = std::make_shared<std::vector<double>>(r * c);
  double total = 0.0;
  for (int64_t i = 0; i < r; ++i) {
    Require(target[i] >= 0 && target[i] < c, "target class out of range");
    const double* row = logits.value().data() + i * c;
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t j = 0; j < c; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (int64_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (int64_t j = 0; j < c; ++j) (*probs)[i * c + j] = std::exp(row[j] - lse);
    total += lse - row[target[i]];
  }
  return Var::Make(Tensor(Shape{}, total), {logits},
                   [probs, target, r, c](Node& self) {
                     Node& nl = *self.inputs[0];
                     double* g = nl.GradBuffer().data();
                     const double s = self.grad[0];
                     for (int64_t i = 0; i < r; ++i) {
                       for (int64_t j = 0; j < c; ++j) {
                         g[i * c + j] += s * (*probs)[i * c + j];
                       }
                       g[i * c + target[i]] -= s;
                     }
                   });
}

Var BinaryCrossEntropy(const Var& p, const Tensor& y, double clamp,
                       int64_t* clamped) {
  Require(p.value().size() == y.size(), "BinaryCrossEntropy size mismatch");
  const int64_t n = y.size();
  auto pc = std::make_shared<std::vector<double>>(n);
  auto active = std::make_shared<std::vector<char>>(n, 1);
  int64_t count = 0;
  double total = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double v = p.value()[i];
    if (v < clamp || v > 1.0 - clamp) {
      v = std::clamp(v, clamp, 1.0 - clamp);
      (*active)[i] = 0;
      ++count;
    }
    (*pc)[i] = v;
    total -= y[i] * std::log(v) + (1.0 - y[i]) * std::log(1.0 - v);
  }
  if (clamped) *clamped = count;
  return Var::Make(Tensor(Shape{}, total), {p}, [pc, active, y](Node& self) {
    Node& np = *self.inputs[0];
    double* g = np.GradBuffer().data();
    for (int64_t i = 0; i < y.size(); ++i) {
      if (!(*active)[i]) continue;
      const double v = (*pc)[i];
      g[i] += self.grad[0] * (-(y[i] / v) + (1.0 - y[i]) / (1.0 - v));
    }
  });
}

}  // namespace ops
}  // namespace mvp
