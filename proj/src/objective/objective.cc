#include "mvp/objective.h"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mvp {

namespace {

std::string HeadPrefix(int k) { return "heads." + std::to_string(k) + "."; }

std::vector<int64_t> Diagonal(int64_t n) {
  std::vector<int64_t> d(n);
  std::iota(d.begin(), d.end(), 0);
  return d;
}

Var Logits(const Var& a, const Var& b, double tau, bool normalize) {
  Var x = normalize ? ops::L2NormalizeRows(a) : a;
  Var y = normalize ? ops::L2NormalizeRows(b) : b;
  return ops::Scale(ops::MatMulTransB(x, y), 1.0 / tau);
}

// -log softmax(row i)[i] for every row.
std::vector<double> PerRowLoss(const Tensor& logits) {
  const int64_t n = logits.rows();
  const int64_t m = logits.cols();
  std::vector<double> out(n);
  for (int64_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t j = 0; j < m; ++j) mx = std::max(mx, logits.at(i, j));
    double z = 0.0;
    for (int64_t j = 0; j < m; ++j) z += std::exp(logits.at(i, j) - mx);
    out[i] = mx + std::log(z) - logits.at(i, i);
  }
  return out;
}

}  // namespace

namespace internal {

void CheckContrastiveInputs(const Var& a, const Var& b, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("contrastive inputs differ in shape: " +
                                ShapeToString(a.shape()) + " vs " +
                                ShapeToString(b.shape()));
  }
  if (!a.value().AllFinite() || !b.value().AllFinite()) {
    throw std::invalid_argument("NaN or Inf in contrastive inputs");
  }
}

}  // namespace internal

ParamSet InitPredictionHeads(const HeadsConfig& c, uint64_t seed) {
  if (c.n_heads < 1 || c.dim < 1 || c.hidden < 1) {
    throw std::invalid_argument("invalid prediction head config");
  }
  Rng rng(DeriveSeed(seed, 0x4EAD));
  ParamSet p;
  for (int k = 0; k < c.n_heads; ++k) {
    const std::string pre = HeadPrefix(k);
    p.Add(pre + "w1", ScaledNormal(rng, c.dim, c.hidden));
    p.Add(pre + "b1", Tensor({c.hidden}, 0.0));
    p.Add(pre + "w2", ScaledNormal(rng, c.hidden, c.dim));
    p.Add(pre + "b2", Tensor({c.dim}, 0.0));
  }
  return p;
}

Var PredictFuture(Binding& bind, const Var& ctx, int n_seq, int n_clips,
                  int regions, int n_heads) {
  using namespace ops;
  if (ctx.rows() != int64_t{n_seq} * n_clips * regions) {
    throw std::invalid_argument("PredictFuture context row count mismatch");
  }
  std::vector<int64_t> last;
  last.reserve(int64_t{n_seq} * regions);
  for (int s = 0; s < n_seq; ++s) {
    for (int n = 0; n < regions; ++n) {
      last.push_back((int64_t{s} * n_clips + n_clips - 1) * regions + n);
    }
  }
  Var x = GatherRows(ctx, last);
  std::vector<Var> outs;
  for (int k = 0; k < n_heads; ++k) {
    const std::string pre = HeadPrefix(k);
    Var h = Relu(Linear(x, bind(pre + "w1"), bind(pre + "b1")));
    outs.push_back(Linear(h, bind(pre + "w2"), bind(pre + "b2")));
  }
  // Interleave to (seq, horizon, region).
  Var all = ConcatRows(outs);  // (horizon, seq, region)
  std::vector<int64_t> order;
  order.reserve(all.rows());
  for (int s = 0; s < n_seq; ++s)
    for (int k = 0; k < n_heads; ++k)
      for (int n = 0; n < regions; ++n) {
        order.push_back((int64_t{k} * n_seq + s) * regions + n);
      }
  return GatherRows(all, order);
}

InfoNceResult MvpInfoNce(const Var& preds, const Var& targets, int batch,
                         int n_horizons, int regions, double tau,
                         bool normalize) {
  internal::CheckContrastiveInputs(preds, targets, tau);
  if (batch < 1) throw std::invalid_argument("batch size must be >= 1");
  const int64_t anchors = int64_t{batch} * n_horizons * regions;
  if (preds.rows() != anchors) {
    throw std::invalid_argument("prediction rows do not equal B*N_P*L*H*W");
  }
  Var logits = Logits(preds, targets, tau, normalize);
  InfoNceResult r;
  r.loss = ops::SoftmaxCrossEntropy(logits, Diagonal(anchors));
  r.anchors = preds.value();
  r.targets = targets.value();
  const std::vector<double> per = PerRowLoss(logits.value());
  LossReport& rep = r.report;
  rep.tau = tau;
  rep.anchor_count = anchors;
  rep.per_horizon_mean.assign(n_horizons, 0.0);
  for (int64_t i = 0; i < anchors; ++i) {
    rep.total += per[i];
    rep.per_horizon_mean[(i / regions) % n_horizons] += per[i];
  }
  for (double& h : rep.per_horizon_mean) h /= double(batch) * regions;
  rep.mean = rep.total / static_cast<double>(anchors);
  return r;
}

double PretrainRegionAccuracy(const Tensor& preds, const Tensor& targets,
                              bool normalize) {
  if (preds.shape() != targets.shape()) {
    throw std::invalid_argument("accuracy inputs differ in shape");
  }
  Var logits = Logits(Var::Constant(preds), Var::Constant(targets), 1.0,
                      normalize);
  const Tensor& s = logits.value();
  int64_t hits = 0;
  for (int64_t i = 0; i < s.rows(); ++i) {
    bool best = true;
    for (int64_t j = 0; j < s.cols() && best; ++j) {
      if (j != i && s.at(i, j) >= s.at(i, i)) best = false;
    }
    hits += best;
  }
  return s.rows() ? static_cast<double>(hits) / s.rows() : 0.0;
}

Var CvrlSeqLoss(const Var& view_a, const Var& view_b, double tau,
                bool normalize) {
  internal::CheckContrastiveInputs(view_a, view_b, tau);
  const int64_t b = view_a.rows();
  if (b < 2) {
    throw std::invalid_argument("CVRL sequence loss needs batch >= 2");
  }
  Var ab = ops::SoftmaxCrossEntropy(Logits(view_a, view_b, tau, normalize),
                                    Diagonal(b));
  Var ba = ops::SoftmaxCrossEntropy(Logits(view_b, view_a, tau, normalize),
                                    Diagonal(b));
  return ops::Scale(ops::Add(ab, ba), 0.5 / static_cast<double>(b));
}

InfoNceResult CpcLoss(Binding& bind, const Var& ctx, const Var& future,
                      int n_seq, int n_obs, int n_future, int regions,
                      int n_heads, double tau, bool normalize) {
  if (n_future < n_heads) {
    throw std::invalid_argument("CPC needs at least one future clip per head");
  }
  if (future.rows() != int64_t{n_seq} * n_future * regions) {
    throw std::invalid_argument("CPC future row count mismatch");
  }
  Var preds = PredictFuture(bind, ctx, n_seq, n_obs, regions, n_heads);
  std::vector<std::vector<int64_t>> pred_pool;
  std::vector<std::vector<int64_t>> target_pool;
  for (int s = 0; s < n_seq; ++s) {
    for (int k = 0; k < n_heads; ++k) {
      std::vector<int64_t> p;
      std::vector<int64_t> t;
      for (int n = 0; n < regions; ++n) {
        p.push_back((int64_t{s} * n_heads + k) * regions + n);
        t.push_back((int64_t{s} * n_future + k) * regions + n);
      }
      pred_pool.push_back(std::move(p));
      target_pool.push_back(std::move(t));
    }
  }
  Var global_pred = ops::RowMean(preds, pred_pool);
  Var global_target = ops::RowMean(future, target_pool);
  return MvpInfoNce(global_pred, global_target, n_seq, n_heads, 1, tau,
                    normalize);
}

}  // namespace mvp
