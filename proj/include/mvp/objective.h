#ifndef MVP_OBJECTIVE_H_
#define MVP_OBJECTIVE_H_

#include <string>
#include <vector>

#include "mvp/autograd.h"
#include "mvp/params.h"

namespace mvp {

// One two-layer ReLU MLP per prediction horizon: D -> hidden -> D, stored as
// heads.<k>.w1/b1/w2/b2.
struct HeadsConfig {
  int n_heads = 4;
  int dim = 64;
  int hidden = 128;
};

ParamSet InitPredictionHeads(const HeadsConfig& config, uint64_t seed);

// Applies head k to the last observed clip's L*H*W contextualized regions of
// every sequence. `ctx` rows are ordered (seq, clip, region); the result is
// [n_seq * n_heads * regions, D] ordered (seq, horizon, region).
Var PredictFuture(Binding& bind, const Var& ctx, int n_seq, int n_clips,
                  int regions, int n_heads);

struct LossReport {
  double total = 0.0;  // sum over anchors
  double mean = 0.0;
  std::vector<double> per_horizon_mean;
  int64_t anchor_count = 0;
  double tau = 0.0;
};

struct InfoNceResult {
  Var loss;  // summed over anchors; differentiable
  LossReport report;
  Tensor anchors;  // values that were contrasted, for accuracy diagnostics
  Tensor targets;
};

// Region-level contrastive loss. Anchors are rows of `preds` ordered
// (batch, horizon, region); the positive of anchor i is row i of `targets`
// and every other target row in the batch is a negative. Dot products on raw
// features unless `normalize`.
InfoNceResult MvpInfoNce(const Var& preds, const Var& targets, int batch,
                         int n_horizons, int regions, double tau,
                         bool normalize = false);

// Fraction of anchors whose positive similarity strictly beats every
// negative in its row; ties count as misses.
double PretrainRegionAccuracy(const Tensor& preds, const Tensor& targets,
                              bool normalize = false);

// Symmetric two-view InfoNCE between per-sequence summaries [B, D]; mean over
// items of the average of both directions. Requires B >= 2.
Var CvrlSeqLoss(const Var& view_a, const Var& view_b, double tau,
                bool normalize = false);

// Global clip-level predictive coding: region predictions and the future
// clips' maps are meanpooled per (sequence, horizon); target h is future clip
// h (stride 1). `future` rows are ordered (seq, clip, region) and must hold
// at least n_heads clips per sequence.
InfoNceResult CpcLoss(Binding& bind, const Var& ctx, const Var& future,
                      int n_seq, int n_obs, int n_future, int regions,
                      int n_heads, double tau, bool normalize = false);

namespace internal {
// Validates tau and input finiteness shared by the contrastive losses.
void CheckContrastiveInputs(const Var& a, const Var& b, double tau);
}  // namespace internal

}  // namespace mvp

#endif  // MVP_OBJECTIVE_H_
