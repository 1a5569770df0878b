#ifndef MVP_AGGREGATION_H_
#define MVP_AGGREGATION_H_

#include <string>
#include <vector>

#include "mvp/autograd.h"
#include "mvp/encoder.h"
#include "mvp/params.h"

namespace mvp {

// ---------------------------------------------------------------------------
// Per-location temporal multi-head self-attention.
//
// For every spatial location (h, w) the N_clips * L temporal entries of that
// location form one sequence; queries/keys/values are projections of the
// sequence and each head attends with scale 1/sqrt(D / heads). Locations
// never exchange information here.

struct AttentionParams {
  int heads = 1;
  ParamSet params;  // <prefix>wq, wk, wv, wo, each D x D
  std::string prefix;
};

AttentionParams InitAttention(const std::string& prefix, int dim, int heads,
                              uint64_t seed);

// `regions` holds n_seq sequences of n_clips clip maps as rows ordered
// (seq, clip, l, h, w); the output uses the same row order.
Var SpatialMha(Binding& bind, const std::string& prefix, int heads,
               const Var& regions, const RegionGrid& grid, int n_seq,
               int n_clips, bool causal);

// Tensor form over one sequence of maps; returns shape (N_clips*L, H, W, D).
Tensor SpatialMha(const std::vector<RegionFeatureMap>& maps,
                  const AttentionParams& params, bool causal);

// ---------------------------------------------------------------------------
// Observed-sequence summary: meanpool each clip map to a token, add learned
// positions, run one post-LN transformer encoder layer, keep the last token.

struct SummaryConfig {
  int dim = 64;
  int heads = 1;
  int ff_hidden = 128;
  int max_len = 32;
};

ParamSet InitObservedSummary(const SummaryConfig& config, uint64_t seed);

// Returns [n_seq, D].
Var ObservedSummary(Binding& bind, const SummaryConfig& config,
                    const Var& regions, const RegionGrid& grid, int n_seq,
                    int n_clips);

Tensor ObservedSummary(const std::vector<RegionFeatureMap>& maps,
                       const SummaryConfig& config, const ParamSet& params);

// ---------------------------------------------------------------------------
// Future targets.

enum class TargetKind {
  kMultiscale,   // horizon p: mean over future clips [0, p*S)
  kSingleScale,  // horizon p: mean over future clips [(p-1)*S, p*S)
  kNoAggregation,  // horizon p: future clip p*S - 1 alone
};

// Row groups of the target construction for `future` rows ordered
// (seq, clip, region); output rows are ordered (seq, horizon, region).
std::vector<std::vector<int64_t>> TargetGroups(TargetKind kind, int n_seq,
                                               int n_future, int regions,
                                               int stride);

// Causal cumulative meanpool targets (and the ablation variants). Gradients
// flow only if the caller passes a graph-connected `future`.
Var CausalTargets(const Var& future, TargetKind kind, int n_seq,
                  int n_future, int regions, int stride);

// Target set for one sequence: shape (N_P, L*H*W, D).
struct TargetSet {
  Tensor values;
  std::vector<int> horizons;  // clips aggregated per row
};

TargetSet CausalTargets(const std::vector<RegionFeatureMap>& future_maps,
                        int stride);

// Attention-based alternative: causal SpatialMha over the future sequence,
// reading out every region of clip p*S - 1 as horizon p.
Var AttentionTargets(Binding& bind, const std::string& prefix, int heads,
                     const Var& future, const RegionGrid& grid, int n_seq,
                     int n_future, int stride);

// Flattens maps into the (clip, l, h, w) x D row layout.
Tensor StackMaps(const std::vector<RegionFeatureMap>& maps);

}  // namespace mvp

#endif  // MVP_AGGREGATION_H_
