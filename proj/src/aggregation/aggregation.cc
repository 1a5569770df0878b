#include "mvp/aggregation.h"

#include <stdexcept>

#include "mvp/sampling.h"

namespace mvp {

namespace {

// Row permutation from (seq, clip, l, h, w) to (seq, h, w, clip, l): every
// spatial location becomes one contiguous temporal sequence.
std::vector<int64_t> LocationMajor(const RegionGrid& g, int n_seq,
                                   int n_clips) {
  std::vector<int64_t> idx;
  const int64_t per_seq = int64_t{n_clips} * g.regions();
  idx.reserve(n_seq * per_seq);
  for (int s = 0; s < n_seq; ++s)
    for (int h = 0; h < g.h; ++h)
      for (int w = 0; w < g.w; ++w)
        for (int c = 0; c < n_clips; ++c)
          for (int l = 0; l < g.l; ++l) {
            idx.push_back(s * per_seq + int64_t{c} * g.regions() +
                          (l * g.h + h) * g.w + w);
          }
  return idx;
}

std::vector<int64_t> Inverse(const std::vector<int64_t>& perm) {
  std::vector<int64_t> inv(perm.size());
  for (size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<int64_t>(i);
  return inv;
}

}  // namespace

Tensor StackMaps(const std::vector<RegionFeatureMap>& maps) {
  if (maps.empty()) throw std::invalid_argument("need at least one map");
  const Shape& s = maps.front().values.shape();
  std::vector<Tensor> flat;
  for (const auto& m : maps) {
    if (m.values.shape() != s) {
      throw std::invalid_argument("inconsistent region map shapes");
    }
    flat.push_back(m.values);
  }
  return ConcatRows(flat);
}

AttentionParams InitAttention(const std::string& prefix, int dim, int heads,
                              uint64_t seed) {
  if (dim <= 0 || heads <= 0 || dim % heads) {
    throw std::invalid_argument("attention width must be divisible by heads");
  }
  Rng rng(DeriveSeed(seed, 0xA770));
  AttentionParams p;
  p.heads = heads;
  p.prefix = prefix;
  for (const char* n : {"wq", "wk", "wv", "wo"}) {
    p.params.Add(prefix + n, ScaledNormal(rng, dim, dim));
  }
  return p;
}

Var SpatialMha(Binding& bind, const std::string& prefix, int heads,
               const Var& regions, const RegionGrid& grid, int n_seq,
               int n_clips, bool causal) {
  using namespace ops;
  if (n_seq < 1 || n_clips < 1) {
    throw std::invalid_argument("SpatialMha needs at least one map");
  }
  if (regions.rows() != int64_t{n_seq} * n_clips * grid.regions()) {
    throw std::invalid_argument("SpatialMha row count does not match grid");
  }
  const std::vector<int64_t> perm = LocationMajor(grid, n_seq, n_clips);
  Var x = GatherRows(regions, perm);
  Var q = MatMul(x, bind(prefix + "wq"));
  Var k = MatMul(x, bind(prefix + "wk"));
  Var v = MatMul(x, bind(prefix + "wv"));
  Var att = MultiHeadAttention(q, k, v, int64_t{n_clips} * grid.l, heads,
                               causal);
  return GatherRows(MatMul(att, bind(prefix + "wo")), Inverse(perm));
}

Tensor SpatialMha(const std::vector<RegionFeatureMap>& maps,
                  const AttentionParams& params, bool causal) {
  const Tensor stacked = StackMaps(maps);
  const Shape& s = maps.front().values.shape();
  if (s.size() != 4) throw std::invalid_argument("region maps must be 4-D");
  const RegionGrid g{static_cast<int>(s[0]), static_cast<int>(s[1]),
                     static_cast<int>(s[2])};
  Binding bind(params.params, false);
  const int n = static_cast<int>(maps.size());
  Var out = SpatialMha(bind, params.prefix, params.heads,
                       Var::Constant(stacked), g, 1, n, causal);
  return out.value().Reshaped({n * s[0], s[1], s[2], s[3]});
}

ParamSet InitObservedSummary(const SummaryConfig& c, uint64_t seed) {
  if (c.dim <= 0 || c.heads <= 0 || c.dim % c.heads || c.max_len <= 0) {
    throw std::invalid_argument("invalid observed-summary config");
  }
  Rng rng(DeriveSeed(seed, 0x5044));
  ParamSet p;
  p.Add("hphi.pos", ScaledNormalTable(rng, c.max_len, c.dim));
  for (const char* n : {"wq", "wk", "wv", "wo"}) {
    p.Add(std::string("hphi.attn.") + n, ScaledNormal(rng, c.dim, c.dim));
    p.Add(std::string("hphi.attn.") + n + ".b", Tensor({c.dim}, 0.0));
  }
  p.Add("hphi.ln1.g", Tensor({c.dim}, 1.0));
  p.Add("hphi.ln1.b", Tensor({c.dim}, 0.0));
  p.Add("hphi.ff.w1", ScaledNormal(rng, c.dim, c.ff_hidden));
  p.Add("hphi.ff.b1", Tensor({c.ff_hidden}, 0.0));
  p.Add("hphi.ff.w2", ScaledNormal(rng, c.ff_hidden, c.dim));
  p.Add("hphi.ff.b2", Tensor({c.dim}, 0.0));
  p.Add("hphi.ln2.g", Tensor({c.dim}, 1.0));
  p.Add("hphi.ln2.b", Tensor({c.dim}, 0.0));
  return p;
}

Var ObservedSummary(Binding& bind, const SummaryConfig& c, const Var& regions,
                    const RegionGrid& grid, int n_seq, int n_clips) {
  using namespace ops;
  if (n_seq < 1 || n_clips < 1) {
    throw std::invalid_argument("ObservedSummary needs at least one map");
  }
  if (n_clips > c.max_len) {
    throw std::invalid_argument("sequence longer than positional table");
  }
  const int r = grid.regions();
  if (regions.rows() != int64_t{n_seq} * n_clips * r) {
    throw std::invalid_argument("ObservedSummary row count does not match");
  }
  std::vector<std::vector<int64_t>> pool(int64_t{n_seq} * n_clips);
  for (int64_t t = 0; t < int64_t{n_seq} * n_clips; ++t) {
    for (int i = 0; i < r; ++i) pool[t].push_back(t * r + i);
  }
  Var tokens = RowMean(regions, pool);
  tokens = AddTiled(tokens, SliceRows(bind("hphi.pos"), 0, n_clips));
  const std::string a = "hphi.attn.";
  Var q = Linear(tokens, bind(a + "wq"), bind(a + "wq.b"));
  Var k = Linear(tokens, bind(a + "wk"), bind(a + "wk.b"));
  Var v = Linear(tokens, bind(a + "wv"), bind(a + "wv.b"));
  Var att = MultiHeadAttention(q, k, v, n_clips, c.heads, false);
  Var x = LayerNorm(Add(tokens, Linear(att, bind(a + "wo"), bind(a + "wo.b"))),
                    bind("hphi.ln1.g"), bind("hphi.ln1.b"));
  Var ff = Gelu(Linear(x, bind("hphi.ff.w1"), bind("hphi.ff.b1")));
  ff = Linear(ff, bind("hphi.ff.w2"), bind("hphi.ff.b2"));
  x = LayerNorm(Add(x, ff), bind("hphi.ln2.g"), bind("hphi.ln2.b"));
  std::vector<int64_t> last(n_seq);
  for (int s = 0; s < n_seq; ++s) last[s] = int64_t{s} * n_clips + n_clips - 1;
  return GatherRows(x, last);
}

Tensor ObservedSummary(const std::vector<RegionFeatureMap>& maps,
                       const SummaryConfig& config, const ParamSet& params) {
  const Tensor stacked = StackMaps(maps);
  const Shape& s = maps.front().values.shape();
  const RegionGrid g{static_cast<int>(s[0]), static_cast<int>(s[1]),
                     static_cast<int>(s[2])};
  Binding bind(params, false);
  Var out = ObservedSummary(bind, config, Var::Constant(stacked), g, 1,
                            static_cast<int>(maps.size()));
  return out.value().Reshaped({config.dim});
}

std::vector<std::vector<int64_t>> TargetGroups(TargetKind kind, int n_seq,
                                               int n_future, int regions,
                                               int stride) {
  const int n_p = sampling::NPredictions(n_future, stride);
  std::vector<std::vector<int64_t>> groups;
  groups.reserve(int64_t{n_seq} * n_p * regions);
  for (int s = 0; s < n_seq; ++s) {
    const int64_t base = int64_t{s} * n_future * regions;
    for (int p = 1; p <= n_p; ++p) {
      int first = 0;
      int last = p * stride;  // exclusive
      if (kind == TargetKind::kSingleScale) first = (p - 1) * stride;
      if (kind == TargetKind::kNoAggregation) first = p * stride - 1;
      for (int n = 0; n < regions; ++n) {
        std::vector<int64_t> g;
        g.reserve(last - first);
        for (int c = first; c < last; ++c) {
          g.push_back(base + int64_t{c} * regions + n);
        }
        groups.push_back(std::move(g));
      }
    }
  }
  return groups;
}

Var CausalTargets(const Var& future, TargetKind kind, int n_seq, int n_future,
                  int regions, int stride) {
  if (future.rows() != int64_t{n_seq} * n_future * regions) {
    throw std::invalid_argument("CausalTargets row count does not match");
  }
  return ops::RowMean(future,
                      TargetGroups(kind, n_seq, n_future, regions, stride));
}

TargetSet CausalTargets(const std::vector<RegionFeatureMap>& future_maps,
                        int stride) {
  const int n_future = static_cast<int>(future_maps.size());
  const int n_p = sampling::NPredictions(n_future, stride);
  const Tensor stacked = StackMaps(future_maps);
  const Shape& s = future_maps.front().values.shape();
  const int regions = static_cast<int>(s[0] * s[1] * s[2]);
  Var out = CausalTargets(Var::Constant(stacked), TargetKind::kMultiscale, 1,
                          n_future, regions, stride);
  TargetSet ts;
  ts.values = out.value().Reshaped({n_p, regions, s[3]});
  for (int p = 1; p <= n_p; ++p) ts.horizons.push_back(p * stride);
  return ts;
}

Var AttentionTargets(Binding& bind, const std::string& prefix, int heads,
                     const Var& future, const RegionGrid& grid, int n_seq,
                     int n_future, int stride) {
  const int n_p = sampling::NPredictions(n_future, stride);
  Var ctx =
      SpatialMha(bind, prefix, heads, future, grid, n_seq, n_future, true);
  const int r = grid.regions();
  std::vector<int64_t> rows;
  rows.reserve(int64_t{n_seq} * n_p * r);
  for (int s = 0; s < n_seq; ++s)
    for (int p = 1; p <= n_p; ++p)
      for (int n = 0; n < r; ++n) {
        rows.push_back((int64_t{s} * n_future + (p * stride - 1)) * r + n);
      }
  return ops::GatherRows(ctx, rows);
}

}  // namespace mvp
