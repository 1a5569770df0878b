#include "mvp/encoder.h"

#include <stdexcept>

namespace mvp {

namespace {

std::string StagePrefix(int s) { return "enc.s" + std::to_string(s) + "."; }

// Element indices that rearrange [n, frames*H*W*C] into
// [n * tokens, patch_len] with tokens ordered (l, h, w).
std::vector<int64_t> PatchIndex(const EncoderConfig& c, int64_t n) {
  const RegionGrid g = c.StageGrid(0);
  const int64_t plen = c.PatchLength();
  std::vector<int64_t> idx;
  idx.reserve(n * g.regions() * plen);
  for (int64_t clip = 0; clip < n; ++clip) {
    const int64_t base = clip * c.ClipSize();
    for (int lt = 0; lt < g.l; ++lt)
      for (int ht = 0; ht < g.h; ++ht)
        for (int wt = 0; wt < g.w; ++wt)
          for (int dt = 0; dt < c.patch_t; ++dt)
            for (int dh = 0; dh < c.patch_h; ++dh)
              for (int dw = 0; dw < c.patch_w; ++dw) {
                const int64_t f = lt * c.patch_t + dt;
                const int64_t y = ht * c.patch_h + dh;
                const int64_t x = wt * c.patch_w + dw;
                const int64_t pix = ((f * c.height + y) * c.width + x) *
                                    c.channels;
                for (int ch = 0; ch < c.channels; ++ch) {
                  idx.push_back(base + pix + ch);
                }
              }
  }
  return idx;
}

// 2x2x2 pooling windows from grid `in` to the next stage's grid, per clip.
std::vector<std::vector<int64_t>> PoolGroups(const RegionGrid& in, int64_t n) {
  const RegionGrid out{in.l / 2, in.h / 2, in.w / 2};
  std::vector<std::vector<int64_t>> groups;
  groups.reserve(n * out.regions());
  for (int64_t clip = 0; clip < n; ++clip) {
    const int64_t base = clip * in.regions();
    for (int l = 0; l < out.l; ++l)
      for (int h = 0; h < out.h; ++h)
        for (int w = 0; w < out.w; ++w) {
          std::vector<int64_t> g;
          for (int dl = 0; dl < 2; ++dl)
            for (int dh = 0; dh < 2; ++dh)
              for (int dw = 0; dw < 2; ++dw) {
                g.push_back(base + ((2 * l + dl) * in.h + (2 * h + dh)) * in.w +
                            (2 * w + dw));
              }
          groups.push_back(std::move(g));
        }
  }
  return groups;
}

void AddBlockParams(ParamSet& p, Rng& rng, const std::string& prefix, int d,
                    int hidden) {
  p.Add(prefix + "ln1.g", Tensor({d}, 1.0));
  p.Add(prefix + "ln1.b", Tensor({d}, 0.0));
  for (const char* name : {"wq", "wk", "wv", "wo"}) {
    p.Add(prefix + "attn." + name, ScaledNormal(rng, d, d));
    p.Add(prefix + "attn." + std::string(name) + ".b", Tensor({d}, 0.0));
  }
  p.Add(prefix + "ln2.g", Tensor({d}, 1.0));
  p.Add(prefix + "ln2.b", Tensor({d}, 0.0));
  p.Add(prefix + "mlp.w1", ScaledNormal(rng, d, hidden));
  p.Add(prefix + "mlp.b1", Tensor({hidden}, 0.0));
  p.Add(prefix + "mlp.w2", ScaledNormal(rng, hidden, d));
  p.Add(prefix + "mlp.b2", Tensor({d}, 0.0));
}

}  // namespace

void EncoderConfig::Validate() const {
  auto fail = [](const std::string& m) {
    throw std::invalid_argument("encoder config: " + m);
  };
  if (frames <= 0 || height <= 0 || width <= 0 || channels <= 0) {
    fail("input dims must be positive");
  }
  if (patch_t <= 0 || patch_h <= 0 || patch_w <= 0) {
    fail("patch dims must be positive");
  }
  if (frames % patch_t || height % patch_h || width % patch_w) {
    fail("patch size must divide the clip dims");
  }
  if (stage_dims.empty() || stage_dims.size() != stage_heads.size()) {
    fail("stage_dims and stage_heads must be non-empty and equal length");
  }
  for (size_t s = 0; s < stage_dims.size(); ++s) {
    if (stage_dims[s] <= 0 || stage_heads[s] <= 0 ||
        stage_dims[s] % stage_heads[s]) {
      fail("stage " + std::to_string(s) + " width not divisible by heads");
    }
  }
  if (mlp_ratio <= 0) fail("mlp_ratio must be positive");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must be in [0, 1)");
  RegionGrid g{frames / patch_t, height / patch_h, width / patch_w};
  for (int s = 1; s < NumStages(); ++s) {
    if (g.l % 2 || g.h % 2 || g.w % 2) {
      fail("grid " + std::to_string(g.l) + "x" + std::to_string(g.h) + "x" +
           std::to_string(g.w) + " cannot be pooled 2x2x2");
    }
    g = {g.l / 2, g.h / 2, g.w / 2};
  }
}

RegionGrid EncoderConfig::StageGrid(int stage) const {
  RegionGrid g{frames / patch_t, height / patch_h, width / patch_w};
  for (int s = 0; s < stage; ++s) g = {g.l / 2, g.h / 2, g.w / 2};
  return g;
}

nlohmann::json ToJson(const EncoderConfig& c) {
  return {{"frames", c.frames},         {"height", c.height},
          {"width", c.width},           {"channels", c.channels},
          {"patch", {c.patch_t, c.patch_h, c.patch_w}},
          {"stage_dims", c.stage_dims}, {"stage_heads", c.stage_heads},
          {"mlp_ratio", c.mlp_ratio},   {"dropout", c.dropout}};
}

EncoderConfig EncoderConfigFromJson(const nlohmann::json& j) {
  EncoderConfig c;
  c.frames = j.value("frames", c.frames);
  c.height = j.value("height", c.height);
  c.width = j.value("width", c.width);
  c.channels = j.value("channels", c.channels);
  if (j.contains("patch")) {
    c.patch_t = j.at("patch").at(0);
    c.patch_h = j.at("patch").at(1);
    c.patch_w = j.at("patch").at(2);
  }
  c.stage_dims = j.value("stage_dims", c.stage_dims);
  c.stage_heads = j.value("stage_heads", c.stage_heads);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  c.dropout = j.value("dropout", c.dropout);
  return c;
}

EncoderParams InitEncoder(const EncoderConfig& config, uint64_t seed) {
  config.Validate();
  Rng rng(DeriveSeed(seed, 0xE1C0));
  EncoderParams out;
  out.config = config;
  ParamSet& p = out.params;
  const int d0 = config.stage_dims[0];
  p.Add("enc.patch.w", ScaledNormal(rng, config.PatchLength(), d0));
  p.Add("enc.patch.b", Tensor({d0}, 0.0));
  for (int s = 0; s < config.NumStages(); ++s) {
    const int d = config.stage_dims[s];
    const std::string pre = StagePrefix(s);
    if (s > 0) {
      p.Add(pre + "proj.w", ScaledNormal(rng, config.stage_dims[s - 1], d));
      p.Add(pre + "proj.b", Tensor({d}, 0.0));
    }
    p.Add(pre + "pos", ScaledNormalTable(rng, config.StageGrid(s).regions(), d));
    AddBlockParams(p, rng, pre + "block.", d, d * config.mlp_ratio);
  }
  const int d = config.out_dim();
  p.Add("enc.ln_f.g", Tensor({d}, 1.0));
  p.Add("enc.ln_f.b", Tensor({d}, 0.0));
  return out;
}

namespace internal {

Var Dropout(const Var& x, double p, Rng* rng) {
  if (!rng || p <= 0.0) return x;
  Tensor mask(x.shape());
  const double keep = 1.0 / (1.0 - p);
  for (double& m : mask.values()) m = rng->Uniform() < p ? 0.0 : keep;
  return ops::Mul(x, Var::Constant(std::move(mask)));
}

Var TransformerBlock(Binding& bind, const std::string& prefix, const Var& x,
                     int64_t seq_len, int heads, double dropout, Rng* rng) {
  using namespace ops;
  const std::string a = prefix + "attn.";
  Var h = LayerNorm(x, bind(prefix + "ln1.g"), bind(prefix + "ln1.b"));
  Var q = Linear(h, bind(a + "wq"), bind(a + "wq.b"));
  Var k = Linear(h, bind(a + "wk"), bind(a + "wk.b"));
  Var v = Linear(h, bind(a + "wv"), bind(a + "wv.b"));
  Var att = MultiHeadAttention(q, k, v, seq_len, heads, /*causal=*/false);
  Var y = Add(x, Dropout(Linear(att, bind(a + "wo"), bind(a + "wo.b")),
                         dropout, rng));
  Var m = LayerNorm(y, bind(prefix + "ln2.g"), bind(prefix + "ln2.b"));
  m = Gelu(Linear(m, bind(prefix + "mlp.w1"), bind(prefix + "mlp.b1")));
  m = Linear(m, bind(prefix + "mlp.w2"), bind(prefix + "mlp.b2"));
  return Add(y, Dropout(m, dropout, rng));
}

}  // namespace internal

Var EncodeClips(Binding& bind, const EncoderConfig& config, const Var& clips,
                Rng* rng) {
  using namespace ops;
  if (clips.cols() != config.ClipSize()) {
    throw std::invalid_argument(
        "clip shape mismatch: expected rows of " +
        std::to_string(config.ClipSize()) + " values, got " +
        ShapeToString(clips.shape()));
  }
  const int64_t n = clips.rows();
  RegionGrid grid = config.StageGrid(0);
  Var x = GatherElements(clips, PatchIndex(config, n),
                         {n * grid.regions(), config.PatchLength()});
  x = Linear(x, bind("enc.patch.w"), bind("enc.patch.b"));
  for (int s = 0; s < config.NumStages(); ++s) {
    const std::string pre = StagePrefix(s);
    if (s > 0) {
      x = RowMean(x, PoolGroups(grid, n));
      grid = config.StageGrid(s);
      x = Linear(x, bind(pre + "proj.w"), bind(pre + "proj.b"));
    }
    x = AddTiled(x, bind(pre + "pos"));
    x = internal::TransformerBlock(bind, pre + "block.", x, grid.regions(),
                                   config.stage_heads[s], config.dropout, rng);
  }
  return LayerNorm(x, bind("enc.ln_f.g"), bind("enc.ln_f.b"));
}

Tensor StackClips(const std::vector<Tensor>& clips) {
  if (clips.empty()) throw std::invalid_argument("no clips to stack");
  const int64_t len = clips.front().size();
  std::vector<double> data;
  data.reserve(clips.size() * len);
  for (const Tensor& c : clips) {
    if (c.size() != len) throw std::invalid_argument("clip size mismatch");
    data.insert(data.end(), c.storage().begin(), c.storage().end());
  }
  return Tensor({static_cast<int64_t>(clips.size()), len}, std::move(data));
}

RegionFeatureMap EncodeClip(const sampling::ClipTensor& clip,
                            const EncoderParams& params) {
  const EncoderConfig& c = params.config;
  const Shape want = {c.frames, c.height, c.width, c.channels};
  if (clip.values.shape() != want) {
    throw std::invalid_argument("clip shape " +
                                ShapeToString(clip.values.shape()) +
                                " does not match encoder input " +
                                ShapeToString(want));
  }
  Binding bind(params.params, /*trainable=*/false);
  Var out = EncodeClips(bind, c, Var::Constant(StackClips({clip.values})));
  const RegionGrid g = c.OutputGrid();
  return {out.value().Reshaped({g.l, g.h, g.w, c.out_dim()}), clip.video_id,
          clip.clip_index};
}

std::vector<RegionFeatureMap> EncodeSequence(
    const std::vector<sampling::ClipTensor>& clips,
    const EncoderParams& params) {
  std::vector<RegionFeatureMap> maps;
  maps.reserve(clips.size());
  for (const auto& c : clips) maps.push_back(EncodeClip(c, params));
  return maps;
}

}  // namespace mvp
