#ifndef MVP_ENCODER_H_
#define MVP_ENCODER_H_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvp/autograd.h"
#include "mvp/params.h"
#include "mvp/rng.h"
#include "mvp/sampling.h"

namespace mvp {

// Temporal x height x width layout of a clip's region features.
struct RegionGrid {
  int l = 2;
  int h = 2;
  int w = 2;

  int regions() const { return l * h * w; }
  bool operator==(const RegionGrid&) const = default;
};

// Hierarchical clip encoder: tubelet patch embedding followed by transformer
// stages, with 2x2x2 mean pooling and a channel projection between stages.
struct EncoderConfig {
  int frames = 8;
  int height = 32;
  int width = 32;
  int channels = 3;
  int patch_t = 2;
  int patch_h = 8;
  int patch_w = 8;
  std::vector<int> stage_dims = {16, 64};
  std::vector<int> stage_heads = {2, 4};
  int mlp_ratio = 2;
  double dropout = 0.0;

  void Validate() const;
  int out_dim() const { return stage_dims.back(); }
  RegionGrid StageGrid(int stage) const;
  RegionGrid OutputGrid() const { return StageGrid(NumStages() - 1); }
  int NumStages() const { return static_cast<int>(stage_dims.size()); }
  int PatchLength() const { return patch_t * patch_h * patch_w * channels; }
  int64_t ClipSize() const {
    return int64_t{frames} * height * width * channels;
  }
};

nlohmann::json ToJson(const EncoderConfig& c);
EncoderConfig EncoderConfigFromJson(const nlohmann::json& j);

struct EncoderParams {
  EncoderConfig config;
  ParamSet params;  // names under "enc."
};

EncoderParams InitEncoder(const EncoderConfig& config, uint64_t seed);

// One clip's encoder output, values shaped (L, H, W, D).
struct RegionFeatureMap {
  Tensor values;
  int64_t video_id = 0;
  int clip_index = 0;
};

// Graph form. `clips` holds n clips as rows of length ClipSize(); the result
// is [n * L*H*W, D] with rows ordered (clip, l, h, w). A non-null `rng`
// enables dropout (train mode).
Var EncodeClips(Binding& bind, const EncoderConfig& config, const Var& clips,
                Rng* rng = nullptr);

RegionFeatureMap EncodeClip(const sampling::ClipTensor& clip,
                            const EncoderParams& params);
std::vector<RegionFeatureMap> EncodeSequence(
    const std::vector<sampling::ClipTensor>& clips,
    const EncoderParams& params);

// Stacks clips into the [n, ClipSize()] layout EncodeClips consumes.
Tensor StackClips(const std::vector<Tensor>& clips);

namespace internal {
// Shared pre-LN transformer block over independent sequences of `seq_len`
// rows; exposed for gradient checks.
Var TransformerBlock(Binding& bind, const std::string& prefix, const Var& x,
                     int64_t seq_len, int heads, double dropout, Rng* rng);
Var Dropout(const Var& x, double p, Rng* rng);
}  // namespace internal

}  // namespace mvp

#endif  // MVP_ENCODER_H_
