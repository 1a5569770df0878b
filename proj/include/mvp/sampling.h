#ifndef MVP_SAMPLING_H_
#define MVP_SAMPLING_H_

#include <cstdint>
#include <string>
#include <vector>

#include "mvp/rng.h"
#include "mvp/synthcorpus.h"
#include "mvp/tensor.h"

namespace mvp::sampling {

// One 8-frame clip, values shaped (8, H, W, 3).
struct ClipTensor {
  Tensor values;
  int64_t video_id = 0;
  int clip_index = 0;
};

// Temporal offset K in clips: fixed, or uniform over [k_min, k_max].
struct OffsetMode {
  bool random = false;
  int k_min = 1;
  int k_max = 1;

  static OffsetMode Fixed(int k) { return {false, k, k}; }
  static OffsetMode Random(int lo, int hi) { return {true, lo, hi}; }
  // "fixed:4" or "random:1:8".
  static OffsetMode Parse(const std::string& text);
  std::string ToString() const;
};

// Number of predictions for a future window of n_future clips sampled every
// `stride` clips. Throws unless stride divides n_future.
int NPredictions(int n_future, int stride);

struct PairSpec {
  int n_obs = 4;
  int n_future = 8;
  OffsetMode offset = OffsetMode::Random(1, 8);
  int stride = 2;

  void Validate() const;
  int NPredictions() const { return sampling::NPredictions(n_future, stride); }
  // Shortest video from which every offset in the mode can be sampled.
  int MinClips() const { return n_obs + offset.k_max + n_future; }
};

// Clip indices of one observed/future pair. The future window starts
// n_obs + offset clips after the observed start.
struct PairIndices {
  int obs_start = 0;
  int offset = 1;
  int future_start = 0;
};

struct ObservedFuturePair {
  std::vector<ClipTensor> observed;
  std::vector<ClipTensor> future;
  int offset = 1;
  int obs_start = 0;
};

// Clip i covers frames [8i, 8i + 8).
std::vector<ClipTensor> Partition(const synth::SyntheticVideo& video,
                                  int64_t video_id = 0);

PairIndices SamplePairIndices(int num_clips, const PairSpec& spec, Rng& rng);
ObservedFuturePair SamplePair(const std::vector<ClipTensor>& clips,
                              const PairSpec& spec, Rng& rng);

}  // namespace mvp::sampling

#endif  // MVP_SAMPLING_H_
