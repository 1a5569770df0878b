#include "mvp/sampling.h"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace mvp::sampling {

OffsetMode OffsetMode::Parse(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  try {
    if (parts.size() == 2 && parts[0] == "fixed") {
      return Fixed(std::stoi(parts[1]));
    }
    if (parts.size() == 3 && parts[0] == "random") {
      return Random(std::stoi(parts[1]), std::stoi(parts[2]));
    }
  } catch (const std::logic_error&) {
  }
  throw std::invalid_argument("bad offset spec '" + text +
                              "' (expected fixed:K or random:KMIN:KMAX)");
}

std::string OffsetMode::ToString() const {
  if (!random) return "fixed:" + std::to_string(k_min);
  return "random:" + std::to_string(k_min) + ":" + std::to_string(k_max);
}

int NPredictions(int n_future, int stride) {
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  if (n_future < 1) throw std::invalid_argument("future length must be >= 1");
  if (n_future % stride != 0) {
    throw std::invalid_argument("stride must divide future length (" +
                                std::to_string(stride) + " does not divide " +
                                std::to_string(n_future) + ")");
  }
  return n_future / stride;
}

void PairSpec::Validate() const {
  if (n_obs < 1) throw std::invalid_argument("n_obs must be >= 1");
  if (n_future < 1) throw std::invalid_argument("n_future must be >= 1");
  if (offset.k_min < 1) {
    throw std::invalid_argument("temporal offset K must be >= 1");
  }
  if (offset.k_max < offset.k_min) {
    throw std::invalid_argument("offset range is empty");
  }
  NPredictions();
}

std::vector<ClipTensor> Partition(const synth::SyntheticVideo& video,
                                  int64_t video_id) {
  const Tensor& f = video.frames;
  if (f.ndim() != 4) throw std::invalid_argument("frames must be 4-D");
  const int64_t frames = f.dim(0);
  if (frames % synth::kFramesPerClip != 0) {
    throw std::invalid_argument("frame count " + std::to_string(frames) +
                                " is not divisible by 8");
  }
  const int64_t per_clip = f.size() / frames * synth::kFramesPerClip;
  std::vector<ClipTensor> clips;
  clips.reserve(frames / synth::kFramesPerClip);
  for (int64_t c = 0; c < frames / synth::kFramesPerClip; ++c) {
    std::vector<double> data(f.storage().begin() + c * per_clip,
                             f.storage().begin() + (c + 1) * per_clip);
    clips.push_back({Tensor({synth::kFramesPerClip, f.dim(1), f.dim(2), f.dim(3)},
                            std::move(data)),
                     video_id, static_cast<int>(c)});
  }
  return clips;
}

PairIndices SamplePairIndices(int num_clips, const PairSpec& spec, Rng& rng) {
  spec.Validate();
  if (num_clips < spec.MinClips()) {
    throw std::invalid_argument(
        "video too short: " + std::to_string(num_clips) +
        " clips, pair spec requires at least " +
        std::to_string(spec.MinClips()));
  }
  PairIndices p;
  p.offset = spec.offset.random
                 ? static_cast<int>(rng.UniformInt(spec.offset.k_min,
                                                   spec.offset.k_max))
                 : spec.offset.k_min;
  const int last_start = num_clips - (spec.n_obs + p.offset + spec.n_future);
  p.obs_start = static_cast<int>(rng.UniformInt(0, last_start));
  p.future_start = p.obs_start + spec.n_obs + p.offset;
  return p;
}

ObservedFuturePair SamplePair(const std::vector<ClipTensor>& clips,
                              const PairSpec& spec, Rng& rng) {
  const PairIndices idx =
      SamplePairIndices(static_cast<int>(clips.size()), spec, rng);
  ObservedFuturePair pair;
  pair.offset = idx.offset;
  pair.obs_start = idx.obs_start;
  pair.observed.assign(clips.begin() + idx.obs_start,
                       clips.begin() + idx.obs_start + spec.n_obs);
  pair.future.assign(clips.begin() + idx.future_start,
                     clips.begin() + idx.future_start + spec.n_future);
  return pair;
}

}  // namespace mvp::sampling
