#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "mvp/synthcorpus.h"

namespace mvp::synth {

namespace {

constexpr int kShapeKinds = 6;
constexpr int kMotionKinds = 6;
constexpr double kBasePeriodFrames = 16.0;

std::array<double, 3> HsvToRgb(double h, double s, double v) {
  const double hh = std::fmod(h, 1.0) * 6.0;
  const int sector = static_cast<int>(hh);
  const double f = hh - sector;
  const double p = v * (1 - s);
  const double q = v * (1 - s * f);
  const double t = v * (1 - s * (1 - f));
  switch (sector % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

std::array<double, 3> NounColor(int noun) {
  return HsvToRgb(0.61803398875 * noun, 0.85, 0.95);
}

bool InsideShape(int noun, double dx, double dy, double r) {
  r *= 1.0 + 0.25 * ((noun / kShapeKinds) % 2);
  switch (noun % kShapeKinds) {
    case 0:  // square
      return std::abs(dx) <= 0.8 * r && std::abs(dy) <= 0.8 * r;
    case 1:  // disc
      return dx * dx + dy * dy <= r * r;
    case 2: {  // ring
      const double d2 = dx * dx + dy * dy;
      return d2 <= r * r && d2 >= 0.3 * r * r;
    }
    case 3:  // plus
      return (std::abs(dx) <= 0.3 * r && std::abs(dy) <= r) ||
             (std::abs(dy) <= 0.3 * r && std::abs(dx) <= r);
    case 4:  // triangle, apex up
      return dy >= -r && dy <= r && std::abs(dx) <= 0.5 * (dy + r);
    default:  // bar
      return std::abs(dx) <= r && std::abs(dy) <= 0.35 * r;
  }
}

// Offset of the motif from the frame centre after `tau` frames of the span,
// in units of the motion amplitude.
std::array<double, 2> MotionOffset(int verb, int tau) {
  const double speed = 1.0 + (verb / kMotionKinds) % 2;
  const double w = 2.0 * M_PI * speed / kBasePeriodFrames;
  const double s = std::sin(w * tau);
  const double c = std::cos(w * tau);
  switch (verb % kMotionKinds) {
    case 0: return {s, 0.0};
    case 1: return {0.0, s};
    case 2: return {c, s};
    case 3: return {c, -s};
    case 4: return {s, s};
    default: return {s, -s};
  }
}

struct VideoStyle {
  std::array<double, 3> background;
  std::array<double, 3> gradient;
  double cx_jitter;
  double cy_jitter;
};

VideoStyle StyleFor(uint64_t video_seed) {
  Rng rng(DeriveSeed(video_seed, 0xB0A7));
  VideoStyle st;
  for (int ch = 0; ch < kChannels; ++ch) {
    st.background[ch] = rng.Uniform(0.05, 0.3);
    st.gradient[ch] = rng.Uniform(-0.1, 0.1);
  }
  st.cx_jitter = rng.Uniform(-0.06, 0.06);
  st.cy_jitter = rng.Uniform(-0.06, 0.06);
  return st;
}

}  // namespace

Tensor RenderClip(const ActionTimeline& timeline, int clip, FrameSize size,
                  uint64_t video_seed, const RenderOptions& options) {
  if (size.height < 16 || size.width < 16) {
    throw std::invalid_argument("frame size must be at least 16x16");
  }
  const Span& span = timeline.SpanAt(clip);
  const VideoStyle st = StyleFor(video_seed);
  const int h = size.height;
  const int w = size.width;
  const double radius = 0.16 * std::min(h, w);
  const double amp = 0.26 * std::min(h, w);
  const double cx0 = (0.5 + st.cx_jitter) * w;
  const double cy0 = (0.5 + st.cy_jitter) * h;
  const auto color = NounColor(span.noun);
  Rng noise(DeriveSeed(video_seed, 1, static_cast<uint64_t>(clip)));
  Tensor out({kFramesPerClip, h, w, kChannels});
  double* px = out.data();
  for (int f = 0; f < kFramesPerClip; ++f) {
    const int tau = (clip - span.start_clip) * kFramesPerClip + f;
    const auto off = MotionOffset(span.verb, tau);
    const double cx = cx0 + amp * off[0];
    const double cy = cy0 + amp * off[1];
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const bool in = InsideShape(span.noun, x + 0.5 - cx, y + 0.5 - cy,
                                    radius);
        const double ramp = (static_cast<double>(x) + y) / (h + w) - 0.5;
        for (int ch = 0; ch < kChannels; ++ch) {
          double v = in ? color[ch] : st.background[ch] + st.gradient[ch] * ramp;
          if (options.noise_std > 0) v += options.noise_std * noise.Normal();
          *px++ = std::clamp(v, 0.0, 1.0);
        }
      }
    }
  }
  return out;
}

SyntheticVideo RenderVideo(const ActionTimeline& timeline, FrameSize size,
                           uint64_t video_seed, const RenderOptions& options) {
  timeline.Validate();
  std::vector<Tensor> clips;
  clips.reserve(timeline.total_clips);
  for (int c = 0; c < timeline.total_clips; ++c) {
    clips.push_back(RenderClip(timeline, c, size, video_seed, options));
  }
  SyntheticVideo v;
  v.frames = Tensor({static_cast<int64_t>(timeline.total_clips) * kFramesPerClip,
                     size.height, size.width, kChannels},
                    ConcatRows(clips).storage());
  v.timeline = timeline;
  v.summary = Summarize(timeline);
  v.video_seed = video_seed;
  return v;
}

}  // namespace mvp::synth
