#ifndef MVP_SYNTHCORPUS_H_
#define MVP_SYNTHCORPUS_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mvp/rng.h"
#include "mvp/tensor.h"

namespace mvp::synth {

inline constexpr int kFramesPerClip = 8;
inline constexpr int kChannels = 3;
inline constexpr int kMaxSummaryTokens = 32;
inline constexpr int kBosToken = 0;
inline constexpr int kEosToken = 1;

struct AtomicTemplate {
  int verb = 0;
  int noun = 0;
  int min_clips = 1;
  int max_clips = 1;
};

struct ComplexAction {
  int id = 0;
  std::vector<AtomicTemplate> atomics;

  int MinDuration() const;
};

// Generative structure of the corpus: complex actions are ordered lists of
// atomic (verb, noun) templates. Consecutive complex actions follow a fixed
// successor permutation with probability `follow_prob`, otherwise they are
// drawn uniformly; the resulting transition matrix is doubly stochastic, so
// every complex action is equally frequent at every position.
struct ActionGrammar {
  int n_verbs = 0;
  int n_nouns = 0;
  std::vector<ComplexAction> complex_actions;
  std::vector<int> successor;
  double follow_prob = 0.0;
  uint64_t seed = 0;

  void Validate() const;
  int MaxMinDuration() const;
  int VocabSize() const { return 2 + static_cast<int>(complex_actions.size()); }
};

// Difficulty knobs of the generator.
struct GrammarKnobs {
  int min_atomics = 2;
  int max_atomics = 5;
  int min_duration_lo = 2;  // per-template minimum duration drawn in [lo, hi]
  int min_duration_hi = 3;
  int duration_spread = 2;  // max_clips = min_clips + U{0..spread}
  double follow_prob = 0.8;
};

ActionGrammar BuildGrammar(uint64_t seed, int n_verbs, int n_nouns,
                           int n_complex, const GrammarKnobs& knobs = {});

struct Span {
  int complex_id = 0;
  int atomic_index = 0;
  int verb = 0;
  int noun = 0;
  int start_clip = 0;
  int end_clip = 0;

  bool operator==(const Span&) const = default;
};

struct ActionTimeline {
  int total_clips = 0;
  std::vector<Span> spans;

  void Validate() const;
  // Span covering `clip`.
  const Span& SpanAt(int clip) const;
  // Complex-action id of each instance, in order.
  std::vector<int> ComplexSequence() const;
};

ActionTimeline SampleTimeline(const ActionGrammar& grammar, Rng& rng,
                              int total_clips);

struct SummaryTokens {
  std::vector<int> tokens;
  bool operator==(const SummaryTokens&) const = default;
};

// [BOS, token(c_1), ..., token(c_m), EOS]; complex action c maps to token c+2.
SummaryTokens Summarize(const ActionTimeline& timeline);

struct FrameSize {
  int height = 32;
  int width = 32;
};

struct RenderOptions {
  double noise_std = 0.05;
};

struct SyntheticVideo {
  Tensor frames;  // (total_clips * 8, H, W, 3), values in [0, 1]
  ActionTimeline timeline;
  SummaryTokens summary;
  uint64_t video_seed = 0;
};

// One 8-frame clip, shape (8, H, W, 3). Depends only on the span covering the
// clip, video-level style drawn from `video_seed`, and noise seeded from
// (video_seed, clip).
Tensor RenderClip(const ActionTimeline& timeline, int clip, FrameSize size,
                  uint64_t video_seed, const RenderOptions& options = {});

SyntheticVideo RenderVideo(const ActionTimeline& timeline, FrameSize size,
                           uint64_t video_seed,
                           const RenderOptions& options = {});

struct WindowLabels {
  std::vector<uint8_t> verb_multi_hot;
  std::vector<uint8_t> noun_multi_hot;
  std::vector<std::pair<int, int>> per_clip_actions;  // (verb, noun)
};

WindowLabels LabelsForWindow(const ActionTimeline& timeline, int n_verbs,
                             int n_nouns, int start_clip, int end_clip);

// ---------------------------------------------------------------------------
// Corpus

struct CorpusConfig {
  uint64_t grammar_seed = 0;
  uint64_t corpus_seed = 1;
  int n_train = 500;
  int n_eval = 100;
  int clips_per_video = 24;
  int frame_size = 32;
  int n_verbs = 12;
  int n_nouns = 12;
  int n_complex = 8;
  GrammarKnobs knobs;
  RenderOptions render;
};

struct VideoRecord {
  int64_t id = 0;
  uint64_t video_seed = 0;
  ActionTimeline timeline;
  SummaryTokens summary;
};

// Timelines and seeds for every video; clip pixels are rendered on demand, or
// read from the raw frame files when the corpus was loaded from disk.
class Corpus {
 public:
  Corpus(CorpusConfig config, ActionGrammar grammar,
         std::vector<VideoRecord> videos);

  const CorpusConfig& config() const { return config_; }
  const ActionGrammar& grammar() const { return grammar_; }
  const std::vector<VideoRecord>& videos() const { return videos_; }
  FrameSize frame_size() const {
    return {config_.frame_size, config_.frame_size};
  }

  // Indices into videos() for each split. Train and eval are disjoint by
  // construction: train ids are [0, n_train), eval ids follow.
  std::vector<int> TrainIndices() const;
  std::vector<int> EvalIndices() const;

  // Clip pixels rounded to float32, the on-disk precision, so rendered and
  // loaded corpora agree exactly.
  Tensor Clip(int video_index, int clip) const;
  // Keeps every clip requested through Clip() in memory (float32).
  void EnableClipCache();
  SyntheticVideo Video(int video_index) const;

  void AttachFrameDirectory(std::filesystem::path dir) {
    frame_dir_ = std::move(dir);
  }

 private:
  CorpusConfig config_;
  ActionGrammar grammar_;
  std::vector<VideoRecord> videos_;
  std::filesystem::path frame_dir_;
  struct ClipCache;
  std::shared_ptr<ClipCache> cache_;
};

Corpus GenerateCorpus(const CorpusConfig& config);

// Directory layout: manifest.json, video_XXXXX.f32 (raw little-endian
// float32 frames), video_XXXXX.json (timeline, summary, labels).
void WriteCorpus(const Corpus& corpus, const std::filesystem::path& dir,
                 int threads = 1);
Corpus ReadCorpus(const std::filesystem::path& dir);

nlohmann::json ToJson(const ActionGrammar& grammar);
ActionGrammar GrammarFromJson(const nlohmann::json& j);
nlohmann::json ToJson(const ActionTimeline& timeline);
ActionTimeline TimelineFromJson(const nlohmann::json& j);
nlohmann::json ToJson(const CorpusConfig& config);
CorpusConfig CorpusConfigFromJson(const nlohmann::json& j);

}  // namespace mvp::synth

#endif  // MVP_SYNTHCORPUS_H_
