// Synthetic corpus: grammar, timelines, rendering, labels and persistence.

#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <set>

#include "mvp/synthcorpus.h"

namespace mvp::synth {
namespace {

namespace fs = std::filesystem;

// Two one-clip atomics per complex action: timelines as short as 2 clips.
const GrammarKnobs kShortKnobs = [] {
  GrammarKnobs k;
  k.min_atomics = k.max_atomics = 2;
  k.min_duration_lo = k.min_duration_hi = 1;
  k.duration_spread = 0;
  return k;
}();

// One complex action made of two atomics of exactly four clips each.
ActionGrammar TwoAtomicGrammar() {
  ActionGrammar g;
  g.n_verbs = 4;
  g.n_nouns = 4;
  g.complex_actions = {{0, {{1, 2, 4, 4}, {3, 0, 4, 4}}}};
  g.successor = {0};
  g.follow_prob = 1.0;
  return g;
}

ActionGrammar TwoComplexGrammar() {
  ActionGrammar g;
  g.n_verbs = 4;
  g.n_nouns = 4;
  g.complex_actions = {{0, {{0, 0, 1, 2}, {1, 1, 1, 2}}},
                       {1, {{2, 2, 1, 2}, {3, 3, 1, 2}}}};
  g.successor = {1, 0};
  g.follow_prob = 0.5;
  return g;
}

std::string Serialize(const ActionGrammar& g) { return ToJson(g).dump(); }

TEST(GrammarTest, DeterministicAndWithinBounds) {
  const ActionGrammar a = BuildGrammar(0, 4, 4, 2);
  const ActionGrammar b = BuildGrammar(0, 4, 4, 2);
  EXPECT_EQ(Serialize(a), Serialize(b));
  ASSERT_EQ(a.complex_actions.size(), 2u);
  for (const ComplexAction& c : a.complex_actions) {
    EXPECT_GE(c.atomics.size(), 2u);
    EXPECT_LE(c.atomics.size(), 5u);
    std::set<std::pair<int, int>> seen;
    for (const AtomicTemplate& t : c.atomics) {
      EXPECT_LT(t.verb, 4);
      EXPECT_LT(t.noun, 4);
      EXPECT_GE(t.min_clips, 1);
      EXPECT_LE(t.min_clips, t.max_clips);
      EXPECT_TRUE(seen.insert({t.verb, t.noun}).second) << "drawn without replacement";
    }
  }
}

TEST(GrammarTest, RejectsCountsBelowMinimum) {
  try {
    BuildGrammar(0, 1, 4, 2);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "n_verbs < 2");
  }
  EXPECT_THROW(BuildGrammar(0, 4, 1, 2), std::invalid_argument);
  EXPECT_THROW(BuildGrammar(0, 4, 4, 0), std::invalid_argument);
}

TEST(GrammarTest, SeedsChangeTemplates) {
  EXPECT_NE(Serialize(BuildGrammar(1, 6, 6, 4)), Serialize(BuildGrammar(2, 6, 6, 4)));
}

TEST(GrammarTest, SuccessorIsAPermutation) {
  const ActionGrammar g = BuildGrammar(3, 12, 12, 8);
  std::set<int> targets(g.successor.begin(), g.successor.end());
  EXPECT_EQ(targets.size(), g.complex_actions.size());
}

TEST(TimelineTest, OnlyTilingOfFixedDurations) {
  Rng rng(0);
  const ActionTimeline tl = SampleTimeline(TwoAtomicGrammar(), rng, 16);
  ASSERT_EQ(tl.spans.size(), 4u);
  const int starts[] = {0, 4, 8, 12};
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(tl.spans[i].complex_id, 0);
    EXPECT_EQ(tl.spans[i].atomic_index, i % 2);
    EXPECT_EQ(tl.spans[i].start_clip, starts[i]);
    EXPECT_EQ(tl.spans[i].end_clip, starts[i] + 4);
  }
}

TEST(TimelineTest, SpansTileTheVideo) {
  const ActionGrammar g = BuildGrammar(5, 12, 12, 8);
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const int total = g.MaxMinDuration() + trial % 30;
    const ActionTimeline tl = SampleTimeline(g, rng, total);
    EXPECT_EQ(tl.spans.front().start_clip, 0);
    EXPECT_EQ(tl.spans.back().end_clip, total);
    for (size_t i = 1; i < tl.spans.size(); ++i) {
      EXPECT_EQ(tl.spans[i - 1].end_clip, tl.spans[i].start_clip);
    }
    // Atomic order inside each instance follows the grammar.
    for (const Span& s : tl.spans) {
      const AtomicTemplate& t = g.complex_actions[s.complex_id].atomics[s.atomic_index];
      EXPECT_EQ(s.verb, t.verb);
      EXPECT_EQ(s.noun, t.noun);
      if (s.atomic_index > 0) {
        EXPECT_EQ((&s - 1)->atomic_index, s.atomic_index - 1);
      }
    }
  }
}

TEST(TimelineTest, ComplexFrequenciesNearUniform) {
  Rng rng(1);
  std::map<int, int> counts;
  int total = 0;
  for (int i = 0; i < 1000; ++i) {
    for (int c : SampleTimeline(TwoComplexGrammar(), rng, 12).ComplexSequence()) {
      ++counts[c];
      ++total;
    }
  }
  for (int c = 0; c < 2; ++c) {
    EXPECT_NEAR(counts[c] / static_cast<double>(total), 0.5, 0.05) << c;
  }
}

TEST(TimelineTest, RejectsTooShortVideos) {
  Rng rng(0);
  EXPECT_THROW(SampleTimeline(TwoAtomicGrammar(), rng, 7), std::invalid_argument);
}

TEST(RenderTest, ShapeAndRange) {
  Rng rng(0);
  const ActionTimeline tl = SampleTimeline(BuildGrammar(0, 4, 4, 2, kShortKnobs), rng, 4);
  const SyntheticVideo v = RenderVideo(tl, {32, 32}, 77);
  EXPECT_EQ(v.frames.shape(), (Shape{32, 32, 32, 3}));
  for (double x : v.frames.values()) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
  EXPECT_THROW(RenderVideo(tl, {8, 32}, 77), std::invalid_argument);
}

TEST(RenderTest, BitIdenticalForSameSeed) {
  Rng rng(0);
  const ActionTimeline tl = SampleTimeline(BuildGrammar(0, 4, 4, 2, kShortKnobs), rng, 6);
  EXPECT_TRUE(BitwiseEqual(RenderVideo(tl, {32, 32}, 5).frames,
                           RenderVideo(tl, {32, 32}, 5).frames));
}

TEST(RenderTest, VerbChangeIsClipLocal) {
  Rng rng(2);
  const ActionTimeline a = SampleTimeline(TwoAtomicGrammar(), rng, 16);
  ActionTimeline b = a;
  b.spans[1].verb = 0;  // clips [4, 8)
  for (int c = 0; c < 16; ++c) {
    const bool same = BitwiseEqual(RenderClip(a, c, {32, 32}, 9),
                                   RenderClip(b, c, {32, 32}, 9));
    EXPECT_EQ(same, c < 4 || c >= 8) << "clip " << c;
  }
}

TEST(RenderTest, NounAndVerbBothChangePixels) {
  Rng rng(2);
  const ActionTimeline a = SampleTimeline(TwoAtomicGrammar(), rng, 16);
  ActionTimeline b = a;
  b.spans[0].noun = 1;
  EXPECT_FALSE(BitwiseEqual(RenderClip(a, 0, {32, 32}, 1), RenderClip(b, 0, {32, 32}, 1)));
}

TEST(SummaryTest, TemplateAndOrder) {
  ActionTimeline tl;
  tl.total_clips = 4;
  tl.spans = {{0, 0, 0, 0, 0, 1}, {0, 1, 1, 1, 1, 2}, {1, 0, 2, 2, 2, 3}, {1, 1, 3, 3, 3, 4}};
  EXPECT_EQ(Summarize(tl).tokens, (std::vector<int>{kBosToken, 2, 3, kEosToken}));
  ActionTimeline swapped = tl;
  for (Span& s : swapped.spans) s.complex_id = 1 - s.complex_id;
  EXPECT_NE(Summarize(swapped).tokens, Summarize(tl).tokens);
}

TEST(SummaryTest, CollisionsMatchComplexSequenceCollisions) {
  CorpusConfig cc;
  cc.n_train = 80;
  cc.n_eval = 20;
  const Corpus corpus = GenerateCorpus(cc);
  std::set<std::vector<int>> summaries;
  std::set<std::vector<int>> sequences;
  for (const VideoRecord& v : corpus.videos()) {
    summaries.insert(v.summary.tokens);
    sequences.insert(v.timeline.ComplexSequence());
    EXPECT_LE(v.summary.tokens.size(), static_cast<size_t>(kMaxSummaryTokens));
  }
  EXPECT_EQ(summaries.size(), sequences.size());
}

TEST(LabelsTest, FullWindowOfTwoAtomicExample) {
  Rng rng(0);
  const ActionTimeline tl = SampleTimeline(TwoAtomicGrammar(), rng, 16);
  const WindowLabels w = LabelsForWindow(tl, 4, 4, 0, 16);
  EXPECT_EQ(w.verb_multi_hot, (std::vector<uint8_t>{0, 1, 0, 1}));
  EXPECT_EQ(w.noun_multi_hot, (std::vector<uint8_t>{1, 0, 1, 0}));
  EXPECT_EQ(w.per_clip_actions.size(), 16u);
}

TEST(LabelsTest, WidthOneWindow) {
  Rng rng(0);
  const ActionTimeline tl = SampleTimeline(TwoAtomicGrammar(), rng, 16);
  const WindowLabels w = LabelsForWindow(tl, 4, 4, 5, 6);
  ASSERT_EQ(w.per_clip_actions.size(), 1u);
  EXPECT_EQ(w.per_clip_actions[0], std::make_pair(3, 0));
}

TEST(LabelsTest, RejectsEmptyOrInvertedWindows) {
  Rng rng(0);
  const ActionTimeline tl = SampleTimeline(TwoAtomicGrammar(), rng, 16);
  EXPECT_THROW(LabelsForWindow(tl, 4, 4, 3, 3), std::invalid_argument);
  EXPECT_THROW(LabelsForWindow(tl, 4, 4, 5, 2), std::invalid_argument);
  EXPECT_THROW(LabelsForWindow(tl, 4, 4, 0, 17), std::invalid_argument);
}

TEST(LabelsTest, MatchesBruteForceSpanScan) {
  const ActionGrammar g = BuildGrammar(4, 6, 6, 4);
  Rng rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    const ActionTimeline tl = SampleTimeline(g, rng, 24);
    const int a = static_cast<int>(rng.UniformInt(0, 23));
    const int b = static_cast<int>(rng.UniformInt(a + 1, 24));
    std::vector<uint8_t> verbs(6, 0);
    std::vector<uint8_t> nouns(6, 0);
    std::vector<std::pair<int, int>> per_clip;
    for (int c = a; c < b; ++c) {
      for (const Span& s : tl.spans) {
        if (s.start_clip <= c && c < s.end_clip) {
          verbs[s.verb] = nouns[s.noun] = 1;
          per_clip.emplace_back(s.verb, s.noun);
        }
      }
    }
    const WindowLabels w = LabelsForWindow(tl, 6, 6, a, b);
    EXPECT_EQ(w.verb_multi_hot, verbs);
    EXPECT_EQ(w.noun_multi_hot, nouns);
    EXPECT_EQ(w.per_clip_actions, per_clip);
  }
}

TEST(LabelsTest, AdjacentWindowsUnionIsOr) {
  const ActionGrammar g = BuildGrammar(4, 6, 6, 4);
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const ActionTimeline tl = SampleTimeline(g, rng, 24);
    const int a = static_cast<int>(rng.UniformInt(0, 21));
    const int m = static_cast<int>(rng.UniformInt(a + 1, 22));
    const int b = static_cast<int>(rng.UniformInt(m + 1, 24));
    const WindowLabels left = LabelsForWindow(tl, 6, 6, a, m);
    const WindowLabels right = LabelsForWindow(tl, 6, 6, m, b);
    const WindowLabels both = LabelsForWindow(tl, 6, 6, a, b);
    for (int k = 0; k < 6; ++k) {
      EXPECT_EQ(both.verb_multi_hot[k], left.verb_multi_hot[k] | right.verb_multi_hot[k]);
      EXPECT_EQ(both.noun_multi_hot[k], left.noun_multi_hot[k] | right.noun_multi_hot[k]);
    }
  }
}

TEST(CorpusTest, GenerationIsPure) {
  CorpusConfig cc;
  cc.n_train = 10;
  cc.n_eval = 4;
  const Corpus a = GenerateCorpus(cc);
  const Corpus b = GenerateCorpus(cc);
  ASSERT_EQ(a.videos().size(), 14u);
  for (size_t i = 0; i < a.videos().size(); ++i) {
    EXPECT_EQ(a.videos()[i].timeline.spans, b.videos()[i].timeline.spans);
    EXPECT_EQ(a.videos()[i].video_seed, b.videos()[i].video_seed);
  }
  EXPECT_TRUE(BitwiseEqual(a.Clip(3, 5), b.Clip(3, 5)));
}

TEST(CorpusTest, SplitsAreDisjoint) {
  CorpusConfig cc;
  cc.n_train = 10;
  cc.n_eval = 4;
  const Corpus c = GenerateCorpus(cc);
  const std::vector<int> train = c.TrainIndices();
  const std::vector<int> eval = c.EvalIndices();
  EXPECT_EQ(train.size(), 10u);
  EXPECT_EQ(eval.size(), 4u);
  for (int e : eval) EXPECT_EQ(std::count(train.begin(), train.end(), e), 0);
}

TEST(CorpusTest, EveryClassCoveredInDefaultSizedCorpus) {
  CorpusConfig cc;
  cc.n_train = 170;
  cc.n_eval = 30;
  const Corpus c = GenerateCorpus(cc);
  std::set<int> grammar_verbs;
  std::set<int> grammar_nouns;
  for (const ComplexAction& ca : c.grammar().complex_actions)
    for (const AtomicTemplate& t : ca.atomics) {
      grammar_verbs.insert(t.verb);
      grammar_nouns.insert(t.noun);
    }
  std::set<int> verbs;
  std::set<int> nouns;
  for (const VideoRecord& v : c.videos())
    for (const Span& s : v.timeline.spans) {
      verbs.insert(s.verb);
      nouns.insert(s.noun);
    }
  EXPECT_EQ(verbs, grammar_verbs);
  EXPECT_EQ(nouns, grammar_nouns);
}

TEST(CorpusTest, DiskRoundTripMatchesRendering) {
  CorpusConfig cc;
  cc.n_train = 3;
  cc.n_eval = 2;
  cc.clips_per_video = 12;
  const Corpus c = GenerateCorpus(cc);
  const fs::path dir = fs::temp_directory_path() / "mvp_corpus_roundtrip";
  fs::remove_all(dir);
  WriteCorpus(c, dir, 2);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  const Corpus back = ReadCorpus(dir);
  ASSERT_EQ(back.videos().size(), 5u);
  for (int v = 0; v < 5; ++v) {
    EXPECT_EQ(back.videos()[v].timeline.spans, c.videos()[v].timeline.spans);
    EXPECT_EQ(back.videos()[v].summary, c.videos()[v].summary);
    for (int clip : {0, 11}) EXPECT_TRUE(BitwiseEqual(back.Clip(v, clip), c.Clip(v, clip)));
    // Frame count is a multiple of the clip length.
    EXPECT_EQ(back.Video(v).frames.dim(0) % kFramesPerClip, 0);
  }
  EXPECT_EQ(fs::file_size(dir / "video_00000.f32"),
            static_cast<uintmax_t>(12 * 8 * 32 * 32 * 3 * 4));
  fs::remove_all(dir);
}

TEST(CorpusTest, CachedClipsMatchUncached) {
  CorpusConfig cc;
  cc.n_train = 2;
  cc.n_eval = 1;
  Corpus cached = GenerateCorpus(cc);
  const Corpus plain = GenerateCorpus(cc);
  cached.EnableClipCache();
  for (int pass = 0; pass < 2; ++pass) {
    EXPECT_TRUE(BitwiseEqual(cached.Clip(1, 7), plain.Clip(1, 7)));
  }
  EXPECT_THROW(plain.Clip(0, 99), std::out_of_range);
}

}  // namespace
}  // namespace mvp::synth
