// Clip partitioning and observed/future pair sampling.

#include <gtest/gtest.h>

#include <map>

#include "mvp/sampling.h"
#include "mvp/synthcorpus.h"

namespace mvp::sampling {
namespace {

synth::SyntheticVideo SmallVideo(int clips) {
  Rng rng(0);
  // Two atomics of one clip each, so timelines can be as short as 2 clips.
  synth::GrammarKnobs knobs;
  knobs.min_atomics = knobs.max_atomics = 2;
  knobs.min_duration_lo = knobs.min_duration_hi = 1;
  knobs.duration_spread = 0;
  const synth::ActionGrammar g = synth::BuildGrammar(0, 4, 4, 2, knobs);
  const synth::ActionTimeline tl = synth::SampleTimeline(g, rng, clips);
  return synth::RenderVideo(tl, {16, 16}, 3);
}

TEST(PartitionTest, ClipIndexArithmetic) {
  const synth::SyntheticVideo v = SmallVideo(4);
  const std::vector<ClipTensor> clips = Partition(v, 7);
  ASSERT_EQ(clips.size(), 4u);
  const int64_t frame = 16 * 16 * 3;
  for (int64_t i = 0; i < clips[2].values.size(); ++i) {
    EXPECT_EQ(clips[2].values[i], v.frames[16 * frame + i]);
  }
  EXPECT_EQ(clips[2].clip_index, 2);
  EXPECT_EQ(clips[2].video_id, 7);
  for (const ClipTensor& c : clips) EXPECT_EQ(c.values.dim(0), 8);
}

TEST(PartitionTest, ConcatenationRestoresVideo) {
  const synth::SyntheticVideo v = SmallVideo(5);
  std::vector<Tensor> parts;
  for (const ClipTensor& c : Partition(v)) parts.push_back(c.values);
  EXPECT_TRUE(BitwiseEqual(ConcatRows(parts).Reshaped(v.frames.shape()), v.frames));
}

TEST(PartitionTest, RejectsPartialClips) {
  synth::SyntheticVideo v = SmallVideo(2);
  v.frames = Tensor({12, 16, 16, 3});
  EXPECT_THROW(Partition(v), std::invalid_argument);
}

TEST(PartitionTest, ClipCountMatchesTimelineAcrossCorpus) {
  synth::CorpusConfig cc;
  cc.n_train = 6;
  cc.n_eval = 2;
  cc.clips_per_video = 24;
  const synth::Corpus corpus = synth::GenerateCorpus(cc);
  for (size_t i = 0; i < corpus.videos().size(); ++i) {
    EXPECT_EQ(static_cast<int>(Partition(corpus.Video(static_cast<int>(i))).size()),
              corpus.videos()[i].timeline.total_clips);
  }
}

TEST(NPredictionsTest, DividesOrFails) {
  EXPECT_EQ(NPredictions(8, 2), 4);
  EXPECT_EQ(NPredictions(8, 1), 8);
  try {
    NPredictions(8, 3);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("stride must divide future length"),
              std::string::npos);
  }
  EXPECT_THROW(NPredictions(8, 0), std::invalid_argument);
}

TEST(NPredictionsTest, ExhaustiveGrid) {
  for (int nf = 1; nf <= 8; ++nf) {
    for (int s = 1; s <= 8; ++s) {
      if (nf % s == 0) {
        EXPECT_EQ(NPredictions(nf, s), nf / s);
      } else {
        EXPECT_THROW(NPredictions(nf, s), std::invalid_argument) << nf << "/" << s;
      }
    }
  }
}

TEST(OffsetModeTest, ParseRoundTrip) {
  for (const char* text : {"fixed:4", "random:1:8"}) {
    EXPECT_EQ(OffsetMode::Parse(text).ToString(), text);
  }
  EXPECT_THROW(OffsetMode::Parse("sometimes:3"), std::invalid_argument);
}

TEST(PairSpecTest, ValidatesInvariants) {
  PairSpec s;
  EXPECT_NO_THROW(s.Validate());
  s.offset = OffsetMode::Fixed(0);
  EXPECT_THROW(s.Validate(), std::invalid_argument);
  s = PairSpec{};
  s.n_obs = 0;
  EXPECT_THROW(s.Validate(), std::invalid_argument);
  s = PairSpec{};
  s.stride = 3;
  EXPECT_THROW(s.Validate(), std::invalid_argument);
}

TEST(SamplePairTest, FixedOffsetArithmetic) {
  PairSpec spec;
  spec.offset = OffsetMode::Fixed(1);
  Rng rng(0);
  for (int i = 0; i < 100; ++i) {
    const PairIndices p = SamplePairIndices(20, spec, rng);
    EXPECT_EQ(p.future_start, p.obs_start + 5);
    EXPECT_LE(p.future_start + spec.n_future, 20);
  }
}

TEST(SamplePairTest, ClipsComeFromTheRightPlaces) {
  const synth::SyntheticVideo v = SmallVideo(24);
  const std::vector<ClipTensor> clips = Partition(v);
  PairSpec spec;
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const ObservedFuturePair p = SamplePair(clips, spec, rng);
    ASSERT_EQ(p.observed.size(), 4u);
    ASSERT_EQ(p.future.size(), 8u);
    EXPECT_EQ(p.future.front().clip_index, p.obs_start + spec.n_obs + p.offset);
    EXPECT_GT(p.future.front().clip_index, p.observed.back().clip_index);
    for (size_t k = 0; k < p.observed.size(); ++k) {
      EXPECT_EQ(p.observed[k].clip_index, p.obs_start + static_cast<int>(k));
    }
  }
}

TEST(SamplePairTest, ReproducibleForFixedSeed) {
  PairSpec spec;
  Rng a(17);
  Rng b(17);
  for (int i = 0; i < 100; ++i) {
    const PairIndices x = SamplePairIndices(24, spec, a);
    const PairIndices y = SamplePairIndices(24, spec, b);
    EXPECT_EQ(x.obs_start, y.obs_start);
    EXPECT_EQ(x.offset, y.offset);
  }
}

TEST(SamplePairTest, RandomOffsetIsUniform) {
  PairSpec spec;
  spec.offset = OffsetMode::Random(1, 8);
  Rng rng(8);
  auto histogram = [&](int n) {
    std::map<int, int> hist;
    for (int i = 0; i < n; ++i) ++hist[SamplePairIndices(24, spec, rng).offset];
    return hist;
  };
  // 10 000 draws: every bin within 5 percentage points of 1/8.
  const auto small = histogram(10000);
  ASSERT_EQ(small.size(), 8u);
  for (const auto& [k, c] : small) EXPECT_NEAR(c / 10000.0, 0.125, 0.05) << k;
  // 5% relative per bin needs more draws to be a meaningful test: at
  // 200 000 draws one standard error is 0.6% of the bin mass.
  const auto large = histogram(200000);
  ASSERT_EQ(large.size(), 8u);
  for (const auto& [k, c] : large) {
    EXPECT_NEAR(c / 200000.0, 0.125, 0.05 * 0.125) << k;
  }
}

TEST(SamplePairTest, StartIsUniformOverValidRange) {
  PairSpec spec;
  spec.offset = OffsetMode::Fixed(2);
  Rng rng(10);
  std::map<int, int> hist;
  for (int i = 0; i < 9000; ++i) ++hist[SamplePairIndices(23, spec, rng).obs_start];
  // Valid starts are 0..23-14 = 0..9.
  ASSERT_EQ(hist.size(), 10u);
  EXPECT_EQ(hist.begin()->first, 0);
  EXPECT_EQ(hist.rbegin()->first, 9);
  for (const auto& [k, c] : hist) EXPECT_NEAR(c, 900, 120) << k;
}

TEST(SamplePairTest, ShortVideoNamesRequiredLength) {
  PairSpec spec;  // 4 + 8 + 8 = 20 clips needed
  Rng rng(0);
  try {
    SamplePairIndices(19, spec, rng);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("20"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace mvp::sampling
