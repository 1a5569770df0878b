#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "mvp/synthcorpus.h"

namespace mvp::synth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little,
              "frame files are written as native little-endian float32");

std::string VideoStem(int64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "video_%05lld", static_cast<long long>(id));
  return buf;
}

json ReadJsonFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

void WriteTextFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

json ToJson(const ActionGrammar& g) {
  json j;
  j["n_verbs"] = g.n_verbs;
  j["n_nouns"] = g.n_nouns;
  j["seed"] = g.seed;
  j["follow_prob"] = g.follow_prob;
  j["successor"] = g.successor;
  json cas = json::array();
  for (const ComplexAction& ca : g.complex_actions) {
    json atoms = json::array();
    for (const AtomicTemplate& a : ca.atomics) {
      atoms.push_back({{"verb", a.verb},
                       {"noun", a.noun},
                       {"min_clips", a.min_clips},
                       {"max_clips", a.max_clips}});
    }
    cas.push_back({{"id", ca.id}, {"atomics", atoms}});
  }
  j["complex_actions"] = cas;
  return j;
}

ActionGrammar GrammarFromJson(const json& j) {
  ActionGrammar g;
  g.n_verbs = j.at("n_verbs");
  g.n_nouns = j.at("n_nouns");
  g.seed = j.at("seed");
  g.follow_prob = j.at("follow_prob");
  g.successor = j.at("successor").get<std::vector<int>>();
  for (const json& cj : j.at("complex_actions")) {
    ComplexAction ca;
    ca.id = cj.at("id");
    for (const json& aj : cj.at("atomics")) {
      ca.atomics.push_back({aj.at("verb"), aj.at("noun"), aj.at("min_clips"),
                            aj.at("max_clips")});
    }
    g.complex_actions.push_back(std::move(ca));
  }
  g.Validate();
  return g;
}

json ToJson(const ActionTimeline& tl) {
  json spans = json::array();
  for (const Span& s : tl.spans) {
    spans.push_back({s.complex_id, s.atomic_index, s.verb, s.noun,
                     s.start_clip, s.end_clip});
  }
  return {{"total_clips", tl.total_clips}, {"spans", spans}};
}

ActionTimeline TimelineFromJson(const json& j) {
  ActionTimeline tl;
  tl.total_clips = j.at("total_clips");
  for (const json& s : j.at("spans")) {
    tl.spans.push_back({s.at(0), s.at(1), s.at(2), s.at(3), s.at(4), s.at(5)});
  }
  tl.Validate();
  return tl;
}

json ToJson(const CorpusConfig& c) {
  return {{"grammar_seed", c.grammar_seed},
          {"corpus_seed", c.corpus_seed},
          {"n_train", c.n_train},
          {"n_eval", c.n_eval},
          {"clips_per_video", c.clips_per_video},
          {"frame_size", c.frame_size},
          {"n_verbs", c.n_verbs},
          {"n_nouns", c.n_nouns},
          {"n_complex", c.n_complex},
          {"noise_std", c.render.noise_std},
          {"knobs",
           {{"min_atomics", c.knobs.min_atomics},
            {"max_atomics", c.knobs.max_atomics},
            {"min_duration_lo", c.knobs.min_duration_lo},
            {"min_duration_hi", c.knobs.min_duration_hi},
            {"duration_spread", c.knobs.duration_spread},
            {"follow_prob", c.knobs.follow_prob}}}};
}

CorpusConfig CorpusConfigFromJson(const json& j) {
  CorpusConfig c;
  c.grammar_seed = j.value("grammar_seed", c.grammar_seed);
  c.corpus_seed = j.value("corpus_seed", c.corpus_seed);
  c.n_train = j.value("n_train", c.n_train);
  c.n_eval = j.value("n_eval", c.n_eval);
  c.clips_per_video = j.value("clips_per_video", c.clips_per_video);
  c.frame_size = j.value("frame_size", c.frame_size);
  c.n_verbs = j.value("n_verbs", c.n_verbs);
  c.n_nouns = j.value("n_nouns", c.n_nouns);
  c.n_complex = j.value("n_complex", c.n_complex);
  c.render.noise_std = j.value("noise_std", c.render.noise_std);
  if (j.contains("knobs")) {
    const json& k = j.at("knobs");
    c.knobs.min_atomics = k.value("min_atomics", c.knobs.min_atomics);
    c.knobs.max_atomics = k.value("max_atomics", c.knobs.max_atomics);
    c.knobs.min_duration_lo = k.value("min_duration_lo", c.knobs.min_duration_lo);
    c.knobs.min_duration_hi = k.value("min_duration_hi", c.knobs.min_duration_hi);
    c.knobs.duration_spread = k.value("duration_spread", c.knobs.duration_spread);
    c.knobs.follow_prob = k.value("follow_prob", c.knobs.follow_prob);
  }
  return c;
}

Corpus::Corpus(CorpusConfig config, ActionGrammar grammar,
               std::vector<VideoRecord> videos)
    : config_(std::move(config)),
      grammar_(std::move(grammar)),
      videos_(std::move(videos)) {}

std::vector<int> Corpus::TrainIndices() const {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(videos_.size()); ++i) {
    if (videos_[i].id < config_.n_train) idx.push_back(i);
  }
  return idx;
}

std::vector<int> Corpus::EvalIndices() const {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(videos_.size()); ++i) {
    if (videos_[i].id >= config_.n_train) idx.push_back(i);
  }
  return idx;
}

struct Corpus::ClipCache {
  std::mutex mu;
  std::vector<std::vector<float>> clips;
};

void Corpus::EnableClipCache() {
  if (cache_) return;
  cache_ = std::make_shared<ClipCache>();
  cache_->clips.resize(videos_.size() * config_.clips_per_video);
}

Tensor Corpus::Clip(int video_index, int clip) const {
  const VideoRecord& v = videos_.at(video_index);
  const FrameSize fs = frame_size();
  if (clip < 0 || clip >= v.timeline.total_clips) {
    throw std::out_of_range("clip index outside video");
  }
  const int64_t n = int64_t{kFramesPerClip} * fs.height * fs.width * kChannels;
  std::vector<float> buf;
  const size_t slot = size_t(video_index) * config_.clips_per_video + clip;
  if (cache_) {
    std::lock_guard<std::mutex> lock(cache_->mu);
    buf = cache_->clips.at(slot);
  }
  if (buf.empty() && frame_dir_.empty()) {
    const Tensor t = RenderClip(v.timeline, clip, fs, v.video_seed, config_.render);
    buf.assign(t.storage().begin(), t.storage().end());
  } else if (buf.empty()) {
    buf.resize(n);
    const fs::path path = frame_dir_ / (VideoStem(v.id) + ".f32");
    std::ifstream in(path, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(clip * n * sizeof(float)));
    in.read(reinterpret_cast<char*>(buf.data()), n * sizeof(float));
    if (!in) throw std::runtime_error("short read from " + path.string());
  }
  if (cache_) {
    std::lock_guard<std::mutex> lock(cache_->mu);
    if (cache_->clips[slot].empty()) cache_->clips[slot] = buf;
  }
  Tensor out({kFramesPerClip, fs.height, fs.width, kChannels});
  for (int64_t i = 0; i < n; ++i) out[i] = buf[i];
  return out;
}

SyntheticVideo Corpus::Video(int video_index) const {
  const VideoRecord& v = videos_.at(video_index);
  std::vector<Tensor> clips;
  for (int c = 0; c < v.timeline.total_clips; ++c) {
    clips.push_back(Clip(video_index, c));
  }
  SyntheticVideo out;
  out.frames = Tensor({int64_t{v.timeline.total_clips} * kFramesPerClip,
                       config_.frame_size, config_.frame_size, kChannels},
                      ConcatRows(clips).storage());
  out.timeline = v.timeline;
  out.summary = v.summary;
  out.video_seed = v.video_seed;
  return out;
}

Corpus GenerateCorpus(const CorpusConfig& config) {
  if (config.n_train < 1 || config.n_eval < 0) {
    throw std::invalid_argument("corpus needs at least one training video");
  }
  ActionGrammar grammar =
      BuildGrammar(config.grammar_seed, config.n_verbs, config.n_nouns,
                   config.n_complex, config.knobs);
  std::vector<VideoRecord> videos;
  const int total = config.n_train + config.n_eval;
  videos.reserve(total);
  for (int i = 0; i < total; ++i) {
    Rng rng(DeriveSeed(config.corpus_seed, static_cast<uint64_t>(i)));
    VideoRecord v;
    v.id = i;
    v.video_seed = DeriveSeed(config.corpus_seed, static_cast<uint64_t>(i),
                              0x5eed);
    v.timeline = SampleTimeline(grammar, rng, config.clips_per_video);
    v.summary = Summarize(v.timeline);
    videos.push_back(std::move(v));
  }
  return Corpus(config, std::move(grammar), std::move(videos));
}

void WriteCorpus(const Corpus& corpus, const fs::path& dir, int threads) {
  fs::create_directories(dir);
  const auto& videos = corpus.videos();
  const ActionGrammar& g = corpus.grammar();
  auto write_one = [&](size_t i) {
    const VideoRecord& v = videos[i];
    SyntheticVideo sv = corpus.Video(static_cast<int>(i));
    std::vector<float> buf(sv.frames.size());
    for (int64_t k = 0; k < sv.frames.size(); ++k) {
      buf[k] = static_cast<float>(sv.frames[k]);
    }
    const std::string stem = VideoStem(v.id);
    {
      std::ofstream out(dir / (stem + ".f32.tmp"), std::ios::binary);
      out.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
      if (!out) throw std::runtime_error("write failed for " + stem);
    }
    fs::rename(dir / (stem + ".f32.tmp"), dir / (stem + ".f32"));
    const WindowLabels full = LabelsForWindow(
        v.timeline, g.n_verbs, g.n_nouns, 0, v.timeline.total_clips);
    json side;
    side["id"] = v.id;
    side["video_seed"] = v.video_seed;
    side["split"] = v.id < corpus.config().n_train ? "train" : "eval";
    side["frames_shape"] = sv.frames.shape();
    side["timeline"] = ToJson(v.timeline);
    side["summary"] = v.summary.tokens;
    side["labels"] = {{"verb_multi_hot", full.verb_multi_hot},
                      {"noun_multi_hot", full.noun_multi_hot},
                      {"per_clip_actions", full.per_clip_actions}};
    WriteTextFile(dir / (stem + ".json"), side.dump(1));
  };
  threads = std::max(1, threads);
  if (threads == 1) {
    for (size_t i = 0; i < videos.size(); ++i) write_one(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (size_t i = t; i < videos.size(); i += threads) write_one(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  json manifest;
  manifest["format"] = "mvp-lab-corpus/1";
  manifest["config"] = ToJson(corpus.config());
  manifest["grammar"] = ToJson(g);
  json list = json::array();
  for (const VideoRecord& v : videos) {
    list.push_back({{"id", v.id},
                    {"video_seed", v.video_seed},
                    {"stem", VideoStem(v.id)}});
  }
  manifest["videos"] = list;
  WriteTextFile(dir / "manifest.json", manifest.dump(1));
}

Corpus ReadCorpus(const fs::path& dir) {
  const json manifest = ReadJsonFile(dir / "manifest.json");
  CorpusConfig config = CorpusConfigFromJson(manifest.at("config"));
  ActionGrammar grammar = GrammarFromJson(manifest.at("grammar"));
  std::vector<VideoRecord> videos;
  for (const json& entry : manifest.at("videos")) {
    const json side = ReadJsonFile(dir / (entry.at("stem").get<std::string>() +
                                          ".json"));
    VideoRecord v;
    v.id = side.at("id");
    v.video_seed = side.at("video_seed");
    v.timeline = TimelineFromJson(side.at("timeline"));
    v.summary.tokens = side.at("summary").get<std::vector<int>>();
    videos.push_back(std::move(v));
  }
  Corpus corpus(std::move(config), std::move(grammar), std::move(videos));
  corpus.AttachFrameDirectory(dir);
  return corpus;
}

}  // namespace mvp::synth
