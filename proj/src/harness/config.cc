#include "mvp/config.h"

#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

namespace mvp {

namespace {

using nlohmann::json;

const std::set<std::string> kObjectives = {"mvp", "cpc", "cvrl_seq",
                                           "mvp_single_scale", "mvp_no_agg"};

template <typename T>
void Read(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

json ToJson(const OptimizerConfig& o) {
  return {{"kind", o.kind},   {"lr", o.lr},     {"weight_decay", o.weight_decay},
          {"beta1", o.beta1}, {"beta2", o.beta2}, {"eps", o.eps},
          {"steps", o.steps}, {"batch", o.batch}};
}

OptimizerConfig OptimizerFromJson(const json& j) {
  OptimizerConfig o;
  Read(j, "kind", o.kind);
  Read(j, "lr", o.lr);
  Read(j, "weight_decay", o.weight_decay);
  Read(j, "beta1", o.beta1);
  Read(j, "beta2", o.beta2);
  Read(j, "eps", o.eps);
  Read(j, "steps", o.steps);
  Read(j, "batch", o.batch);
  return o;
}

json ToJson(const ProbeConfig& p) {
  return {{"steps", p.steps},
          {"lr", p.lr},
          {"weight_decay", p.weight_decay},
          {"obs_clips", p.obs_clips},
          {"specific_steps", p.specific_steps},
          {"summary_obs_fraction", p.summary_obs_fraction},
          {"d_joint", p.d_joint},
          {"d_text", p.d_text},
          {"tau", p.tau},
          {"feature", p.feature}};
}

ProbeConfig ProbeFromJson(const json& j) {
  ProbeConfig p;
  Read(j, "steps", p.steps);
  Read(j, "lr", p.lr);
  Read(j, "weight_decay", p.weight_decay);
  Read(j, "obs_clips", p.obs_clips);
  Read(j, "specific_steps", p.specific_steps);
  Read(j, "summary_obs_fraction", p.summary_obs_fraction);
  Read(j, "d_joint", p.d_joint);
  Read(j, "d_text", p.d_text);
  Read(j, "tau", p.tau);
  Read(j, "feature", p.feature);
  return p;
}

json ToJson(const sampling::PairSpec& s) {
  return {{"n_obs", s.n_obs},
          {"n_future", s.n_future},
          {"offset", s.offset.ToString()},
          {"stride", s.stride}};
}

sampling::PairSpec PairFromJson(const json& j) {
  sampling::PairSpec s;
  Read(j, "n_obs", s.n_obs);
  Read(j, "n_future", s.n_future);
  Read(j, "stride", s.stride);
  if (j.contains("offset")) {
    s.offset = sampling::OffsetMode::Parse(j.at("offset").get<std::string>());
  }
  return s;
}

json ToJson(const SummaryConfig& s) {
  return {{"dim", s.dim},
          {"heads", s.heads},
          {"ff_hidden", s.ff_hidden},
          {"max_len", s.max_len}};
}

SummaryConfig SummaryFromJson(const json& j) {
  SummaryConfig s;
  Read(j, "dim", s.dim);
  Read(j, "heads", s.heads);
  Read(j, "ff_hidden", s.ff_hidden);
  Read(j, "max_len", s.max_len);
  return s;
}

}  // namespace

void RunConfig::Validate() const {
  auto fail = [](const std::string& m) {
    throw std::invalid_argument("run config: " + m);
  };
  encoder.Validate();
  pair.Validate();
  if (!kObjectives.count(objective)) fail("unknown objective '" + objective + "'");
  if (!(tau > 0.0)) fail("loss.tau must be > 0");
  if (causal_target != "meanpool" && causal_target != "attention") {
    fail("agg.causal_target must be meanpool or attention");
  }
  if (encoder.height != corpus.frame_size || encoder.width != corpus.frame_size) {
    fail("encoder input size must equal corpus frame size");
  }
  if (encoder.frames != synth::kFramesPerClip) fail("encoder.frames must be 8");
  if (agg_heads < 1 || encoder.out_dim() % agg_heads) {
    fail("agg.heads must divide the encoder width");
  }
  if (summary.dim != encoder.out_dim()) fail("summary.dim must equal encoder width");
  if (optim.kind != "adamw" && optim.kind != "sgd") fail("optim.kind must be adamw or sgd");
  if (optim.steps < 0 || optim.batch < 1) fail("optim steps/batch out of range");
  if (objective == "cvrl_seq" && optim.batch < 2) fail("cvrl_seq needs batch >= 2");
  if (checkpoint_every < 1) fail("checkpoint_every must be >= 1");
  if (eval_batch < 2) fail("eval_batch must be >= 2");
  if (pair.MinClips() > corpus.clips_per_video) {
    fail("videos of " + std::to_string(corpus.clips_per_video) +
         " clips are shorter than the pair spec needs (" +
         std::to_string(pair.MinClips()) + ")");
  }
  if (probe.obs_clips + probe.specific_steps > corpus.clips_per_video) {
    fail("probe windows exceed the video length");
  }
  const std::string f = probe.feature;
  if (f != "auto" && f != "context" && f != "summary") {
    fail("probe.feature must be auto, context or summary");
  }
}

std::string RunConfig::ProbeFeature() const {
  if (probe.feature != "auto") return probe.feature;
  return objective == "cvrl_seq" ? "summary" : "context";
}

json ToJson(const RunConfig& c) {
  return {{"seeds", {{"model", c.model_seed}, {"sampling", c.sampling_seed}}},
          {"corpus", synth::ToJson(c.corpus)},
          {"encoder", ToJson(c.encoder)},
          {"pair", ToJson(c.pair)},
          {"loss",
           {{"objective", c.objective},
            {"tau", c.tau},
            {"normalize", c.normalize}}},
          {"agg",
           {{"heads", c.agg_heads},
            {"causal_target", c.causal_target},
            {"stop_target_grad", c.stop_target_grad}}},
          {"summary", ToJson(c.summary)},
          {"optim", ToJson(c.optim)},
          {"checkpoint_every", c.checkpoint_every},
          {"eval_batch", c.eval_batch},
          {"probe", ToJson(c.probe)},
          {"out_dir", c.out_dir}};
}

RunConfig RunConfigFromJson(const json& j) {
  static const std::set<std::string> known = {
      "seeds", "corpus", "encoder", "pair", "loss", "agg", "summary",
      "optim", "checkpoint_every", "eval_batch", "probe", "out_dir"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw std::invalid_argument("unknown config key '" + k + "'");
  }
  RunConfig c;
  if (j.contains("seeds")) {
    Read(j.at("seeds"), "model", c.model_seed);
    Read(j.at("seeds"), "sampling", c.sampling_seed);
  }
  if (j.contains("corpus")) c.corpus = synth::CorpusConfigFromJson(j.at("corpus"));
  if (j.contains("encoder")) c.encoder = EncoderConfigFromJson(j.at("encoder"));
  if (j.contains("pair")) c.pair = PairFromJson(j.at("pair"));
  if (j.contains("loss")) {
    Read(j.at("loss"), "objective", c.objective);
    Read(j.at("loss"), "tau", c.tau);
    Read(j.at("loss"), "normalize", c.normalize);
  }
  if (j.contains("agg")) {
    Read(j.at("agg"), "heads", c.agg_heads);
    Read(j.at("agg"), "causal_target", c.causal_target);
    Read(j.at("agg"), "stop_target_grad", c.stop_target_grad);
  }
  if (j.contains("summary")) c.summary = SummaryFromJson(j.at("summary"));
  if (j.contains("optim")) c.optim = OptimizerFromJson(j.at("optim"));
  Read(j, "checkpoint_every", c.checkpoint_every);
  Read(j, "eval_batch", c.eval_batch);
  if (j.contains("probe")) c.probe = ProbeFromJson(j.at("probe"));
  Read(j, "out_dir", c.out_dir);
  return c;
}

RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config " + path + ": " + e.what());
  }
  return RunConfigFromJson(j);
}

std::string Fnv1aHex(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ConfigHash(const RunConfig& config) {
  json j = ToJson(config);
  j.erase("out_dir");
  return Fnv1aHex(j.dump());
}

}  // namespace mvp
