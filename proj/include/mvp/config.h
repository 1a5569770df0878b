#ifndef MVP_CONFIG_H_
#define MVP_CONFIG_H_

#include <cstdint>
#include <string>

#include "json.hpp"
#include "mvp/aggregation.h"
#include "mvp/encoder.h"
#include "mvp/sampling.h"
#include "mvp/synthcorpus.h"

namespace mvp {

struct OptimizerConfig {
  std::string kind = "adamw";  // adamw | sgd
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int steps = 2000;
  int batch = 16;
};

struct ProbeConfig {
  int steps = 400;
  double lr = 1e-2;
  double weight_decay = 1e-4;
  int obs_clips = 4;         // agnostic and specific tasks
  int specific_steps = 8;
  double summary_obs_fraction = 0.5;
  int d_joint = 64;
  int d_text = 64;
  double tau = 0.1;
  // Frozen feature fed to the probes: "context" (meanpooled last-timestep
  // output of the pretrained temporal attention), "summary" (h_phi output),
  // or "auto" (summary for cvrl_seq, context otherwise).
  std::string feature = "auto";
};

struct RunConfig {
  uint64_t model_seed = 0;
  uint64_t sampling_seed = 0;
  synth::CorpusConfig corpus;
  EncoderConfig encoder;
  sampling::PairSpec pair;
  std::string objective = "mvp";  // mvp|cpc|cvrl_seq|mvp_single_scale|mvp_no_agg
  double tau = 0.1;
  bool normalize = false;
  int agg_heads = 4;
  std::string causal_target = "meanpool";  // meanpool | attention
  bool stop_target_grad = true;
  SummaryConfig summary;
  OptimizerConfig optim;
  int checkpoint_every = 400;
  int eval_batch = 32;
  ProbeConfig probe;
  std::string out_dir;

  void Validate() const;
  std::string ProbeFeature() const;
};

nlohmann::json ToJson(const RunConfig& config);
// Missing keys keep their defaults; unknown top-level keys are rejected.
RunConfig RunConfigFromJson(const nlohmann::json& j);
RunConfig LoadRunConfig(const std::string& path);

// FNV-1a over the canonical JSON dump, excluding out_dir; 16 hex digits.
std::string ConfigHash(const RunConfig& config);
std::string Fnv1aHex(const std::string& bytes);

}  // namespace mvp

#endif  // MVP_CONFIG_H_
