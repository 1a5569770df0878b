#ifndef MVP_HARNESS_H_
#define MVP_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvp/checkpoint.h"
#include "mvp/config.h"
#include "mvp/objective.h"
#include "mvp/synthcorpus.h"

namespace mvp {

// Keeps freed training buffers in the heap instead of returning them to the
// kernel after every step (glibc only; a no-op elsewhere).
void ConfigureAllocator();

// ---------------------------------------------------------------------------
// Model

// Encoder (enc.*), temporal attention (agg.*), prediction heads (heads.*) and
// the observed-sequence summary (hphi.*). Every objective uses the same
// parameter layout so checkpoints are interchangeable.
ParamSet InitModel(const RunConfig& config);

// Horizons the heads predict: N_F / S, or the CPC horizon count.
int NumHeads(const RunConfig& config);

// Pair spec actually sampled by the objective (CPC pins K=1, S=1).
sampling::PairSpec EffectivePairSpec(const RunConfig& config);

struct Batch {
  Tensor observed;  // [B * n_obs, clip size]
  Tensor future;    // [B * n_future, clip size]; second view for cvrl_seq
  int size = 0;
  int n_obs = 0;
  int n_future = 0;
  std::vector<int> videos;
};

// Draws `size` training videos and one observed/future pair each.
Batch SampleBatch(const RunConfig& config, const synth::Corpus& corpus,
                  const std::vector<int>& pool, int size, Rng& rng);

struct ObjectiveOutput {
  Var loss;  // mean over anchors (the optimized quantity)
  LossReport report;
  double accuracy = 0.0;  // pretrain_region_accuracy on this batch
};

// Forward pass of the configured objective. Target-side encodings use
// `params` without gradients when stop_target_grad is set.
ObjectiveOutput ObjectiveForward(const RunConfig& config,
                                 const ParamSet& params, Binding& bind,
                                 const Batch& batch);

// ---------------------------------------------------------------------------
// Metrics log: JSON lines with strictly increasing step.

class MetricsLog {
 public:
  void Append(nlohmann::json record);
  const std::vector<nlohmann::json>& records() const { return records_; }
  void Write(const std::filesystem::path& path) const;
  static MetricsLog Read(const std::filesystem::path& path);
  // Records with the wall-clock field removed, for determinism checks.
  std::vector<nlohmann::json> WithoutWallTime() const;

 private:
  std::vector<nlohmann::json> records_;
};

// ---------------------------------------------------------------------------
// Pretraining

struct PretrainResult {
  ParamSet params;  // final, float32-rounded
  std::vector<std::filesystem::path> checkpoints;
  MetricsLog log;
  std::string final_hash;
};

using ProgressFn = std::function<void(const std::string&)>;

// Writes config.json, metrics.jsonl and checkpoints/step_XXXXXX under
// config.out_dir (nothing is written when out_dir is empty). Checkpoints are
// taken at step 0, every checkpoint_every steps and at the final step.
PretrainResult RunPretrain(const RunConfig& config, const synth::Corpus& corpus,
                           const ProgressFn& progress = nullptr);

// ---------------------------------------------------------------------------
// Probes

// Frozen feature per video from its first `n_clips` clips: [videos, D].
Tensor ExtractFeatures(const RunConfig& config, const ParamSet& params,
                       const synth::Corpus& corpus,
                       const std::vector<int>& videos, int n_clips);

// Throws if the two video-index lists share an element.
void CheckSplitDisjoint(const std::vector<int>& train,
                        const std::vector<int>& eval);

// task = agnostic | specific | summary. Trains on the corpus train split and
// evaluates on the eval split. The returned record carries "headline": mean
// mAP, action edit distance or R@1.
nlohmann::json RunProbe(const RunConfig& config, const ParamSet& params,
                        const synth::Corpus& corpus, const std::string& task);

// ---------------------------------------------------------------------------
// Ablation

struct AblationAxis {
  std::string key;  // dotted config path, or pair.n_predictions
  std::vector<nlohmann::json> values;
};

struct AblationRow {
  std::string arm;
  int seed_count = 0;
  std::string metric;
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> values;  // per seed, in seed order; NaN for failures
  std::vector<std::string> errors;
};

// Applies one dotted-key assignment to a config.
RunConfig WithSetting(const RunConfig& base, const std::string& key,
                      const nlohmann::json& value);

// Human-readable cell label plus the seed-agnostic config hash.
std::string ArmLabel(const std::vector<std::pair<std::string, nlohmann::json>>& cell,
                     const RunConfig& config);

// metric = mean_map | edit_action | r1 | r5 | r10. One pretrain + probe run
// per (cell, seed); seed s offsets the model and sampling seeds by s. Cell
// failures are recorded and the sweep continues. Writes the CSV (header
// arm,seed_count,metric,mean,std) when `csv` is non-empty.
std::vector<AblationRow> RunAblation(const RunConfig& base,
                                     const std::vector<AblationAxis>& grid,
                                     int seeds, const std::string& metric,
                                     const synth::Corpus& corpus,
                                     const std::filesystem::path& csv,
                                     const ProgressFn& progress = nullptr);

void WriteAblationCsv(const std::vector<AblationRow>& rows,
                      const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Report

// Spearman rank correlation with average ranks for ties; NaN when either
// sample is constant.
double Spearman(const std::vector<double>& x, const std::vector<double>& y);

struct ReportResult {
  std::vector<int64_t> steps;
  std::vector<double> pretrain_accuracy;
  std::vector<double> mean_map;
  double spearman = 0.0;
};

// Probes every checkpoint of a pretraining run (agnostic task) and correlates
// its recorded pretrain_region_accuracy with the probed mean mAP.
ReportResult RunReport(const std::vector<std::filesystem::path>& checkpoints,
                       const synth::Corpus& corpus,
                       const ProgressFn& progress = nullptr);

std::vector<std::filesystem::path> ListCheckpoints(
    const std::filesystem::path& run_dir);

}  // namespace mvp

#endif  // MVP_HARNESS_H_
