#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "mvp/aggregation.h"
#include "mvp/encoder.h"
#include "mvp/harness.h"
#include "mvp/objective.h"
#include "mvp/optim.h"

namespace mvp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kAggPrefix = "agg.";

TargetKind KindFor(const std::string& objective) {
  if (objective == "mvp_single_scale") return TargetKind::kSingleScale;
  if (objective == "mvp_no_agg") return TargetKind::kNoAggregation;
  return TargetKind::kMultiscale;
}

void AppendClips(const synth::Corpus& corpus, int video, int first, int count,
                 std::vector<double>& out) {
  for (int c = first; c < first + count; ++c) {
    const Tensor clip = corpus.Clip(video, c);
    out.insert(out.end(), clip.storage().begin(), clip.storage().end());
  }
}

std::string StepDir(int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "step_%06lld", static_cast<long long>(step));
  return buf;
}

}  // namespace

void ConfigureAllocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 256 << 20);
#endif
}

int NumHeads(const RunConfig& config) { return config.pair.NPredictions(); }

sampling::PairSpec EffectivePairSpec(const RunConfig& config) {
  sampling::PairSpec spec = config.pair;
  if (config.objective == "cpc") {
    spec.n_future = NumHeads(config);
    spec.stride = 1;
    spec.offset = sampling::OffsetMode::Fixed(1);
  }
  return spec;
}

ParamSet InitModel(const RunConfig& config) {
  config.Validate();
  const int d = config.encoder.out_dim();
  ParamSet p = InitEncoder(config.encoder, config.model_seed).params;
  p.Merge(InitAttention(kAggPrefix, d, config.agg_heads,
                        DeriveSeed(config.model_seed, 1))
              .params);
  HeadsConfig heads;
  heads.n_heads = NumHeads(config);
  heads.dim = d;
  heads.hidden = 2 * d;
  p.Merge(InitPredictionHeads(heads, DeriveSeed(config.model_seed, 2)));
  p.Merge(InitObservedSummary(config.summary, DeriveSeed(config.model_seed, 3)));
  return p;
}

Batch SampleBatch(const RunConfig& config, const synth::Corpus& corpus,
                  const std::vector<int>& pool, int size, Rng& rng) {
  if (pool.empty()) throw std::invalid_argument("empty video pool");
  const sampling::PairSpec spec = EffectivePairSpec(config);
  const bool two_view = config.objective == "cvrl_seq";
  Batch b;
  b.size = size;
  b.n_obs = spec.n_obs;
  b.n_future = two_view ? spec.n_obs : spec.n_future;
  std::vector<double> obs;
  std::vector<double> fut;
  for (int i = 0; i < size; ++i) {
    const int v = pool[rng.UniformInt(0, static_cast<int64_t>(pool.size()) - 1)];
    b.videos.push_back(v);
    const int total = corpus.videos()[v].timeline.total_clips;
    if (two_view) {
      const int a = static_cast<int>(rng.UniformInt(0, total - spec.n_obs));
      const int c = static_cast<int>(rng.UniformInt(0, total - spec.n_obs));
      AppendClips(corpus, v, a, spec.n_obs, obs);
      AppendClips(corpus, v, c, spec.n_obs, fut);
    } else {
      const sampling::PairIndices idx =
          sampling::SamplePairIndices(total, spec, rng);
      AppendClips(corpus, v, idx.obs_start, spec.n_obs, obs);
      AppendClips(corpus, v, idx.future_start, spec.n_future, fut);
    }
  }
  const int64_t clip = config.encoder.ClipSize();
  b.observed = Tensor({int64_t{size} * b.n_obs, clip}, std::move(obs));
  b.future = Tensor({int64_t{size} * b.n_future, clip}, std::move(fut));
  return b;
}

ObjectiveOutput ObjectiveForward(const RunConfig& config,
                                 const ParamSet& params, Binding& bind,
                                 const Batch& batch) {
  const EncoderConfig& ec = config.encoder;
  const RegionGrid grid = ec.OutputGrid();
  const int r = grid.regions();
  const int b = batch.size;
  Binding frozen(params, false);
  Binding& target_bind = config.stop_target_grad ? frozen : bind;
  ObjectiveOutput out;

  if (config.objective == "cvrl_seq") {
    Var za = EncodeClips(bind, ec, Var::Constant(batch.observed));
    Var zb = EncodeClips(target_bind, ec, Var::Constant(batch.future));
    Var sa = ObservedSummary(bind, config.summary, za, grid, b, batch.n_obs);
    Var sb = ObservedSummary(target_bind, config.summary, zb, grid, b,
                             batch.n_obs);
    out.loss = CvrlSeqLoss(sa, sb, config.tau, config.normalize);
    out.report.mean = out.loss.value()[0];
    out.report.total = out.report.mean * b;
    out.report.anchor_count = b;
    out.report.tau = config.tau;
    out.accuracy =
        PretrainRegionAccuracy(sa.value(), sb.value(), config.normalize);
    return out;
  }

  Var zo = EncodeClips(bind, ec, Var::Constant(batch.observed));
  Var zf = EncodeClips(target_bind, ec, Var::Constant(batch.future));
  Var ctx = SpatialMha(bind, kAggPrefix, config.agg_heads, zo, grid, b,
                       batch.n_obs, /*causal=*/false);
  const int heads = NumHeads(config);
  InfoNceResult res;
  if (config.objective == "cpc") {
    res = CpcLoss(bind, ctx, zf, b, batch.n_obs, batch.n_future, r, heads,
                  config.tau, config.normalize);
  } else {
    const int stride = config.pair.stride;
    Var targets =
        config.causal_target == "attention"
            ? AttentionTargets(target_bind, kAggPrefix, config.agg_heads, zf,
                               grid, b, batch.n_future, stride)
            : CausalTargets(zf, KindFor(config.objective), b, batch.n_future,
                            r, stride);
    Var preds = PredictFuture(bind, ctx, b, batch.n_obs, r, heads);
    res = MvpInfoNce(preds, targets, b, heads, r, config.tau,
                     config.normalize);
  }
  out.report = res.report;
  out.loss = ops::Scale(res.loss, 1.0 / static_cast<double>(
                                            res.report.anchor_count));
  out.accuracy =
      PretrainRegionAccuracy(res.anchors, res.targets, config.normalize);
  return out;
}

void MetricsLog::Append(json record) {
  const int64_t step = record.at("step").get<int64_t>();
  if (!records_.empty() && step <= records_.back().at("step").get<int64_t>()) {
    throw std::invalid_argument("metrics steps must increase");
  }
  records_.push_back(std::move(record));
}

void MetricsLog::Write(const fs::path& path) const {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    for (const json& r : records_) out << r.dump() << "\n";
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("write failed: " + path.string());
    }
  }
  fs::rename(tmp, path);
}

MetricsLog MetricsLog::Read(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  MetricsLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) log.Append(json::parse(line));
  }
  return log;
}

std::vector<json> MetricsLog::WithoutWallTime() const {
  std::vector<json> out = records_;
  for (json& r : out) r.erase("wall_s");
  return out;
}

PretrainResult RunPretrain(const RunConfig& config, const synth::Corpus& corpus,
                           const ProgressFn& progress) {
  config.Validate();
  const std::string hash = ConfigHash(config);
  const json config_json = ToJson(config);
  const bool persist = !config.out_dir.empty();
  const fs::path out_dir = config.out_dir;
  if (persist) {
    fs::create_directories(out_dir / "checkpoints");
    std::ofstream(out_dir / "config.json") << config_json.dump(2) << "\n";
  }

  ParamSet params = InitModel(config);
  Optimizer opt(config.optim);
  const std::vector<int> pool = corpus.TrainIndices();
  Rng rng(DeriveSeed(config.sampling_seed, 0xDA7A));
  Rng eval_rng(DeriveSeed(config.sampling_seed, 0xE7A1));
  const Batch eval_batch =
      SampleBatch(config, corpus, pool, config.eval_batch, eval_rng);

  PretrainResult result;
  const auto t0 = std::chrono::steady_clock::now();
  auto checkpoint = [&](int64_t step) {
    Binding bind(params, false);
    const ObjectiveOutput eval = ObjectiveForward(config, params, bind, eval_batch);
    Checkpoint ck;
    ck.config = config_json;
    ck.config_hash = hash;
    ck.step = step;
    ck.params = ToFloat32(params);
    ck.metrics = {{"pretrain_region_accuracy", eval.accuracy},
                  {"eval_loss_mean", eval.report.mean}};
    if (persist) {
      const fs::path dir = out_dir / "checkpoints" / StepDir(step);
      SaveCheckpoint(ck, dir);
      result.checkpoints.push_back(dir);
    }
    if (progress) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "checkpoint step %lld eval_loss %.4f pretrain_acc %.4f",
                    static_cast<long long>(step), eval.report.mean, eval.accuracy);
      progress(buf);
    }
  };

  checkpoint(0);
  for (int step = 1; step <= config.optim.steps; ++step) {
    const Batch batch =
        SampleBatch(config, corpus, pool, config.optim.batch, rng);
    Binding bind(params, true);
    ObjectiveOutput out;
    try {
      out = ObjectiveForward(config, params, bind, batch);
      if (!std::isfinite(out.report.total)) {
        throw std::runtime_error("non-finite loss");
      }
    } catch (const std::exception& e) {
      if (persist) {
        Checkpoint snap;
        snap.config = config_json;
        snap.config_hash = hash;
        snap.step = step;
        snap.params = ToFloat32(params);
        snap.metrics = {{"error", e.what()}, {"videos", batch.videos}};
        SaveCheckpoint(snap, out_dir / "nan_snapshot");
        result.log.Write(out_dir / "metrics.jsonl");
      }
      throw std::runtime_error("pretraining aborted at step " +
                               std::to_string(step) + ": " + e.what() +
                               (persist ? " (snapshot in nan_snapshot/)" : ""));
    }
    Backward(out.loss);
    opt.Step(params, bind.Gradients());
    const double wall = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    result.log.Append({{"step", step},
                       {"loss_sum", out.report.total},
                       {"loss_mean", out.report.mean},
                       {"pretrain_region_accuracy", out.accuracy},
                       {"config_hash", hash},
                       {"wall_s", wall}});
    if (!params.AllFinite()) {
      throw std::runtime_error("non-finite parameters after step " +
                               std::to_string(step));
    }
    const bool last = step == config.optim.steps;
    if (step % config.checkpoint_every == 0 || last) checkpoint(step);
  }
  if (persist) result.log.Write(out_dir / "metrics.jsonl");
  result.params = ToFloat32(params);
  result.final_hash = ParamHash(result.params);
  return result;
}

}  // namespace mvp
