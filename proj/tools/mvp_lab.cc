// mvp-lab: corpus generation, pretraining, probing, ablation sweeps, gradient
// checks and checkpoint reports.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mvp/checkpoint.h"
#include "mvp/config.h"
#include "mvp/gradcheck.h"
#include "mvp/harness.h"
#include "mvp/synthcorpus.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int WorkerCap() {
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  if (const char* env = std::getenv("MVP_LAB_THREADS")) {
    const int cap = std::atoi(env);
    if (cap < 1) throw std::invalid_argument("MVP_LAB_THREADS must be >= 1");
    threads = std::min(threads, cap);
  }
  return threads;
}

void Log(const std::string& line) { std::cerr << line << std::endl; }

void WriteJson(const json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << std::endl;
    return;
  }
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const fs::path tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
  }
  fs::rename(tmp, p);
}

// The corpus a run trains on: loaded from --data when given (its config must
// match the run's corpus section unless forced), generated in memory
// otherwise.
mvp::synth::Corpus ResolveCorpus(mvp::RunConfig& config, const std::string& data,
                                 bool force) {
  if (data.empty()) {
    mvp::synth::Corpus corpus = mvp::synth::GenerateCorpus(config.corpus);
    corpus.EnableClipCache();
    return corpus;
  }
  mvp::synth::Corpus corpus = mvp::synth::ReadCorpus(data);
  const json have = mvp::synth::ToJson(corpus.config());
  const json want = mvp::synth::ToJson(config.corpus);
  if (have != want) {
    if (!force) {
      throw std::runtime_error(
          "corpus at " + data +
          " does not match the config's corpus section (use --force to "
          "train on it anyway)");
    }
    config.corpus = corpus.config();
  }
  corpus.EnableClipCache();
  return corpus;
}

mvp::RunConfig ConfigOrDefault(const std::string& path) {
  return path.empty() ? mvp::RunConfig{} : mvp::LoadRunConfig(path);
}

std::vector<mvp::AblationAxis> ParseGrid(const std::vector<std::string>& specs) {
  std::vector<mvp::AblationAxis> grid;
  for (const std::string& spec : specs) {
    const size_t eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw std::invalid_argument("grid axis must look like key=v1,v2: " + spec);
    }
    mvp::AblationAxis axis;
    axis.key = spec.substr(0, eq);
    std::string rest = spec.substr(eq + 1);
    size_t start = 0;
    while (start <= rest.size()) {
      const size_t comma = rest.find(',', start);
      const std::string item =
          rest.substr(start, comma == std::string::npos ? std::string::npos
                                                        : comma - start);
      json value = json::parse(item, nullptr, false);
      axis.values.push_back(value.is_discarded() ? json(item) : value);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    grid.push_back(std::move(axis));
  }
  return grid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mvp-lab: multiscale video pretraining at desk scale"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic corpus");
  uint64_t gen_seed = 1;
  int gen_videos = 600;
  int gen_clips = 24;
  int gen_frame = 32;
  std::string gen_out;
  std::string gen_config;
  gen->add_option("--seed", gen_seed, "Corpus seed");
  gen->add_option("--videos", gen_videos, "Total videos (train + eval)");
  gen->add_option("--clips-per-video", gen_clips, "Clips per video");
  gen->add_option("--frame-size", gen_frame, "Frame height and width");
  gen->add_option("--config", gen_config,
                  "Run config whose corpus section sets the remaining knobs");
  gen->add_option("--out", gen_out, "Output directory")->required();

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "Pretrain an encoder");
  std::string pre_config;
  std::string pre_data;
  std::string pre_out;
  int pre_steps = -1;
  bool pre_force = false;
  pre->add_option("--config", pre_config, "Run config (JSON)");
  pre->add_option("--data", pre_data, "Corpus directory from gen-data");
  pre->add_option("--out", pre_out, "Run directory")->required();
  pre->add_option("--steps", pre_steps, "Override optim.steps");
  pre->add_flag("--force", pre_force, "Accept a corpus that differs from the config");

  // probe
  auto* probe = app.add_subcommand("probe", "Linear-probe a checkpoint");
  std::string probe_task = "agnostic";
  std::string probe_ckpt;
  std::string probe_out;
  std::string probe_data;
  std::string probe_hash;
  bool probe_force = false;
  probe->add_option("--task", probe_task, "agnostic | specific | summary")
      ->check(CLI::IsMember({"agnostic", "specific", "summary"}));
  probe->add_option("--checkpoint", probe_ckpt, "Checkpoint directory")->required();
  probe->add_option("--out", probe_out, "Metrics JSON path (- for stdout)");
  probe->add_option("--data", probe_data, "Corpus directory from gen-data");
  probe->add_option("--expect-hash", probe_hash, "Required config hash");
  probe->add_flag("--force", probe_force, "Skip config hash verification");

  // ablate
  auto* abl = app.add_subcommand("ablate", "Sweep a config grid over seeds");
  std::string abl_config;
  std::string abl_data;
  std::string abl_out;
  std::string abl_csv;
  std::string abl_metric = "mean_map";
  std::vector<std::string> abl_grid;
  int abl_seeds = 3;
  int abl_steps = -1;
  bool abl_force = false;
  abl->add_option("--config", abl_config, "Base run config (JSON)");
  abl->add_option("--data", abl_data, "Corpus directory from gen-data");
  abl->add_option("--grid", abl_grid, "Axis key=v1,v2 (repeatable)")->required();
  abl->add_option("--seeds", abl_seeds, "Seeds per cell");
  abl->add_option("--metric", abl_metric, "mean_map | edit_action | r1 | r5 | r10");
  abl->add_option("--out", abl_out, "Directory for per-run artifacts");
  abl->add_option("--csv", abl_csv, "Summary CSV path")->required();
  abl->add_option("--steps", abl_steps, "Override optim.steps");
  abl->add_flag("--force", abl_force, "Accept a corpus that differs from the config");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  std::vector<std::string> gc_ops;
  uint64_t gc_seed = 0;
  double gc_eps = 1e-5;
  double gc_tol = 1e-4;
  gc->add_option("--op", gc_ops, "Operation name (repeatable; default all)");
  gc->add_option("--seed", gc_seed, "Seed");
  gc->add_option("--eps", gc_eps, "Central-difference step");
  gc->add_option("--tol", gc_tol, "Maximum relative error");

  // report
  auto* rep = app.add_subcommand("report", "Correlate pretrain accuracy with probe mAP");
  std::string rep_run;
  std::string rep_data;
  std::string rep_out;
  rep->add_option("--run", rep_run, "Pretraining run directory")->required();
  rep->add_option("--data", rep_data, "Corpus directory from gen-data");
  rep->add_option("--out", rep_out, "Report JSON path (- for stdout)");

  CLI11_PARSE(app, argc, argv);
  mvp::ConfigureAllocator();

  try {
    if (*gen) {
      mvp::synth::CorpusConfig cc = ConfigOrDefault(gen_config).corpus;
      cc.corpus_seed = gen_seed;
      cc.clips_per_video = gen_clips;
      cc.frame_size = gen_frame;
      if (gen_videos < 2) throw std::invalid_argument("--videos must be >= 2");
      // Keep the default 5:1 train/eval ratio.
      cc.n_eval = std::max(1, gen_videos / 6);
      cc.n_train = gen_videos - cc.n_eval;
      const mvp::synth::Corpus corpus = mvp::synth::GenerateCorpus(cc);
      mvp::synth::WriteCorpus(corpus, gen_out, WorkerCap());
      Log("wrote " + std::to_string(corpus.videos().size()) + " videos to " + gen_out);
      return 0;
    }
    if (*pre) {
      mvp::RunConfig config = ConfigOrDefault(pre_config);
      if (pre_steps >= 0) config.optim.steps = pre_steps;
      config.out_dir = pre_out;
      const mvp::synth::Corpus corpus = ResolveCorpus(config, pre_data, pre_force);
      const mvp::PretrainResult r = mvp::RunPretrain(config, corpus, Log);
      std::cout << json{{"config_hash", mvp::ConfigHash(config)},
                        {"final_hash", r.final_hash},
                        {"checkpoints", r.checkpoints.size()},
                        {"final_loss_mean",
                         r.log.records().empty()
                             ? json(nullptr)
                             : r.log.records().back().at("loss_mean")}}
                       .dump()
                << std::endl;
      return 0;
    }
    if (*probe) {
      const mvp::Checkpoint ck =
          mvp::LoadCheckpoint(probe_ckpt, probe_force, probe_hash);
      mvp::RunConfig config = mvp::RunConfigFromJson(ck.config);
      mvp::ParamSet params = mvp::InitModel(config);
      mvp::ApplyCheckpoint(ck, params);
      const mvp::synth::Corpus corpus =
          ResolveCorpus(config, probe_data, probe_force);
      json metrics = mvp::RunProbe(config, params, corpus, probe_task);
      metrics["checkpoint_step"] = ck.step;
      WriteJson(metrics, probe_out);
      return 0;
    }
    if (*abl) {
      mvp::RunConfig config = ConfigOrDefault(abl_config);
      if (abl_steps >= 0) config.optim.steps = abl_steps;
      config.out_dir = abl_out;
      const mvp::synth::Corpus corpus = ResolveCorpus(config, abl_data, abl_force);
      const auto rows = mvp::RunAblation(config, ParseGrid(abl_grid), abl_seeds,
                                         abl_metric, corpus, abl_csv, Log);
      int failed = 0;
      for (const auto& row : rows) failed += static_cast<int>(row.errors.size());
      std::cout << std::ifstream(abl_csv).rdbuf();
      if (failed > 0) Log(std::to_string(failed) + " run(s) failed; see " + abl_csv + ".runs.json");
      return 0;
    }
    if (*gc) {
      if (gc_ops.empty()) gc_ops = mvp::GradcheckOps();
      bool ok = true;
      for (const std::string& op : gc_ops) {
        const mvp::GradcheckResult r = mvp::FiniteDiffGradcheck(op, gc_seed, gc_eps);
        const bool pass = r.nonfinite.empty() && r.coordinates > 0 &&
                          r.max_rel_error < gc_tol;
        ok = ok && pass;
        std::printf(
            "%-24s %s max_rel_error=%.3e coords=%d worst=%s (%.3e vs %.3e)\n",
            op.c_str(), pass ? "PASS" : "FAIL", r.max_rel_error, r.coordinates,
            r.worst.c_str(), r.worst_analytic, r.worst_numeric);
      }
      return ok ? 0 : 1;
    }
    if (*rep) {
      const fs::path run(rep_run);
      const auto checkpoints = mvp::ListCheckpoints(run);
      if (checkpoints.empty()) throw std::runtime_error("no checkpoints in " + rep_run);
      mvp::RunConfig config = mvp::RunConfigFromJson(
          mvp::LoadCheckpoint(checkpoints.front()).config);
      const mvp::synth::Corpus corpus = ResolveCorpus(config, rep_data, false);
      const mvp::ReportResult r = mvp::RunReport(checkpoints, corpus, Log);
      json out = {{"steps", r.steps},
                  {"pretrain_region_accuracy", r.pretrain_accuracy},
                  {"mean_map", r.mean_map},
                  {"spearman", std::isfinite(r.spearman) ? json(r.spearman)
                                                         : json(nullptr)},
                  {"config_hash", mvp::ConfigHash(config)}};
      WriteJson(out, rep_out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
