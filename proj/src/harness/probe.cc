#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "mvp/aggregation.h"
#include "mvp/downstream.h"
#include "mvp/encoder.h"
#include "mvp/harness.h"
#include "mvp/optim.h"

namespace mvp {

using nlohmann::json;

namespace {

constexpr int kFeatureChunk = 16;  // videos encoded per forward pass

// Per-column standardization with statistics from the training split; the
// probe stays linear in the frozen feature.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> inv_std;

  explicit Standardizer(const Tensor& x) {
    const int64_t n = x.rows();
    const int64_t d = x.cols();
    mean.assign(d, 0.0);
    inv_std.assign(d, 0.0);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < d; ++j) mean[j] += x.at(i, j) / n;
    for (int64_t j = 0; j < d; ++j) {
      double var = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        const double c = x.at(i, j) - mean[j];
        var += c * c / n;
      }
      inv_std[j] = 1.0 / std::sqrt(var + 1e-8);
    }
  }

  Tensor Apply(const Tensor& x) const {
    Tensor out = x;
    const int64_t d = x.cols();
    for (int64_t i = 0; i < x.rows(); ++i)
      for (int64_t j = 0; j < d; ++j) {
        out[i * d + j] = (x.at(i, j) - mean[j]) * inv_std[j];
      }
    return out;
  }
};

OptimizerConfig ProbeOptimizer(const ProbeConfig& p) {
  OptimizerConfig o;
  o.kind = "adamw";
  o.lr = p.lr;
  o.weight_decay = p.weight_decay;
  o.steps = p.steps;
  return o;
}

// Full-batch training of `heads` on a loss built from a fresh binding.
template <typename LossFn>
void TrainProbe(ParamSet& heads, const ProbeConfig& pc, LossFn loss_fn) {
  Optimizer opt(ProbeOptimizer(pc));
  for (int step = 0; step < pc.steps; ++step) {
    Binding bind(heads, true);
    Var loss = loss_fn(bind);
    Backward(loss);
    opt.Step(heads, bind.Gradients());
  }
}

Tensor MultiHot(const std::vector<std::vector<uint8_t>>& rows, int width) {
  Tensor t({static_cast<int64_t>(rows.size()), width});
  for (size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < width; ++j) t[i * width + j] = rows[i][j];
  return t;
}

std::vector<uint8_t> Flatten(const std::vector<std::vector<uint8_t>>& rows) {
  std::vector<uint8_t> out;
  for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

json ApJson(const ApResult& r) {
  json per = json::array();
  for (double v : r.per_class) {
    per.push_back(std::isnan(v) ? json(nullptr) : json(v));
  }
  return {{"map", r.map}, {"per_class_ap", per}, {"skipped_classes", r.skipped}};
}

json AgnosticProbe(const RunConfig& cfg, const Tensor& xtr, const Tensor& xev,
                   const synth::Corpus& corpus, const std::vector<int>& train,
                   const std::vector<int>& eval) {
  const synth::ActionGrammar& g = corpus.grammar();
  const int obs = cfg.probe.obs_clips;
  auto labels = [&](const std::vector<int>& vids, bool verb) {
    std::vector<std::vector<uint8_t>> rows;
    for (int v : vids) {
      const auto& tl = corpus.videos()[v].timeline;
      const synth::WindowLabels wl =
          synth::LabelsForWindow(tl, g.n_verbs, g.n_nouns, obs, tl.total_clips);
      rows.push_back(verb ? wl.verb_multi_hot : wl.noun_multi_hot);
    }
    return rows;
  };
  const auto vtr = labels(train, true);
  const auto ntr = labels(train, false);
  const auto vev = labels(eval, true);
  const auto nev = labels(eval, false);
  const Tensor yv = MultiHot(vtr, g.n_verbs);
  const Tensor yn = MultiHot(ntr, g.n_nouns);

  ParamSet heads = InitAgnosticHeads(static_cast<int>(xtr.cols()), g.n_verbs,
                                     g.n_nouns, DeriveSeed(cfg.model_seed, 0xA9));
  const Var x = Var::Constant(xtr);
  TrainProbe(heads, cfg.probe, [&](Binding& bind) {
    const MultiLabelProbs p = OrderAgnosticForward(bind, x);
    return ops::Add(BceMultilabel(p.verb, yv).loss, BceMultilabel(p.noun, yn).loss);
  });

  Binding bind(heads, false);
  const MultiLabelProbs p = OrderAgnosticForward(bind, Var::Constant(xev));
  const ApResult verb = MeanAp(p.verb.value(), Flatten(vev));
  const ApResult noun = MeanAp(p.noun.value(), Flatten(nev));
  // Chance level: expected AP of a random ranking is the class prevalence.
  double prevalence = 0.0;
  int kept = 0;
  for (const auto* rows : {&vev, &nev}) {
    const size_t width = rows->front().size();
    double sum = 0.0;
    int cls = 0;
    for (size_t j = 0; j < width; ++j) {
      double pos = 0.0;
      for (const auto& r : *rows) pos += r[j];
      if (pos > 0) {
        sum += pos / rows->size();
        ++cls;
      }
    }
    prevalence += cls ? sum / cls : 0.0;
    kept += cls > 0;
  }
  const double mean_map = 0.5 * (verb.map + noun.map);
  return {{"task", "agnostic"},
          {"mean_map", mean_map},
          {"verb", ApJson(verb)},
          {"noun", ApJson(noun)},
          {"chance_map", kept ? prevalence / kept : 0.0},
          {"headline", mean_map}};
}

json SpecificProbe(const RunConfig& cfg, const Tensor& xtr, const Tensor& xev,
                   const synth::Corpus& corpus, const std::vector<int>& train,
                   const std::vector<int>& eval) {
  const synth::ActionGrammar& g = corpus.grammar();
  const int obs = cfg.probe.obs_clips;
  const int steps = cfg.probe.specific_steps;
  auto actions = [&](const std::vector<int>& vids) {
    std::vector<std::vector<ActionToken>> out;
    for (int v : vids) {
      const auto wl = synth::LabelsForWindow(corpus.videos()[v].timeline,
                                             g.n_verbs, g.n_nouns, obs, obs + steps);
      std::vector<ActionToken> seq;
      for (auto [verb, noun] : wl.per_clip_actions) seq.push_back({verb, noun});
      out.push_back(std::move(seq));
    }
    return out;
  };
  const auto atr = actions(train);
  const auto aev = actions(eval);
  std::vector<std::vector<int64_t>> verb_t(steps);
  std::vector<std::vector<int64_t>> noun_t(steps);
  for (const auto& seq : atr)
    for (int t = 0; t < steps; ++t) {
      verb_t[t].push_back(seq[t].verb);
      noun_t[t].push_back(seq[t].noun);
    }

  ParamSet heads = InitSpecificHeads(static_cast<int>(xtr.cols()), g.n_verbs,
                                     g.n_nouns, steps,
                                     DeriveSeed(cfg.model_seed, 0x5B));
  const Var x = Var::Constant(xtr);
  const double inv_n = 1.0 / static_cast<double>(xtr.rows());
  TrainProbe(heads, cfg.probe, [&](Binding& bind) {
    const auto logits = OrderSpecificForward(bind, x, steps);
    std::vector<Var> terms;
    for (int t = 0; t < steps; ++t) {
      terms.push_back(ops::SoftmaxCrossEntropy(logits[t].first, verb_t[t]));
      terms.push_back(ops::SoftmaxCrossEntropy(logits[t].second, noun_t[t]));
    }
    Var total = terms[0];
    for (size_t i = 1; i < terms.size(); ++i) total = ops::Add(total, terms[i]);
    return ops::Scale(total, inv_n);
  });

  Binding bind(heads, false);
  const auto logits = OrderSpecificForward(bind, Var::Constant(xev), steps);
  auto argmax_row = [](const Tensor& t, int64_t i) {
    int best = 0;
    for (int64_t j = 1; j < t.cols(); ++j) {
      if (t.at(i, j) > t.at(i, best)) best = static_cast<int>(j);
    }
    return best;
  };
  double ed_action = 0.0;
  double ed_verb = 0.0;
  double ed_noun = 0.0;
  std::vector<double> acc_verb(steps, 0.0);
  std::vector<double> acc_noun(steps, 0.0);
  std::vector<double> acc_action(steps, 0.0);
  const double n = static_cast<double>(aev.size());
  for (size_t i = 0; i < aev.size(); ++i) {
    std::vector<ActionToken> pred;
    for (int t = 0; t < steps; ++t) {
      const ActionToken tok{argmax_row(logits[t].first.value(), i),
                            argmax_row(logits[t].second.value(), i)};
      pred.push_back(tok);
      acc_verb[t] += (tok.verb == aev[i][t].verb) / n;
      acc_noun[t] += (tok.noun == aev[i][t].noun) / n;
      acc_action[t] += (tok == aev[i][t]) / n;
    }
    ed_action += EditDistance(pred, aev[i], EditMode::kAction) / n;
    ed_verb += EditDistance(pred, aev[i], EditMode::kVerb) / n;
    ed_noun += EditDistance(pred, aev[i], EditMode::kNoun) / n;
  }
  return {{"task", "specific"},
          {"edit_action", ed_action},
          {"edit_verb", ed_verb},
          {"edit_noun", ed_noun},
          {"per_step_accuracy",
           {{"verb", acc_verb}, {"noun", acc_noun}, {"action", acc_action}}},
          {"steps", steps},
          {"headline", ed_action}};
}

json SummaryProbe(const RunConfig& cfg, const Tensor& xtr, const Tensor& xev,
                  const synth::Corpus& corpus, const std::vector<int>& train,
                  const std::vector<int>& eval) {
  const ProbeConfig& pc = cfg.probe;
  auto summaries = [&](const std::vector<int>& vids) {
    std::vector<synth::SummaryTokens> out;
    for (int v : vids) out.push_back(corpus.videos()[v].summary);
    return out;
  };
  const auto str = summaries(train);
  const auto sev = summaries(eval);
  const uint64_t seed = DeriveSeed(cfg.model_seed, 0x5A);
  ParamSet heads = InitRetrievalHeads(static_cast<int>(xtr.cols()), pc.d_text,
                                      pc.d_joint, seed);
  heads.Merge(InitTextEncoder(corpus.grammar().VocabSize(), pc.d_text, seed));
  const Var x = Var::Constant(xtr);
  const double inv_n = 1.0 / static_cast<double>(xtr.rows());
  TrainProbe(heads, pc, [&](Binding& bind) {
    Var c = ops::MatMul(x, bind("probe.wv"));
    Var f = ops::MatMul(TextEncode(bind, str), bind("probe.wl"));
    return ops::Scale(SummaryContrastive(c, f, pc.tau), inv_n);
  });

  Binding bind(heads, false);
  Var c = ops::MatMul(Var::Constant(xev), bind("probe.wv"));
  Var f = ops::MatMul(TextEncode(bind, sev), bind("probe.wl"));
  const Tensor sim = ops::MatMulTransB(c, f).value();
  const int n = static_cast<int>(sim.rows());
  const double r1 = RecallAtK(sim, std::min(1, n));
  const double r5 = RecallAtK(sim, std::min(5, n));
  const double r10 = RecallAtK(sim, std::min(10, n));
  std::set<std::vector<int>> distinct;
  for (const auto& s : sev) distinct.insert(s.tokens);
  return {{"task", "summary"},
          {"r1", r1},
          {"r5", r5},
          {"r10", r10},
          {"eval_items", n},
          {"distinct_eval_summaries", distinct.size()},
          {"headline", r1}};
}

}  // namespace

Tensor ExtractFeatures(const RunConfig& config, const ParamSet& params,
                       const synth::Corpus& corpus,
                       const std::vector<int>& videos, int n_clips) {
  const EncoderConfig& ec = config.encoder;
  const RegionGrid grid = ec.OutputGrid();
  const int r = grid.regions();
  const bool summary = config.ProbeFeature() == "summary";
  std::vector<Tensor> parts;
  for (size_t first = 0; first < videos.size(); first += kFeatureChunk) {
    const size_t last = std::min(videos.size(), first + kFeatureChunk);
    const int b = static_cast<int>(last - first);
    std::vector<Tensor> clips;
    for (size_t i = first; i < last; ++i) {
      for (int c = 0; c < n_clips; ++c) clips.push_back(corpus.Clip(videos[i], c));
    }
    Binding bind(params, false);
    Var z = EncodeClips(bind, ec, Var::Constant(StackClips(clips)));
    if (summary) {
      parts.push_back(
          ObservedSummary(bind, config.summary, z, grid, b, n_clips).value());
      continue;
    }
    Var ctx = SpatialMha(bind, "agg.", config.agg_heads, z, grid, b, n_clips,
                         /*causal=*/false);
    std::vector<std::vector<int64_t>> pool(b);
    for (int s = 0; s < b; ++s)
      for (int n = 0; n < r; ++n) {
        pool[s].push_back((int64_t{s} * n_clips + n_clips - 1) * r + n);
      }
    parts.push_back(ops::RowMean(ctx, pool).value());
  }
  return ConcatRows(parts);
}

void CheckSplitDisjoint(const std::vector<int>& train,
                        const std::vector<int>& eval) {
  const std::set<int> a(train.begin(), train.end());
  for (int v : eval) {
    if (a.count(v)) {
      throw std::invalid_argument("split overlap: video " + std::to_string(v) +
                                  " is in both the pretraining and evaluation splits");
    }
  }
}

json RunProbe(const RunConfig& config, const ParamSet& params,
              const synth::Corpus& corpus, const std::string& task) {
  config.Validate();
  const std::vector<int> train = corpus.TrainIndices();
  const std::vector<int> eval = corpus.EvalIndices();
  CheckSplitDisjoint(train, eval);
  if (eval.size() < 2) throw std::invalid_argument("probe needs >= 2 eval videos");
  int n_clips = config.probe.obs_clips;
  if (task == "summary") {
    n_clips = std::max(1, static_cast<int>(config.probe.summary_obs_fraction *
                                           config.corpus.clips_per_video));
  } else if (task != "agnostic" && task != "specific") {
    throw std::invalid_argument("unknown probe task '" + task + "'");
  }
  const Tensor ftr = ExtractFeatures(config, params, corpus, train, n_clips);
  const Tensor fev = ExtractFeatures(config, params, corpus, eval, n_clips);
  const Standardizer norm(ftr);
  const Tensor xtr = norm.Apply(ftr);
  const Tensor xev = norm.Apply(fev);
  json out;
  if (task == "agnostic") out = AgnosticProbe(config, xtr, xev, corpus, train, eval);
  if (task == "specific") out = SpecificProbe(config, xtr, xev, corpus, train, eval);
  if (task == "summary") out = SummaryProbe(config, xtr, xev, corpus, train, eval);
  out["observed_clips"] = n_clips;
  out["feature"] = config.ProbeFeature();
  out["config_hash"] = ConfigHash(config);
  out["train_videos"] = train.size();
  out["eval_videos"] = eval.size();
  return out;
}

}  // namespace mvp
