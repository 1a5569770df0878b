#include "mvp/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "mvp/aggregation.h"
#include "mvp/downstream.h"
#include "mvp/encoder.h"
#include "mvp/objective.h"

namespace mvp {

namespace {

struct Coord {
  std::string name;
  int64_t index;
};

Tensor RandomTensor(Rng& rng, Shape shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = scale * rng.Normal();
  return t;
}

// Reduces any output to a scalar with a cotangent drawn once per check.
Var Scalarize(const Var& out, const Tensor& cotangent) {
  if (out.value().size() == 1) return out;
  return ops::Sum(ops::Mul(out, Var::Constant(cotangent)));
}

double Evaluate(const ParamSet& inputs, const GraphFn& fn,
                const Tensor* cotangent) {
  Binding bind(inputs, false);
  Var out = fn(bind);
  if (out.value().size() == 1) return out.value()[0];
  return Scalarize(out, *cotangent).value()[0];
}

struct Case {
  ParamSet inputs;
  GraphFn fn;
};

EncoderConfig TinyEncoder() {
  EncoderConfig c;
  c.frames = 4;
  c.height = 8;
  c.width = 8;
  c.patch_t = 2;
  c.patch_h = 4;
  c.patch_w = 4;
  c.stage_dims = {4, 8};
  c.stage_heads = {1, 2};
  c.mlp_ratio = 2;
  return c;
}

Case MakeCase(const std::string& op, Rng& rng) {
  Case k;
  ParamSet& p = k.inputs;
  if (op == "linear") {
    p.Add("x", RandomTensor(rng, {3, 4}));
    p.Add("w", RandomTensor(rng, {4, 5}));
    p.Add("b", RandomTensor(rng, {5}));
    k.fn = [](Binding& b) { return ops::Linear(b("x"), b("w"), b("b")); };
  } else if (op == "layer_norm") {
    p.Add("x", RandomTensor(rng, {4, 6}));
    p.Add("g", RandomTensor(rng, {6}));
    p.Add("b", RandomTensor(rng, {6}));
    k.fn = [](Binding& b) { return ops::LayerNorm(b("x"), b("g"), b("b")); };
  } else if (op == "mvp_info_nce") {
    p.Add("preds", RandomTensor(rng, {2 * 2 * 4, 3}));
    p.Add("targets", RandomTensor(rng, {2 * 2 * 4, 3}));
    k.fn = [](Binding& b) {
      return MvpInfoNce(b("preds"), b("targets"), 2, 2, 4, 0.5).loss;
    };
  } else if (op == "mvp_info_nce_normalized") {
    p.Add("preds", RandomTensor(rng, {2 * 2 * 4, 3}));
    p.Add("targets", RandomTensor(rng, {2 * 2 * 4, 3}));
    k.fn = [](Binding& b) {
      return MvpInfoNce(b("preds"), b("targets"), 2, 2, 4, 0.5, true).loss;
    };
  } else if (op == "cpc_loss") {
    HeadsConfig hc{2, 4, 8};
    p.Merge(InitPredictionHeads(hc, rng.NextU64()));
    p.Add("ctx", RandomTensor(rng, {2 * 3 * 2, 4}));
    p.Add("future", RandomTensor(rng, {2 * 2 * 2, 4}));
    k.fn = [](Binding& b) {
      return CpcLoss(b, b("ctx"), b("future"), 2, 3, 2, 2, 2, 0.5).loss;
    };
  } else if (op == "cvrl_seq_loss") {
    p.Add("a", RandomTensor(rng, {4, 5}));
    p.Add("b", RandomTensor(rng, {4, 5}));
    k.fn = [](Binding& b) { return CvrlSeqLoss(b("a"), b("b"), 0.5); };
  } else if (op == "summary_contrastive") {
    p.Add("c", RandomTensor(rng, {5, 4}));
    p.Add("f", RandomTensor(rng, {5, 4}));
    k.fn = [](Binding& b) { return SummaryContrastive(b("c"), b("f"), 0.5); };
  } else if (op == "spatial_mha" || op == "spatial_mha_causal") {
    const bool causal = op == "spatial_mha_causal";
    p.Merge(InitAttention("agg.", 4, 2, rng.NextU64()).params);
    p.Add("regions", RandomTensor(rng, {2 * 3 * 8, 4}));
    k.fn = [causal](Binding& b) {
      return SpatialMha(b, "agg.", 2, b("regions"), RegionGrid{2, 2, 2}, 2, 3,
                        causal);
    };
  } else if (op == "attention_targets") {
    p.Merge(InitAttention("agg.", 4, 2, rng.NextU64()).params);
    p.Add("future", RandomTensor(rng, {4 * 2, 4}));
    k.fn = [](Binding& b) {
      return AttentionTargets(b, "agg.", 2, b("future"), RegionGrid{1, 1, 2},
                              1, 4, 2);
    };
  } else if (op == "causal_targets") {
    p.Add("future", RandomTensor(rng, {2 * 4 * 3, 4}));
    k.fn = [](Binding& b) {
      return CausalTargets(b("future"), TargetKind::kMultiscale, 2, 4, 3, 2);
    };
  } else if (op == "encoder_block") {
    EncoderConfig ec = TinyEncoder();
    EncoderParams ep = InitEncoder(ec, rng.NextU64());
    for (const auto& [name, t] : ep.params.tensors()) {
      if (name.rfind("enc.s1.block.", 0) == 0) p.Add(name, t);
    }
    p.Add("x", RandomTensor(rng, {2 * 4, 8}));
    k.fn = [](Binding& b) {
      return internal::TransformerBlock(b, "enc.s1.block.", b("x"), 4, 2, 0.0,
                                        nullptr);
    };
  } else if (op == "encoder") {
    const EncoderConfig ec = TinyEncoder();
    p.Merge(InitEncoder(ec, rng.NextU64()).params);
    p.Add("clips", RandomTensor(rng, {2, ec.ClipSize()}, 0.5));
    k.fn = [ec](Binding& b) { return EncodeClips(b, ec, b("clips")); };
  } else if (op == "observed_summary") {
    SummaryConfig sc{4, 1, 8, 8};
    p.Merge(InitObservedSummary(sc, rng.NextU64()));
    p.Add("regions", RandomTensor(rng, {2 * 3 * 2, 4}));
    k.fn = [sc](Binding& b) {
      return ObservedSummary(b, sc, b("regions"), RegionGrid{1, 1, 2}, 2, 3);
    };
  } else if (op == "prediction_heads") {
    HeadsConfig hc{3, 4, 8};
    p.Merge(InitPredictionHeads(hc, rng.NextU64()));
    p.Add("ctx", RandomTensor(rng, {2 * 2 * 3, 4}));
    k.fn = [](Binding& b) { return PredictFuture(b, b("ctx"), 2, 2, 3, 3); };
  } else if (op == "bce_multilabel") {
    p.Add("logits", RandomTensor(rng, {3, 5}));
    Tensor y({3, 5});
    for (double& v : y.values()) v = rng.Bernoulli(0.4) ? 1.0 : 0.0;
    k.fn = [y](Binding& b) {
      return BceMultilabel(ops::Sigmoid(b("logits")), y).loss;
    };
  } else if (op == "order_agnostic") {
    p.Merge(InitAgnosticHeads(4, 3, 5, rng.NextU64()));
    p.Add("z", RandomTensor(rng, {3, 4}));
    k.fn = [](Binding& b) {
      const MultiLabelProbs m = OrderAgnosticForward(b, b("z"));
      return ops::ConcatRows({ops::Reshape(m.verb, {9, 1}),
                              ops::Reshape(m.noun, {15, 1})});
    };
  } else if (op == "order_specific") {
    p.Merge(InitSpecificHeads(4, 3, 5, 2, rng.NextU64()));
    p.Add("z", RandomTensor(rng, {3, 4}));
    k.fn = [](Binding& b) {
      const auto out = OrderSpecificForward(b, b("z"), 2);
      Var total = ops::SoftmaxCrossEntropy(out[0].first, {0, 1, 2});
      total = ops::Add(total, ops::SoftmaxCrossEntropy(out[0].second, {4, 0, 1}));
      total = ops::Add(total, ops::SoftmaxCrossEntropy(out[1].first, {2, 2, 0}));
      return ops::Add(total, ops::SoftmaxCrossEntropy(out[1].second, {3, 1, 0}));
    };
  } else if (op == "text_encode") {
    p.Merge(InitTextEncoder(6, 4, rng.NextU64()));
    const std::vector<synth::SummaryTokens> batch = {{{0, 2, 3, 1}},
                                                     {{0, 5, 5, 4, 1}},
                                                     {{2}}};
    k.fn = [batch](Binding& b) { return TextEncode(b, batch); };
  } else {
    throw std::invalid_argument("unknown gradcheck op '" + op + "'");
  }
  return k;
}

}  // namespace

GradcheckResult CheckGradients(const std::string& name, const ParamSet& inputs,
                               const GraphFn& fn, uint64_t seed, double eps,
                               int min_coords) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be > 0");
  Rng rng(DeriveSeed(seed, 0x6C));
  GradcheckResult r;
  r.op = name;

  Binding bind(inputs, true);
  Var out = fn(bind);
  Tensor cotangent;
  if (out.value().size() != 1) cotangent = RandomTensor(rng, out.shape());
  Backward(Scalarize(out, cotangent));
  const ParamSet grads = bind.Gradients();

  std::vector<Coord> all;
  for (const auto& [n, t] : inputs.tensors()) {
    for (int64_t i = 0; i < t.size(); ++i) all.push_back({n, i});
  }
  // Partial Fisher-Yates for a uniform subset.
  const size_t take = std::min(all.size(), static_cast<size_t>(std::max(min_coords, 48)));
  for (size_t i = 0; i < take; ++i) {
    const size_t j = static_cast<size_t>(
        rng.UniformInt(static_cast<int64_t>(i), static_cast<int64_t>(all.size()) - 1));
    std::swap(all[i], all[j]);
  }
  ParamSet probe = inputs;
  for (size_t c = 0; c < take; ++c) {
    const Coord& co = all[c];
    double& x = probe.Mutable(co.name)[co.index];
    const double x0 = x;
    x = x0 + eps;
    const double fp = Evaluate(probe, fn, &cotangent);
    x = x0 - eps;
    const double fm = Evaluate(probe, fn, &cotangent);
    x = x0;
    const double fd = (fp - fm) / (2.0 * eps);
    const double a = grads.Get(co.name)[co.index];
    const std::string label = co.name + "[" + std::to_string(co.index) + "]";
    if (!std::isfinite(fd) || !std::isfinite(a)) {
      r.nonfinite.push_back(label);
      continue;
    }
    const double err = std::abs(a - fd) /
                       std::max({std::abs(a), std::abs(fd), kGradcheckFloor});
    if (err >= r.max_rel_error) {
      r.max_rel_error = err;
      r.worst = label;
      r.worst_analytic = a;
      r.worst_numeric = fd;
    }
    ++r.coordinates;
  }
  return r;
}

std::vector<std::string> GradcheckOps() {
  return {"linear",           "layer_norm",        "mvp_info_nce",
          "mvp_info_nce_normalized", "cpc_loss",   "cvrl_seq_loss",
          "summary_contrastive", "spatial_mha",    "spatial_mha_causal",
          "attention_targets", "causal_targets",   "encoder_block",
          "encoder",          "observed_summary",  "prediction_heads",
          "bce_multilabel",   "order_agnostic",    "order_specific",
          "text_encode"};
}

GradcheckResult FiniteDiffGradcheck(const std::string& op, uint64_t seed,
                                    double eps) {
  Rng rng(DeriveSeed(seed, 0x6D));
  const Case k = MakeCase(op, rng);
  return CheckGradients(op, k.inputs, k.fn, seed, eps);
}

}  // namespace mvp
