#include "mvp/downstream.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mvp {

namespace {

constexpr double kBceClamp = 1e-7;

void AddLinear(ParamSet& p, Rng& rng, const std::string& prefix, int in,
               int out) {
  p.Add(prefix + "w", ScaledNormal(rng, in, out));
  p.Add(prefix + "b", Tensor({out}, 0.0));
}

std::string StepPrefix(int t) { return "probe.t" + std::to_string(t) + "."; }

bool TokenMatch(const ActionToken& a, const ActionToken& b, EditMode mode) {
  switch (mode) {
    case EditMode::kVerb:
      return a.verb == b.verb;
    case EditMode::kNoun:
      return a.noun == b.noun;
    case EditMode::kAction:
      break;
  }
  return a == b;
}

}  // namespace

ParamSet InitAgnosticHeads(int dim, int n_verbs, int n_nouns, uint64_t seed) {
  Rng rng(DeriveSeed(seed, 0xA6));
  ParamSet p;
  AddLinear(p, rng, "probe.verb.", dim, n_verbs);
  AddLinear(p, rng, "probe.noun.", dim, n_nouns);
  return p;
}

MultiLabelProbs OrderAgnosticForward(Binding& bind, const Var& z) {
  using namespace ops;
  return {Sigmoid(Linear(z, bind("probe.verb.w"), bind("probe.verb.b"))),
          Sigmoid(Linear(z, bind("probe.noun.w"), bind("probe.noun.b")))};
}

BceResult BceMultilabel(const Var& p, const Tensor& y) {
  if (p.shape() != y.shape()) {
    throw std::invalid_argument("BCE shape mismatch: " +
                                ShapeToString(p.shape()) + " vs " +
                                ShapeToString(y.shape()));
  }
  for (double v : y.storage()) {
    if (v != 0.0 && v != 1.0) {
      throw std::invalid_argument("BCE labels must be 0 or 1");
    }
  }
  BceResult r;
  Var total = ops::BinaryCrossEntropy(p, y, kBceClamp, &r.clamped);
  r.loss = ops::Scale(total, 1.0 / static_cast<double>(p.rows()));
  return r;
}

double AveragePrecision(const std::vector<double>& scores,
                        const std::vector<uint8_t>& labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("AP scores and labels differ in length");
  }
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scores[a] > scores[b];
  });
  double sum = 0.0;
  int hits = 0;
  for (size_t r = 0; r < order.size(); ++r) {
    if (labels[order[r]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return hits ? sum / hits : std::numeric_limits<double>::quiet_NaN();
}

ApResult MeanAp(const Tensor& scores, const std::vector<uint8_t>& labels) {
  const int64_t n = scores.rows();
  const int64_t c = scores.cols();
  if (static_cast<int64_t>(labels.size()) != n * c) {
    throw std::invalid_argument("mAP labels do not match score shape");
  }
  ApResult r;
  r.per_class.assign(c, std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  int kept = 0;
  for (int64_t j = 0; j < c; ++j) {
    std::vector<double> s(n);
    std::vector<uint8_t> y(n);
    for (int64_t i = 0; i < n; ++i) {
      s[i] = scores.at(i, j);
      y[i] = labels[i * c + j];
    }
    if (std::find(y.begin(), y.end(), 1) == y.end()) {
      r.skipped.push_back(static_cast<int>(j));
      continue;
    }
    r.per_class[j] = AveragePrecision(s, y);
    sum += r.per_class[j];
    ++kept;
  }
  if (kept == 0) {
    std::string list;
    for (int j : r.skipped) list += (list.empty() ? "" : ",") + std::to_string(j);
    throw std::invalid_argument("mAP undefined: no positives in classes [" +
                                list + "]");
  }
  r.map = sum / kept;
  return r;
}

ParamSet InitSpecificHeads(int dim, int n_verbs, int n_nouns, int steps,
                           uint64_t seed) {
  Rng rng(DeriveSeed(seed, 0x5C));
  ParamSet p;
  for (int t = 0; t < steps; ++t) {
    AddLinear(p, rng, StepPrefix(t) + "verb.", dim, n_verbs);
    AddLinear(p, rng, StepPrefix(t) + "noun.", dim, n_nouns);
  }
  return p;
}

std::vector<std::pair<Var, Var>> OrderSpecificForward(Binding& bind,
                                                      const Var& z,
                                                      int steps) {
  std::vector<std::pair<Var, Var>> out;
  for (int t = 0; t < steps; ++t) {
    const std::string pre = StepPrefix(t);
    out.emplace_back(
        ops::Linear(z, bind(pre + "verb.w"), bind(pre + "verb.b")),
        ops::Linear(z, bind(pre + "noun.w"), bind(pre + "noun.b")));
  }
  return out;
}

int Levenshtein(const std::vector<ActionToken>& a,
                const std::vector<ActionToken>& b, EditMode mode) {
  std::vector<int> prev(b.size() + 1);
  std::vector<int> cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= b.size(); ++j) {
      const int sub = prev[j - 1] + (TokenMatch(a[i - 1], b[j - 1], mode) ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double EditDistance(const std::vector<ActionToken>& pred,
                    const std::vector<ActionToken>& truth, EditMode mode) {
  if (pred.empty() || pred.size() != truth.size()) {
    throw std::invalid_argument(
        "edit distance needs non-empty sequences of equal length, got " +
        std::to_string(pred.size()) + " and " + std::to_string(truth.size()));
  }
  return static_cast<double>(Levenshtein(pred, truth, mode)) /
         static_cast<double>(truth.size());
}

ParamSet InitTextEncoder(int vocab, int d_l, uint64_t seed) {
  if (vocab < 1 || d_l < 1) throw std::invalid_argument("invalid text encoder");
  Rng rng(DeriveSeed(seed, 0x7E));
  ParamSet p;
  Tensor emb({vocab, d_l});
  for (double& v : emb.values()) v = rng.Normal();
  p.Add("text.emb", std::move(emb));
  return p;
}

Var TextEncode(Binding& bind, const std::vector<synth::SummaryTokens>& batch) {
  Var table = bind("text.emb");
  const int64_t vocab = table.rows();
  std::vector<std::vector<int64_t>> groups;
  groups.reserve(batch.size());
  for (const auto& s : batch) {
    if (s.tokens.empty()) throw std::invalid_argument("empty summary");
    std::vector<int64_t> g;
    for (int t : s.tokens) {
      if (t < 0 || t >= vocab) {
        throw std::invalid_argument("unknown token id " + std::to_string(t) +
                                    " (vocab " + std::to_string(vocab) + ")");
      }
      g.push_back(t);
    }
    groups.push_back(std::move(g));
  }
  return ops::RowMean(table, groups);
}

Tensor TextEncode(const synth::SummaryTokens& tokens, const ParamSet& params) {
  Binding bind(params, false);
  Var f = TextEncode(bind, {tokens});
  return f.value().Reshaped({f.cols()});
}

ParamSet InitRetrievalHeads(int dim, int d_l, int d_joint, uint64_t seed) {
  Rng rng(DeriveSeed(seed, 0x3E));
  ParamSet p;
  p.Add("probe.wv", ScaledNormal(rng, dim, d_joint));
  p.Add("probe.wl", ScaledNormal(rng, d_l, d_joint));
  return p;
}

Var SummaryContrastive(const Var& c, const Var& f, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (c.shape() != f.shape()) {
    throw std::invalid_argument("video and text embeddings differ in shape");
  }
  const int64_t b = c.rows();
  if (b < 2) throw std::invalid_argument("summary contrastive needs B >= 2");
  std::vector<int64_t> diag(b);
  std::iota(diag.begin(), diag.end(), 0);
  return ops::SoftmaxCrossEntropy(
      ops::Scale(ops::MatMulTransB(c, f), 1.0 / tau), diag);
}

double RecallAtK(const Tensor& sim, int k) {
  const int64_t n = sim.rows();
  if (sim.cols() != n) throw std::invalid_argument("similarity must be square");
  if (k < 1 || k > n) {
    throw std::invalid_argument("k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(n) + "]");
  }
  int64_t hits = 0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = sim.at(i, i);
    int64_t rank = 0;  // entries ranked ahead of the diagonal
    for (int64_t j = 0; j < n; ++j) {
      const double v = sim.at(i, j);
      if (v > d || (v == d && j < i)) ++rank;
    }
    hits += rank < k;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace mvp
