#ifndef MVP_DOWNSTREAM_H_
#define MVP_DOWNSTREAM_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mvp/autograd.h"
#include "mvp/params.h"
#include "mvp/synthcorpus.h"

namespace mvp {

// ---------------------------------------------------------------------------
// Order-agnostic forecasting: multilabel verb/noun presence.

// probe.verb.w/b and probe.noun.w/b.
ParamSet InitAgnosticHeads(int dim, int n_verbs, int n_nouns, uint64_t seed);

struct MultiLabelProbs {
  Var verb;  // [B, n_verbs] in (0, 1)
  Var noun;  // [B, n_nouns]
};

MultiLabelProbs OrderAgnosticForward(Binding& bind, const Var& z);

struct BceResult {
  Var loss;  // summed over classes, mean over batch
  int64_t clamped = 0;
};

// Binary cross-entropy; probabilities are clamped to [1e-7, 1 - 1e-7] and the
// number of clamped entries is reported.
BceResult BceMultilabel(const Var& p, const Tensor& y);

struct ApResult {
  double map = 0.0;
  std::vector<double> per_class;  // NaN for skipped classes
  std::vector<int> skipped;       // classes without positives
};

// Average precision of one ranked list: sum over positives of precision at
// the positive's rank, divided by the positive count. Score ties are ranked
// by index ascending.
double AveragePrecision(const std::vector<double>& scores,
                        const std::vector<uint8_t>& labels);

// Mean AP over columns of `scores` [B, C]; `labels` is row-major B x C.
// Columns without positives are skipped. Throws if every column is empty.
ApResult MeanAp(const Tensor& scores, const std::vector<uint8_t>& labels);

// ---------------------------------------------------------------------------
// Order-specific forecasting: one linear (verb, noun) head pair per future
// step, stored as probe.t<t>.verb.w/b and probe.t<t>.noun.w/b.

ParamSet InitSpecificHeads(int dim, int n_verbs, int n_nouns, int steps,
                           uint64_t seed);

std::vector<std::pair<Var, Var>> OrderSpecificForward(Binding& bind,
                                                      const Var& z, int steps);

struct ActionToken {
  int verb = 0;
  int noun = 0;
  bool operator==(const ActionToken&) const = default;
};

enum class EditMode { kAction, kVerb, kNoun };

// Unit-cost Levenshtein distance (unnormalized).
int Levenshtein(const std::vector<ActionToken>& a,
                const std::vector<ActionToken>& b, EditMode mode);

// Levenshtein distance divided by the sequence length. Sequences must be
// non-empty and of equal length.
double EditDistance(const std::vector<ActionToken>& pred,
                    const std::vector<ActionToken>& truth,
                    EditMode mode = EditMode::kAction);

// ---------------------------------------------------------------------------
// Summary retrieval.

// Bag-of-tokens text encoder: mean of rows of text.emb [vocab, d_l].
ParamSet InitTextEncoder(int vocab, int d_l, uint64_t seed);

// Returns [B, d_l]. Throws on token ids outside the table.
Var TextEncode(Binding& bind, const std::vector<synth::SummaryTokens>& batch);

Tensor TextEncode(const synth::SummaryTokens& tokens, const ParamSet& params);

// probe.wv [dim, d_joint] and probe.wl [d_l, d_joint].
ParamSet InitRetrievalHeads(int dim, int d_l, int d_joint, uint64_t seed);

// Video-to-text InfoNCE over B pairs; summed over the batch. B >= 2.
Var SummaryContrastive(const Var& c, const Var& f, double tau);

// Fraction of rows whose diagonal entry ranks within the top k of the row;
// ties are broken by column index ascending.
double RecallAtK(const Tensor& sim, int k);

}  // namespace mvp

#endif  // MVP_DOWNSTREAM_H_
