#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "mvp/synthcorpus.h"

namespace mvp::synth {

int ComplexAction::MinDuration() const {
  int total = 0;
  for (const AtomicTemplate& a : atomics) total += a.min_clips;
  return total;
}

void ActionGrammar::Validate() const {
  if (n_verbs < 2) throw std::invalid_argument("n_verbs < 2");
  if (n_nouns < 2) throw std::invalid_argument("n_nouns < 2");
  if (complex_actions.empty()) throw std::invalid_argument("n_complex < 1");
  if (successor.size() != complex_actions.size()) {
    throw std::invalid_argument("successor table size mismatch");
  }
  for (size_t c = 0; c < complex_actions.size(); ++c) {
    const ComplexAction& ca = complex_actions[c];
    if (ca.id != static_cast<int>(c)) {
      throw std::invalid_argument("complex action ids must be 0..n-1");
    }
    if (ca.atomics.size() < 2) {
      throw std::invalid_argument("complex action " + std::to_string(c) +
                                  " has fewer than 2 atomic templates");
    }
    for (const AtomicTemplate& a : ca.atomics) {
      if (a.verb < 0 || a.verb >= n_verbs || a.noun < 0 || a.noun >= n_nouns) {
        throw std::invalid_argument("atomic template class out of range");
      }
      if (a.min_clips < 1 || a.max_clips < a.min_clips) {
        throw std::invalid_argument("invalid atomic duration range");
      }
    }
    if (successor[c] < 0 ||
        successor[c] >= static_cast<int>(complex_actions.size())) {
      throw std::invalid_argument("successor out of range");
    }
  }
  if (follow_prob < 0.0 || follow_prob > 1.0) {
    throw std::invalid_argument("follow_prob outside [0, 1]");
  }
}

int ActionGrammar::MaxMinDuration() const {
  int m = 0;
  for (const ComplexAction& ca : complex_actions) {
    m = std::max(m, ca.MinDuration());
  }
  return m;
}

ActionGrammar BuildGrammar(uint64_t seed, int n_verbs, int n_nouns,
                           int n_complex, const GrammarKnobs& knobs) {
  if (n_verbs < 2) throw std::invalid_argument("n_verbs < 2");
  if (n_nouns < 2) throw std::invalid_argument("n_nouns < 2");
  if (n_complex < 1) throw std::invalid_argument("n_complex < 1");
  if (knobs.min_atomics < 2 || knobs.max_atomics < knobs.min_atomics ||
      knobs.min_duration_lo < 1 ||
      knobs.min_duration_hi < knobs.min_duration_lo ||
      knobs.duration_spread < 0) {
    throw std::invalid_argument("invalid grammar knobs");
  }
  Rng rng(seed);
  ActionGrammar g;
  g.n_verbs = n_verbs;
  g.n_nouns = n_nouns;
  g.seed = seed;
  g.follow_prob = knobs.follow_prob;
  const int product = n_verbs * n_nouns;
  std::vector<int> pairs(product);
  for (int c = 0; c < n_complex; ++c) {
    ComplexAction ca;
    ca.id = c;
    const int k = static_cast<int>(rng.UniformInt(
        knobs.min_atomics, std::min(knobs.max_atomics, product)));
    std::iota(pairs.begin(), pairs.end(), 0);
    // Partial Fisher-Yates: the first k entries are a draw without
    // replacement from the verb x noun product.
    for (int i = 0; i < k; ++i) {
      const int j = static_cast<int>(rng.UniformInt(i, product - 1));
      std::swap(pairs[i], pairs[j]);
      AtomicTemplate a;
      a.verb = pairs[i] / n_nouns;
      a.noun = pairs[i] % n_nouns;
      a.min_clips = static_cast<int>(
          rng.UniformInt(knobs.min_duration_lo, knobs.min_duration_hi));
      a.max_clips =
          a.min_clips + static_cast<int>(rng.UniformInt(0, knobs.duration_spread));
      ca.atomics.push_back(a);
    }
    g.complex_actions.push_back(std::move(ca));
  }
  g.successor.resize(n_complex);
  std::iota(g.successor.begin(), g.successor.end(), 0);
  for (int i = n_complex - 1; i > 0; --i) {
    std::swap(g.successor[i], g.successor[rng.UniformInt(0, i)]);
  }
  g.Validate();
  return g;
}

void ActionTimeline::Validate() const {
  if (total_clips < 1) throw std::invalid_argument("timeline has no clips");
  if (spans.empty()) throw std::invalid_argument("timeline has no spans");
  if (spans.front().start_clip != 0) {
    throw std::invalid_argument("timeline does not start at clip 0");
  }
  for (size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].end_clip <= spans[i].start_clip) {
      throw std::invalid_argument("empty span in timeline");
    }
    if (i + 1 < spans.size() && spans[i].end_clip != spans[i + 1].start_clip) {
      throw std::invalid_argument("timeline spans are not contiguous");
    }
  }
  if (spans.back().end_clip != total_clips) {
    throw std::invalid_argument("timeline does not end at total_clips");
  }
}

const Span& ActionTimeline::SpanAt(int clip) const {
  if (clip < 0 || clip >= total_clips) {
    throw std::out_of_range("clip " + std::to_string(clip) +
                            " outside timeline");
  }
  auto it = std::upper_bound(
      spans.begin(), spans.end(), clip,
      [](int c, const Span& s) { return c < s.end_clip; });
  return *it;
}

std::vector<int> ActionTimeline::ComplexSequence() const {
  std::vector<int> seq;
  for (const Span& s : spans) {
    if (s.atomic_index == 0) seq.push_back(s.complex_id);
  }
  return seq;
}

ActionTimeline SampleTimeline(const ActionGrammar& grammar, Rng& rng,
                              int total_clips) {
  grammar.Validate();
  if (total_clips < grammar.MaxMinDuration()) {
    throw std::invalid_argument(
        "total_clips " + std::to_string(total_clips) +
        " is smaller than the largest minimum complex-action duration " +
        std::to_string(grammar.MaxMinDuration()));
  }
  const int n_complex = static_cast<int>(grammar.complex_actions.size());
  ActionTimeline tl;
  tl.total_clips = total_clips;
  int t = 0;
  int c = static_cast<int>(rng.UniformInt(0, n_complex - 1));
  while (t < total_clips) {
    const ComplexAction& ca = grammar.complex_actions[c];
    for (size_t a = 0; a < ca.atomics.size() && t < total_clips; ++a) {
      const AtomicTemplate& tpl = ca.atomics[a];
      const int d =
          static_cast<int>(rng.UniformInt(tpl.min_clips, tpl.max_clips));
      Span s;
      s.complex_id = c;
      s.atomic_index = static_cast<int>(a);
      s.verb = tpl.verb;
      s.noun = tpl.noun;
      s.start_clip = t;
      s.end_clip = std::min(t + d, total_clips);
      tl.spans.push_back(s);
      t = s.end_clip;
    }
    c = rng.Bernoulli(grammar.follow_prob)
            ? grammar.successor[c]
            : static_cast<int>(rng.UniformInt(0, n_complex - 1));
  }
  tl.Validate();
  return tl;
}

SummaryTokens Summarize(const ActionTimeline& timeline) {
  SummaryTokens out;
  out.tokens.push_back(kBosToken);
  for (int c : timeline.ComplexSequence()) {
    if (static_cast<int>(out.tokens.size()) >= kMaxSummaryTokens - 1) break;
    out.tokens.push_back(c + 2);
  }
  out.tokens.push_back(kEosToken);
  return out;
}

WindowLabels LabelsForWindow(const ActionTimeline& timeline, int n_verbs,
                             int n_nouns, int start_clip, int end_clip) {
  if (start_clip < 0 || end_clip > timeline.total_clips ||
      start_clip >= end_clip) {
    throw std::invalid_argument("invalid label window [" +
                                std::to_string(start_clip) + ", " +
                                std::to_string(end_clip) + ")");
  }
  WindowLabels out;
  out.verb_multi_hot.assign(n_verbs, 0);
  out.noun_multi_hot.assign(n_nouns, 0);
  out.per_clip_actions.reserve(end_clip - start_clip);
  for (const Span& s : timeline.spans) {
    const int lo = std::max(s.start_clip, start_clip);
    const int hi = std::min(s.end_clip, end_clip);
    if (lo >= hi) continue;
    out.verb_multi_hot.at(s.verb) = 1;
    out.noun_multi_hot.at(s.noun) = 1;
    for (int c = lo; c < hi; ++c) out.per_clip_actions.emplace_back(s.verb, s.noun);
  }
  return out;
}

}  // namespace mvp::synth
