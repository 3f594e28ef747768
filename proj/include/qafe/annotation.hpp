#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "qafe/core.hpp"
#include "qafe/error.hpp"

namespace qafe {

struct TokenAnnotation {
  std::string text;
  std::size_t char_start = 0;  // relative to the sentence
  std::size_t char_end = 0;
  std::string pos_tag;
};

struct SpanAnnotation {
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::string entity_type;  // empty for NP chunks
};

/// One annotated sentence. All spans are relative to `text`;
/// `char_offset` locates the sentence within its parent document/summary.
struct SentenceAnnotation {
  std::string text;
  std::size_t char_offset = 0;
  std::vector<TokenAnnotation> tokens;
  std::vector<SpanAnnotation> entities;
  std::vector<SpanAnnotation> np_chunks;
  std::vector<int> dep_heads;  // parent token index, -1 for the root
  std::vector<std::string> dep_labels;
};

inline bool is_nominal_pos(const std::string& pos) {
  return pos == "NOUN" || pos == "PROPN" || pos == "PRON";
}

/// Structural validation: one root, parent indices in range, acyclic,
/// spans inside the sentence.
inline void check_annotation(const SentenceAnnotation& sent) {
  const std::size_t n = sent.tokens.size();
  if (sent.dep_heads.size() != n || sent.dep_labels.size() != n)
    throw Error(ErrorCode::MalformedAnnotation, "dep arrays do not match tokens");
  int roots = 0;
  for (std::size_t i = 0; i < n; ++i) {
    int h = sent.dep_heads[i];
    if (h == -1) {
      ++roots;
    } else if (h < 0 || static_cast<std::size_t>(h) >= n) {
      throw Error(ErrorCode::MalformedAnnotation, "dep head out of range");
    }
  }
  if (n > 0 && roots != 1)
    throw Error(ErrorCode::MalformedAnnotation, "expected exactly one root");
  // Every token must reach the root in at most n steps.
  for (std::size_t i = 0; i < n; ++i) {
    int cur = static_cast<int>(i);
    std::size_t steps = 0;
    while (cur != -1) {
      if (++steps > n) throw Error(ErrorCode::CyclicParse, "cycle in parse");
      cur = sent.dep_heads[cur];
    }
  }
  auto in_bounds = [&](std::size_t s, std::size_t e) {
    return s < e && e <= sent.text.size();
  };
  for (const auto& t : sent.tokens)
    if (!in_bounds(t.char_start, t.char_end))
      throw Error(ErrorCode::MalformedAnnotation, "token span out of bounds");
  for (const auto& s : sent.entities)
    if (!in_bounds(s.char_start, s.char_end))
      throw Error(ErrorCode::MalformedAnnotation, "entity span out of bounds");
  for (const auto& s : sent.np_chunks)
    if (!in_bounds(s.char_start, s.char_end))
      throw Error(ErrorCode::MalformedAnnotation, "np chunk span out of bounds");
}

/// Maximal noun-phrase spans: breadth-first walk from the root; on the
/// first nominal token of a branch, emit the character extent of its whole
/// subtree and stop descending there. Traversal continues through
/// non-nominal tokens so nested objects stay reachable.
inline std::vector<std::pair<std::size_t, std::size_t>> max_np_spans(
    const SentenceAnnotation& sent) {
  check_annotation(sent);
  const std::size_t n = sent.tokens.size();
  std::vector<std::vector<int>> children(n);
  int root = -1;
  for (std::size_t i = 0; i < n; ++i) {
    if (sent.dep_heads[i] == -1)
      root = static_cast<int>(i);
    else
      children[sent.dep_heads[i]].push_back(static_cast<int>(i));
  }
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  if (root == -1) return spans;

  auto subtree_extent = [&](int start) {
    std::size_t lo = sent.tokens[start].char_start;
    std::size_t hi = sent.tokens[start].char_end;
    std::deque<int> stack{start};
    while (!stack.empty()) {
      int t = stack.back();
      stack.pop_back();
      lo = std::min(lo, sent.tokens[t].char_start);
      hi = std::max(hi, sent.tokens[t].char_end);
      for (int c : children[t]) stack.push_back(c);
    }
    return std::make_pair(lo, hi);
  };

  std::deque<int> queue{root};
  while (!queue.empty()) {
    int t = queue.front();
    queue.pop_front();
    if (is_nominal_pos(sent.tokens[t].pos_tag)) {
      spans.push_back(subtree_extent(t));
    } else {
      for (int c : children[t]) queue.push_back(c);
    }
  }
  return spans;
}

/// Collects answer candidates over the annotated summary. Candidates are
/// deduplicated by absolute span; under ALL, colliding spans keep the tag
/// with priority NER > NP_CHUNKS > MAX_NP. Output sorted by span.
inline std::vector<AnswerCandidate> select_answers(
    const std::string& summary, const std::vector<SentenceAnnotation>& sentences,
    AnswerStrategy strategy) {
  struct Keyed {
    AnswerCandidate cand;
    int priority;  // lower wins
  };
  std::map<std::pair<std::size_t, std::size_t>, Keyed> by_span;

  auto add = [&](std::size_t sent_idx, std::size_t rel_start, std::size_t rel_end,
                 AnswerStrategy tag, int priority) {
    const auto& sent = sentences[sent_idx];
    std::size_t abs_start = sent.char_offset + rel_start;
    std::size_t abs_end = sent.char_offset + rel_end;
    AnswerCandidate cand;
    cand.text = summary.substr(abs_start, abs_end - abs_start);
    cand.char_start = abs_start;
    cand.char_end = abs_end;
    cand.sentence_index = sent_idx;
    cand.strategy = tag;
    auto key = std::make_pair(abs_start, abs_end);
    auto it = by_span.find(key);
    if (it == by_span.end() || priority < it->second.priority)
      by_span[key] = Keyed{std::move(cand), priority};
  };

  bool want_ner = strategy == AnswerStrategy::NER || strategy == AnswerStrategy::ALL;
  bool want_np =
      strategy == AnswerStrategy::NP_CHUNKS || strategy == AnswerStrategy::ALL;
  bool want_max =
      strategy == AnswerStrategy::MAX_NP || strategy == AnswerStrategy::ALL;

  for (std::size_t s = 0; s < sentences.size(); ++s) {
    if (want_ner)
      for (const auto& e : sentences[s].entities)
        add(s, e.char_start, e.char_end, AnswerStrategy::NER, 0);
    if (want_np)
      for (const auto& c : sentences[s].np_chunks)
        add(s, c.char_start, c.char_end, AnswerStrategy::NP_CHUNKS, 1);
    if (want_max)
      for (const auto& [lo, hi] : max_np_spans(sentences[s]))
        add(s, lo, hi, AnswerStrategy::MAX_NP, 2);
  }

  std::vector<AnswerCandidate> out;
  out.reserve(by_span.size());
  for (auto& [key, v] : by_span) out.push_back(std::move(v.cand));
  return out;  // map order is already (char_start, char_end)
}

}  // namespace qafe
