#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "qafe/backend.hpp"
#include "qafe/overlap.hpp"

namespace qafe {

namespace heur {

struct RawToken {
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;
};

inline bool is_word_char(unsigned char c) {
  return std::isalnum(c) || c == '\'' || c == '-' || c >= 0x80;
}

/// Words are maximal alnum/'/- runs; each punctuation char is its own token.
inline std::vector<RawToken> tokenize(const std::string& text) {
  std::vector<RawToken> toks;
  std::size_t i = 0;
  while (i < text.size()) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (is_word_char(c)) {
      while (i < text.size() && is_word_char(static_cast<unsigned char>(text[i])))
        ++i;
    } else {
      ++i;
    }
    toks.push_back({text.substr(start, i - start), start, i});
  }
  return toks;
}

inline std::string lower(const std::string& s) {
  std::string out = s;
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline const std::set<std::string>& determiners() {
  static const std::set<std::string> s{
      "a", "an", "the", "this", "that", "these", "those", "his",
      "her", "its", "their", "our", "my", "your", "some", "any",
      "no", "each", "every", "another"};
  return s;
}

inline const std::set<std::string>& pronouns() {
  static const std::set<std::string> s{
      "i", "we", "you", "he", "she", "it", "they", "me", "us",
      "him", "them", "who", "whom", "what", "which", "someone",
      "anyone", "everyone", "nothing", "something"};
  return s;
}

inline const std::set<std::string>& verbs() {
  static const std::set<std::string> s{
      "is",    "are",   "was",     "were",   "be",      "been",  "being",
      "am",    "will",  "would",   "shall",  "should",  "can",   "could",
      "may",   "might", "must",    "do",     "does",    "did",   "done",
      "have",  "has",   "had",     "not",    "n't",     "also",  "so",
      "say",   "says",  "said",    "beat",   "see",     "saw",   "seen",
      "go",    "goes",  "went",    "gone",   "get",     "gets",  "got",
      "make",  "makes", "made",    "take",   "takes",   "took",  "perform",
      "performs", "win", "wins",   "won",    "lose",    "loses", "lost",
      "come",  "comes", "came",    "give",   "gives",   "gave",  "know",
      "knows", "knew",  "think",   "thinks", "thought", "run",   "runs",
      "ran"};
  return s;
}

inline const std::set<std::string>& adjectives() {
  static const std::set<std::string> s{
      "quick", "excited", "happy", "great", "new",  "last", "final",
      "good",  "best",    "big",   "small", "old",  "young", "long",
      "short", "high",    "low",   "many",  "few",  "other", "same"};
  return s;
}

inline const std::set<std::string>& prepositions() {
  static const std::set<std::string> s{
      "of", "in", "on", "at", "by", "for", "with", "to", "from",
      "about", "into", "over", "under", "after", "before", "between",
      "and", "or", "but", "if", "as", "than", "because", "while"};
  return s;
}

inline bool is_number_word(const std::string& w) {
  static const std::set<std::string> s{"one", "two", "three", "four", "five",
                                       "six", "seven", "eight", "nine", "ten"};
  if (s.count(w)) return true;
  return !w.empty() &&
         std::all_of(w.begin(), w.end(),
                     [](unsigned char c) { return std::isdigit(c); });
}

inline std::string tag_pos(const RawToken& tok) {
  if (!is_word_char(static_cast<unsigned char>(tok.text[0]))) return "PUNCT";
  std::string w = lower(tok.text);
  if (determiners().count(w)) return "DET";
  if (pronouns().count(w)) return "PRON";
  if (verbs().count(w)) return "VERB";
  if (adjectives().count(w)) return "ADJ";
  if (prepositions().count(w)) return "ADP";
  if (is_number_word(w)) return "NUM";
  if (std::isupper(static_cast<unsigned char>(tok.text[0]))) return "PROPN";
  if (w.size() > 4 && (w.ends_with("ing") || w.ends_with("ed"))) return "VERB";
  if (w.size() > 3 && w.ends_with("ly")) return "ADV";
  return "NOUN";
}

/// Sentence boundaries after [.!?] runs followed by whitespace.
inline std::vector<std::pair<std::size_t, std::size_t>> split_sentences(
    const std::string& text) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    if (i >= text.size()) break;
    std::size_t start = i;
    while (i < text.size()) {
      char c = text[i];
      if (c == '.' || c == '!' || c == '?') {
        while (i < text.size() &&
               (text[i] == '.' || text[i] == '!' || text[i] == '?'))
          ++i;
        if (i >= text.size() ||
            std::isspace(static_cast<unsigned char>(text[i])))
          break;
      } else {
        ++i;
      }
    }
    std::size_t end = i;
    while (end > start && std::isspace(static_cast<unsigned char>(text[end - 1])))
      --end;
    if (end > start) spans.emplace_back(start, end);
  }
  return spans;
}

inline SentenceAnnotation annotate_sentence(const std::string& sent_text,
                                            std::size_t char_offset) {
  SentenceAnnotation s;
  s.text = sent_text;
  s.char_offset = char_offset;
  auto raw = tokenize(sent_text);
  for (const auto& t : raw)
    s.tokens.push_back({t.text, t.start, t.end, tag_pos(t)});

  // Right-branching parse: each token hangs off its left neighbor.
  s.dep_heads.assign(s.tokens.size(), -1);
  s.dep_labels.assign(s.tokens.size(), "dep");
  for (std::size_t i = 1; i < s.tokens.size(); ++i)
    s.dep_heads[i] = static_cast<int>(i - 1);
  if (!s.dep_labels.empty()) s.dep_labels[0] = "root";

  // Determiner + modifier + noun-run chunker.
  std::size_t chunk_begin = s.tokens.size();
  bool has_nominal = false;
  auto flush = [&](std::size_t end_idx) {
    if (chunk_begin < end_idx && has_nominal)
      s.np_chunks.push_back({s.tokens[chunk_begin].char_start,
                             s.tokens[end_idx - 1].char_end, ""});
    chunk_begin = s.tokens.size();
    has_nominal = false;
  };
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    const std::string& pos = s.tokens[i].pos_tag;
    if (pos == "DET") {
      flush(i);
      chunk_begin = i;
    } else if (pos == "ADJ" || pos == "NUM" || pos == "NOUN" || pos == "PROPN" ||
               pos == "PRON") {
      if (chunk_begin == s.tokens.size()) chunk_begin = i;
      if (is_nominal_pos(pos)) has_nominal = true;
    } else {
      flush(i);
    }
  }
  flush(s.tokens.size());

  // Capitalized runs become entities; a stoplisted sentence-initial token
  // does not start one.
  std::size_t ent_begin = s.tokens.size();
  auto flush_ent = [&](std::size_t end_idx) {
    if (ent_begin < end_idx)
      s.entities.push_back({s.tokens[ent_begin].char_start,
                            s.tokens[end_idx - 1].char_end, "ENT"});
    ent_begin = s.tokens.size();
  };
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    const auto& t = s.tokens[i];
    bool cap = std::isupper(static_cast<unsigned char>(t.text[0])) != 0;
    std::string w = lower(t.text);
    bool stoplisted = determiners().count(w) || pronouns().count(w) ||
                      verbs().count(w) || prepositions().count(w);
    bool open = ent_begin != s.tokens.size();
    if (cap && open) continue;  // extend the current run
    if (cap && !stoplisted) {
      ent_begin = i;  // a capitalized stopword cannot open a run
    } else {
      flush_ent(i);
    }
  }
  flush_ent(s.tokens.size());
  return s;
}

}  // namespace heur

/// Deterministic rule-based annotator: tokenizer, determiner+noun-run
/// chunker, capitalized-run entity tagger, right-branching parse.
class HeuristicAnnotator : public Backend {
 public:
  Handshake handshake() override {
    return Handshake{"qafe/1", {"annotate"}, false, "heuristic-annotator"};
  }

 protected:
  json do_invoke(const std::string& op, const json& payload) override {
    if (op != "annotate")
      throw Error(ErrorCode::BackendUnavailable, "unsupported op: " + op);
    std::string text = payload.at("text").get<std::string>();
    json sentences = json::array();
    for (auto [start, end] : heur::split_sentences(text))
      sentences.push_back(sentence_to_json(
          heur::annotate_sentence(text.substr(start, end - start), start)));
    return json{{"sentences", sentences}};
  }
};

/// Cloze-template question generator: masks the answer span in the context.
class HeuristicQG : public Backend {
 public:
  Handshake handshake() override {
    return Handshake{"qafe/1", {"generate_question"}, false, "heuristic-qg"};
  }

 protected:
  json do_invoke(const std::string& op, const json& payload) override {
    if (op != "generate_question")
      throw Error(ErrorCode::BackendUnavailable, "unsupported op: " + op);
    std::string context = payload.at("context").get<std::string>();
    std::size_t start = payload.at("char_start").get<std::size_t>();
    std::size_t end = payload.at("char_end").get<std::size_t>();
    std::string masked = context.substr(0, start) + "<mask>" + context.substr(end);
    return json{{"question", "what : " + masked + " ?"}};
  }
};

/// Extractive QA by fuzzy alignment: for cloze questions, finds the span
/// whose left/right token context best matches the question template; the
/// match F1 doubles as the answerability probability.
class HeuristicQA : public Backend {
 public:
  explicit HeuristicQA(std::size_t max_span_tokens = 6)
      : max_span_(max_span_tokens) {}

  Handshake handshake() override {
    return Handshake{"qafe/1", {"answer"}, false, "heuristic-qa"};
  }

 protected:
  json do_invoke(const std::string& op, const json& payload) override {
    if (op != "answer")
      throw Error(ErrorCode::BackendUnavailable, "unsupported op: " + op);
    std::string question = payload.at("question").get<std::string>();
    std::string context = payload.at("context").get<std::string>();
    auto toks = heur::tokenize(context);
    std::vector<heur::RawToken> words;
    for (auto& t : toks)
      if (heur::is_word_char(static_cast<unsigned char>(t.text[0])))
        words.push_back(t);
    if (words.empty()) return json{{"answer", ""}, {"answerable_prob", 0.0}};

    std::size_t mask_pos = question.find("<mask>");
    double best = -1.0;
    std::size_t best_i = 0, best_len = 1;
    auto join = [&](std::size_t from, std::size_t count) {
      std::string out;
      for (std::size_t k = from; k < from + count && k < words.size(); ++k) {
        if (!out.empty()) out.push_back(' ');
        out += words[k].text;
      }
      return out;
    };
    if (mask_pos != std::string::npos) {
      std::string pre_text = question.substr(0, mask_pos);
      std::string post_text = question.substr(mask_pos + 6);
      auto pre = heur::tokenize(pre_text);
      auto post = heur::tokenize(post_text);
      // Drop the template scaffolding ("what :" prefix, trailing "?").
      std::string pre_join, post_join;
      for (auto& t : pre)
        if (t.text != "what" && t.text != ":") pre_join += t.text + " ";
      for (auto& t : post)
        if (t.text != "?") post_join += t.text + " ";
      std::size_t n_pre = heur::tokenize(pre_join).size();
      std::size_t n_post = heur::tokenize(post_join).size();
      for (std::size_t i = 0; i < words.size(); ++i) {
        for (std::size_t len = 1; len <= max_span_ && i + len <= words.size();
             ++len) {
          std::size_t pw = std::min(n_pre, i);
          std::string left = join(i - pw, pw);
          std::string right = join(i + len, n_post);
          double score = 0.0;
          if (n_pre + n_post == 0) {
            score = 0.0;
          } else {
            double lf = n_pre ? token_f1(pre_join, left) : 1.0;
            double rf = n_post ? token_f1(post_join, right) : 1.0;
            score = (lf + rf) / 2.0;
          }
          if (score > best) {
            best = score;
            best_i = i;
            best_len = len;
          }
        }
      }
    } else {
      for (std::size_t i = 0; i < words.size(); ++i) {
        for (std::size_t len = 1; len <= max_span_ && i + len <= words.size();
             ++len) {
          double score = token_f1(question, join(i, len));
          if (score > best) {
            best = score;
            best_i = i;
            best_len = len;
          }
        }
      }
    }
    std::size_t lo = words[best_i].start;
    std::size_t hi = words[best_i + best_len - 1].end;
    return json{{"answer", context.substr(lo, hi - lo)},
                {"answerable_prob", std::clamp(best, 0.0, 1.0)}};
  }

 private:
  std::size_t max_span_;
};

/// Token-overlap NLI: softmax over overlap-derived logits, so identical
/// texts maximize the entailment component.
class HeuristicNLI : public Backend {
 public:
  Handshake handshake() override {
    return Handshake{"qafe/1", {"entail"}, false, "heuristic-nli"};
  }

 protected:
  json do_invoke(const std::string& op, const json& payload) override {
    if (op != "entail")
      throw Error(ErrorCode::BackendUnavailable, "unsupported op: " + op);
    double o = token_f1(payload.at("premise").get<std::string>(),
                        payload.at("hypothesis").get<std::string>());
    double le = std::exp(2.0 * o);
    double lc = std::exp(2.0 * (1.0 - o));
    double ln = std::exp(1.0);
    double z = le + lc + ln;
    return json{{"contradiction", lc / z},
                {"neutral", ln / z},
                {"entailment", le / z}};
  }
};

/// Affine map of token F1 onto the 1-5 LERC scale.
class HeuristicLerc : public Backend {
 public:
  Handshake handshake() override {
    return Handshake{"qafe/1", {"overlap"}, false, "heuristic-lerc"};
  }

 protected:
  json do_invoke(const std::string& op, const json& payload) override {
    if (op != "overlap")
      throw Error(ErrorCode::BackendUnavailable, "unsupported op: " + op);
    std::string candidate = payload.at("candidate").get<std::string>();
    if (candidate.empty()) return json{{"score", 1.0}};
    double f1 = token_f1(payload.at("reference").get<std::string>(), candidate);
    return json{{"score", 1.0 + 4.0 * f1}};
  }
};

}  // namespace qafe
