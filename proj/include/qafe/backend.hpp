#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "qafe/annotation.hpp"
#include "qafe/core.hpp"
#include "qafe/error.hpp"

namespace qafe {

/// First message of every backend channel.
struct Handshake {
  std::string protocol = "qafe/1";
  std::vector<std::string> ops;
  bool serialized = false;
  std::string backend_id;
};

inline json to_json(const Handshake& h) {
  return json{{"protocol", h.protocol},
              {"ops", h.ops},
              {"serialized", h.serialized},
              {"backend_id", h.backend_id}};
}

inline Handshake handshake_from_json(const json& j) {
  Handshake h;
  h.protocol = j.at("protocol").get<std::string>();
  if (h.protocol != "qafe/1")
    throw Error(ErrorCode::BackendUnavailable,
                "unsupported protocol: " + h.protocol);
  h.ops = j.at("ops").get<std::vector<std::string>>();
  h.serialized = j.at("serialized").get<bool>();
  h.backend_id = j.at("backend_id").get<std::string>();
  return h;
}

struct QAResult {
  std::string answer_text;
  double answerable_prob = 0.0;
  bool is_answerable = false;
};

struct LercScore {
  double value = 1.0;  // in [1, 5]
};

/// Model backend. invoke() counts calls so caching layers are observable
/// in tests; implementations override do_invoke().
class Backend {
 public:
  virtual ~Backend() = default;

  virtual Handshake handshake() = 0;

  json invoke(const std::string& op, const json& payload) {
    ++calls_;
    return do_invoke(op, payload);
  }

  std::uint64_t calls() const { return calls_.load(); }

 protected:
  virtual json do_invoke(const std::string& op, const json& payload) = 0;

 private:
  std::atomic<std::uint64_t> calls_{0};
};

using BackendPtr = std::shared_ptr<Backend>;

// ---------------------------------------------------------------------------
// Typed wrappers over the wire payloads.
// ---------------------------------------------------------------------------

inline SentenceAnnotation sentence_from_json(const json& j) {
  SentenceAnnotation s;
  s.text = j.at("text").get<std::string>();
  s.char_offset = j.at("char_offset").get<std::size_t>();
  for (const auto& t : j.at("tokens")) {
    TokenAnnotation tok;
    tok.text = t.at(0).get<std::string>();
    tok.char_start = t.at(1).get<std::size_t>();
    tok.char_end = t.at(2).get<std::size_t>();
    tok.pos_tag = t.at(3).get<std::string>();
    s.tokens.push_back(std::move(tok));
  }
  for (const auto& e : j.at("entities"))
    s.entities.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(),
                          e.at(2).get<std::string>()});
  for (const auto& c : j.at("np_chunks"))
    s.np_chunks.push_back(
        {c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>(), ""});
  s.dep_heads = j.at("dep_heads").get<std::vector<int>>();
  s.dep_labels = j.at("dep_labels").get<std::vector<std::string>>();
  return s;
}

inline json sentence_to_json(const SentenceAnnotation& s) {
  json tokens = json::array();
  for (const auto& t : s.tokens)
    tokens.push_back(json::array({t.text, t.char_start, t.char_end, t.pos_tag}));
  json entities = json::array();
  for (const auto& e : s.entities)
    entities.push_back(json::array({e.char_start, e.char_end, e.entity_type}));
  json chunks = json::array();
  for (const auto& c : s.np_chunks)
    chunks.push_back(json::array({c.char_start, c.char_end}));
  return json{{"text", s.text},       {"char_offset", s.char_offset},
              {"tokens", tokens},     {"entities", entities},
              {"np_chunks", chunks},  {"dep_heads", s.dep_heads},
              {"dep_labels", s.dep_labels}};
}

inline std::vector<SentenceAnnotation> annotate(Backend& backend,
                                                const std::string& text) {
  if (trim_copy(text).empty())
    throw Error(ErrorCode::EmptyText, "annotate: empty text");
  json resp = backend.invoke("annotate", json{{"text", text}});
  if (!resp.contains("sentences") || !resp["sentences"].is_array())
    throw Error(ErrorCode::MalformedAnnotation, "missing sentences array");
  std::vector<SentenceAnnotation> out;
  for (const auto& js : resp["sentences"]) {
    SentenceAnnotation s = sentence_from_json(js);
    check_annotation(s);
    out.push_back(std::move(s));
  }
  if (out.empty())
    throw Error(ErrorCode::MalformedAnnotation, "annotator returned no sentences");
  std::size_t prev_end = 0;
  for (const auto& s : out) {
    if (s.char_offset < prev_end || s.char_offset + s.text.size() > text.size())
      throw Error(ErrorCode::MalformedAnnotation, "sentences out of order");
    if (text.substr(s.char_offset, s.text.size()) != s.text)
      throw Error(ErrorCode::MalformedAnnotation, "sentence text mismatch");
    prev_end = s.char_offset + s.text.size();
  }
  return out;
}

inline std::string generate_question(Backend& backend, const AnswerCandidate& answer,
                                     const std::string& context) {
  if (answer.char_end > context.size() ||
      context.substr(answer.char_start, answer.char_end - answer.char_start) !=
          answer.text)
    throw Error(ErrorCode::MisalignedInputs,
                "answer span does not match context: " + answer.text);
  json resp = backend.invoke(
      "generate_question",
      json{{"answer", answer.text},
           {"char_start", answer.char_start},
           {"char_end", answer.char_end},
           {"context", context}});
  std::string q = resp.at("question").get<std::string>();
  if (trim_copy(q).empty())
    throw Error(ErrorCode::EmptyGeneration, "backend returned blank question");
  return q;
}

inline QAResult answer_question(Backend& backend, const std::string& question,
                                const std::string& context,
                                double answerability_threshold = 0.5) {
  if (question.empty() || context.empty())
    throw Error(ErrorCode::EmptyText, "answer_question: empty input");
  json resp = backend.invoke("answer",
                             json{{"question", question}, {"context", context}});
  QAResult r;
  r.answer_text = resp.at("answer").get<std::string>();
  r.answerable_prob = resp.at("answerable_prob").get<double>();
  if (r.answerable_prob < 0.0 || r.answerable_prob > 1.0)
    throw Error(ErrorCode::MalformedAnnotation, "answerable_prob out of [0,1]");
  r.is_answerable = r.answerable_prob >= answerability_threshold;
  return r;
}

inline NliTriple entail(Backend& backend, const std::string& premise,
                        const std::string& hypothesis) {
  if (premise.empty() || hypothesis.empty())
    throw Error(ErrorCode::EmptyText, "entail: empty input");
  json resp = backend.invoke(
      "entail", json{{"premise", premise}, {"hypothesis", hypothesis}});
  NliTriple t;
  t.contradiction = resp.at("contradiction").get<double>();
  t.neutral = resp.at("neutral").get<double>();
  t.entailment = resp.at("entailment").get<double>();
  check_nli_triple(t);
  return t;
}

inline LercScore lerc_overlap(Backend& backend, const std::string& question,
                              const std::string& context,
                              const std::string& reference,
                              const std::string& candidate) {
  if (question.empty() || context.empty() || reference.empty())
    throw Error(ErrorCode::EmptyText, "lerc_overlap: empty input");
  json resp = backend.invoke("overlap",
                             json{{"question", question},
                                  {"context", context},
                                  {"reference", reference},
                                  {"candidate", candidate}});
  LercScore s;
  s.value = resp.at("score").get<double>();
  if (s.value < 1.0 || s.value > 5.0)
    throw Error(ErrorCode::MalformedAnnotation, "LERC score out of [1,5]");
  return s;
}

}  // namespace qafe
