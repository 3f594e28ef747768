#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qafe/error.hpp"

namespace qafe {

using json = nlohmann::json;

enum class AnswerStrategy { NER, NP_CHUNKS, MAX_NP, ALL };

inline const char* strategy_name(AnswerStrategy s) {
  switch (s) {
    case AnswerStrategy::NER: return "NER";
    case AnswerStrategy::NP_CHUNKS: return "NP_CHUNKS";
    case AnswerStrategy::MAX_NP: return "MAX_NP";
    case AnswerStrategy::ALL: return "ALL";
  }
  return "?";
}

inline AnswerStrategy strategy_from_name(const std::string& name) {
  if (name == "NER") return AnswerStrategy::NER;
  if (name == "NP_CHUNKS") return AnswerStrategy::NP_CHUNKS;
  if (name == "MAX_NP") return AnswerStrategy::MAX_NP;
  if (name == "ALL") return AnswerStrategy::ALL;
  throw Error(ErrorCode::ConfigError, "unknown answer strategy: " + name);
}

/// One (document, summary, label) record with dataset/system provenance.
/// Immutable after construction; safe to share across workers.
struct EvaluationExample {
  std::string id;
  std::string dataset;
  std::string system;  // summarizer id, may be empty
  std::string document;
  std::string summary;
  std::optional<int> label;           // 1 = factually consistent
  std::optional<double> human_score;  // real-valued judgment channel
  std::string split;                  // "valid" or "test"
};

/// A text span selected from the summary to be questioned.
struct AnswerCandidate {
  std::string text;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::size_t sentence_index = 0;
  AnswerStrategy strategy = AnswerStrategy::NP_CHUNKS;
};

/// Full per-question trace through the pipeline.
struct QuestionRecord {
  AnswerCandidate answer;
  std::string question;
  bool summ_answerable = false;
  std::string summ_answer;
  double summ_f1 = 0.0;
  bool filtered = false;
  bool input_answerable = false;
  std::string input_answer;
  std::map<std::string, double> overlap_scores;
  bool penalty_applied = false;
};

/// Per-example result: final score plus per-question traces.
struct MetricReport {
  std::string example_id;
  double score = 0.0;
  std::vector<QuestionRecord> questions;
  std::size_t n_selected = 0;
  std::size_t n_scored = 0;
  bool degenerate = false;
};

/// M x N grid of (contradiction, neutral, entailment) triples;
/// rows index document sentences, columns index summary sentences.
struct NliTriple {
  double contradiction = 0.0;
  double neutral = 0.0;
  double entailment = 0.0;
};

struct EntailmentMatrix {
  std::vector<std::vector<NliTriple>> values;  // [doc_sentence][summary_sentence]

  std::size_t rows() const { return values.size(); }
  std::size_t cols() const { return values.empty() ? 0 : values.front().size(); }
};

inline void check_nli_triple(const NliTriple& t) {
  if (t.contradiction < 0 || t.neutral < 0 || t.entailment < 0)
    throw Error(ErrorCode::MalformedAnnotation, "negative NLI probability");
  double sum = t.contradiction + t.neutral + t.entailment;
  if (sum < 1.0 - 1e-6 || sum > 1.0 + 1e-6)
    throw Error(ErrorCode::MalformedAnnotation,
                "NLI triple sums to " + std::to_string(sum));
}

inline std::string trim_copy(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Validates a raw ingested record. Binary label and human score are
/// independent channels; both may be present.
inline EvaluationExample validate_example(const json& raw) {
  EvaluationExample ex;
  if (!raw.contains("id") || !raw["id"].is_string())
    throw Error(ErrorCode::MissingField, "id");
  ex.id = raw["id"].get<std::string>();
  for (const char* field : {"document", "summary"}) {
    if (!raw.contains(field) || !raw[field].is_string())
      throw Error(ErrorCode::MissingField, field);
  }
  ex.document = raw["document"].get<std::string>();
  ex.summary = raw["summary"].get<std::string>();
  if (trim_copy(ex.document).empty())
    throw Error(ErrorCode::EmptyText, "document is empty: " + ex.id);
  if (trim_copy(ex.summary).empty())
    throw Error(ErrorCode::EmptyText, "summary is empty: " + ex.id);
  ex.dataset = raw.value("dataset", std::string());
  ex.system = raw.value("system", std::string());
  ex.split = raw.value("split", std::string("test"));
  if (raw.contains("label") && !raw["label"].is_null()) {
    int label = raw["label"].get<int>();
    if (label != 0 && label != 1)
      throw Error(ErrorCode::ConflictingLabels,
                  "binary label must be 0 or 1, got " + std::to_string(label));
    ex.label = label;
  }
  if (raw.contains("human_score") && !raw["human_score"].is_null())
    ex.human_score = raw["human_score"].get<double>();
  return ex;
}

inline json to_json(const EvaluationExample& ex) {
  json j{{"id", ex.id},       {"dataset", ex.dataset}, {"system", ex.system},
         {"document", ex.document}, {"summary", ex.summary}, {"split", ex.split}};
  if (ex.label) j["label"] = *ex.label;
  if (ex.human_score) j["human_score"] = *ex.human_score;
  return j;
}

inline json to_json(const AnswerCandidate& a) {
  return json{{"text", a.text},
              {"char_start", a.char_start},
              {"char_end", a.char_end},
              {"sentence_index", a.sentence_index},
              {"strategy", strategy_name(a.strategy)}};
}

inline json to_json(const QuestionRecord& q) {
  return json{{"answer", to_json(q.answer)},
              {"question", q.question},
              {"summ_answerable", q.summ_answerable},
              {"summ_answer", q.summ_answer},
              {"summ_f1", q.summ_f1},
              {"filtered", q.filtered},
              {"input_answerable", q.input_answerable},
              {"input_answer", q.input_answer},
              {"overlap_scores", q.overlap_scores},
              {"penalty_applied", q.penalty_applied}};
}

inline json to_json(const MetricReport& r) {
  json qs = json::array();
  for (const auto& q : r.questions) qs.push_back(to_json(q));
  return json{{"example_id", r.example_id}, {"score", r.score},
              {"questions", qs},            {"n_selected", r.n_selected},
              {"n_scored", r.n_scored},     {"degenerate", r.degenerate}};
}

}  // namespace qafe
