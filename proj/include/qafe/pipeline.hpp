#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qafe/backend.hpp"
#include "qafe/overlap.hpp"

namespace qafe {

struct PipelineConfig {
  AnswerStrategy answer_strategy = AnswerStrategy::NP_CHUNKS;
  std::string qg_backend_id;
  std::string qa_backend_id;
  OverlapConfig overlap;
  bool summ_filter_enabled = true;
  double summ_f1_threshold = 0.60;
  bool answerability_penalty_enabled = true;
  double penalty_value = 0.0;
  double degenerate_score = 0.5;
  double answerability_threshold = 0.5;
  int parallelism = 1;

  void validate() const {
    overlap.validate();
    if (summ_f1_threshold < 0.0 || summ_f1_threshold > 1.0)
      throw Error(ErrorCode::ConfigError, "summ_f1_threshold out of [0,1]");
    if (parallelism < 1)
      throw Error(ErrorCode::ConfigError, "parallelism must be positive");
  }
};

/// All model endpoints the pipeline talks to.
struct BackendSet {
  BackendPtr annotator;
  BackendPtr qg;
  BackendPtr qa;
  BackendPtr nli;
  BackendPtr lerc;
};

/// Raw overlap values for one answered question. The Answerability Penalty
/// itself is applied by the pipeline, not here.
inline std::map<std::string, double> score_overlap(
    const std::string& question, const std::string& document,
    const std::string& reference, const QAResult& input_qa,
    const OverlapConfig& config, Backend* lerc_backend) {
  std::map<std::string, double> out;
  for (OverlapMetric m : config.metrics) {
    switch (m) {
      case OverlapMetric::EM:
        out["EM"] = exact_match(reference, input_qa.answer_text);
        break;
      case OverlapMetric::F1:
        out["F1"] = token_f1(reference, input_qa.answer_text);
        break;
      case OverlapMetric::IS_ANSWERED_INPUT:
        out["IS_ANSWERED_INPUT"] = input_qa.is_answerable ? 1.0 : 0.0;
        break;
      case OverlapMetric::LERC: {
        if (!lerc_backend)
          throw Error(ErrorCode::BackendUnavailable, "no LERC backend configured");
        double v = lerc_overlap(*lerc_backend, question, document, reference,
                                input_qa.answer_text)
                       .value;
        out["LERC"] = config.lerc_rescale ? (v - 1.0) / 4.0 : v;
        break;
      }
    }
  }
  return out;
}

/// QuestionRecord flag semantics under a given config.
inline bool question_record_consistent(const QuestionRecord& q,
                                       const PipelineConfig& config) {
  if (q.question.empty()) return q.filtered;  // blank generation is never scored
  bool should_filter =
      config.summ_filter_enabled &&
      (!q.summ_answerable || q.summ_f1 < config.summ_f1_threshold);
  if (q.filtered != should_filter) return false;
  bool should_penalize = !q.filtered && config.answerability_penalty_enabled &&
                         !q.input_answerable;
  if (q.penalty_applied != should_penalize) return false;
  if (q.penalty_applied)
    for (const auto& [name, value] : q.overlap_scores)
      if (value != config.penalty_value) return false;
  return true;
}

/// End-to-end score for one example: select answers, generate questions,
/// filter on summary-side answerability, answer against the document, apply
/// the Answerability Penalty, and average the primary overlap metric.
inline MetricReport score_example(const EvaluationExample& example,
                                  const BackendSet& backends,
                                  const PipelineConfig& config) {
  config.validate();
  MetricReport report;
  report.example_id = example.id;

  std::vector<SentenceAnnotation> sentences;
  try {
    sentences = annotate(*backends.annotator, example.summary);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::BackendUnavailable) throw;
    throw Error(ErrorCode::AnnotationFailure,
                example.id + ": " + std::string(e.what()));
  }
  auto candidates =
      select_answers(example.summary, sentences, config.answer_strategy);
  report.n_selected = candidates.size();

  for (const auto& cand : candidates) {
    QuestionRecord rec;
    rec.answer = cand;
    bool generation_failed = false;
    try {
      rec.question = generate_question(*backends.qg, cand, example.summary);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyGeneration) throw;
      generation_failed = true;  // scored as a question the summary cannot answer
    }
    if (!generation_failed) {
      QAResult summ_qa = answer_question(*backends.qa, rec.question,
                                         example.summary,
                                         config.answerability_threshold);
      rec.summ_answerable = summ_qa.is_answerable;
      rec.summ_answer = summ_qa.answer_text;
      rec.summ_f1 = token_f1(cand.text, summ_qa.answer_text);
    }
    rec.filtered = config.summ_filter_enabled &&
                   (!rec.summ_answerable ||
                    rec.summ_f1 < config.summ_f1_threshold);
    if (generation_failed && !config.summ_filter_enabled) rec.filtered = true;

    if (!rec.filtered) {
      QAResult input_qa = answer_question(*backends.qa, rec.question,
                                          example.document,
                                          config.answerability_threshold);
      rec.input_answerable = input_qa.is_answerable;
      rec.input_answer = input_qa.answer_text;
      rec.penalty_applied =
          config.answerability_penalty_enabled && !input_qa.is_answerable;
      if (rec.penalty_applied) {
        for (OverlapMetric m : config.overlap.metrics)
          rec.overlap_scores[overlap_metric_name(m)] = config.penalty_value;
      } else {
        rec.overlap_scores =
            score_overlap(rec.question, example.document, cand.text, input_qa,
                          config.overlap, backends.lerc.get());
      }
    }
    report.questions.push_back(std::move(rec));
  }

  const std::string primary = overlap_metric_name(config.overlap.primary_metric);
  double sum = 0.0;
  for (const auto& q : report.questions) {
    if (q.filtered) continue;
    ++report.n_scored;
    sum += q.overlap_scores.at(primary);
  }
  if (report.n_scored == 0) {
    report.degenerate = true;
    report.score = config.degenerate_score;
  } else {
    report.score = sum / static_cast<double>(report.n_scored);
  }
  return report;
}

/// Per-question primary-metric scores of the surviving questions.
inline std::vector<double> answer_score_vector(const EvaluationExample& example,
                                               const BackendSet& backends,
                                               const PipelineConfig& config) {
  MetricReport report = score_example(example, backends, config);
  const std::string primary = overlap_metric_name(config.overlap.primary_metric);
  std::vector<double> scores;
  for (const auto& q : report.questions)
    if (!q.filtered) scores.push_back(q.overlap_scores.at(primary));
  return scores;
}

inline std::vector<std::string> sentence_texts(Backend& annotator,
                                               const std::string& text) {
  std::vector<std::string> out;
  for (const auto& s : annotate(annotator, text)) out.push_back(s.text);
  return out;
}

/// One entail call per (document sentence, summary sentence) pair.
inline EntailmentMatrix entailment_matrix(const EvaluationExample& example,
                                          Backend& annotator, Backend& nli) {
  auto doc_sents = sentence_texts(annotator, example.document);
  auto summ_sents = sentence_texts(annotator, example.summary);
  EntailmentMatrix m;
  m.values.resize(doc_sents.size());
  for (std::size_t i = 0; i < doc_sents.size(); ++i) {
    m.values[i].reserve(summ_sents.size());
    for (const auto& hyp : summ_sents)
      m.values[i].push_back(entail(nli, doc_sents[i], hyp));
  }
  return m;
}

inline double zero_shot_from_matrix(const EntailmentMatrix& m) {
  if (m.rows() == 0 || m.cols() == 0)
    throw Error(ErrorCode::EmptyText, "empty entailment matrix");
  double total = 0.0;
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double best = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
      best = std::max(best, m.values[i][j].entailment);
    total += best;
  }
  return total / static_cast<double>(m.cols());
}

/// Zero-shot entailment aggregation: per summary sentence, max entailment
/// over document sentences; mean over summary sentences.
inline double zero_shot_entailment_score(const EvaluationExample& example,
                                         Backend& annotator, Backend& nli) {
  return zero_shot_from_matrix(entailment_matrix(example, annotator, nli));
}

/// One example's outcome in a batch run; failures other than backend
/// unavailability become per-example error records.
struct ExampleOutcome {
  std::optional<MetricReport> report;
  std::string error_code;
  std::string error_message;
};

/// Scores examples concurrently up to config.parallelism; outcomes are
/// returned in input order regardless of completion order.
inline std::vector<ExampleOutcome> score_examples(
    const std::vector<EvaluationExample>& examples, const BackendSet& backends,
    const PipelineConfig& config) {
  config.validate();
  std::vector<ExampleOutcome> outcomes(examples.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> backend_down{false};
  std::string backend_error;
  std::mutex error_mutex;

  auto worker = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= examples.size() || backend_down.load()) return;
      try {
        outcomes[i].report = score_example(examples[i], backends, config);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::BackendUnavailable) {
          std::lock_guard<std::mutex> lock(error_mutex);
          backend_error = examples[i].id + ": " + e.what();
          backend_down.store(true);
          return;
        }
        outcomes[i].error_code = error_code_name(e.code());
        outcomes[i].error_message = e.what();
      }
    }
  };

  int threads = std::min<int>(config.parallelism,
                              static_cast<int>(examples.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (backend_down.load())
    throw Error(ErrorCode::BackendUnavailable, backend_error);
  return outcomes;
}

}  // namespace qafe
