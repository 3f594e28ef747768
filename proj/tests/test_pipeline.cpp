#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "qafe/heuristic_backend.hpp"
#include "qafe/pipeline.hpp"
#include "qafe/scripted_backend.hpp"

TEST_CASE("pinned Knicks trace scores one question end to end") {
  auto set = testutil::scripted_set(testutil::fixture("knicks_backend.json"));
  qafe::PipelineConfig config;
  qafe::MetricReport r =
      qafe::score_example(testutil::knicks_example(), set, config);

  // The fixture exposes a single noun chunk, so exactly one question runs.
  REQUIRE(r.questions.size() == 1);
  const auto& q = r.questions[0];
  CHECK(q.question == "Who did the Knicks beat?");
  CHECK(q.answer.text == "the Bucks");
  CHECK_FALSE(q.filtered);
  CHECK(q.input_answerable);
  CHECK(q.input_answer == "the Rockets");

  // Judge score 1.8 on the 1-5 scale rescales to (1.8-1)/4 = 0.20.
  CHECK(q.overlap_scores.at("LERC") == Catch::Approx(0.20).margin(1e-9));
  CHECK(r.n_selected == 1);
  CHECK(r.n_scored == 1);
  CHECK_FALSE(r.degenerate);
  CHECK(r.score == Catch::Approx(0.20).margin(1e-9));

  auto vec = qafe::answer_score_vector(testutil::knicks_example(), set, config);
  REQUIRE(vec.size() == 1);
  CHECK(vec[0] == Catch::Approx(0.20).margin(1e-9));
}

TEST_CASE("answerability penalty zeroes an unanswerable question") {
  auto set = testutil::scripted_set(testutil::fixture("tour_backend.json"));
  qafe::EvaluationExample ex = testutil::tour_example();

  qafe::PipelineConfig with_penalty;
  qafe::MetricReport penalized = qafe::score_example(ex, set, with_penalty);
  REQUIRE(penalized.questions.size() == 1);
  CHECK(penalized.questions[0].penalty_applied);
  CHECK_FALSE(penalized.questions[0].input_answerable);
  CHECK(penalized.score == Catch::Approx(0.0).margin(1e-12));
  for (const auto& [name, value] : penalized.questions[0].overlap_scores)
    CHECK(value == 0.0);

  qafe::PipelineConfig no_penalty = with_penalty;
  no_penalty.answerability_penalty_enabled = false;
  qafe::MetricReport lenient = qafe::score_example(ex, set, no_penalty);
  REQUIRE(lenient.questions.size() == 1);
  CHECK_FALSE(lenient.questions[0].penalty_applied);
  // Judge score 4.2 rescales to (4.2-1)/4 = 0.80.
  CHECK(lenient.score == Catch::Approx(0.80).margin(1e-9));
  CHECK(penalized.score <= lenient.score);
}

TEST_CASE("zero-shot aggregation over the entailment matrix") {
  SECTION("hand-worked single-column matrix") {
    qafe::EntailmentMatrix m;
    m.values = {{{0.7, 0.1, 0.2}}, {{0.1, 0.1, 0.8}}};
    CHECK(qafe::zero_shot_from_matrix(m) == Catch::Approx(0.8));
  }
  SECTION("per-column max, then mean across columns") {
    qafe::EntailmentMatrix m;
    m.values = {{{0.7, 0.1, 0.2}, {0.1, 0.1, 0.8}},
                {{0.1, 0.1, 0.8}, {0.6, 0.2, 0.2}}};
    CHECK(qafe::zero_shot_from_matrix(m) ==
          Catch::Approx((0.8 + 0.8) / 2.0));
  }
  SECTION("empty matrix is rejected") {
    qafe::EntailmentMatrix m;
    CHECK_THROWS_AS(qafe::zero_shot_from_matrix(m), qafe::Error);
  }
}

TEST_CASE("pinned Knicks zero-shot entailment score") {
  auto set = testutil::scripted_set(testutil::fixture("knicks_backend.json"));
  qafe::EvaluationExample ex = testutil::knicks_example();
  qafe::EntailmentMatrix m =
      qafe::entailment_matrix(ex, *set.annotator, *set.nli);
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 1);
  // max(0.03, 0.08) over the document sentences.
  CHECK(qafe::zero_shot_entailment_score(ex, *set.annotator, *set.nli) ==
        Catch::Approx(0.08).margin(1e-9));
}

TEST_CASE("entailment matrix matches brute-force pairwise calls") {
  auto set = testutil::heuristic_set();
  qafe::EvaluationExample ex;
  ex.id = "m";
  ex.document =
      "Rain flooded the valley. Rescue teams arrived. Roads were closed.";
  ex.summary = "Rescue teams arrived quickly. The valley flooded.";

  qafe::EntailmentMatrix m =
      qafe::entailment_matrix(ex, *set.annotator, *set.nli);
  auto doc_sents = qafe::sentence_texts(*set.annotator, ex.document);
  auto summ_sents = qafe::sentence_texts(*set.annotator, ex.summary);
  REQUIRE(m.rows() == doc_sents.size());
  REQUIRE(m.cols() == summ_sents.size());
  REQUIRE(m.rows() == 3);
  REQUIRE(m.cols() == 2);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) {
      qafe::NliTriple direct = qafe::entail(*set.nli, doc_sents[i], summ_sents[j]);
      CHECK(m.values[i][j].entailment == Catch::Approx(direct.entailment));
      CHECK(m.values[i][j].contradiction == Catch::Approx(direct.contradiction));
      CHECK(m.values[i][j].neutral == Catch::Approx(direct.neutral));
    }
}

TEST_CASE("an unanswerable summary yields the degenerate fallback") {
  auto set = testutil::heuristic_set();
  qafe::EvaluationExample ex;
  ex.id = "deg";
  ex.document = "Some document text.";
  ex.summary = "Go quickly.";  // no nominal content, nothing to ask about
  qafe::PipelineConfig config;
  qafe::MetricReport r = qafe::score_example(ex, set, config);
  CHECK(r.degenerate);
  CHECK(r.n_scored == 0);
  CHECK(r.score == Catch::Approx(0.5));

  config.degenerate_score = 0.25;
  CHECK(qafe::score_example(ex, set, config).score == Catch::Approx(0.25));
}

TEST_CASE("randomized traces keep the pipeline invariants") {
  for (std::uint64_t seed = 100; seed < 200; ++seed) {
    std::string failure = testutil::run_fuzz_iteration(seed);
    INFO(failure);
    CHECK(failure.empty());
  }
}

TEST_CASE("parallel batch scoring matches sequential scoring exactly") {
  auto set = testutil::heuristic_set();
  std::vector<qafe::EvaluationExample> examples;
  for (std::uint64_t i = 0; i < 50; ++i) examples.push_back(testutil::fuzz_example(i));

  qafe::PipelineConfig seq;
  qafe::PipelineConfig par;
  par.parallelism = 8;
  auto a = qafe::score_examples(examples, set, seq);
  auto b = qafe::score_examples(examples, set, par);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].report.has_value());
    REQUIRE(b[i].report.has_value());
    CHECK(a[i].report->example_id == b[i].report->example_id);
    CHECK(a[i].report->example_id == examples[i].id);
    CHECK(a[i].report->score == b[i].report->score);
    CHECK(qafe::to_json(*a[i].report) == qafe::to_json(*b[i].report));
  }
}

TEST_CASE("a dead backend aborts the batch and names the example") {
  auto empty = std::make_shared<qafe::ScriptedBackend>("empty");
  qafe::BackendSet set{empty, empty, empty, empty, empty};
  qafe::PipelineConfig config;
  try {
    qafe::score_examples({testutil::knicks_example()}, set, config);
    FAIL("expected BackendUnavailable");
  } catch (const qafe::Error& e) {
    CHECK(e.code() == qafe::ErrorCode::BackendUnavailable);
    CHECK(std::string(e.what()).find("t1") != std::string::npos);
  }
}

TEST_CASE("non-fatal per-example failures become error outcomes") {
  auto set = testutil::heuristic_set();
  qafe::EvaluationExample good = testutil::fuzz_example(1);
  qafe::EvaluationExample bad;
  bad.id = "bad";
  bad.document = "doc.";
  bad.summary = "";  // annotation will reject this downstream
  qafe::PipelineConfig config;
  auto outcomes = qafe::score_examples({good, bad}, set, config);
  REQUIRE(outcomes.size() == 2);
  CHECK(outcomes[0].report.has_value());
  CHECK_FALSE(outcomes[1].report.has_value());
  CHECK(outcomes[1].error_code == "AnnotationFailure");
  CHECK(outcomes[1].error_message.find("bad") != std::string::npos);
}

TEST_CASE("answer strategy changes which questions are asked") {
  auto set = testutil::heuristic_set();
  qafe::EvaluationExample ex;
  ex.id = "s";
  ex.document = "Alice Smith visited Paris. She bought fresh bread.";
  ex.summary = "Alice Smith bought fresh bread.";
  qafe::PipelineConfig ner_cfg;
  ner_cfg.answer_strategy = qafe::AnswerStrategy::NER;
  qafe::PipelineConfig all_cfg;
  all_cfg.answer_strategy = qafe::AnswerStrategy::ALL;
  auto ner = qafe::score_example(ex, set, ner_cfg);
  auto all = qafe::score_example(ex, set, all_cfg);
  CHECK(ner.n_selected <= all.n_selected);
  CHECK(all.n_selected >= 1);
}
