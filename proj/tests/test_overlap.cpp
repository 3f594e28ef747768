#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "qafe/heuristic_backend.hpp"
#include "qafe/overlap.hpp"
#include "qafe/pipeline.hpp"

TEST_CASE("normalize lowercases, strips punctuation and articles") {
  CHECK(qafe::normalize("the Bucks") == "bucks");
  CHECK(qafe::normalize("The Rockets!") == "rockets");
  CHECK(qafe::normalize("") == "");
  CHECK(qafe::normalize("An  Apple   a Day.") == "apple day");
  CHECK(qafe::normalize("  the  \t a an ") == "");
  CHECK(qafe::normalize("semi-final") == "semifinal");
  CHECK(qafe::normalize("“quoted” — dash") == "quoted dash");
}

TEST_CASE("normalize is idempotent") {
  std::mt19937 rng(11);
  for (int i = 0; i < 10000; ++i) {
    std::string s = testutil::random_text(rng);
    std::string once = qafe::normalize(s);
    CHECK(qafe::normalize(once) == once);
  }
}

TEST_CASE("hand-worked exact match and token F1 cases") {
  for (const auto& c : testutil::overlap_cases()) {
    INFO("reference='" << c.reference << "' candidate='" << c.candidate << "'");
    CHECK(qafe::exact_match(c.reference, c.candidate) == c.em);
    CHECK(qafe::token_f1(c.reference, c.candidate) ==
          Catch::Approx(c.f1).margin(1e-12));
  }
  CHECK(testutil::overlap_cases().size() >= 20);
}

TEST_CASE("exact match implies perfect F1 on random pairs") {
  std::mt19937 rng(23);
  int matches = 0;
  for (int i = 0; i < 100000; ++i) {
    std::string a = testutil::random_text(rng);
    std::string b = (i % 4 == 0) ? a : testutil::random_text(rng);
    if (qafe::exact_match(a, b) == 1) {
      ++matches;
      if (qafe::token_f1(a, b) != 1.0) {
        INFO("a='" << a << "' b='" << b << "'");
        REQUIRE(qafe::token_f1(a, b) == 1.0);
      }
    }
  }
  CHECK(matches > 1000);  // the property must actually be exercised
}

TEST_CASE("overlap metrics are symmetric") {
  std::mt19937 rng(31);
  for (int i = 0; i < 2000; ++i) {
    std::string a = testutil::random_text(rng);
    std::string b = testutil::random_text(rng);
    CHECK(qafe::exact_match(a, b) == qafe::exact_match(b, a));
    CHECK(qafe::token_f1(a, b) == Catch::Approx(qafe::token_f1(b, a)).margin(1e-15));
  }
}

TEST_CASE("token F1 empty conventions") {
  CHECK(qafe::token_f1("", "") == 1.0);
  CHECK(qafe::token_f1("the", "") == 1.0);  // article-only normalizes to empty
  CHECK(qafe::token_f1("word", "") == 0.0);
  CHECK(qafe::token_f1("", "word") == 0.0);
}

TEST_CASE("overlap config requires the primary metric to be computed") {
  qafe::OverlapConfig config;
  CHECK_NOTHROW(config.validate());
  config.metrics = {qafe::OverlapMetric::EM};
  config.primary_metric = qafe::OverlapMetric::LERC;
  CHECK_THROWS_AS(config.validate(), qafe::Error);
}

TEST_CASE("metric names round-trip") {
  for (auto m : {qafe::OverlapMetric::EM, qafe::OverlapMetric::F1,
                 qafe::OverlapMetric::LERC, qafe::OverlapMetric::IS_ANSWERED_INPUT})
    CHECK(qafe::overlap_metric_from_name(qafe::overlap_metric_name(m)) == m);
}

TEST_CASE("score_overlap computes each configured metric") {
  qafe::HeuristicLerc lerc;
  qafe::OverlapConfig config;  // EM, F1, LERC, IS_ANSWERED_INPUT

  qafe::QAResult qa;
  qa.answer_text = "the Rockets";
  qa.answerable_prob = 0.9;
  qa.is_answerable = true;

  auto scores = qafe::score_overlap("Who did the Knicks beat?",
                                    "The Knicks beat the Rockets.", "the Bucks",
                                    qa, config, &lerc);
  CHECK(scores.at("EM") == 0.0);
  CHECK(scores.at("F1") == 0.0);
  CHECK(scores.at("IS_ANSWERED_INPUT") == 1.0);
  CHECK(scores.at("LERC") >= 0.0);
  CHECK(scores.at("LERC") <= 1.0);

  SECTION("identical answers max out every metric") {
    qa.answer_text = "the Bucks";
    auto perfect = qafe::score_overlap("q?", "doc with the Bucks.", "the Bucks",
                                       qa, config, &lerc);
    CHECK(perfect.at("EM") == 1.0);
    CHECK(perfect.at("F1") == 1.0);
    CHECK(perfect.at("LERC") == Catch::Approx(1.0));  // rescaled 5.0
  }
  SECTION("unanswerable flips IS_ANSWERED_INPUT, raw values still computed") {
    qa.is_answerable = false;
    auto raw = qafe::score_overlap("q?", "doc.", "the Bucks", qa, config, &lerc);
    CHECK(raw.at("IS_ANSWERED_INPUT") == 0.0);
  }
  SECTION("LERC without a backend is a backend error") {
    CHECK_THROWS_AS(
        qafe::score_overlap("q?", "doc.", "ref", qa, config, nullptr),
        qafe::Error);
  }
  SECTION("raw 1-5 scale is preserved when rescaling is off") {
    config.lerc_rescale = false;
    qa.answer_text = "the Bucks";
    auto raw = qafe::score_overlap("q?", "doc.", "the Bucks", qa, config, &lerc);
    CHECK(raw.at("LERC") == Catch::Approx(5.0));
  }
}

TEST_CASE("rescaled LERC always lies in the unit interval") {
  qafe::HeuristicLerc lerc;
  std::mt19937 rng(41);
  for (int i = 0; i < 500; ++i) {
    std::string ref = testutil::random_text(rng);
    std::string cand = testutil::random_text(rng);
    if (qafe::trim_copy(ref).empty()) continue;
    double v = qafe::lerc_overlap(lerc, "q?", "context.", ref, cand).value;
    double rescaled = (v - 1.0) / 4.0;
    CHECK(rescaled >= 0.0);
    CHECK(rescaled <= 1.0);
  }
}
