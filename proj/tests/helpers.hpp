#pragma once

#include <sys/wait.h>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qafe/config.hpp"
#include "qafe/jsonl.hpp"
#include "qafe/pipeline.hpp"
#include "qafe/scripted_backend.hpp"

namespace testutil {

using qafe::json;

inline std::string fixtures_dir() { return QAFE_FIXTURES_DIR; }
inline std::string fixture(const std::string& name) {
  return fixtures_dir() + "/" + name;
}
inline std::string cli_path() { return QAFE_CLI_PATH; }

/// Self-deleting scratch directory for one test.
class TempDir {
 public:
  TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "qafe_test_XXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
    path_ = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << body;
}

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

/// Runs the CLI with the given arguments; captures stdout/stderr.
inline CliResult run_cli(const std::vector<std::string>& args) {
  TempDir io;
  std::string cmd = "'" + cli_path() + "'";
  for (const auto& a : args) cmd += " '" + a + "'";
  std::string out_path = io.file("stdout");
  std::string err_path = io.file("stderr");
  cmd += " >'" + out_path + "' 2>'" + err_path + "'";
  int rc = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = read_file(out_path);
  r.err = read_file(err_path);
  return r;
}

/// All five roles served by one scripted fixture table.
inline qafe::BackendSet scripted_set(const std::string& fixture_file) {
  auto b = qafe::ScriptedBackend::from_file(fixture_file);
  return qafe::BackendSet{b, b, b, b, b};
}

inline qafe::BackendSet heuristic_set() {
  return qafe::BackendSet{qafe::make_heuristic_backend("annotator"),
                          qafe::make_heuristic_backend("qg"),
                          qafe::make_heuristic_backend("qa"),
                          qafe::make_heuristic_backend("nli"),
                          qafe::make_heuristic_backend("lerc")};
}

inline qafe::EvaluationExample knicks_example() {
  qafe::EvaluationExample ex;
  ex.id = "t1";
  ex.dataset = "pinned";
  ex.document = "The Knicks beat the Rockets. The fans were excited.";
  ex.summary = "The Knicks beat the Bucks.";
  ex.label = 0;
  ex.split = "test";
  return ex;
}

inline qafe::EvaluationExample tour_example() {
  qafe::EvaluationExample ex;
  ex.id = "t2";
  ex.dataset = "pinned";
  ex.document = "Twisted Sister said the farewell tour is coming.";
  ex.summary = "The band will perform two shows.";
  ex.label = 0;
  ex.split = "test";
  return ex;
}

// ---------------------------------------------------------------------------
// Deterministic fuzz backend: every response is a pure function of
// (seed, op, payload), so repeated calls and config sweeps see one fixed
// underlying model while still exploring the trace space.
// ---------------------------------------------------------------------------

class FuzzBackend : public qafe::Backend {
 public:
  explicit FuzzBackend(std::uint64_t seed) : seed_(seed) {}

  qafe::Handshake handshake() override {
    return qafe::Handshake{
        "qafe/1",
        {"annotate", "generate_question", "answer", "entail", "overlap"},
        false,
        "fuzz-" + std::to_string(seed_)};
  }

 protected:
  json do_invoke(const std::string& op, const json& payload) override {
    if (op == "annotate") return annotator_.invoke(op, payload);
    std::mt19937_64 rng(seed_ ^ std::hash<std::string>{}(op + payload.dump()));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (op == "generate_question") {
      if (unit(rng) < 0.10) return json{{"question", ""}};
      std::string context = payload.at("context").get<std::string>();
      auto words = qafe::heur::tokenize(context);
      std::string q = "what";
      for (int k = 0; k < 3 && !words.empty(); ++k)
        q += " " + words[rng() % words.size()].text;
      return json{{"question", q + " ?"}};
    }
    if (op == "answer") {
      std::string context = payload.at("context").get<std::string>();
      auto words = qafe::heur::tokenize(context);
      if (words.empty()) return json{{"answer", ""}, {"answerable_prob", 0.0}};
      const auto& w = words[rng() % words.size()];
      return json{{"answer", context.substr(w.start, w.end - w.start)},
                  {"answerable_prob", unit(rng)}};
    }
    if (op == "entail") {
      double a = unit(rng), b = unit(rng), c = unit(rng);
      double z = a + b + c;
      return json{{"contradiction", a / z}, {"neutral", b / z},
                  {"entailment", c / z}};
    }
    if (op == "overlap")
      return json{{"score", 1.0 + 4.0 * unit(rng)}};
    throw qafe::Error(qafe::ErrorCode::BackendUnavailable, "unsupported op: " + op);
  }

 private:
  std::uint64_t seed_;
  qafe::HeuristicAnnotator annotator_;
};

inline qafe::EvaluationExample fuzz_example(std::uint64_t seed) {
  static const std::vector<std::pair<const char*, const char*>> pool = {
      {"Alice Smith visited the market in Paris. She bought fresh bread.",
       "Alice Smith bought fresh bread and ripe cheese."},
      {"The committee approved the budget on Monday. The mayor praised it.",
       "The committee approved the budget."},
      {"Rain flooded the northern valley overnight. Rescue teams arrived.",
       "Rescue teams reached the flooded village by morning."},
      {"The museum opened a new gallery for modern art.",
       "The museum opened a new gallery. Visitors praised the rooms."},
      {"Engineers repaired the broken bridge last week.",
       "Engineers repaired the broken bridge near the river road."},
      {"The bakery launched a new rye loaf. Customers lined up before dawn.",
       "Customers lined up before dawn for the new loaf."}};
  const auto& [doc, summ] = pool[seed % pool.size()];
  qafe::EvaluationExample ex;
  ex.id = "fuzz-" + std::to_string(seed);
  ex.document = doc;
  ex.summary = summ;
  ex.label = static_cast<int>(seed % 2);
  ex.split = "test";
  return ex;
}

/// One randomized trace check: flag invariants, filter semantics, filter
/// monotonicity, and penalty monotonicity, all under a fixed fuzz model.
/// Returns an empty string on success, else a description of the violation.
inline std::string run_fuzz_iteration(std::uint64_t seed) {
  auto backend = std::make_shared<FuzzBackend>(seed);
  qafe::BackendSet set{backend, backend, backend, backend, backend};

  qafe::PipelineConfig filtered;
  filtered.answer_strategy = (seed % 3 == 0) ? qafe::AnswerStrategy::ALL
                                             : qafe::AnswerStrategy::NP_CHUNKS;
  qafe::PipelineConfig unfiltered = filtered;
  unfiltered.summ_filter_enabled = false;
  qafe::PipelineConfig no_penalty = filtered;
  no_penalty.answerability_penalty_enabled = false;

  qafe::EvaluationExample ex = fuzz_example(seed);
  qafe::MetricReport on = qafe::score_example(ex, set, filtered);
  qafe::MetricReport off = qafe::score_example(ex, set, unfiltered);
  qafe::MetricReport lenient = qafe::score_example(ex, set, no_penalty);

  for (const auto& [report, config] :
       {std::make_pair(&on, &filtered), std::make_pair(&off, &unfiltered),
        std::make_pair(&lenient, &no_penalty)}) {
    for (const auto& q : report->questions) {
      if (!qafe::question_record_consistent(q, *config))
        return "inconsistent question record (seed " + std::to_string(seed) + ")";
      if (!q.filtered && config->summ_filter_enabled) {
        if (!q.summ_answerable || q.summ_f1 < config->summ_f1_threshold)
          return "unfiltered question violates the filter (seed " +
                 std::to_string(seed) + ")";
      }
    }
  }
  if (off.n_scored < on.n_scored)
    return "disabling the filter reduced n_scored (seed " +
           std::to_string(seed) + ")";
  if (!on.degenerate && !lenient.degenerate && on.score > lenient.score + 1e-12)
    return "enabling the penalty raised the score (seed " +
           std::to_string(seed) + ")";
  return "";
}

// ---------------------------------------------------------------------------
// Independent brute-force statistics oracles.
// ---------------------------------------------------------------------------

inline double oracle_pearson(const std::vector<double>& x,
                             const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  double mx = sx / n, my = sy / n;
  double a = 0, b = 0, c = 0;
  for (std::size_t i = 0; i < n; ++i) {
    a += (x[i] - mx) * (y[i] - my);
    b += (x[i] - mx) * (x[i] - mx);
    c += (y[i] - my) * (y[i] - my);
  }
  return a / std::sqrt(b * c);
}

inline std::vector<double> oracle_ranks(const std::vector<double>& x) {
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double below = 0, equal = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j] < x[i]) ++below;
      if (x[j] == x[i]) ++equal;
    }
    ranks[i] = below + (equal + 1.0) / 2.0;
  }
  return ranks;
}

inline double oracle_spearman(const std::vector<double>& x,
                              const std::vector<double>& y) {
  return oracle_pearson(oracle_ranks(x), oracle_ranks(y));
}

inline double oracle_kendall_tau_b(const std::vector<double>& x,
                                   const std::vector<double>& y) {
  const std::size_t n = x.size();
  double concordant = 0, discordant = 0, tied_x = 0, tied_y = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (x[i] == x[j]) ++tied_x;
      if (y[i] == y[j]) ++tied_y;
      if (x[i] == x[j] || y[i] == y[j]) continue;
      bool same = (x[i] < x[j]) == (y[i] < y[j]);
      (same ? concordant : discordant) += 1;
    }
  double n0 = static_cast<double>(n) * (n - 1) / 2.0;
  return (concordant - discordant) /
         std::sqrt((n0 - tied_x) * (n0 - tied_y));
}

// ---------------------------------------------------------------------------
// Hand-worked overlap cases shared by the unit and acceptance suites.
// ---------------------------------------------------------------------------

struct OverlapCase {
  std::string reference;
  std::string candidate;
  int em;
  double f1;
};

inline const std::vector<OverlapCase>& overlap_cases() {
  static const std::vector<OverlapCase> cases = {
      {"the Bucks", "The bucks.", 1, 1.0},
      {"the Bucks", "the Rockets", 0, 0.0},
      {"Merson", "Sky Sports pundit Merson", 0, 0.4},
      {"", "", 1, 1.0},
      {"", "x", 0, 0.0},
      {"a", "", 1, 1.0},          // the article normalizes away entirely
      {"the", "an", 1, 1.0},      // both sides empty after normalization
      {"New York City", "new york city", 1, 1.0},
      {"New York", "York New", 0, 1.0},  // multiset equality, different order
      {"dog dog cat", "dog cat cat", 0, 2.0 / 3.0},
      {"dog dog", "dog", 0, 2.0 / 3.0},  // multiset counting, not set
      {"U.S.", "US", 1, 1.0},
      {"forty-two", "forty two", 0, 0.0},
      {"The quick brown fox", "quick brown fox", 1, 1.0},
      {"hello, world!", "Hello World", 1, 1.0},
      {"one two three", "one two", 0, 0.8},
      {"one two three four", "three four five six", 0, 0.5},
      {"apple", "apples", 0, 0.0},
      {"x y z", "z y x", 0, 1.0},
      {"an apple a day", "apple day", 1, 1.0},
      {"the Rockets!", "rockets", 1, 1.0},
      {"Sky Sports", "sky sports pundit", 0, 0.8},
      {"cat", "cat cat", 0, 2.0 / 3.0},
  };
  return cases;
}

inline std::string random_text(std::mt19937& rng, std::size_t max_len = 16) {
  static const std::string alphabet = "abcdeTHE .,!-'  the an a  xyz";
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s;
  std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) s.push_back(alphabet[pick(rng)]);
  return s;
}

}  // namespace testutil
