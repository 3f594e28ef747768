// qafe — QA-based factual consistency scoring and meta-evaluation toolkit.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qafe/config.hpp"
#include "qafe/harness.hpp"
#include "qafe/jsonl.hpp"

namespace {

using qafe::json;

struct CommonFlags {
  std::string config_path;
  std::string input;
  std::string output;
  std::string traces;
  std::vector<std::string> backend_overrides;  // role=spec
  std::string cache_dir;
  std::optional<unsigned> seed;
  std::optional<int> parallelism;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool needs_input = true) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  auto* in = cmd->add_option("--input", flags.input, "input file");
  if (needs_input) in->required();
  cmd->add_option("--output", flags.output, "output file")->required();
  cmd->add_option("--traces", flags.traces, "per-question trace file");
  cmd->add_option("--backend", flags.backend_overrides,
                  "backend override, role=endpoint (repeatable)");
  cmd->add_option("--cache-dir", flags.cache_dir, "inference cache directory");
  cmd->add_option("--seed", flags.seed, "random seed");
  cmd->add_option("--parallelism", flags.parallelism, "worker count");
}

qafe::RunConfig resolve_config(const CommonFlags& flags) {
  json tree = json::object();
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in)
      throw qafe::Error(qafe::ErrorCode::ConfigError,
                        "cannot open config: " + flags.config_path);
    in >> tree;
  }
  for (const auto& ov : flags.backend_overrides) {
    auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw qafe::Error(qafe::ErrorCode::ConfigError,
                        "--backend expects role=endpoint: " + ov);
    tree["backends"][ov.substr(0, eq)] = ov.substr(eq + 1);
  }
  if (!flags.cache_dir.empty()) tree["cache_dir"] = flags.cache_dir;
  if (flags.seed) tree["seed"] = *flags.seed;
  if (flags.parallelism) tree["parallelism"] = *flags.parallelism;
  return qafe::parse_run_config(tree);
}

json meta_line(const qafe::RunConfig& cfg) {
  json meta = qafe::run_meta(cfg);
  meta.erase("config");  // digest suffices on every data line artifact
  return json{{"_meta", meta}};
}

bool is_meta(const json& line) { return line.contains("_meta"); }

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

int cmd_score(const CommonFlags& flags) {
  qafe::RunConfig cfg = resolve_config(flags);
  qafe::BackendSet backends = qafe::make_backend_set(cfg);

  std::vector<qafe::EvaluationExample> examples;
  std::vector<std::string> doc_ids;
  for (const auto& raw : qafe::read_jsonl(flags.input)) {
    if (is_meta(raw)) continue;
    examples.push_back(qafe::validate_example(raw));
    doc_ids.push_back(raw.contains("doc_id")
                          ? raw["doc_id"].get<std::string>()
                          : qafe::sha256_hex(examples.back().document)
                                .substr(0, 16));
  }

  auto outcomes = qafe::score_examples(examples, backends, cfg.pipeline);

  std::vector<json> score_lines{meta_line(cfg)};
  std::vector<json> trace_lines{meta_line(cfg)};
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& out = outcomes[i];
    if (out.report) {
      score_lines.push_back(json{{"id", examples[i].id},
                                 {"dataset", examples[i].dataset},
                                 {"system", examples[i].system},
                                 {"doc_id", doc_ids[i]},
                                 {"score", out.report->score},
                                 {"degenerate", out.report->degenerate}});
      trace_lines.push_back(qafe::to_json(*out.report));
    } else {
      score_lines.push_back(json{
          {"id", examples[i].id},
          {"error", {{"code", out.error_code}, {"message", out.error_message}}}});
    }
  }
  qafe::write_jsonl_atomic(flags.output, score_lines);
  if (!flags.traces.empty()) qafe::write_jsonl_atomic(flags.traces, trace_lines);
  return 0;
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

struct JoinedScores {
  // dataset -> (valid, test)
  std::map<std::string,
           std::pair<std::vector<qafe::ScoredExample>, std::vector<qafe::ScoredExample>>>
      per_dataset;
};

JoinedScores join_scores(const std::string& scores_path,
                         const std::string& judgments_path) {
  struct Judgment {
    std::optional<int> label;
    std::optional<double> human_score;
    std::string dataset;
    std::string split;
  };
  std::map<std::string, Judgment> judgments;
  for (const auto& j : qafe::read_jsonl(judgments_path)) {
    if (is_meta(j)) continue;
    Judgment g;
    if (j.contains("label") && !j["label"].is_null())
      g.label = j["label"].get<int>();
    if (j.contains("human_score") && !j["human_score"].is_null())
      g.human_score = j["human_score"].get<double>();
    g.dataset = j.value("dataset", std::string());
    g.split = j.value("split", std::string());
    judgments[j.at("id").get<std::string>()] = g;
  }

  JoinedScores joined;
  for (const auto& s : qafe::read_jsonl(scores_path)) {
    if (is_meta(s) || s.contains("error")) continue;
    std::string id = s.at("id").get<std::string>();
    auto it = judgments.find(id);
    if (it == judgments.end()) continue;
    qafe::ScoredExample ex;
    ex.example_id = id;
    ex.dataset = s.value("dataset", it->second.dataset);
    if (ex.dataset.empty()) ex.dataset = it->second.dataset;
    ex.system = s.value("system", std::string());
    ex.doc_id = s.value("doc_id", std::string());
    ex.metric_score = s.at("score").get<double>();
    ex.label = it->second.label;
    ex.human_score = it->second.human_score;
    std::string split = it->second.split.empty() ? s.value("split", std::string())
                                                 : it->second.split;
    if (split == "valid")
      joined.per_dataset[ex.dataset].first.push_back(ex);
    else if (split == "test")
      joined.per_dataset[ex.dataset].second.push_back(ex);
    else
      throw qafe::Error(qafe::ErrorCode::ConfigError,
                        "example " + id + " has no valid/test split");
  }
  return joined;
}

int cmd_benchmark(const CommonFlags& flags, const std::string& judgments_path,
                  const std::string& significance_path) {
  qafe::RunConfig cfg = resolve_config(flags);
  JoinedScores joined = join_scores(flags.input, judgments_path);
  for (const auto& [dataset, splits] : joined.per_dataset)
    if (splits.first.empty() || splits.second.empty())
      throw qafe::Error(qafe::ErrorCode::ConfigError,
                        "dataset " + dataset + " is missing a split");
  if (joined.per_dataset.empty())
    throw qafe::Error(qafe::ErrorCode::ConfigError, "no joined examples");

  qafe::BenchmarkResult result = qafe::run_benchmark(joined.per_dataset);

  json report{{"_meta", qafe::run_meta(cfg)},
              {"per_dataset_balanced_accuracy",
               result.per_dataset_balanced_accuracy},
              {"benchmark_average", result.benchmark_average},
              {"chosen_thresholds", result.chosen_thresholds}};
  json confusion = json::object();
  for (const auto& [ds, c] : result.confusion_counts)
    confusion[ds] =
        json{{"tp", c.tp}, {"fn", c.fn}, {"tn", c.tn}, {"fp", c.fp}};
  report["confusion_counts"] = confusion;

  if (!significance_path.empty()) {
    JoinedScores other = join_scores(significance_path, judgments_path);
    json sig = json::object();
    int comparisons = static_cast<int>(joined.per_dataset.size());
    for (const auto& [dataset, splits] : joined.per_dataset) {
      auto it = other.per_dataset.find(dataset);
      if (it == other.per_dataset.end()) continue;
      std::map<std::string, double> b_test_scores;
      for (const auto& e : it->second.second) b_test_scores[e.example_id] = e.metric_score;
      std::vector<double> a_scores, b_scores;
      std::vector<int> labels;
      for (const auto& e : splits.second) {
        auto bs = b_test_scores.find(e.example_id);
        if (bs == b_test_scores.end() || !e.label) continue;
        a_scores.push_back(e.metric_score);
        b_scores.push_back(bs->second);
        labels.push_back(*e.label);
      }
      auto unpack = [](const std::vector<qafe::ScoredExample>& xs) {
        std::vector<double> scores;
        std::vector<int> labels;
        for (const auto& x : xs) {
          scores.push_back(x.metric_score);
          labels.push_back(x.label.value());
        }
        return std::make_pair(scores, labels);
      };
      auto [bv_scores, bv_labels] = unpack(it->second.first);
      double thr_b = qafe::select_threshold(bv_scores, bv_labels).threshold;
      double thr_a = result.chosen_thresholds.at(dataset);
      auto verdict = qafe::bootstrap_compare(
          a_scores, b_scores, labels, thr_a, thr_b, cfg.bootstrap_resamples,
          comparisons, cfg.seed, cfg.bootstrap_workers);
      sig[dataset] = json{{"observed_diff", verdict.observed_diff},
                          {"ci_05", {verdict.ci_low_05, verdict.ci_high_05}},
                          {"ci_01", {verdict.ci_low_01, verdict.ci_high_01}},
                          {"significant_05", verdict.significant_05},
                          {"significant_01", verdict.significant_01},
                          {"comparisons", comparisons}};
    }
    report["significance"] = sig;
  }
  qafe::write_file_atomic(flags.output, report.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// train-combiner
// ---------------------------------------------------------------------------

double validation_balanced_accuracy(const std::vector<qafe::FeatureRecord>& records,
                                    const qafe::CombinerWeights& weights) {
  std::vector<double> preds;
  std::vector<int> labels;
  for (const auto& r : records) {
    preds.push_back(qafe::predict(r, weights));
    labels.push_back(r.label);
  }
  return qafe::select_threshold(preds, labels).balanced_accuracy;
}

int cmd_train_combiner(const CommonFlags& flags, const std::string& mode) {
  qafe::RunConfig cfg = resolve_config(flags);
  std::vector<qafe::FeatureRecord> records;
  for (const auto& raw : qafe::read_jsonl(flags.input)) {
    if (is_meta(raw)) continue;
    records.push_back(qafe::feature_from_json(raw));
  }
  json out{{"_meta", qafe::run_meta(cfg)}, {"mode", mode}};
  if (mode == "synthetic") {
    qafe::CombinerWeights w = qafe::train_combiner(records, cfg.train);
    double acc = validation_balanced_accuracy(records, w);
    std::cout << "validation_balanced_accuracy=" << acc << "\n";
    out["weights"] = qafe::to_json(w);
  } else if (mode == "supervised") {
    std::map<std::string, std::vector<qafe::FeatureRecord>> per_dataset;
    for (auto& r : records) per_dataset[r.dataset].push_back(r);
    auto trained = qafe::train_supervised(per_dataset, cfg.train);
    json weights = json::object();
    for (const auto& [ds, w] : trained) {
      weights[ds] = qafe::to_json(w);
      std::cout << "dataset=" << ds << " validation_balanced_accuracy="
                << validation_balanced_accuracy(per_dataset[ds], w) << "\n";
    }
    out["weights"] = weights;
  } else {
    throw qafe::Error(qafe::ErrorCode::ConfigError, "unknown mode: " + mode);
  }
  qafe::write_file_atomic(flags.output, out.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

qafe::RunConfig apply_variant(const qafe::RunConfig& base,
                              const std::string& component,
                              const std::string& variant) {
  json tree = base.resolved;
  if (component == "answer_selection") {
    tree["pipeline"]["answer_strategy"] = variant;
  } else if (component == "question_generation") {
    tree["backends"]["qg"] = variant;
  } else if (component == "question_answering") {
    tree["backends"]["qa"] = variant;
  } else if (component == "answer_overlap") {
    tree["overlap"]["primary_metric"] = variant;
  } else if (component == "filtering") {
    bool filter = variant == "both" || variant == "no_penalty";
    bool penalty = variant == "both" || variant == "no_filter";
    if (variant != "both" && variant != "no_filter" && variant != "no_penalty" &&
        variant != "neither")
      throw qafe::Error(qafe::ErrorCode::ConfigError,
                        "unknown filtering variant: " + variant);
    tree["pipeline"]["summ_filter_enabled"] = filter;
    tree["pipeline"]["answerability_penalty_enabled"] = penalty;
  } else {
    throw qafe::Error(qafe::ErrorCode::UnknownComponent, component);
  }
  return qafe::parse_run_config(tree);
}

int cmd_ablate(const CommonFlags& flags, const std::string& component,
               const std::vector<std::string>& variants) {
  qafe::RunConfig base = resolve_config(flags);

  std::map<std::string, std::vector<qafe::EvaluationExample>> per_dataset;
  for (const auto& raw : qafe::read_jsonl(flags.input)) {
    if (is_meta(raw)) continue;
    qafe::EvaluationExample ex = qafe::validate_example(raw);
    if (!ex.label)
      throw qafe::Error(qafe::ErrorCode::MissingField,
                        "ablation needs labeled examples: " + ex.id);
    per_dataset[ex.dataset].push_back(std::move(ex));
  }

  json rows = json::array();
  for (const auto& variant : variants) {
    qafe::RunConfig cfg = apply_variant(base, component, variant);
    qafe::BackendSet backends = qafe::make_backend_set(cfg);
    json cells = json::object();
    double total = 0.0;
    for (const auto& [dataset, examples] : per_dataset) {
      auto outcomes = qafe::score_examples(examples, backends, cfg.pipeline);
      std::vector<double> scores;
      std::vector<int> labels;
      for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (!outcomes[i].report)
          throw qafe::Error(qafe::ErrorCode::AnnotationFailure,
                            outcomes[i].error_message);
        scores.push_back(outcomes[i].report->score);
        labels.push_back(*examples[i].label);
      }
      auto [tune, eval] = qafe::ablation_split(labels, cfg.seed);
      std::vector<double> tune_scores, eval_scores;
      std::vector<int> tune_labels, eval_labels;
      for (auto i : tune) { tune_scores.push_back(scores[i]); tune_labels.push_back(labels[i]); }
      for (auto i : eval) { eval_scores.push_back(scores[i]); eval_labels.push_back(labels[i]); }
      double thr = qafe::select_threshold(tune_scores, tune_labels).threshold;
      double acc = qafe::balanced_accuracy(qafe::predict_at(eval_scores, thr),
                                           eval_labels);
      cells[dataset] = acc;
      total += acc;
    }
    rows.push_back(json{{"variant", variant},
                        {"cells", cells},
                        {"average", total / per_dataset.size()}});
  }
  json report{{"_meta", qafe::run_meta(base)},
              {"component", component},
              {"rows", rows}};
  qafe::write_file_atomic(flags.output, report.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// correlate
// ---------------------------------------------------------------------------

int cmd_correlate(const CommonFlags& flags, const std::string& judgments_path,
                  const std::string& level, const std::string& coef) {
  qafe::RunConfig cfg = resolve_config(flags);

  std::map<std::string, double> human;
  for (const auto& j : qafe::read_jsonl(judgments_path)) {
    if (is_meta(j)) continue;
    double v;
    if (j.contains("human_score") && !j["human_score"].is_null())
      v = j["human_score"].get<double>();
    else if (j.contains("label") && !j["label"].is_null())
      v = j["label"].get<double>();
    else
      continue;
    human[j.at("id").get<std::string>()] = v;
  }

  std::vector<double> metric_scores, human_scores;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& s : qafe::read_jsonl(flags.input)) {
    if (is_meta(s) || s.contains("error")) continue;
    auto it = human.find(s.at("id").get<std::string>());
    if (it == human.end()) continue;
    double score = s.at("score").get<double>();
    metric_scores.push_back(score);
    human_scores.push_back(it->second);
    std::string doc = s.value("doc_id", std::string());
    std::string system = s.value("system", std::string());
    if (!doc.empty() && !system.empty()) {
      groups[doc].first.push_back(score);
      groups[doc].second.push_back(it->second);
    }
  }

  std::vector<std::string> coefs =
      coef == "all" ? std::vector<std::string>{"pearson", "spearman", "kendall"}
                    : std::vector<std::string>{coef};
  json table = json::object();
  for (const auto& name : coefs) {
    qafe::Coefficient c = qafe::coefficient_from_name(name);
    if (level == "instance") {
      table[name] = qafe::correlate(metric_scores, human_scores, c);
    } else if (level == "summary") {
      auto r = qafe::correlate_summary_level(groups, c);
      table[name] = json{{"mean", r.mean},
                         {"qualifying_groups", r.qualifying_groups},
                         {"skipped_groups", r.skipped_groups}};
    } else {
      throw qafe::Error(qafe::ErrorCode::ConfigError, "unknown level: " + level);
    }
  }
  json report{{"_meta", qafe::run_meta(cfg)},
              {"level", level},
              {"n_pairs", metric_scores.size()},
              {"coefficients", table}};
  qafe::write_file_atomic(flags.output, report.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

int cmd_stats(const CommonFlags& flags) {
  qafe::RunConfig cfg = resolve_config(flags);
  struct Tally {
    long n_valid = 0, n_test = 0, n_valid_pos = 0;
  };
  std::map<std::string, Tally> tallies;
  for (const auto& raw : qafe::read_jsonl(flags.input)) {
    if (is_meta(raw)) continue;
    qafe::EvaluationExample ex = qafe::validate_example(raw);
    Tally& t = tallies[ex.dataset];
    if (ex.split == "valid") {
      ++t.n_valid;
      if (ex.label && *ex.label == 1) ++t.n_valid_pos;
    } else {
      ++t.n_test;
    }
  }
  std::map<std::string, qafe::DatasetStats> ingested;
  for (const auto& [ds, t] : tallies)
    ingested[ds] = {t.n_valid, t.n_test,
                    t.n_valid ? 100.0 * t.n_valid_pos / t.n_valid : 0.0};
  qafe::StatsReport r = qafe::validate_benchmark_stats(ingested);
  json mismatches = json::array();
  for (const auto& m : r.mismatches)
    mismatches.push_back(json{{"dataset", m.dataset},
                              {"field", m.field},
                              {"expected", m.expected},
                              {"actual", m.actual}});
  json report{{"_meta", qafe::run_meta(cfg)},
              {"mismatches", mismatches},
              {"skipped", r.skipped}};
  qafe::write_file_atomic(flags.output, report.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"QA-based factual consistency metric pipeline and meta-evaluation"};
  app.require_subcommand(1);

  CommonFlags score_flags, bench_flags, train_flags, ablate_flags, corr_flags,
      stats_flags;
  std::string judgments, significance, mode = "synthetic", level = "instance",
              coef = "all", component, serve_backend = "heuristic";
  std::vector<std::string> variants;

  auto* score = app.add_subcommand("score", "score examples end to end");
  add_common(score, score_flags);

  auto* bench = app.add_subcommand("benchmark", "threshold + balanced accuracy");
  add_common(bench, bench_flags);
  bench->add_option("--judgments", judgments, "gold labels JSONL")->required();
  bench->add_option("--significance", significance,
                    "second scores file for bootstrap comparison");

  auto* train = app.add_subcommand("train-combiner", "fit the learned metric");
  add_common(train, train_flags);
  train->add_option("--mode", mode, "synthetic or supervised");

  auto* ablate = app.add_subcommand("ablate", "component-swap ablation");
  add_common(ablate, ablate_flags);
  ablate->add_option("--component", component, "component to swap")->required();
  ablate->add_option("--variant", variants, "variant (repeatable)")->required();

  auto* corr = app.add_subcommand("correlate", "correlation with human scores");
  add_common(corr, corr_flags);
  corr->add_option("--judgments", judgments, "human judgments JSONL")->required();
  corr->add_option("--level", level, "instance or summary");
  corr->add_option("--coef", coef, "pearson, spearman, kendall, or all");

  auto* stats = app.add_subcommand("stats", "validate ingest statistics");
  add_common(stats, stats_flags);

  auto* serve = app.add_subcommand("serve-stdio",
                                   "serve a backend over stdio (qafe/1)");
  serve->add_option("--backend", serve_backend,
                    "heuristic or scripted:<fixture path>");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (score->parsed()) return cmd_score(score_flags);
    if (bench->parsed()) return cmd_benchmark(bench_flags, judgments, significance);
    if (train->parsed()) return cmd_train_combiner(train_flags, mode);
    if (ablate->parsed()) return cmd_ablate(ablate_flags, component, variants);
    if (corr->parsed()) return cmd_correlate(corr_flags, judgments, level, coef);
    if (stats->parsed()) return cmd_stats(stats_flags);
    if (serve->parsed()) {
      qafe::BackendPtr backend;
      if (serve_backend == "heuristic")
        backend = std::make_shared<qafe::CompositeHeuristicBackend>();
      else
        backend = qafe::make_backend("any", serve_backend, "");
      qafe::run_stdio_server(*backend, std::cin, std::cout);
      return 0;
    }
  } catch (const qafe::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == qafe::ErrorCode::BackendUnavailable ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
