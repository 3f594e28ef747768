#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "qafe/cache.hpp"
#include "qafe/combiner.hpp"
#include "qafe/digest.hpp"
#include "qafe/heuristic_backend.hpp"
#include "qafe/pipeline.hpp"
#include "qafe/remote_backend.hpp"
#include "qafe/scripted_backend.hpp"

namespace qafe {

inline constexpr const char* kToolVersion = "0.1.0";

/// Full configuration tree. Unknown keys are rejected so typos never pass
/// silently; every run embeds the resolved tree's digest in its output.
struct RunConfig {
  unsigned seed = 0;
  int parallelism = 1;
  std::string cache_dir;
  std::map<std::string, std::string> backends;  // role -> endpoint spec
  PipelineConfig pipeline;
  TrainSettings train;
  int bootstrap_resamples = 10000;
  int bootstrap_workers = 1;

  json resolved = json::object();  // the normalized tree, for embedding
};

namespace detail {

inline void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                                const std::string& where) {
  if (!j.is_object())
    throw Error(ErrorCode::ConfigError, where + " must be an object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw Error(ErrorCode::ConfigError, where + ": unknown key '" + key + "'");
}

}  // namespace detail

inline RunConfig parse_run_config(const json& j) {
  detail::reject_unknown_keys(j,
                              {"seed", "parallelism", "cache_dir", "backends",
                               "pipeline", "overlap", "combiner", "harness"},
                              "config");
  RunConfig cfg;
  cfg.seed = j.value("seed", 0u);
  cfg.parallelism = j.value("parallelism", 1);
  cfg.cache_dir = j.value("cache_dir", std::string());
  if (j.contains("backends")) {
    detail::reject_unknown_keys(j["backends"],
                                {"annotator", "qg", "qa", "nli", "lerc"},
                                "config.backends");
    for (const auto& [role, spec] : j["backends"].items())
      cfg.backends[role] = spec.get<std::string>();
  }
  if (j.contains("pipeline")) {
    const json& p = j["pipeline"];
    detail::reject_unknown_keys(
        p,
        {"answer_strategy", "summ_filter_enabled", "summ_f1_threshold",
         "answerability_penalty_enabled", "penalty_value", "degenerate_score",
         "answerability_threshold"},
        "config.pipeline");
    if (p.contains("answer_strategy"))
      cfg.pipeline.answer_strategy =
          strategy_from_name(p["answer_strategy"].get<std::string>());
    cfg.pipeline.summ_filter_enabled =
        p.value("summ_filter_enabled", cfg.pipeline.summ_filter_enabled);
    cfg.pipeline.summ_f1_threshold =
        p.value("summ_f1_threshold", cfg.pipeline.summ_f1_threshold);
    cfg.pipeline.answerability_penalty_enabled = p.value(
        "answerability_penalty_enabled", cfg.pipeline.answerability_penalty_enabled);
    cfg.pipeline.penalty_value =
        p.value("penalty_value", cfg.pipeline.penalty_value);
    cfg.pipeline.degenerate_score =
        p.value("degenerate_score", cfg.pipeline.degenerate_score);
    cfg.pipeline.answerability_threshold =
        p.value("answerability_threshold", cfg.pipeline.answerability_threshold);
  }
  if (j.contains("overlap")) {
    const json& o = j["overlap"];
    detail::reject_unknown_keys(o, {"metrics", "primary_metric", "lerc_rescale"},
                                "config.overlap");
    if (o.contains("metrics")) {
      cfg.pipeline.overlap.metrics.clear();
      for (const auto& m : o["metrics"])
        cfg.pipeline.overlap.metrics.push_back(
            overlap_metric_from_name(m.get<std::string>()));
    }
    if (o.contains("primary_metric"))
      cfg.pipeline.overlap.primary_metric =
          overlap_metric_from_name(o["primary_metric"].get<std::string>());
    cfg.pipeline.overlap.lerc_rescale =
        o.value("lerc_rescale", cfg.pipeline.overlap.lerc_rescale);
  }
  if (j.contains("combiner")) {
    const json& c = j["combiner"];
    detail::reject_unknown_keys(
        c,
        {"bins", "normalize", "three_channel", "learning_rate", "batch_size",
         "epochs", "valid_fraction", "fusion_only"},
        "config.combiner");
    cfg.train.hist.bins = c.value("bins", cfg.train.hist.bins);
    cfg.train.hist.normalize = c.value("normalize", cfg.train.hist.normalize);
    cfg.train.hist.three_channel =
        c.value("three_channel", cfg.train.hist.three_channel);
    cfg.train.learning_rate = c.value("learning_rate", cfg.train.learning_rate);
    cfg.train.batch_size = c.value("batch_size", cfg.train.batch_size);
    cfg.train.epochs = c.value("epochs", cfg.train.epochs);
    cfg.train.valid_fraction = c.value("valid_fraction", cfg.train.valid_fraction);
    cfg.train.fusion_only = c.value("fusion_only", cfg.train.fusion_only);
  }
  if (j.contains("harness")) {
    const json& h = j["harness"];
    detail::reject_unknown_keys(h, {"resamples", "workers"}, "config.harness");
    cfg.bootstrap_resamples = h.value("resamples", cfg.bootstrap_resamples);
    cfg.bootstrap_workers = h.value("workers", cfg.bootstrap_workers);
  }
  cfg.pipeline.parallelism = cfg.parallelism;
  cfg.train.seed = cfg.seed;
  if (cfg.cache_dir.empty()) {
    const char* env = std::getenv("QAFE_CACHE_DIR");
    if (env) cfg.cache_dir = env;
  }

  // Normalized tree; this is what gets digested and embedded.
  cfg.resolved = json{
      {"seed", cfg.seed},
      {"parallelism", cfg.parallelism},
      {"cache_dir", cfg.cache_dir},
      {"backends", cfg.backends},
      {"pipeline",
       {{"answer_strategy", strategy_name(cfg.pipeline.answer_strategy)},
        {"summ_filter_enabled", cfg.pipeline.summ_filter_enabled},
        {"summ_f1_threshold", cfg.pipeline.summ_f1_threshold},
        {"answerability_penalty_enabled",
         cfg.pipeline.answerability_penalty_enabled},
        {"penalty_value", cfg.pipeline.penalty_value},
        {"degenerate_score", cfg.pipeline.degenerate_score},
        {"answerability_threshold", cfg.pipeline.answerability_threshold}}},
      {"overlap",
       {{"metrics",
         [&] {
           std::vector<std::string> names;
           for (auto m : cfg.pipeline.overlap.metrics)
             names.push_back(overlap_metric_name(m));
           return names;
         }()},
        {"primary_metric",
         overlap_metric_name(cfg.pipeline.overlap.primary_metric)},
        {"lerc_rescale", cfg.pipeline.overlap.lerc_rescale}}},
      {"combiner",
       {{"bins", cfg.train.hist.bins},
        {"normalize", cfg.train.hist.normalize},
        {"three_channel", cfg.train.hist.three_channel},
        {"learning_rate", cfg.train.learning_rate},
        {"batch_size", cfg.train.batch_size},
        {"epochs", cfg.train.epochs},
        {"valid_fraction", cfg.train.valid_fraction},
        {"fusion_only", cfg.train.fusion_only}}},
      {"harness",
       {{"resamples", cfg.bootstrap_resamples},
        {"workers", cfg.bootstrap_workers}}}};
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  if (path.empty()) return parse_run_config(json::object());
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ConfigError, path + ": " + e.what());
  }
  return parse_run_config(j);
}

/// The resolved tree minus execution-only knobs (worker counts, cache
/// location), which never affect results and must not perturb digests.
inline json semantic_config(const RunConfig& cfg) {
  json j = cfg.resolved;
  j.erase("parallelism");
  j.erase("cache_dir");
  if (j.contains("harness")) j["harness"].erase("workers");
  return j;
}

inline std::string config_digest(const RunConfig& cfg) {
  return sha256_hex(semantic_config(cfg).dump());
}

inline json run_meta(const RunConfig& cfg) {
  return json{{"config_digest", config_digest(cfg)},
              {"seed", cfg.seed},
              {"tool_version", kToolVersion},
              {"config", semantic_config(cfg)}};
}

// ---------------------------------------------------------------------------
// Backend construction from endpoint specs:
//   "heuristic"            built-in rule backend for the role
//   "scripted:<path>"      fixture-table backend
//   "stdio:<command...>"   subprocess speaking line-delimited JSON
//   "http://host:port"     local HTTP endpoint
// ---------------------------------------------------------------------------

inline BackendPtr make_heuristic_backend(const std::string& role) {
  if (role == "annotator") return std::make_shared<HeuristicAnnotator>();
  if (role == "qg") return std::make_shared<HeuristicQG>();
  if (role == "qa") return std::make_shared<HeuristicQA>();
  if (role == "nli") return std::make_shared<HeuristicNLI>();
  if (role == "lerc") return std::make_shared<HeuristicLerc>();
  throw Error(ErrorCode::ConfigError, "unknown backend role: " + role);
}

inline BackendPtr make_backend(const std::string& role, const std::string& spec,
                               const std::string& cache_dir) {
  BackendPtr backend;
  if (spec == "heuristic" || spec.empty()) {
    backend = make_heuristic_backend(role);
  } else if (spec.rfind("scripted:", 0) == 0) {
    backend = ScriptedBackend::from_file(spec.substr(9));
  } else if (spec.rfind("stdio:", 0) == 0) {
    std::vector<std::string> argv;
    std::string rest = spec.substr(6);
    std::size_t pos = 0;
    while (pos < rest.size()) {
      std::size_t sp = rest.find(' ', pos);
      if (sp == std::string::npos) sp = rest.size();
      if (sp > pos) argv.push_back(rest.substr(pos, sp - pos));
      pos = sp + 1;
    }
    if (argv.empty())
      throw Error(ErrorCode::ConfigError, "empty stdio backend command");
    backend = std::make_shared<StdioBackendClient>(argv);
  } else if (spec.rfind("http://", 0) == 0) {
    std::string hostport = spec.substr(7);
    auto colon = hostport.find(':');
    if (colon == std::string::npos)
      throw Error(ErrorCode::ConfigError, "http backend needs host:port");
    backend = std::make_shared<HttpBackendClient>(
        hostport.substr(0, colon), std::stoi(hostport.substr(colon + 1)));
  } else {
    throw Error(ErrorCode::ConfigError, "unrecognized backend spec: " + spec);
  }
  if (!cache_dir.empty())
    backend = std::make_shared<CachedBackend>(backend, cache_dir);
  return backend;
}

inline BackendSet make_backend_set(const RunConfig& cfg) {
  auto spec = [&](const std::string& role) {
    auto it = cfg.backends.find(role);
    return it == cfg.backends.end() ? std::string("heuristic") : it->second;
  };
  BackendSet set;
  set.annotator = make_backend("annotator", spec("annotator"), cfg.cache_dir);
  set.qg = make_backend("qg", spec("qg"), cfg.cache_dir);
  set.qa = make_backend("qa", spec("qa"), cfg.cache_dir);
  set.nli = make_backend("nli", spec("nli"), cfg.cache_dir);
  set.lerc = make_backend("lerc", spec("lerc"), cfg.cache_dir);
  return set;
}

/// All five heuristic roles behind one handshake; used by `serve` so a
/// single subprocess or HTTP endpoint can cover every op.
class CompositeHeuristicBackend : public Backend {
 public:
  CompositeHeuristicBackend() {
    for (const char* role : {"annotator", "qg", "qa", "nli", "lerc"}) {
      BackendPtr b = make_heuristic_backend(role);
      for (const auto& op : b->handshake().ops) routes_[op] = b;
    }
  }

  Handshake handshake() override {
    Handshake h;
    h.backend_id = "heuristic-suite";
    for (const auto& [op, b] : routes_) h.ops.push_back(op);
    return h;
  }

 protected:
  json do_invoke(const std::string& op, const json& payload) override {
    auto it = routes_.find(op);
    if (it == routes_.end())
      throw Error(ErrorCode::BackendUnavailable, "unsupported op: " + op);
    return it->second->invoke(op, payload);
  }

 private:
  std::map<std::string, BackendPtr> routes_;
};

}  // namespace qafe
