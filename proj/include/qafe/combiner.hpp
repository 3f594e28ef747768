#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "qafe/core.hpp"
#include "qafe/error.hpp"

namespace qafe {

struct HistogramSpec {
  int bins = 50;
  bool normalize = true;       // counts divided by number of items
  bool three_channel = false;  // histogram all three NLI components (3H features)

  void validate() const {
    if (bins < 2) throw Error(ErrorCode::ConfigError, "histogram needs >= 2 bins");
  }
};

struct ConvHead {
  std::vector<double> kernel;  // full-width over the histogram bins
  double bias = 0.0;
};

struct FusionLayer {
  double w_qa = 0.0;
  double w_nli = 0.0;
  double bias = 0.0;
};

struct CombinerWeights {
  HistogramSpec hist;
  ConvHead nli_conv;
  ConvHead qa_conv;
  FusionLayer fusion;
  json provenance = json::object();
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Equal-width histogram over [0,1] with a right-closed final bin.
/// Values outside the range by at most 1e-6 are clamped.
inline std::vector<double> histogram(const std::vector<double>& values,
                                     const HistogramSpec& spec) {
  spec.validate();
  std::vector<double> bins(spec.bins, 0.0);
  if (values.empty()) return bins;
  for (double v : values) {
    if (v < -1e-6 || v > 1.0 + 1e-6)
      throw Error(ErrorCode::ValueOutOfRange,
                  "histogram value " + std::to_string(v));
    double c = std::clamp(v, 0.0, 1.0);
    int idx = std::min(spec.bins - 1, static_cast<int>(c * spec.bins));
    bins[idx] += 1.0;
  }
  if (spec.normalize)
    for (double& b : bins) b /= static_cast<double>(values.size());
  return bins;
}

inline double conv_score(const std::vector<double>& hist, const ConvHead& head) {
  if (hist.size() != head.kernel.size())
    throw Error(ErrorCode::ConfigError, "kernel width does not match histogram");
  double z = head.bias;
  for (std::size_t i = 0; i < hist.size(); ++i) z += head.kernel[i] * hist[i];
  return sigmoid(z);
}

/// SCConv aggregation: per summary sentence, histogram the entailment
/// probabilities against all document sentences, score the histogram with
/// the conv head, and average across summary sentences.
inline double scconv_score(const EntailmentMatrix& matrix,
                           const CombinerWeights& weights,
                           const HistogramSpec& spec) {
  if (matrix.rows() == 0 || matrix.cols() == 0)
    throw Error(ErrorCode::ValueOutOfRange, "empty entailment matrix");
  double total = 0.0;
  for (std::size_t j = 0; j < matrix.cols(); ++j) {
    std::vector<double> hist;
    if (spec.three_channel) {
      std::vector<double> contra, neutral, entail;
      for (std::size_t i = 0; i < matrix.rows(); ++i) {
        contra.push_back(matrix.values[i][j].contradiction);
        neutral.push_back(matrix.values[i][j].neutral);
        entail.push_back(matrix.values[i][j].entailment);
      }
      for (const auto* channel : {&contra, &neutral, &entail}) {
        auto h = histogram(*channel, spec);
        hist.insert(hist.end(), h.begin(), h.end());
      }
    } else {
      std::vector<double> entail;
      for (std::size_t i = 0; i < matrix.rows(); ++i)
        entail.push_back(matrix.values[i][j].entailment);
      hist = histogram(entail, spec);
    }
    total += conv_score(hist, weights.nli_conv);
  }
  return total / static_cast<double>(matrix.cols());
}

/// Fusion of the histogrammed answer-overlap scores with the NLI score.
inline double qafe_nli_score(const std::vector<double>& answer_scores,
                             double nli_score, const CombinerWeights& weights,
                             const HistogramSpec& spec) {
  double qa = conv_score(histogram(answer_scores, spec), weights.qa_conv);
  return sigmoid(weights.fusion.w_qa * qa + weights.fusion.w_nli * nli_score +
                 weights.fusion.bias);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Precomputed feature record for combiner training.
struct FeatureRecord {
  std::string id;
  std::vector<double> answer_scores;
  double nli_score = 0.0;
  int label = 0;
  std::string dataset;
};

struct TrainSettings {
  double learning_rate = 1e-2;
  int batch_size = 32;
  int epochs = 200;
  unsigned seed = 0;
  double valid_fraction = 0.2;
  bool fusion_only = false;
  HistogramSpec hist;
};

namespace detail {

// Trainable parameters, flattened as [qa_kernel..., qa_bias, w_qa, w_nli, b].
inline std::vector<double> flatten_params(const CombinerWeights& w) {
  std::vector<double> p = w.qa_conv.kernel;
  p.push_back(w.qa_conv.bias);
  p.push_back(w.fusion.w_qa);
  p.push_back(w.fusion.w_nli);
  p.push_back(w.fusion.bias);
  return p;
}

inline void unflatten_params(const std::vector<double>& p, CombinerWeights& w) {
  std::size_t h = w.qa_conv.kernel.size();
  for (std::size_t i = 0; i < h; ++i) w.qa_conv.kernel[i] = p[i];
  w.qa_conv.bias = p[h];
  w.fusion.w_qa = p[h + 1];
  w.fusion.w_nli = p[h + 2];
  w.fusion.bias = p[h + 3];
}

}  // namespace detail

/// Mean binary cross-entropy over the records, with the analytic gradient
/// with respect to the flattened trainable parameters.
inline double loss_and_gradient(const std::vector<const FeatureRecord*>& batch,
                                const CombinerWeights& weights,
                                const HistogramSpec& spec,
                                std::vector<double>* grad) {
  const std::size_t h = weights.qa_conv.kernel.size();
  if (grad) grad->assign(h + 4, 0.0);
  double loss = 0.0;
  for (const FeatureRecord* rec : batch) {
    std::vector<double> hist = histogram(rec->answer_scores, spec);
    double u = weights.qa_conv.bias;
    for (std::size_t i = 0; i < h; ++i) u += weights.qa_conv.kernel[i] * hist[i];
    double qa = sigmoid(u);
    double z = weights.fusion.w_qa * qa + weights.fusion.w_nli * rec->nli_score +
               weights.fusion.bias;
    double p = sigmoid(z);
    double y = static_cast<double>(rec->label);
    const double eps = 1e-12;
    loss -= y * std::log(p + eps) + (1.0 - y) * std::log(1.0 - p + eps);
    if (grad) {
      double dz = p - y;
      (*grad)[h + 1] += dz * qa;
      (*grad)[h + 2] += dz * rec->nli_score;
      (*grad)[h + 3] += dz;
      double du = dz * weights.fusion.w_qa * qa * (1.0 - qa);
      for (std::size_t i = 0; i < h; ++i) (*grad)[i] += du * hist[i];
      (*grad)[h] += du;
    }
  }
  double n = static_cast<double>(batch.size());
  loss /= n;
  if (grad)
    for (double& g : *grad) g /= n;
  return loss;
}

inline CombinerWeights init_weights(const HistogramSpec& spec, unsigned seed) {
  spec.validate();
  CombinerWeights w;
  w.hist = spec;
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::size_t width = spec.three_channel ? 3 * spec.bins : spec.bins;
  w.nli_conv.kernel.resize(width);
  for (auto& k : w.nli_conv.kernel) k = u(rng);
  w.qa_conv.kernel.resize(static_cast<std::size_t>(spec.bins));
  for (auto& k : w.qa_conv.kernel) k = u(rng);
  w.fusion.w_qa = u(rng);
  w.fusion.w_nli = u(rng);
  return w;  // biases start at zero
}

inline double predict(const FeatureRecord& rec, const CombinerWeights& w) {
  return qafe_nli_score(rec.answer_scores, rec.nli_score, w, w.hist);
}

/// Trains qa_conv and the fusion layer with Adam on binary cross-entropy,
/// keeping the checkpoint with the best validation loss. Deterministic for
/// a fixed seed.
inline CombinerWeights train_combiner(const std::vector<FeatureRecord>& records,
                                      const TrainSettings& settings) {
  bool has_pos = false, has_neg = false;
  for (const auto& r : records) (r.label == 1 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw Error(ErrorCode::DegenerateLabels,
                "training data must contain both classes");

  std::mt19937 rng(settings.seed);
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::size_t n_valid = static_cast<std::size_t>(
      settings.valid_fraction * static_cast<double>(records.size()));
  std::vector<const FeatureRecord*> train, valid;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_valid ? valid : train).push_back(&records[order[i]]);
  if (train.empty()) train = valid;
  if (valid.empty()) valid = train;

  CombinerWeights weights = init_weights(settings.hist, settings.seed);
  std::vector<double> params = detail::flatten_params(weights);
  std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;

  CombinerWeights best = weights;
  double best_loss = loss_and_gradient(valid, weights, settings.hist, nullptr);

  std::vector<std::size_t> train_order(train.size());
  std::iota(train_order.begin(), train_order.end(), 0);
  std::vector<double> grad;
  for (int epoch = 0; epoch < settings.epochs; ++epoch) {
    std::shuffle(train_order.begin(), train_order.end(), rng);
    for (std::size_t off = 0; off < train.size();
         off += static_cast<std::size_t>(settings.batch_size)) {
      std::vector<const FeatureRecord*> batch;
      for (std::size_t i = off;
           i < std::min(train.size(),
                        off + static_cast<std::size_t>(settings.batch_size));
           ++i)
        batch.push_back(train[train_order[i]]);
      loss_and_gradient(batch, weights, settings.hist, &grad);
      if (settings.fusion_only) {
        std::size_t h = weights.qa_conv.kernel.size();
        for (std::size_t i = 0; i <= h; ++i) grad[i] = 0.0;
      }
      ++step;
      for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        double mhat = m[i] / (1.0 - std::pow(beta1, step));
        double vhat = v[i] / (1.0 - std::pow(beta2, step));
        params[i] -= settings.learning_rate * mhat / (std::sqrt(vhat) + eps);
      }
      detail::unflatten_params(params, weights);
    }
    double vloss = loss_and_gradient(valid, weights, settings.hist, nullptr);
    if (vloss < best_loss) {
      best_loss = vloss;
      best = weights;
    }
  }
  best.provenance = json{{"epochs", settings.epochs},
                         {"batch_size", settings.batch_size},
                         {"learning_rate", settings.learning_rate},
                         {"seed", settings.seed},
                         {"valid_loss", best_loss},
                         {"n_train", train.size()},
                         {"n_valid", valid.size()}};
  return best;
}

/// One weight set per dataset, trained in isolation.
inline std::map<std::string, CombinerWeights> train_supervised(
    const std::map<std::string, std::vector<FeatureRecord>>& per_dataset,
    const TrainSettings& settings) {
  std::map<std::string, CombinerWeights> out;
  for (const auto& [dataset, records] : per_dataset) {
    CombinerWeights w = train_combiner(records, settings);
    w.provenance["dataset"] = dataset;
    out[dataset] = std::move(w);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline json to_json(const CombinerWeights& w) {
  return json{{"version", 1},
              {"hist",
               {{"bins", w.hist.bins},
                {"normalize", w.hist.normalize},
                {"three_channel", w.hist.three_channel}}},
              {"nli_conv", {{"kernel", w.nli_conv.kernel}, {"bias", w.nli_conv.bias}}},
              {"qa_conv", {{"kernel", w.qa_conv.kernel}, {"bias", w.qa_conv.bias}}},
              {"fusion", {{"w", {w.fusion.w_qa, w.fusion.w_nli}}, {"b", w.fusion.bias}}},
              {"provenance", w.provenance}};
}

inline CombinerWeights weights_from_json(const json& j) {
  CombinerWeights w;
  w.hist.bins = j.at("hist").at("bins").get<int>();
  w.hist.normalize = j.at("hist").value("normalize", true);
  w.hist.three_channel = j.at("hist").value("three_channel", false);
  w.nli_conv.kernel = j.at("nli_conv").at("kernel").get<std::vector<double>>();
  w.nli_conv.bias = j.at("nli_conv").at("bias").get<double>();
  w.qa_conv.kernel = j.at("qa_conv").at("kernel").get<std::vector<double>>();
  w.qa_conv.bias = j.at("qa_conv").at("bias").get<double>();
  w.fusion.w_qa = j.at("fusion").at("w").at(0).get<double>();
  w.fusion.w_nli = j.at("fusion").at("w").at(1).get<double>();
  w.fusion.bias = j.at("fusion").at("b").get<double>();
  w.provenance = j.value("provenance", json::object());
  for (double p : detail::flatten_params(w))
    if (!std::isfinite(p))
      throw Error(ErrorCode::ValueOutOfRange, "non-finite combiner weight");
  return w;
}

inline FeatureRecord feature_from_json(const json& j) {
  FeatureRecord r;
  r.id = j.value("id", std::string());
  r.answer_scores = j.at("answer_scores").get<std::vector<double>>();
  r.nli_score = j.at("nli_score").get<double>();
  r.label = j.at("label").get<int>();
  r.dataset = j.value("dataset", std::string());
  return r;
}

}  // namespace qafe
