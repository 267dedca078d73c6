#pragma once

#include <optional>
#include <string>
#include <vector>

#include "amr/data.hpp"
#include "amr/model.hpp"

namespace amr {

struct MetricsReport {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0, accuracy = 0.0;

  long total() const { return tp + fp + fn + tn; }
};

/// Fills the ratio fields from the counts (0 when a denominator is 0).
MetricsReport metrics_from_counts(long tp, long fp, long fn, long tn);
std::string metrics_to_json(const MetricsReport& report);

/// Per-example inference outcome. Head labels are the argmax of the head's
/// own logits (softmax preserves argmax); absent for ablated paths.
struct PredRecord {
  int combined = 0;
  std::optional<int> utterance;
  std::optional<int> conversation;
  double p0 = 0.0, p1 = 0.0;
};

std::vector<PredRecord> predict_dataset(const AmrParams& params,
                                        const ModelConfig& config,
                                        const Vocabulary& vocab,
                                        const std::vector<Example>& data,
                                        int batch_size = 32);

/// Inference-mode evaluation; the sarcastic class (label 1) is positive.
MetricsReport evaluate(const AmrParams& params, const ModelConfig& config,
                       const Vocabulary& vocab, const std::vector<Example>& data,
                       int batch_size = 32);

struct SaliencyMap {
  std::vector<std::string> comment_tokens;
  std::vector<std::string> response_tokens;
  int n = 0, m = 0;
  std::vector<double> attention;  // row-normalized weights scaled by their max
  std::vector<double> saliency;   // |dp_pred/de|, scaled by its max
  std::vector<double> raw_saliency;  // unnormalized |dp_pred/de|
  int predicted_label = 0;
  double predicted_probability = 0.0;
};

/// Attention saliency of one example: the absolute derivative of the
/// predicted-class probability with respect to the raw attention energies.
/// Requires a model built with attention on the conversation path.
SaliencyMap saliency(const AmrParams& params, const ModelConfig& config,
                     const Vocabulary& vocab, const Example& example);

std::string saliency_to_json(const SaliencyMap& map);

struct SaliencyCheckReport {
  double max_rel_err = 0.0;
  long entries_checked = 0;
  bool pass = true;
};

/// Central finite differences on each energy entry against the recorded
/// derivative, holding the predicted class fixed. Entries with derivative
/// magnitude <= min_magnitude are skipped.
SaliencyCheckReport saliency_fd_check(const AmrParams& params,
                                      const ModelConfig& config,
                                      const Vocabulary& vocab, const Example& example,
                                      double h, double tol,
                                      double min_magnitude = 1e-6);

struct PathAttributionRecord {
  int utterance = 0;
  int conversation = 0;
  int combined = 0;
};

struct PathAttributionSummary {
  long total = 0;
  long combined_matches_utterance = 0;
  long combined_matches_conversation = 0;
  long heads_agree = 0;
  long heads_disagree = 0;
};

struct PathAttribution {
  std::vector<PathAttributionRecord> records;
  PathAttributionSummary summary;
};

/// Per-example decisions of the two heads and the combined output.
/// Requires path_mode == both.
PathAttribution path_attribution(const AmrParams& params, const ModelConfig& config,
                                 const Vocabulary& vocab,
                                 const std::vector<Example>& data,
                                 int batch_size = 32);

std::string path_attribution_to_json(const PathAttribution& attribution);

struct LengthBucketRow {
  std::string axis;  // "comment" or "response"
  int lo = 0;        // exclusive
  int hi = 0;        // inclusive
  std::string system;
  long count = 0;
  std::optional<double> accuracy;
};

struct LengthStudy {
  std::vector<LengthBucketRow> rows;
};

struct SystemOutcomes {
  std::string name;
  std::vector<int> predicted;  // aligned with the data
};

/// Accuracy per comment bucket (n<=50, 50<n<=200) and response bucket
/// (m<=10, 10<m<=50, 50<m<=100) for each system, on post-truncation token
/// counts. Lengths beyond the last edge fold into the last bucket so the
/// buckets always partition the data.
LengthStudy length_study(const std::vector<SystemOutcomes>& systems,
                         const std::vector<Example>& data);

/// CSV with columns axis,bucket_lo,bucket_hi,system,count,accuracy.
std::string length_study_to_csv(const LengthStudy& study);

}  // namespace amr
