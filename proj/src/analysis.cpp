#include "amr/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace amr {

using nlohmann::json;

MetricsReport metrics_from_counts(long tp, long fp, long fn, long tn) {
  MetricsReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.tn = tn;
  r.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  r.accuracy = r.total() > 0 ? static_cast<double>(tp + tn) / r.total() : 0.0;
  return r;
}

std::string metrics_to_json(const MetricsReport& report) {
  json obj;
  obj["tp"] = report.tp;
  obj["fp"] = report.fp;
  obj["fn"] = report.fn;
  obj["tn"] = report.tn;
  obj["precision"] = report.precision;
  obj["recall"] = report.recall;
  obj["f1"] = report.f1;
  obj["accuracy"] = report.accuracy;
  return obj.dump(2);
}

std::vector<PredRecord> predict_dataset(const AmrParams& params,
                                        const ModelConfig& config,
                                        const Vocabulary& vocab,
                                        const std::vector<Example>& data,
                                        int batch_size) {
  if (data.empty()) throw std::invalid_argument("predict_dataset: empty data");
  std::vector<PredRecord> out;
  out.reserve(data.size());
  for (std::size_t start = 0; start < data.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end =
        std::min(data.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<Example> chunk(data.begin() + start, data.begin() + end);
    Batch batch = make_batch(chunk, vocab);
    ForwardResult fr = forward(params, config, batch);
    for (int b = 0; b < batch.size; ++b) {
      PredRecord rec;
      rec.p0 = fr.probabilities.at(b * 2);
      rec.p1 = fr.probabilities.at(b * 2 + 1);
      rec.combined = argmax_label(rec.p0, rec.p1);
      if (fr.heads[b].has_utt) {
        rec.utterance = argmax_label(fr.heads[b].o_u[0], fr.heads[b].o_u[1]);
      }
      if (fr.heads[b].has_conv) {
        rec.conversation = argmax_label(fr.heads[b].o_c[0], fr.heads[b].o_c[1]);
      }
      out.push_back(rec);
    }
  }
  return out;
}

MetricsReport evaluate(const AmrParams& params, const ModelConfig& config,
                       const Vocabulary& vocab, const std::vector<Example>& data,
                       int batch_size) {
  const std::vector<PredRecord> preds = predict_dataset(params, config, vocab, data, batch_size);
  long tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int truth = data[i].label;
    const int pred = preds[i].combined;
    if (truth == 1 && pred == 1) ++tp;
    if (truth == 0 && pred == 1) ++fp;
    if (truth == 1 && pred == 0) ++fn;
    if (truth == 0 && pred == 0) ++tn;
  }
  return metrics_from_counts(tp, fp, fn, tn);
}

namespace {

void require_attention(const ModelConfig& config) {
  if (!config.use_attention || !config.has_conversation_path()) {
    throw std::invalid_argument(
        "saliency: model has no attention stage (attention-ablated or "
        "utterance-only configuration)");
  }
}

void normalize_by_max(std::vector<double>& values) {
  double mx = 0.0;
  for (double v : values) mx = std::max(mx, std::fabs(v));
  if (mx > 0.0) {
    for (double& v : values) v /= mx;
  }
}

}  // namespace

SaliencyMap saliency(const AmrParams& params, const ModelConfig& config,
                     const Vocabulary& vocab, const Example& example) {
  require_attention(config);
  const Example trimmed = truncate(example, config.n_cap, config.m_cap);
  Batch batch = make_batch({trimmed}, vocab);

  SaliencyMap map;
  map.comment_tokens = trimmed.comment_tokens;
  map.response_tokens = trimmed.response_tokens;
  map.n = batch.n_max;
  map.m = batch.m_max;

  AmrParams working = params.clone();
  Tape tape;
  watch_parameters(tape, working);
  ForwardOptions opt;
  opt.keep_energy_tensors = true;
  opt.want_traces = true;
  ForwardResult fr = forward(working, config, batch, opt);

  map.predicted_label = argmax_label(fr.probabilities.at(0), fr.probabilities.at(1));
  map.predicted_probability = fr.probabilities.at(map.predicted_label);

  Tensor scalar = pick(fr.probabilities, static_cast<std::size_t>(map.predicted_label));
  tape.backward(scalar);
  std::vector<double> grad = tape.grad(fr.energy_tensors[0]);
  map.raw_saliency.resize(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) map.raw_saliency[i] = std::fabs(grad[i]);

  map.saliency = map.raw_saliency;
  normalize_by_max(map.saliency);
  map.attention = fr.traces[0].attention_over_response;
  normalize_by_max(map.attention);
  return map;
}

std::string saliency_to_json(const SaliencyMap& map) {
  json obj;
  obj["comment_tokens"] = map.comment_tokens;
  obj["response_tokens"] = map.response_tokens;
  obj["n"] = map.n;
  obj["m"] = map.m;
  obj["attention"] = map.attention;
  obj["saliency"] = map.saliency;
  obj["raw_saliency"] = map.raw_saliency;
  obj["predicted_label"] = map.predicted_label;
  obj["predicted_probability"] = map.predicted_probability;
  return obj.dump(2);
}

SaliencyCheckReport saliency_fd_check(const AmrParams& params,
                                      const ModelConfig& config,
                                      const Vocabulary& vocab, const Example& example,
                                      double h, double tol, double min_magnitude) {
  require_attention(config);
  const Example trimmed = truncate(example, config.n_cap, config.m_cap);
  Batch batch = make_batch({trimmed}, vocab);

  int predicted = 0;
  std::vector<double> grad;
  {
    AmrParams working = params.clone();
    Tape tape;
    watch_parameters(tape, working);
    ForwardOptions opt;
    opt.keep_energy_tensors = true;
    ForwardResult fr = forward(working, config, batch, opt);
    predicted = argmax_label(fr.probabilities.at(0), fr.probabilities.at(1));
    Tensor scalar = pick(fr.probabilities, static_cast<std::size_t>(predicted));
    tape.backward(scalar);
    grad = tape.grad(fr.energy_tensors[0]);
  }

  SaliencyCheckReport report;
  const int n = batch.n_max, m = batch.m_max;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const double g = grad[static_cast<std::size_t>(i) * m + j];
      if (std::fabs(g) <= min_magnitude) continue;

      EnergyPerturbation perturb{0, i, j, h};
      ForwardOptions opt;
      opt.perturb = &perturb;
      const double p_plus =
          forward(params, config, batch, opt).probabilities.at(predicted);
      perturb.delta = -h;
      const double p_minus =
          forward(params, config, batch, opt).probabilities.at(predicted);
      const double numeric = (p_plus - p_minus) / (2.0 * h);

      const double rel =
          std::fabs(g - numeric) / std::max({1e-9, std::fabs(g), std::fabs(numeric)});
      report.max_rel_err = std::max(report.max_rel_err, rel);
      ++report.entries_checked;
    }
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

PathAttribution path_attribution(const AmrParams& params, const ModelConfig& config,
                                 const Vocabulary& vocab,
                                 const std::vector<Example>& data, int batch_size) {
  if (config.path_mode != PathMode::both) {
    throw std::invalid_argument("path_attribution: requires a both-path model");
  }
  const std::vector<PredRecord> preds = predict_dataset(params, config, vocab, data, batch_size);

  PathAttribution out;
  out.records.reserve(preds.size());
  for (const PredRecord& p : preds) {
    PathAttributionRecord rec;
    rec.utterance = *p.utterance;
    rec.conversation = *p.conversation;
    rec.combined = p.combined;
    out.records.push_back(rec);

    out.summary.total += 1;
    if (rec.combined == rec.utterance) out.summary.combined_matches_utterance += 1;
    if (rec.combined == rec.conversation) out.summary.combined_matches_conversation += 1;
    if (rec.utterance == rec.conversation) {
      out.summary.heads_agree += 1;
    } else {
      out.summary.heads_disagree += 1;
    }
  }
  return out;
}

std::string path_attribution_to_json(const PathAttribution& attribution) {
  json obj;
  obj["total"] = attribution.summary.total;
  obj["combined_matches_utterance"] = attribution.summary.combined_matches_utterance;
  obj["combined_matches_conversation"] =
      attribution.summary.combined_matches_conversation;
  obj["heads_agree"] = attribution.summary.heads_agree;
  obj["heads_disagree"] = attribution.summary.heads_disagree;
  json records = json::array();
  for (const PathAttributionRecord& rec : attribution.records) {
    records.push_back({{"utterance", rec.utterance},
                       {"conversation", rec.conversation},
                       {"combined", rec.combined}});
  }
  obj["records"] = records;
  return obj.dump(2);
}

namespace {

struct BucketDef {
  int lo;  // exclusive
  int hi;  // inclusive
};

const std::vector<BucketDef> kCommentBuckets = {{0, 50}, {50, 200}};
const std::vector<BucketDef> kResponseBuckets = {{0, 10}, {10, 50}, {50, 100}};

int bucket_of(const std::vector<BucketDef>& buckets, int len) {
  for (std::size_t k = 0; k < buckets.size(); ++k) {
    if (len > buckets[k].lo && len <= buckets[k].hi) return static_cast<int>(k);
  }
  return static_cast<int>(buckets.size()) - 1;  // overflow folds into the last
}

}  // namespace

LengthStudy length_study(const std::vector<SystemOutcomes>& systems,
                         const std::vector<Example>& data) {
  for (const SystemOutcomes& s : systems) {
    if (s.predicted.size() != data.size()) {
      throw std::invalid_argument("length_study: system `" + s.name +
                                  "` does not cover the dataset");
    }
  }

  LengthStudy study;
  const struct {
    const char* axis;
    const std::vector<BucketDef>* buckets;
    bool comment;
  } axes[] = {{"comment", &kCommentBuckets, true},
              {"response", &kResponseBuckets, false}};

  for (const auto& axis : axes) {
    for (std::size_t k = 0; k < axis.buckets->size(); ++k) {
      for (const SystemOutcomes& s : systems) {
        long count = 0, correct = 0;
        for (std::size_t i = 0; i < data.size(); ++i) {
          const int len = axis.comment
                              ? static_cast<int>(data[i].comment_tokens.size())
                              : static_cast<int>(data[i].response_tokens.size());
          if (bucket_of(*axis.buckets, len) != static_cast<int>(k)) continue;
          ++count;
          if (s.predicted[i] == data[i].label) ++correct;
        }
        LengthBucketRow row;
        row.axis = axis.axis;
        row.lo = (*axis.buckets)[k].lo;
        row.hi = (*axis.buckets)[k].hi;
        row.system = s.name;
        row.count = count;
        if (count > 0) row.accuracy = static_cast<double>(correct) / count;
        study.rows.push_back(std::move(row));
      }
    }
  }
  return study;
}

std::string length_study_to_csv(const LengthStudy& study) {
  std::ostringstream out;
  out << "axis,bucket_lo,bucket_hi,system,count,accuracy\n";
  for (const LengthBucketRow& row : study.rows) {
    out << row.axis << ',' << row.lo << ',' << row.hi << ',' << row.system << ','
        << row.count << ',';
    if (row.accuracy) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6f", *row.accuracy);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace amr
