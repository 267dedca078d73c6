#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "amr/data.hpp"
#include "amr/model.hpp"
#include "amr/tensor.hpp"

namespace amr {

struct TrainConfig {
  double learning_rate = 0.0001;
  int batch_size = 32;
  double dropout_rate = 0.5;
  int max_epochs = 10;
  int patience = 5;  // non-improving epochs tolerated before stopping
  std::uint64_t seed = 0;

  void validate() const;
};

/// Mean over the batch of -log(probability of the true class), floored at
/// 1e-12 inside the log.
Tensor loss(const Tensor& probabilities, const std::vector<int>& labels);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  // name -> (first moment, second moment), shapes mirroring the parameter
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments;
};

/// Bias-corrected Adam update of one value vector in place.
void adam_update(std::vector<double>& value, const std::vector<double>& grad,
                 std::vector<double>& m, std::vector<double>& v, long t, double lr,
                 double beta1, double beta2, double epsilon);

/// Applies one Adam step from the gradients recorded on the tape. Frozen
/// embeddings and the padding row are left untouched.
void adam_step(AmrParams& params, const Tape& tape, AdamState& state, double lr);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  AmrParams best_params;
  int best_epoch = 0;
  double best_val_accuracy = 0.0;
  std::vector<EpochRecord> history;
};

/// Seeded epoch loop: shuffle, batch, forward, loss, backward, Adam, then
/// validation accuracy; keeps the best-validation parameters and stops when
/// patience is exhausted. Examples must already be truncated to the caps.
TrainResult train_loop(const ModelConfig& config, AmrParams initial,
                       const Vocabulary& vocab, const std::vector<Example>& train_set,
                       const std::vector<Example>& val_set, const TrainConfig& tcfg);

/// One history object per line: {"epoch":..,"train_loss":..,"val_accuracy":..}
void write_history(const std::string& path, const std::vector<EpochRecord>& history);

/// Inference-mode accuracy over a dataset (prediction = argmax, ties to 0).
double dataset_accuracy(const AmrParams& params, const ModelConfig& config,
                        const Vocabulary& vocab, const std::vector<Example>& examples,
                        int batch_size);

struct Checkpoint {
  AmrParams params;
  ModelConfig config;
  Vocabulary vocab;
};

/// Binary checkpoint: magic, version, gate order, config, vocabulary, then
/// each tensor as name length, name, rank, extents, little-endian f32 data.
void save_checkpoint(const AmrParams& params, const ModelConfig& config,
                     const Vocabulary& vocab, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Deterministic named sub-seed from the run seed.
std::uint64_t sub_seed(std::uint64_t seed, std::string_view tag);

}  // namespace amr
