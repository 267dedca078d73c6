#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "amr/data.hpp"
#include "amr/layers.hpp"
#include "amr/tensor.hpp"

namespace amr {

enum class PathMode { both, utterance_only, conversation_only };

const char* path_mode_name(PathMode m);
PathMode path_mode_from_name(const std::string& name);

/// Dimensions, length caps, and ablation switches. Defaults are the full
/// model at production size.
struct ModelConfig {
  int r = 300;  // embedding width
  int d = 300;  // hidden width
  int n_cap = 200;
  int m_cap = 100;
  PathMode path_mode = PathMode::both;
  bool use_attention = true;
  bool use_rereading = true;
  bool aug_identity = true;  // include the base and attended terms
  bool aug_diff = true;
  bool aug_prod = true;
  bool train_embeddings = true;
  // Escape hatches for sharing experiments; no ablation row uses these.
  bool untie_encoder = false;
  bool untie_projection = false;
  bool untie_reread_conv = false;

  void validate() const;

  bool has_utterance_path() const { return path_mode != PathMode::conversation_only; }
  bool has_conversation_path() const { return path_mode != PathMode::utterance_only; }

  /// Number of concatenated width-2d groups in the augmentation (identity
  /// contributes the base and attended terms, so it counts twice).
  int aug_term_groups() const {
    return (aug_identity ? 2 : 0) + (aug_diff ? 1 : 0) + (aug_prod ? 1 : 0);
  }
  /// Width of the vectors pooled on the conversation path.
  int pooled_conv_width() const {
    if (use_rereading) return 2 * d;
    return use_attention ? d : 2 * d;
  }
  /// Input width of the conversation-dependent head.
  int conv_head_width() const { return pooled_conv_width() * aug_term_groups(); }
  /// Input width of the shared projection (attention path only).
  int projection_width() const { return 2 * d * aug_term_groups(); }
  /// Input width of the conversation re-reading BiLSTM.
  int reread_conv_width() const { return use_attention ? d : 2 * d; }
};

/// Named Table-4 style variants. Returns the canonical list in row order.
const std::vector<std::string>& variant_names();
/// Applies a named variant's switches onto a config. Throws on unknown name.
void apply_variant(ModelConfig& config, const std::string& variant);

/// The complete set of trainable tensors. Optional members exist only when
/// the configuration calls for them.
struct AmrParams {
  EmbeddingMatrix embeddings;
  BiLstmParams encoder;  // shared for comment and response
  std::optional<BiLstmParams> encoder_response;
  std::optional<LinearParams> projection;  // W_c, b_c
  std::optional<LinearParams> projection_response;
  std::optional<BiLstmParams> reread_conv;  // BiLSTM_c
  std::optional<BiLstmParams> reread_conv_response;
  std::optional<BiLstmParams> reread_utt;  // BiLSTM_u
  std::optional<LinearParams> head_utt;    // U_u, a_u
  std::optional<LinearParams> head_conv;   // U_c, a_c
  std::optional<Tensor> alpha;

  /// Stable (name, tensor) enumeration; order defines the checkpoint layout.
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;

  AmrParams clone() const;
};

AmrParams init_model(const ModelConfig& config, const Vocabulary& vocab,
                     const EmbeddingMatrix& pretrained, std::uint64_t seed);

/// Total trainable scalar count (embeddings only when trainable).
std::size_t parameter_count(const AmrParams& params);

/// Per-example record of attention and head outputs kept for analysis.
/// Matrices are trimmed to the true (unpadded) lengths, row-major.
struct ForwardTrace {
  int n = 0, m = 0;
  std::vector<double> energies;                  // [n x m]
  std::vector<double> attention_over_response;   // rows normalized
  std::vector<double> attention_over_comment;    // columns normalized
  std::array<double, 2> o_u{};
  std::array<double, 2> o_c{};
  std::array<double, 2> probabilities{};
  bool has_attention = false;
  bool has_o_u = false;
  bool has_o_c = false;
};

/// Adds delta to one energy entry of one example; used by the saliency
/// finite-difference oracle.
struct EnergyPerturbation {
  int example = 0;
  int i = 0;
  int j = 0;
  double delta = 0.0;
};

struct ForwardOptions {
  bool training = false;
  double dropout_rate = 0.5;
  std::mt19937_64* rng = nullptr;  // required when training
  bool want_traces = false;
  bool keep_energy_tensors = false;  // retain recorded energies for saliency
  const EnergyPerturbation* perturb = nullptr;
};

/// Raw head logits per example, kept as plain values.
struct HeadOutputs {
  bool has_utt = false;
  bool has_conv = false;
  std::array<double, 2> o_u{};
  std::array<double, 2> o_c{};
};

struct ForwardResult {
  Tensor probabilities;                // [B x 2]
  std::vector<HeadOutputs> heads;      // size B
  std::vector<Tensor> energy_tensors;  // recorded e per example (padded dims)
  std::vector<Tensor> attention_row_tensors;  // row-normalized [n x m]
  std::vector<Tensor> attention_col_tensors;  // column-normalized, stored [m x n]
  std::vector<ForwardTrace> traces;    // filled when want_traces
};

ForwardResult forward(const AmrParams& params, const ModelConfig& config,
                      const Batch& batch, const ForwardOptions& options = {});

/// Registers every trainable tensor on the active tape.
void watch_parameters(Tape& tape, AmrParams& params);

/// Predicted label from class probabilities; an exact tie resolves to 0.
inline int argmax_label(double p0, double p1) { return p1 > p0 ? 1 : 0; }

}  // namespace amr
