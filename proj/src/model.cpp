#include "amr/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace amr {

const char* path_mode_name(PathMode m) {
  switch (m) {
    case PathMode::both: return "both";
    case PathMode::utterance_only: return "utterance_only";
    case PathMode::conversation_only: return "conversation_only";
  }
  return "?";
}

PathMode path_mode_from_name(const std::string& name) {
  if (name == "both") return PathMode::both;
  if (name == "utterance_only") return PathMode::utterance_only;
  if (name == "conversation_only") return PathMode::conversation_only;
  throw std::invalid_argument("unknown path mode: " + name);
}

void ModelConfig::validate() const {
  if (r <= 0 || d <= 0) {
    throw std::invalid_argument("model config: widths must be positive");
  }
  if (n_cap <= 0 || m_cap <= 0) {
    throw std::invalid_argument("model config: length caps must be positive");
  }
  if (has_conversation_path() && aug_term_groups() == 0) {
    throw std::invalid_argument(
        "model config: at least one augmentation term must be enabled");
  }
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names = {
      "amr",
      "conversation-only",
      "utterance-only",
      "no-attention",
      "no-rereading",
      "no-rereading-no-attention",
      "no-diff",
      "no-prod",
      "no-diff-no-prod",
      "only-prod",
      "frozen-embeddings",
  };
  return names;
}

void apply_variant(ModelConfig& config, const std::string& variant) {
  // Reset the switches a variant controls to the full-model defaults first.
  config.path_mode = PathMode::both;
  config.use_attention = true;
  config.use_rereading = true;
  config.aug_identity = true;
  config.aug_diff = true;
  config.aug_prod = true;
  config.train_embeddings = true;

  if (variant == "amr") {
  } else if (variant == "conversation-only") {
    config.path_mode = PathMode::conversation_only;
  } else if (variant == "utterance-only") {
    config.path_mode = PathMode::utterance_only;
  } else if (variant == "no-attention") {
    config.use_attention = false;
  } else if (variant == "no-rereading") {
    config.use_rereading = false;
  } else if (variant == "no-rereading-no-attention") {
    config.use_attention = false;
    config.use_rereading = false;
  } else if (variant == "no-diff") {
    config.aug_diff = false;
  } else if (variant == "no-prod") {
    config.aug_prod = false;
  } else if (variant == "no-diff-no-prod") {
    config.aug_diff = false;
    config.aug_prod = false;
  } else if (variant == "only-prod") {
    config.aug_identity = false;
    config.aug_diff = false;
    config.aug_prod = true;
  } else if (variant == "frozen-embeddings") {
    config.train_embeddings = false;
  } else {
    throw std::invalid_argument("unknown variant: " + variant);
  }
}

// ------------------------------------------------------------- parameters

namespace {

void push_lstm(std::vector<std::pair<std::string, Tensor*>>& out,
               const std::string& prefix, LstmParams& p) {
  out.emplace_back(prefix + ".w_input", &p.w_input);
  out.emplace_back(prefix + ".w_hidden", &p.w_hidden);
  out.emplace_back(prefix + ".bias", &p.bias);
}

void push_bilstm(std::vector<std::pair<std::string, Tensor*>>& out,
                 const std::string& prefix, BiLstmParams& p) {
  push_lstm(out, prefix + ".fwd", p.forward);
  push_lstm(out, prefix + ".bwd", p.backward);
}

void push_linear(std::vector<std::pair<std::string, Tensor*>>& out,
                 const std::string& prefix, LinearParams& p) {
  out.emplace_back(prefix + ".weights", &p.weights);
  out.emplace_back(prefix + ".bias", &p.bias);
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> AmrParams::named() {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("embeddings", &embeddings.values);
  push_bilstm(out, "encoder", encoder);
  if (encoder_response) push_bilstm(out, "encoder_response", *encoder_response);
  if (projection) push_linear(out, "projection", *projection);
  if (projection_response) push_linear(out, "projection_response", *projection_response);
  if (reread_conv) push_bilstm(out, "reread_conv", *reread_conv);
  if (reread_conv_response) {
    push_bilstm(out, "reread_conv_response", *reread_conv_response);
  }
  if (reread_utt) push_bilstm(out, "reread_utt", *reread_utt);
  if (head_utt) push_linear(out, "head_utt", *head_utt);
  if (head_conv) push_linear(out, "head_conv", *head_conv);
  if (alpha) out.emplace_back("alpha", &*alpha);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> AmrParams::named() const {
  auto mut = const_cast<AmrParams*>(this)->named();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mut.size());
  for (auto& [name, t] : mut) out.emplace_back(name, t);
  return out;
}

AmrParams AmrParams::clone() const {
  AmrParams copy = *this;
  for (auto& [name, t] : copy.named()) *t = t->clone();
  return copy;
}

AmrParams init_model(const ModelConfig& config, const Vocabulary& vocab,
                     const EmbeddingMatrix& pretrained, std::uint64_t seed) {
  config.validate();
  if (pretrained.values.rank() != 2 ||
      pretrained.values.shape[0] != vocab.size() ||
      pretrained.values.shape[1] != config.r) {
    throw std::invalid_argument(
        "init_model: embedding matrix " + pretrained.values.shape_str() +
        " does not match vocab size " + std::to_string(vocab.size()) +
        " and r=" + std::to_string(config.r));
  }

  AmrParams params;
  params.embeddings.values = pretrained.values.clone();
  params.embeddings.values.requires_grad = true;
  params.embeddings.trainable = config.train_embeddings;

  std::mt19937_64 rng(seed);
  const int d = config.d;

  params.encoder = make_bilstm_params(config.r, d, rng);
  if (config.untie_encoder) {
    params.encoder_response = make_bilstm_params(config.r, d, rng);
  }

  if (config.has_conversation_path()) {
    if (config.use_attention) {
      params.projection = make_linear_params(config.projection_width(), d, rng);
      if (config.untie_projection) {
        params.projection_response =
            make_linear_params(config.projection_width(), d, rng);
      }
    }
    if (config.use_rereading) {
      params.reread_conv = make_bilstm_params(config.reread_conv_width(), d, rng);
      if (config.untie_reread_conv) {
        params.reread_conv_response =
            make_bilstm_params(config.reread_conv_width(), d, rng);
      }
    }
    params.head_conv = make_linear_params(config.conv_head_width(), 2, rng);
  }
  if (config.has_utterance_path()) {
    if (config.use_rereading) {
      params.reread_utt = make_bilstm_params(2 * d, d, rng);
    }
    params.head_utt = make_linear_params(2 * d, 2, rng);
  }
  if (config.path_mode == PathMode::both) {
    params.alpha = Tensor::scalar(1.0);
    params.alpha->requires_grad = true;
  }
  return params;
}

std::size_t parameter_count(const AmrParams& params) {
  std::size_t total = 0;
  for (const auto& [name, t] : params.named()) {
    if (name == "embeddings" && !params.embeddings.trainable) continue;
    total += t->size();
  }
  return total;
}

void watch_parameters(Tape& tape, AmrParams& params) {
  for (auto& [name, t] : params.named()) {
    if (name == "embeddings" && !params.embeddings.trainable) continue;
    tape.watch(*t);
  }
}

// ----------------------------------------------------------------- forward

namespace {

struct ExampleInputs {
  std::vector<int> cids, rids;
  std::vector<std::uint8_t> cmask, rmask;
  int n = 0, m = 0;          // padded widths
  int n_true = 0, m_true = 0;
};

Tensor augment(const ModelConfig& config, const Tensor& base, const Tensor& attended) {
  std::vector<Tensor> parts;
  if (config.aug_identity) {
    parts.push_back(base);
    parts.push_back(attended);
  }
  if (config.aug_diff) parts.push_back(sub(base, attended));
  if (config.aug_prod) parts.push_back(mul(base, attended));
  return parts.size() == 1 ? parts.front() : concat_last(parts);
}

Tensor maybe_dropout(const Tensor& t, const ForwardOptions& opt) {
  if (!opt.training) return t;
  return dropout(t, opt.dropout_rate, true, *opt.rng);
}

}  // namespace

ForwardResult forward(const AmrParams& params, const ModelConfig& config,
                      const Batch& batch, const ForwardOptions& options) {
  config.validate();
  if (options.training && options.rng == nullptr) {
    throw std::logic_error("forward: training mode requires an rng");
  }
  const bool conv = config.has_conversation_path();
  const bool utt = config.has_utterance_path();

  ForwardResult result;
  result.heads.resize(batch.size);
  if (options.keep_energy_tensors) {
    result.energy_tensors.resize(batch.size);
    result.attention_row_tensors.resize(batch.size);
    result.attention_col_tensors.resize(batch.size);
  }
  if (options.want_traces) result.traces.resize(batch.size);

  std::vector<Tensor> prob_rows(batch.size);

  for (int b = 0; b < batch.size; ++b) {
    ExampleInputs in;
    in.cids = batch.comment_row(b);
    in.rids = batch.response_row(b);
    in.cmask = batch.comment_row_mask(b);
    in.rmask = batch.response_row_mask(b);
    in.n = batch.n_max;
    in.m = batch.m_max;
    in.n_true = batch.comment_len[b];
    in.m_true = batch.response_len[b];

    const BiLstmParams& encoder_u = params.encoder;
    const BiLstmParams& encoder_v =
        params.encoder_response ? *params.encoder_response : params.encoder;

    Tensor v_emb = gather_rows(params.embeddings.values, in.rids);
    Tensor v_bar = bilstm_forward(encoder_v, v_emb, in.rmask);

    Tensor u_bar;
    if (conv) {
      Tensor u_emb = gather_rows(params.embeddings.values, in.cids);
      u_bar = bilstm_forward(encoder_u, u_emb, in.cmask);
    }

    // Conversation-dependent reading: attention, augmentation, projection.
    Tensor p_seq, q_seq, energies, attn_rows, attn_cols_t;
    if (conv && config.use_attention) {
      energies = matmul(u_bar, transpose(v_bar));  // e_ij = u_i . v_j
      if (options.perturb && options.perturb->example == b) {
        Tensor delta = Tensor::zeros({in.n, in.m});
        delta.at(static_cast<std::size_t>(options.perturb->i) * in.m +
                 options.perturb->j) = options.perturb->delta;
        energies = add(energies, delta);
      }
      std::vector<std::uint8_t> row_mask(static_cast<std::size_t>(in.n) * in.m);
      for (int i = 0; i < in.n; ++i) {
        for (int j = 0; j < in.m; ++j) {
          row_mask[static_cast<std::size_t>(i) * in.m + j] = in.rmask[j];
        }
      }
      attn_rows = softmax_masked(energies, row_mask);
      Tensor u_tilde = matmul(attn_rows, v_bar);

      Tensor e_t = transpose(energies);
      std::vector<std::uint8_t> col_mask(static_cast<std::size_t>(in.m) * in.n);
      for (int j = 0; j < in.m; ++j) {
        for (int i = 0; i < in.n; ++i) {
          col_mask[static_cast<std::size_t>(j) * in.n + i] = in.cmask[i];
        }
      }
      attn_cols_t = softmax_masked(e_t, col_mask);
      Tensor v_tilde = matmul(attn_cols_t, u_bar);

      const LinearParams& proj_u = *params.projection;
      const LinearParams& proj_v =
          params.projection_response ? *params.projection_response : *params.projection;
      p_seq = relu(linear_rows(proj_u, maybe_dropout(augment(config, u_bar, u_tilde), options)));
      q_seq = relu(linear_rows(proj_v, maybe_dropout(augment(config, v_bar, v_tilde), options)));

      if (options.keep_energy_tensors) {
        result.energy_tensors[b] = energies;
        result.attention_row_tensors[b] = attn_rows;
        result.attention_col_tensors[b] = attn_cols_t;
      }
    } else if (conv) {
      p_seq = u_bar;
      q_seq = v_bar;
    }

    // Re-reading and pooling.
    Tensor p_tilde, q_tilde, x_tilde;
    if (conv) {
      Tensor p_bar = p_seq, q_bar = q_seq;
      if (config.use_rereading) {
        const BiLstmParams& reread_p = *params.reread_conv;
        const BiLstmParams& reread_q =
            params.reread_conv_response ? *params.reread_conv_response
                                        : *params.reread_conv;
        p_bar = bilstm_forward(reread_p, p_seq, in.cmask);
        q_bar = bilstm_forward(reread_q, q_seq, in.rmask);
      }
      p_tilde = max_over_time(p_bar, in.cmask);
      q_tilde = max_over_time(q_bar, in.rmask);
    }
    if (utt) {
      Tensor x_bar = config.use_rereading
                         ? bilstm_forward(*params.reread_utt, v_bar, in.rmask)
                         : v_bar;
      x_tilde = max_over_time(x_bar, in.rmask);
    }

    // Classification and combination.
    Tensor o_u, o_c;
    if (utt) {
      o_u = linear(*params.head_utt, maybe_dropout(x_tilde, options));
      result.heads[b].has_utt = true;
      result.heads[b].o_u = {o_u.at(0), o_u.at(1)};
    }
    if (conv) {
      std::vector<Tensor> blocks;
      if (config.aug_identity) {
        blocks.push_back(p_tilde);
        blocks.push_back(q_tilde);
      }
      if (config.aug_diff) blocks.push_back(sub(p_tilde, q_tilde));
      if (config.aug_prod) blocks.push_back(mul(p_tilde, q_tilde));
      Tensor h_in = blocks.size() == 1 ? blocks.front() : concat_last(blocks);
      o_c = linear(*params.head_conv, maybe_dropout(h_in, options));
      result.heads[b].has_conv = true;
      result.heads[b].o_c = {o_c.at(0), o_c.at(1)};
    }

    Tensor logits;
    switch (config.path_mode) {
      case PathMode::both:
        logits = add(o_u, scale_by(o_c, *params.alpha));
        break;
      case PathMode::utterance_only:
        logits = o_u;
        break;
      case PathMode::conversation_only:
        logits = o_c;
        break;
    }
    Tensor probs = reshape(softmax_masked(reshape(logits, {1, 2}), {1, 1}), {2});
    prob_rows[b] = probs;

    if (options.want_traces) {
      ForwardTrace& tr = result.traces[b];
      tr.n = in.n_true;
      tr.m = in.m_true;
      tr.probabilities = {probs.at(0), probs.at(1)};
      tr.has_o_u = result.heads[b].has_utt;
      tr.has_o_c = result.heads[b].has_conv;
      tr.o_u = result.heads[b].o_u;
      tr.o_c = result.heads[b].o_c;
      if (conv && config.use_attention) {
        tr.has_attention = true;
        tr.energies.resize(static_cast<std::size_t>(tr.n) * tr.m);
        tr.attention_over_response.resize(tr.energies.size());
        tr.attention_over_comment.resize(tr.energies.size());
        for (int i = 0; i < tr.n; ++i) {
          for (int j = 0; j < tr.m; ++j) {
            tr.energies[static_cast<std::size_t>(i) * tr.m + j] =
                energies.at(static_cast<std::size_t>(i) * in.m + j);
            tr.attention_over_response[static_cast<std::size_t>(i) * tr.m + j] =
                attn_rows.at(static_cast<std::size_t>(i) * in.m + j);
            tr.attention_over_comment[static_cast<std::size_t>(i) * tr.m + j] =
                attn_cols_t.at(static_cast<std::size_t>(j) * in.n + i);
          }
        }
      }
    }
  }

  result.probabilities = stack_rows(prob_rows);
  return result;
}

}  // namespace amr
