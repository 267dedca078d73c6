#pragma once

#include <random>
#include <utility>
#include <vector>

#include "amr/tensor.hpp"

namespace amr {

/// LSTM cell parameters with gates packed in (input, forget, cell, output)
/// order along the last axis.
struct LstmParams {
  Tensor w_input;   // [in_dim x 4d]
  Tensor w_hidden;  // [d x 4d]
  Tensor bias;      // [4d], forget slice starts at 1.0

  int input_dim() const { return w_input.shape[0]; }
  int hidden_dim() const { return w_hidden.shape[0]; }
};

struct BiLstmParams {
  LstmParams forward;
  LstmParams backward;

  int input_dim() const { return forward.input_dim(); }
  int hidden_dim() const { return forward.hidden_dim(); }
};

struct LinearParams {
  Tensor weights;  // [in x out]
  Tensor bias;     // [out]

  int input_dim() const { return weights.shape[0]; }
  int output_dim() const { return weights.shape[1]; }
};

LstmParams make_lstm_params(int in_dim, int d, std::mt19937_64& rng);
BiLstmParams make_bilstm_params(int in_dim, int d, std::mt19937_64& rng);
LinearParams make_linear_params(int in, int out, std::mt19937_64& rng);

/// One LSTM recurrence step. x_t is [in_dim], h_prev/c_prev are [d].
std::pair<Tensor, Tensor> lstm_step(const LstmParams& p, const Tensor& x_t,
                                    const Tensor& h_prev, const Tensor& c_prev);

/// Masked bidirectional pass over seq [T x in_dim]. Masked steps freeze the
/// forward state, are skipped in the reverse direction, and emit zero rows.
/// Output is [T x 2d] (forward half first).
Tensor bilstm_forward(const BiLstmParams& p, const Tensor& seq,
                      const std::vector<std::uint8_t>& mask);

/// x^T W + b for a vector x [in] -> [out].
Tensor linear(const LinearParams& p, const Tensor& x);
/// Row-wise affine map for [T x in] -> [T x out].
Tensor linear_rows(const LinearParams& p, const Tensor& x);

}  // namespace amr
