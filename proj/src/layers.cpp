#include "amr/layers.hpp"

#include <cmath>
#include <stdexcept>

#include "amr/kernels.hpp"

namespace amr {

namespace {

Tensor glorot_uniform(int rows, int cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  Tensor t = Tensor::uniform({rows, cols}, -limit, limit, rng);
  t.requires_grad = true;
  return t;
}

/// Fused LSTM cell: one recorded node per step. Takes the precomputed input
/// projection xw = x*W_input + bias [1 x 4d], the packed previous state
/// [h ; c] [1 x 2d] and the recurrent weights [d x 4d]; returns the packed
/// next state [1 x 2d]. Gate order along xw is (i, f, g, o).
Tensor lstm_cell(const Tensor& xw, const Tensor& hc_prev, const Tensor& w_hidden) {
  const int d = w_hidden.shape[0];
  if (xw.shape != std::vector<int>{1, 4 * d} ||
      hc_prev.shape != std::vector<int>{1, 2 * d}) {
    throw std::invalid_argument("lstm_cell: inconsistent shapes " + xw.shape_str() +
                                ", " + hc_prev.shape_str() + ", " +
                                w_hidden.shape_str());
  }

  // pre-activations: xw + h_prev * W_hidden
  auto pre = std::make_shared<std::vector<double>>(*xw.data);
  const double* h_prev = hc_prev.ptr();
  const double* c_prev = hc_prev.ptr() + d;
  kernels::gemm(false, false, 1, 4 * d, d, h_prev, w_hidden.ptr(), pre->data(), true);

  auto gates = std::make_shared<std::vector<double>>(4 * d);
  double* gv = gates->data();
  for (int j = 0; j < d; ++j) {
    gv[j] = 1.0 / (1.0 + std::exp(-(*pre)[j]));                    // input
    gv[d + j] = 1.0 / (1.0 + std::exp(-(*pre)[d + j]));            // forget
    gv[2 * d + j] = std::tanh((*pre)[2 * d + j]);                  // cell
    gv[3 * d + j] = 1.0 / (1.0 + std::exp(-(*pre)[3 * d + j]));    // output
  }

  Tensor out = Tensor::zeros({1, 2 * d});
  double* h = out.ptr();
  double* c = out.ptr() + d;
  for (int j = 0; j < d; ++j) {
    c[j] = gv[d + j] * c_prev[j] + gv[j] * gv[2 * d + j];
    h[j] = gv[3 * d + j] * std::tanh(c[j]);
  }

  Tape* tp = Tape::active();
  if (tp) {
    const int p_xw = xw.node_on(*tp);
    const int p_hc = hc_prev.node_on(*tp);
    const int p_w = w_hidden.node_on(*tp);
    if (p_xw >= 0 || p_hc >= 0 || p_w >= 0) {
      int node = tp->record(
          "lstm_cell", {p_xw, p_hc, p_w}, out.size(),
          [p_xw, p_hc, p_w, d, gates, prev = hc_prev.data, out_d = out.data,
           w = w_hidden.data](Tape& t, const std::vector<double>& g) {
            const double* gv = gates->data();
            const double* c_prev = prev->data() + d;
            const double* c = out_d->data() + d;
            const double* g_h = g.data();
            const double* g_c = g.data() + d;

            std::vector<double> dpre(4 * d);
            std::vector<double> dc(d);
            for (int j = 0; j < d; ++j) {
              const double gi = gv[j], gf = gv[d + j], gg = gv[2 * d + j],
                           go = gv[3 * d + j];
              const double tc = std::tanh(c[j]);
              dpre[3 * d + j] = g_h[j] * tc * go * (1.0 - go);
              dc[j] = g_c[j] + g_h[j] * go * (1.0 - tc * tc);
              dpre[d + j] = dc[j] * c_prev[j] * gf * (1.0 - gf);
              dpre[j] = dc[j] * gg * gi * (1.0 - gi);
              dpre[2 * d + j] = dc[j] * gi * (1.0 - gg * gg);
            }

            if (p_xw >= 0) {
              kernels::ew_acc(4 * d, dpre.data(), t.accum(p_xw).data());
            }
            if (p_hc >= 0) {
              auto& ghc = t.accum(p_hc);
              // dh_prev = dpre * W_hidden^T
              kernels::gemm(false, true, 1, d, 4 * d, dpre.data(), w->data(),
                            ghc.data(), true);
              for (int j = 0; j < d; ++j) ghc[d + j] += dc[j] * gv[d + j];
            }
            if (p_w >= 0) {
              // dW_hidden += h_prev^T * dpre
              kernels::gemm(true, false, d, 4 * d, 1, prev->data(), dpre.data(),
                            t.accum(p_w).data(), true);
            }
          });
      out.requires_grad = true;
      out.tape_id = tp->id();
      out.node = node;
    }
  }
  return out;
}

}  // namespace

LstmParams make_lstm_params(int in_dim, int d, std::mt19937_64& rng) {
  LstmParams p;
  p.w_input = glorot_uniform(in_dim, 4 * d, rng);
  p.w_hidden = glorot_uniform(d, 4 * d, rng);
  p.bias = Tensor::zeros({4 * d});
  p.bias.requires_grad = true;
  for (int j = d; j < 2 * d; ++j) p.bias.at(j) = 1.0;  // forget gate
  return p;
}

BiLstmParams make_bilstm_params(int in_dim, int d, std::mt19937_64& rng) {
  BiLstmParams p;
  p.forward = make_lstm_params(in_dim, d, rng);
  p.backward = make_lstm_params(in_dim, d, rng);
  return p;
}

LinearParams make_linear_params(int in, int out, std::mt19937_64& rng) {
  LinearParams p;
  p.weights = glorot_uniform(in, out, rng);
  p.bias = Tensor::zeros({out});
  p.bias.requires_grad = true;
  return p;
}

std::pair<Tensor, Tensor> lstm_step(const LstmParams& p, const Tensor& x_t,
                                    const Tensor& h_prev, const Tensor& c_prev) {
  const int in = p.input_dim();
  const int d = p.hidden_dim();
  if (x_t.rank() != 1 || x_t.shape[0] != in) {
    throw std::invalid_argument("lstm_step: input " + x_t.shape_str() +
                                " does not match in_dim " + std::to_string(in));
  }
  if (h_prev.rank() != 1 || h_prev.shape[0] != d || c_prev.rank() != 1 ||
      c_prev.shape[0] != d) {
    throw std::invalid_argument("lstm_step: state shapes " + h_prev.shape_str() +
                                ", " + c_prev.shape_str() + " do not match d=" +
                                std::to_string(d));
  }
  Tensor xw = add(matmul(reshape(x_t, {1, in}), p.w_input),
                  reshape(p.bias, {1, 4 * d}));
  Tensor hc = lstm_cell(xw, reshape(concat_last({h_prev, c_prev}), {1, 2 * d}),
                        p.w_hidden);
  return {reshape(slice_last(hc, 0, d), {d}), reshape(slice_last(hc, d, d), {d})};
}

Tensor bilstm_forward(const BiLstmParams& p, const Tensor& seq,
                      const std::vector<std::uint8_t>& mask) {
  if (seq.rank() != 2) {
    throw std::invalid_argument("bilstm_forward: sequence must be [T x in], got " +
                                seq.shape_str());
  }
  const int T = seq.shape[0];
  const int in = seq.shape[1];
  const int d = p.hidden_dim();
  if (in != p.input_dim()) {
    throw std::invalid_argument("bilstm_forward: input width " + std::to_string(in) +
                                " does not match params in_dim " +
                                std::to_string(p.input_dim()));
  }
  if (mask.size() != static_cast<std::size_t>(T)) {
    throw std::invalid_argument("bilstm_forward: mask length does not match T");
  }
  bool any = false;
  for (std::uint8_t m : mask) any = any || m;
  if (!any) throw std::invalid_argument("bilstm_forward: all steps masked");

  const Tensor zero_row = Tensor::zeros({1, d});

  // Input projections for the whole sequence in one pass per direction.
  auto run_direction = [&](const LstmParams& dir, bool reverse) {
    Tensor xw_all = add(matmul(seq, dir.w_input), expand_rows(dir.bias, T));
    std::vector<Tensor> out(T);
    Tensor hc = Tensor::zeros({1, 2 * d});
    for (int step = 0; step < T; ++step) {
      const int t = reverse ? T - 1 - step : step;
      if (mask[t]) {
        hc = lstm_cell(slice_rows(xw_all, t, 1), hc, dir.w_hidden);
        out[t] = slice_last(hc, 0, d);
      } else {
        out[t] = zero_row;  // state carries through unchanged
      }
    }
    return stack_rows(out);
  };

  Tensor fwd = run_direction(p.forward, false);
  Tensor bwd = run_direction(p.backward, true);
  return concat_last({fwd, bwd});
}

Tensor linear(const LinearParams& p, const Tensor& x) {
  if (x.rank() != 1 || x.shape[0] != p.input_dim()) {
    throw std::invalid_argument("linear: input " + x.shape_str() +
                                " does not match weights " + p.weights.shape_str());
  }
  Tensor y = add(matmul(reshape(x, {1, p.input_dim()}), p.weights),
                 reshape(p.bias, {1, p.output_dim()}));
  return reshape(y, {p.output_dim()});
}

Tensor linear_rows(const LinearParams& p, const Tensor& x) {
  if (x.rank() != 2 || x.shape[1] != p.input_dim()) {
    throw std::invalid_argument("linear_rows: input " + x.shape_str() +
                                " does not match weights " + p.weights.shape_str());
  }
  return add(matmul(x, p.weights), expand_rows(p.bias, x.shape[0]));
}

}  // namespace amr
