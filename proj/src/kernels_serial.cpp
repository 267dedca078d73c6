#include "amr/kernels.hpp"

#include <cmath>

namespace amr::kernels::detail {

void gemm_serial(bool trans_a, bool trans_b, int n, int m, int k,
                 const double* a, const double* b, double* c, bool accumulate) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) {
        const double av = trans_a ? a[l * n + i] : a[i * k + l];
        const double bv = trans_b ? b[j * k + l] : b[l * m + j];
        acc += av * bv;
      }
      if (accumulate) {
        c[i * m + j] += acc;
      } else {
        c[i * m + j] = acc;
      }
    }
  }
}

void ew_add_serial(std::size_t n, const double* a, const double* b, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void ew_sub_serial(std::size_t n, const double* a, const double* b, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void ew_mul_serial(std::size_t n, const double* a, const double* b, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void ew_acc_serial(std::size_t n, const double* g, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] += g[i];
}

void ew_mul_acc_serial(std::size_t n, const double* a, const double* b, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] += a[i] * b[i];
}

void map_sigmoid_serial(std::size_t n, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void map_tanh_serial(std::size_t n, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

void map_relu_serial(std::size_t n, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void sigmoid_bwd_acc_serial(std::size_t n, const double* g, const double* y, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] += g[i] * y[i] * (1.0 - y[i]);
}

void tanh_bwd_acc_serial(std::size_t n, const double* g, const double* y, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] += g[i] * (1.0 - y[i] * y[i]);
}

void relu_bwd_acc_serial(std::size_t n, const double* g, const double* x, double* out) {
  // gradient at exactly 0 is 0
  for (std::size_t i = 0; i < n; ++i) out[i] += x[i] > 0.0 ? g[i] : 0.0;
}

}  // namespace amr::kernels::detail
