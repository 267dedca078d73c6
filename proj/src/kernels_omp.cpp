#include "amr/kernels.hpp"

#include <cmath>
#include <cstdint>

// Parallelism is over independent output elements only; the reduction loop
// inside each element stays sequential, which keeps the results bit-identical
// to the serial backend regardless of thread count.

namespace amr::kernels::detail {

namespace {
constexpr std::int64_t kGemmCutoff = 1 << 15;  // n*m*k below this runs inline
constexpr std::int64_t kMapCutoff = 1 << 14;
}  // namespace

void gemm_parallel(bool trans_a, bool trans_b, int n, int m, int k,
                   const double* a, const double* b, double* c, bool accumulate) {
  const std::int64_t cells = static_cast<std::int64_t>(n) * m;
  const std::int64_t work = cells * k;
#pragma omp parallel for schedule(static) if (work >= kGemmCutoff)
  for (std::int64_t idx = 0; idx < cells; ++idx) {
    const int i = static_cast<int>(idx / m);
    const int j = static_cast<int>(idx % m);
    double acc = 0.0;
    for (int l = 0; l < k; ++l) {
      const double av = trans_a ? a[l * n + i] : a[i * k + l];
      const double bv = trans_b ? b[j * k + l] : b[l * m + j];
      acc += av * bv;
    }
    if (accumulate) {
      c[idx] += acc;
    } else {
      c[idx] = acc;
    }
  }
}

void ew_add_parallel(std::size_t n, const double* a, const double* b, double* out) {
  const std::int64_t sn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (sn >= kMapCutoff)
  for (std::int64_t i = 0; i < sn; ++i) out[i] = a[i] + b[i];
}

void ew_sub_parallel(std::size_t n, const double* a, const double* b, double* out) {
  const std::int64_t sn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (sn >= kMapCutoff)
  for (std::int64_t i = 0; i < sn; ++i) out[i] = a[i] - b[i];
}

void ew_mul_parallel(std::size_t n, const double* a, const double* b, double* out) {
  const std::int64_t sn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (sn >= kMapCutoff)
  for (std::int64_t i = 0; i < sn; ++i) out[i] = a[i] * b[i];
}

void ew_acc_parallel(std::size_t n, const double* g, double* out) {
  const std::int64_t sn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (sn >= kMapCutoff)
  for (std::int64_t i = 0; i < sn; ++i) out[i] += g[i];
}

void ew_mul_acc_parallel(std::size_t n, const double* a, const double* b, double* out) {
  const std::int64_t sn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (sn >= kMapCutoff)
  for (std::int64_t i = 0; i < sn; ++i) out[i] += a[i] * b[i];
}

void map_sigmoid_parallel(std::size_t n, const double* x, double* y) {
  const std::int64_t sn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (sn >= kMapCutoff)
  for (std::int64_t i = 0; i < sn; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void map_tanh_parallel(std::size_t n, const double* x, double* y) {
  const std::int64_t sn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (sn >= kMapCutoff)
  for (std::int64_t i = 0; i < sn; ++i) y[i] = std::tanh(x[i]);
}

void map_relu_parallel(std::size_t n, const double* x, double* y) {
  const std::int64_t sn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (sn >= kMapCutoff)
  for (std::int64_t i = 0; i < sn; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void sigmoid_bwd_acc_parallel(std::size_t n, const double* g, const double* y, double* out) {
  const std::int64_t sn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (sn >= kMapCutoff)
  for (std::int64_t i = 0; i < sn; ++i) out[i] += g[i] * y[i] * (1.0 - y[i]);
}

void tanh_bwd_acc_parallel(std::size_t n, const double* g, const double* y, double* out) {
  const std::int64_t sn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (sn >= kMapCutoff)
  for (std::int64_t i = 0; i < sn; ++i) out[i] += g[i] * (1.0 - y[i] * y[i]);
}

void relu_bwd_acc_parallel(std::size_t n, const double* g, const double* x, double* out) {
  const std::int64_t sn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (sn >= kMapCutoff)
  for (std::int64_t i = 0; i < sn; ++i) out[i] += x[i] > 0.0 ? g[i] : 0.0;
}

}  // namespace amr::kernels::detail
