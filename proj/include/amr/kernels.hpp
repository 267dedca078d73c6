#pragma once

#include <cstddef>

// Numeric inner loops shared by the tensor engine. Two backends: a plain
// serial reference and an OpenMP one. Every output element is computed by a
// single thread with a fixed-order inner loop, so the backends produce
// bit-identical results; the serial backend stays around as the oracle the
// parallel one is tested against.
namespace amr::kernels {

enum class Backend { serial, parallel };

Backend backend();
void set_backend(Backend b);
const char* backend_name(Backend b);
int thread_count();

// c[n x m] = op(a) * op(b), row-major; op transposes when the flag is set.
// a is n x k (or k x n when trans_a), b is k x m (or m x k when trans_b).
// accumulate adds into c instead of overwriting it.
void gemm(bool trans_a, bool trans_b, int n, int m, int k,
          const double* a, const double* b, double* c, bool accumulate);

void ew_add(std::size_t n, const double* a, const double* b, double* out);
void ew_sub(std::size_t n, const double* a, const double* b, double* out);
void ew_mul(std::size_t n, const double* a, const double* b, double* out);

// out += g  /  out += a .* b (gradient accumulation paths)
void ew_acc(std::size_t n, const double* g, double* out);
void ew_mul_acc(std::size_t n, const double* a, const double* b, double* out);

void map_sigmoid(std::size_t n, const double* x, double* y);
void map_tanh(std::size_t n, const double* x, double* y);
void map_relu(std::size_t n, const double* x, double* y);

// out += g .* f'(.) with the saved forward output (or input for relu).
void sigmoid_bwd_acc(std::size_t n, const double* g, const double* y, double* out);
void tanh_bwd_acc(std::size_t n, const double* g, const double* y, double* out);
void relu_bwd_acc(std::size_t n, const double* g, const double* x, double* out);

namespace detail {

void gemm_serial(bool trans_a, bool trans_b, int n, int m, int k,
                 const double* a, const double* b, double* c, bool accumulate);
void gemm_parallel(bool trans_a, bool trans_b, int n, int m, int k,
                   const double* a, const double* b, double* c, bool accumulate);

void ew_add_serial(std::size_t n, const double* a, const double* b, double* out);
void ew_sub_serial(std::size_t n, const double* a, const double* b, double* out);
void ew_mul_serial(std::size_t n, const double* a, const double* b, double* out);
void ew_acc_serial(std::size_t n, const double* g, double* out);
void ew_mul_acc_serial(std::size_t n, const double* a, const double* b, double* out);
void map_sigmoid_serial(std::size_t n, const double* x, double* y);
void map_tanh_serial(std::size_t n, const double* x, double* y);
void map_relu_serial(std::size_t n, const double* x, double* y);
void sigmoid_bwd_acc_serial(std::size_t n, const double* g, const double* y, double* out);
void tanh_bwd_acc_serial(std::size_t n, const double* g, const double* y, double* out);
void relu_bwd_acc_serial(std::size_t n, const double* g, const double* x, double* out);

void ew_add_parallel(std::size_t n, const double* a, const double* b, double* out);
void ew_sub_parallel(std::size_t n, const double* a, const double* b, double* out);
void ew_mul_parallel(std::size_t n, const double* a, const double* b, double* out);
void ew_acc_parallel(std::size_t n, const double* g, double* out);
void ew_mul_acc_parallel(std::size_t n, const double* a, const double* b, double* out);
void map_sigmoid_parallel(std::size_t n, const double* x, double* y);
void map_tanh_parallel(std::size_t n, const double* x, double* y);
void map_relu_parallel(std::size_t n, const double* x, double* y);
void sigmoid_bwd_acc_parallel(std::size_t n, const double* g, const double* y, double* out);
void tanh_bwd_acc_parallel(std::size_t n, const double* g, const double* y, double* out);
void relu_bwd_acc_parallel(std::size_t n, const double* g, const double* x, double* out);

}  // namespace detail

}  // namespace amr::kernels
