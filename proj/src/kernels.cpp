#include "amr/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace amr::kernels {

namespace {

Backend initial_backend() {
  if (const char* env = std::getenv("AMR_BACKEND")) {
    if (std::strcmp(env, "serial") == 0) return Backend::serial;
    if (std::strcmp(env, "parallel") == 0) return Backend::parallel;
  }
  return Backend::parallel;
}

std::atomic<Backend> g_backend{initial_backend()};

}  // namespace

Backend backend() { return g_backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }

const char* backend_name(Backend b) {
  return b == Backend::serial ? "serial" : "parallel";
}

int thread_count() {
#ifdef _OPENMP
  return backend() == Backend::parallel ? omp_get_max_threads() : 1;
#else
  return 1;
#endif
}

void gemm(bool trans_a, bool trans_b, int n, int m, int k,
          const double* a, const double* b, double* c, bool accumulate) {
  if (backend() == Backend::parallel) {
    detail::gemm_parallel(trans_a, trans_b, n, m, k, a, b, c, accumulate);
  } else {
    detail::gemm_serial(trans_a, trans_b, n, m, k, a, b, c, accumulate);
  }
}

#define AMR_DISPATCH2(NAME)                                                   \
  void NAME(std::size_t n, const double* a, const double* b, double* out) {   \
    if (backend() == Backend::parallel) {                                     \
      detail::NAME##_parallel(n, a, b, out);                                  \
    } else {                                                                  \
      detail::NAME##_serial(n, a, b, out);                                    \
    }                                                                         \
  }

#define AMR_DISPATCH1(NAME)                                                   \
  void NAME(std::size_t n, const double* x, double* y) {                      \
    if (backend() == Backend::parallel) {                                     \
      detail::NAME##_parallel(n, x, y);                                       \
    } else {                                                                  \
      detail::NAME##_serial(n, x, y);                                         \
    }                                                                         \
  }

AMR_DISPATCH2(ew_add)
AMR_DISPATCH2(ew_sub)
AMR_DISPATCH2(ew_mul)
AMR_DISPATCH2(ew_mul_acc)
AMR_DISPATCH2(sigmoid_bwd_acc)
AMR_DISPATCH2(tanh_bwd_acc)
AMR_DISPATCH2(relu_bwd_acc)
AMR_DISPATCH1(map_sigmoid)
AMR_DISPATCH1(map_tanh)
AMR_DISPATCH1(map_relu)

#undef AMR_DISPATCH2
#undef AMR_DISPATCH1

void ew_acc(std::size_t n, const double* g, double* out) {
  if (backend() == Backend::parallel) {
    detail::ew_acc_parallel(n, g, out);
  } else {
    detail::ew_acc_serial(n, g, out);
  }
}

}  // namespace amr::kernels
