#include "sibp/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

namespace sibp::kernels {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_neon(double* y, double alpha, const double* x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void sub_neon(double* y, const double* x, const double* z, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vsubq_f64(vld1q_f64(x + i), vld1q_f64(z + i)));
  for (; i < n; ++i) y[i] = x[i] - z[i];
}

constexpr Table kNeon{Backend::neon, dot_neon, axpy_neon, sub_neon};

}  // namespace

const Table* neon_table() { return &kNeon; }

}  // namespace sibp::kernels

#else

namespace sibp::kernels {
const Table* neon_table() { return nullptr; }
}  // namespace sibp::kernels

#endif
