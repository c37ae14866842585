#include "sibp/kernels.hpp"

namespace sibp::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double* y, double alpha, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void sub_scalar(double* y, const double* x, const double* z, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] - z[i];
}

constexpr Table kScalar{Backend::scalar, dot_scalar, axpy_scalar, sub_scalar};

}  // namespace

const Table& scalar_table() { return kScalar; }

}  // namespace sibp::kernels
