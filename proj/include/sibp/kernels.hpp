#pragma once

#include <cstddef>
#include <string_view>

// Dense double-precision vector kernels used by the inference inner loops.
// Each backend implements the same table; the active one is chosen at
// startup from CPU capabilities and may be overridden by `SIBP_KERNEL`
// (scalar | avx2 | neon) or `set_backend`.

namespace sibp::kernels {

enum class Backend { scalar, avx2, neon };

struct Table {
  Backend backend;
  // Σ a_i b_i
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double* y, double alpha, const double* x, std::size_t n);
  // y = x - z
  void (*sub)(double* y, const double* x, const double* z, std::size_t n);
};

const Table& scalar_table();
// nullptr when the backend was not compiled in.
const Table* avx2_table();
const Table* neon_table();

bool cpu_supports(Backend b);
std::string_view name(Backend b);
Backend parse_backend(std::string_view s);

// Currently selected table.
const Table& active();
// Throws Error(invalid_argument) if the backend is unavailable on this CPU/build.
void set_backend(Backend b);

inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline void axpy(double* y, double alpha, const double* x, std::size_t n) { active().axpy(y, alpha, x, n); }
inline void sub(double* y, const double* x, const double* z, std::size_t n) { active().sub(y, x, z, n); }

}  // namespace sibp::kernels
