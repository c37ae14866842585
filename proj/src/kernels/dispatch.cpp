#include <atomic>
#include <cstdlib>
#include <string>

#include "sibp/error.hpp"
#include "sibp/kernels.hpp"

namespace sibp::kernels {
namespace {

const Table* table_for(Backend b) {
  switch (b) {
    case Backend::scalar: return &scalar_table();
    case Backend::avx2: return avx2_table();
    case Backend::neon: return neon_table();
  }
  return nullptr;
}

const Table* detect() {
  if (const char* env = std::getenv("SIBP_KERNEL"); env != nullptr && *env != '\0') {
    const Backend b = parse_backend(env);
    require(cpu_supports(b), ErrorCode::invalid_argument,
            std::string("SIBP_KERNEL backend unavailable: ") + env);
    return table_for(b);
  }
  if (cpu_supports(Backend::avx2)) return avx2_table();
  if (cpu_supports(Backend::neon)) return neon_table();
  return &scalar_table();
}

std::atomic<const Table*>& slot() {
  static std::atomic<const Table*> current{detect()};
  return current;
}

}  // namespace

bool cpu_supports(Backend b) {
  switch (b) {
    case Backend::scalar: return true;
    case Backend::avx2:
#if (defined(__x86_64__) || defined(__i386__)) && (defined(__GNUC__) || defined(__clang__))
      return avx2_table() != nullptr && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::neon: return neon_table() != nullptr;
  }
  return false;
}

std::string_view name(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "?";
}

Backend parse_backend(std::string_view s) {
  if (s == "scalar") return Backend::scalar;
  if (s == "avx2") return Backend::avx2;
  if (s == "neon") return Backend::neon;
  fail(ErrorCode::invalid_argument, "unknown kernel backend: " + std::string(s));
}

const Table& active() { return *slot().load(std::memory_order_acquire); }

void set_backend(Backend b) {
  require(cpu_supports(b), ErrorCode::invalid_argument,
          "kernel backend unavailable: " + std::string(name(b)));
  slot().store(table_for(b), std::memory_order_release);
}

}  // namespace sibp::kernels
