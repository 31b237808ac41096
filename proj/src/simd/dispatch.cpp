#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "mfc/simd/kernels.hpp"

namespace mfc::simd {
namespace {

bool cpu_has_avx2() {
#if defined(MFC_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Level initial_level() {
  if (const char* env = std::getenv("MFC_SIMD");
      env != nullptr && std::string(env) == "scalar")
    return Level::scalar;
  return detected_level();
}

std::atomic<Level>& current() {
  static std::atomic<Level> level{initial_level()};
  return level;
}

}  // namespace

Level detected_level() {
  static const Level level = cpu_has_avx2() ? Level::avx2 : Level::scalar;
  return level;
}

bool available(Level level) {
  return level == Level::scalar || detected_level() == Level::avx2;
}

Level active_level() { return current().load(std::memory_order_relaxed); }

void set_level(Level level) {
  if (!available(level))
    throw std::invalid_argument("simd level not available: " +
                                std::string(to_string(level)));
  current().store(level, std::memory_order_relaxed);
}

const KernelTable& kernels(Level level) {
#if defined(MFC_HAVE_AVX2)
  if (level == Level::avx2) return avx2_kernels();
#endif
  (void)level;
  return scalar_kernels();
}

const KernelTable& kernels() { return kernels(active_level()); }

std::string_view to_string(Level level) {
  switch (level) {
    case Level::scalar:
      return "scalar";
    case Level::avx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace mfc::simd
