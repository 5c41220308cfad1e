#include "sgpg/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "kernels_impl.hpp"

namespace sgpg::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(SGPG_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() {
  const Isa best = detected_isa();
  if (const char* env = std::getenv("SGPG_SIMD")) {
    if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
    if (std::strcmp(env, "avx2") == 0 && isa_available(Isa::avx2)) return Isa::avx2;
  }
  return best;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

Isa detected_isa() {
  static const bool avx2 = cpu_has_avx2();
  return avx2 ? Isa::avx2 : Isa::scalar;
}

bool isa_available(Isa isa) {
  return isa == Isa::scalar || detected_isa() == Isa::avx2;
}

const KernelTable& table(Isa isa) {
#if defined(SGPG_HAVE_AVX2)
  if (isa == Isa::avx2 && isa_available(Isa::avx2)) return detail::kAvx2Table;
#endif
  (void)isa;
  return detail::kScalarTable;
}

const KernelTable& active() { return table(current().load(std::memory_order_relaxed)); }

Isa active_isa() { return current().load(std::memory_order_relaxed); }

bool force_isa(Isa isa) {
  if (!isa_available(isa)) return false;
  current().store(isa, std::memory_order_relaxed);
  return true;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace sgpg::kernels
