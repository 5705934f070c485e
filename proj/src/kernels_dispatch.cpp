#include "clear/kernels.hpp"

#include <cstdlib>
#include <string>

namespace clear::kern {
namespace {

const Ops* best_available() {
#if defined(__x86_64__) || defined(_M_X64)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return avx2_ops();
#endif
    if (const Ops* neon = neon_ops()) return neon;
    return &scalar_ops();
}

const Ops* resolve(std::string_view name) {
    if (name == "scalar") return &scalar_ops();
    if (name == "auto") return best_available();
#if defined(__x86_64__) || defined(_M_X64)
    if (name == "avx2" && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return avx2_ops();
#endif
    if (name == "neon") return neon_ops();
    return nullptr;
}

const Ops* g_active = nullptr;

const Ops* initial() {
    if (const char* env = std::getenv("CLEAR_SIMD")) {
        if (const Ops* o = resolve(env)) return o;
    }
    return best_available();
}

}  // namespace

const Ops& active() {
    if (!g_active) g_active = initial();
    return *g_active;
}

bool select(std::string_view name) {
    const Ops* o = resolve(name);
    if (!o) return false;
    g_active = o;
    return true;
}

}  // namespace clear::kern
