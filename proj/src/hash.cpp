// Runtime kernel selection for the batched hash path.

#include <atomic>

#include "puftrial/common.hpp"
#include "puftrial/hash.hpp"

namespace puftrial {

namespace {

SimdLevel detect_best() {
#if defined(PUFTRIAL_HAVE_AVX2)
    if (__builtin_cpu_supports("avx2")) return SimdLevel::avx2;
#endif
    return SimdLevel::scalar;
}

std::atomic<SimdLevel> g_active{detect_best()};

}  // namespace

bool simd_supported(SimdLevel level) {
    if (level == SimdLevel::scalar) return true;
#if defined(PUFTRIAL_HAVE_AVX2)
    if (level == SimdLevel::avx2) return __builtin_cpu_supports("avx2");
#endif
    return false;
}

SimdLevel simd_level() { return g_active.load(std::memory_order_relaxed); }

SimdLevel set_simd_level(SimdLevel level) {
    if (!simd_supported(level)) level = SimdLevel::scalar;
    g_active.store(level, std::memory_order_relaxed);
    return level;
}

const char* simd_level_name(SimdLevel level) {
    switch (level) {
        case SimdLevel::scalar: return "scalar";
        case SimdLevel::avx2: return "avx2";
    }
    return "?";
}

void hash_batch8(HashId id, const uint8_t* const msgs[8], size_t len, Digest out[8]) {
#if defined(PUFTRIAL_HAVE_AVX2)
    if (g_active.load(std::memory_order_relaxed) == SimdLevel::avx2) {
        switch (id) {
            case HashId::blake2s256: detail::blake2s256_x8_avx2(msgs, len, out); return;
            case HashId::sha256: detail::sha256_x8_avx2(msgs, len, out); return;
        }
    }
#endif
    for (int l = 0; l < 8; ++l) out[l] = hash_bytes(id, std::span<const uint8_t>(msgs[l], len));
}

}  // namespace puftrial
