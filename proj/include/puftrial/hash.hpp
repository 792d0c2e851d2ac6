#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

namespace puftrial {

enum class HashId : uint8_t { blake2s256 = 1, sha256 = 2 };

using Digest = std::array<uint8_t, 32>;

HashId hash_id_from_name(const std::string& name);
const char* hash_name(HashId id);

// Scalar reference kernels.
Digest blake2s256(std::span<const uint8_t> msg);
Digest sha256(std::span<const uint8_t> msg);
Digest hash_bytes(HashId id, std::span<const uint8_t> msg);

// Hash 8 equal-length messages at once. Dispatches to the widest kernel the
// CPU supports; the scalar fallback loops over the reference kernel. Outputs
// are bit-identical across paths (equivalence-tested).
void hash_batch8(HashId id, const uint8_t* const msgs[8], size_t len, Digest out[8]);

enum class SimdLevel { scalar = 0, avx2 = 1 };

bool simd_supported(SimdLevel level);
SimdLevel simd_level();                 // currently active batch path
SimdLevel set_simd_level(SimdLevel);    // clamped to supported; returns active
const char* simd_level_name(SimdLevel);

namespace detail {
// AVX2 kernels (present only when the object was built; see CMake).
void blake2s256_x8_avx2(const uint8_t* const msgs[8], size_t len, Digest out[8]);
void sha256_x8_avx2(const uint8_t* const msgs[8], size_t len, Digest out[8]);
}  // namespace detail

}  // namespace puftrial
