// 8-lane AVX2 variants of the hash kernels. Message words are kept transposed:
// vector element l of m[w] is word w of lane l's message. All 8 messages must
// have the same length, which holds for trial-search candidates by
// construction. Results are bit-identical to the scalar reference kernels.

#include <immintrin.h>

#include <cstring>

#include "puftrial/hash.hpp"

namespace puftrial::detail {

namespace {

inline __m256i rotr_v(__m256i x, int n) {
    return _mm256_or_si256(_mm256_srli_epi32(x, n), _mm256_slli_epi32(x, 32 - n));
}

inline __m256i rotr16_v(__m256i x) {
    const __m256i ctl = _mm256_setr_epi8(2, 3, 0, 1, 6, 7, 4, 5, 10, 11, 8, 9, 14, 15, 12, 13,
                                         2, 3, 0, 1, 6, 7, 4, 5, 10, 11, 8, 9, 14, 15, 12, 13);
    return _mm256_shuffle_epi8(x, ctl);
}

inline __m256i rotr8_v(__m256i x) {
    const __m256i ctl = _mm256_setr_epi8(1, 2, 3, 0, 5, 6, 7, 4, 9, 10, 11, 8, 13, 14, 15, 12,
                                         1, 2, 3, 0, 5, 6, 7, 4, 9, 10, 11, 8, 13, 14, 15, 12);
    return _mm256_shuffle_epi8(x, ctl);
}

// Transposed load: word w (little-endian) of each lane.
inline __m256i gather_word_le(const uint8_t* const p[8], size_t off) {
    auto ld = [](const uint8_t* q) {
        uint32_t v;
        std::memcpy(&v, q, 4);
        return static_cast<int>(v);
    };
    return _mm256_setr_epi32(ld(p[0] + off), ld(p[1] + off), ld(p[2] + off), ld(p[3] + off),
                             ld(p[4] + off), ld(p[5] + off), ld(p[6] + off), ld(p[7] + off));
}

inline __m256i bswap32_v(__m256i x) {
    const __m256i ctl = _mm256_setr_epi8(3, 2, 1, 0, 7, 6, 5, 4, 11, 10, 9, 8, 15, 14, 13, 12,
                                         3, 2, 1, 0, 7, 6, 5, 4, 11, 10, 9, 8, 15, 14, 13, 12);
    return _mm256_shuffle_epi8(x, ctl);
}

// ---- BLAKE2s x8 ---------------------------------------------------------

constexpr uint32_t kBlake2sIv[8] = {
    0x6A09E667u, 0xBB67AE85u, 0x3C6EF372u, 0xA54FF53Au,
    0x510E527Fu, 0x9B05688Cu, 0x1F83D9ABu, 0x5BE0CD19u,
};

constexpr uint8_t kSigma[10][16] = {
    {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15},
    {14, 10, 4, 8, 9, 15, 13, 6, 1, 12, 0, 2, 11, 7, 5, 3},
    {11, 8, 12, 0, 5, 2, 15, 13, 10, 14, 3, 6, 7, 1, 9, 4},
    {7, 9, 3, 1, 13, 12, 11, 14, 2, 6, 5, 10, 4, 0, 15, 8},
    {9, 0, 5, 7, 2, 4, 10, 15, 14, 1, 11, 12, 6, 8, 3, 13},
    {2, 12, 6, 10, 0, 11, 8, 3, 4, 13, 7, 5, 15, 14, 1, 9},
    {12, 5, 1, 15, 14, 13, 4, 10, 0, 7, 6, 3, 9, 2, 8, 11},
    {13, 11, 7, 14, 12, 1, 3, 9, 5, 0, 15, 4, 8, 6, 2, 10},
    {6, 15, 14, 9, 11, 3, 0, 8, 12, 2, 13, 7, 1, 4, 10, 5},
    {10, 2, 8, 4, 7, 6, 1, 5, 15, 11, 9, 14, 3, 12, 13, 0},
};

#define B2S_G(a, b, c, d, x, y)                      \
    do {                                             \
        v[a] = _mm256_add_epi32(_mm256_add_epi32(v[a], v[b]), (x)); \
        v[d] = rotr16_v(_mm256_xor_si256(v[d], v[a]));              \
        v[c] = _mm256_add_epi32(v[c], v[d]);                        \
        v[b] = rotr_v(_mm256_xor_si256(v[b], v[c]), 12);            \
        v[a] = _mm256_add_epi32(_mm256_add_epi32(v[a], v[b]), (y)); \
        v[d] = rotr8_v(_mm256_xor_si256(v[d], v[a]));               \
        v[c] = _mm256_add_epi32(v[c], v[d]);                        \
        v[b] = rotr_v(_mm256_xor_si256(v[b], v[c]), 7);             \
    } while (0)

void blake2s_compress_x8(__m256i h[8], const __m256i m[16], uint64_t t, bool last) {
    __m256i v[16];
    for (int i = 0; i < 8; ++i) v[i] = h[i];
    for (int i = 0; i < 8; ++i) v[8 + i] = _mm256_set1_epi32(static_cast<int>(kBlake2sIv[i]));
    v[12] = _mm256_xor_si256(v[12], _mm256_set1_epi32(static_cast<int>(static_cast<uint32_t>(t))));
    v[13] = _mm256_xor_si256(v[13], _mm256_set1_epi32(static_cast<int>(static_cast<uint32_t>(t >> 32))));
    if (last) v[14] = _mm256_xor_si256(v[14], _mm256_set1_epi32(-1));
    for (int r = 0; r < 10; ++r) {
        const uint8_t* s = kSigma[r];
        B2S_G(0, 4, 8, 12, m[s[0]], m[s[1]]);
        B2S_G(1, 5, 9, 13, m[s[2]], m[s[3]]);
        B2S_G(2, 6, 10, 14, m[s[4]], m[s[5]]);
        B2S_G(3, 7, 11, 15, m[s[6]], m[s[7]]);
        B2S_G(0, 5, 10, 15, m[s[8]], m[s[9]]);
        B2S_G(1, 6, 11, 12, m[s[10]], m[s[11]]);
        B2S_G(2, 7, 8, 13, m[s[12]], m[s[13]]);
        B2S_G(3, 4, 9, 14, m[s[14]], m[s[15]]);
    }
    for (int i = 0; i < 8; ++i) h[i] = _mm256_xor_si256(h[i], _mm256_xor_si256(v[i], v[8 + i]));
}

void load_block_x8(__m256i m[16], const uint8_t* const p[8], size_t off) {
    for (int w = 0; w < 16; ++w) m[w] = gather_word_le(p, off + 4 * size_t(w));
}

// Writes the 8 32-bit state words of every lane to out, little-endian.
void store_digests_le(const __m256i h[8], Digest out[8]) {
    alignas(32) uint32_t tmp[8][8];
    for (int i = 0; i < 8; ++i) _mm256_store_si256(reinterpret_cast<__m256i*>(tmp[i]), h[i]);
    for (int lane = 0; lane < 8; ++lane)
        for (int w = 0; w < 8; ++w) {
            uint32_t v = tmp[w][lane];
            out[lane][4 * w] = uint8_t(v);
            out[lane][4 * w + 1] = uint8_t(v >> 8);
            out[lane][4 * w + 2] = uint8_t(v >> 16);
            out[lane][4 * w + 3] = uint8_t(v >> 24);
        }
}

}  // namespace

void blake2s256_x8_avx2(const uint8_t* const msgs[8], size_t len, Digest out[8]) {
    __m256i h[8];
    for (int i = 0; i < 8; ++i) h[i] = _mm256_set1_epi32(static_cast<int>(kBlake2sIv[i]));
    h[0] = _mm256_xor_si256(h[0], _mm256_set1_epi32(static_cast<int>(0x01010000u ^ 32u)));

    __m256i m[16];
    size_t off = 0, n = len;
    uint64_t t = 0;
    while (n > 64) {
        t += 64;
        load_block_x8(m, msgs, off);
        blake2s_compress_x8(h, m, t, false);
        off += 64;
        n -= 64;
    }
    uint8_t pad[8][64];
    const uint8_t* padp[8];
    for (int l = 0; l < 8; ++l) {
        std::memset(pad[l], 0, 64);
        std::memcpy(pad[l], msgs[l] + off, n);
        padp[l] = pad[l];
    }
    t += n;
    load_block_x8(m, padp, 0);
    blake2s_compress_x8(h, m, t, true);
    store_digests_le(h, out);
}

// ---- SHA-256 x8 ----------------------------------------------------------

namespace {

constexpr uint32_t kSha256K[64] = {
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
};

void sha256_compress_x8(__m256i h[8], const __m256i min[16]) {
    __m256i w[64];
    for (int i = 0; i < 16; ++i) w[i] = min[i];
    for (int i = 16; i < 64; ++i) {
        __m256i s0 = _mm256_xor_si256(_mm256_xor_si256(rotr_v(w[i - 15], 7), rotr_v(w[i - 15], 18)),
                                      _mm256_srli_epi32(w[i - 15], 3));
        __m256i s1 = _mm256_xor_si256(_mm256_xor_si256(rotr_v(w[i - 2], 17), rotr_v(w[i - 2], 19)),
                                      _mm256_srli_epi32(w[i - 2], 10));
        w[i] = _mm256_add_epi32(_mm256_add_epi32(w[i - 16], s0), _mm256_add_epi32(w[i - 7], s1));
    }
    __m256i a = h[0], b = h[1], c = h[2], d = h[3], e = h[4], f = h[5], g = h[6], hh = h[7];
    for (int i = 0; i < 64; ++i) {
        __m256i s1 = _mm256_xor_si256(_mm256_xor_si256(rotr_v(e, 6), rotr_v(e, 11)), rotr_v(e, 25));
        __m256i ch = _mm256_xor_si256(_mm256_and_si256(e, f), _mm256_andnot_si256(e, g));
        __m256i t1 = _mm256_add_epi32(
            _mm256_add_epi32(_mm256_add_epi32(hh, s1), _mm256_add_epi32(ch, w[i])),
            _mm256_set1_epi32(static_cast<int>(kSha256K[i])));
        __m256i s0 = _mm256_xor_si256(_mm256_xor_si256(rotr_v(a, 2), rotr_v(a, 13)), rotr_v(a, 22));
        __m256i maj = _mm256_xor_si256(_mm256_xor_si256(_mm256_and_si256(a, b), _mm256_and_si256(a, c)),
                                       _mm256_and_si256(b, c));
        __m256i t2 = _mm256_add_epi32(s0, maj);
        hh = g;
        g = f;
        f = e;
        e = _mm256_add_epi32(d, t1);
        d = c;
        c = b;
        b = a;
        a = _mm256_add_epi32(t1, t2);
    }
    h[0] = _mm256_add_epi32(h[0], a);
    h[1] = _mm256_add_epi32(h[1], b);
    h[2] = _mm256_add_epi32(h[2], c);
    h[3] = _mm256_add_epi32(h[3], d);
    h[4] = _mm256_add_epi32(h[4], e);
    h[5] = _mm256_add_epi32(h[5], f);
    h[6] = _mm256_add_epi32(h[6], g);
    h[7] = _mm256_add_epi32(h[7], hh);
}

void load_block_x8_be(__m256i m[16], const uint8_t* const p[8], size_t off) {
    for (int w = 0; w < 16; ++w) m[w] = bswap32_v(gather_word_le(p, off + 4 * size_t(w)));
}

}  // namespace

void sha256_x8_avx2(const uint8_t* const msgs[8], size_t len, Digest out[8]) {
    __m256i h[8] = {
        _mm256_set1_epi32(0x6a09e667), _mm256_set1_epi32(static_cast<int>(0xbb67ae85)),
        _mm256_set1_epi32(0x3c6ef372), _mm256_set1_epi32(static_cast<int>(0xa54ff53a)),
        _mm256_set1_epi32(0x510e527f), _mm256_set1_epi32(static_cast<int>(0x9b05688c)),
        _mm256_set1_epi32(0x1f83d9ab), _mm256_set1_epi32(0x5be0cd19)};

    __m256i m[16];
    size_t off = 0, n = len;
    while (n >= 64) {
        load_block_x8_be(m, msgs, off);
        sha256_compress_x8(h, m);
        off += 64;
        n -= 64;
    }
    uint8_t pad[8][64];
    const uint8_t* padp[8];
    for (int l = 0; l < 8; ++l) {
        std::memset(pad[l], 0, 64);
        std::memcpy(pad[l], msgs[l] + off, n);
        pad[l][n] = 0x80;
        padp[l] = pad[l];
    }
    if (n >= 56) {
        load_block_x8_be(m, padp, 0);
        sha256_compress_x8(h, m);
        for (int l = 0; l < 8; ++l) std::memset(pad[l], 0, 64);
    }
    uint64_t bits = uint64_t(len) * 8;
    for (int l = 0; l < 8; ++l)
        for (int i = 0; i < 8; ++i) pad[l][56 + i] = uint8_t(bits >> (56 - 8 * i));
    load_block_x8_be(m, padp, 0);
    sha256_compress_x8(h, m);

    // SHA-256 emits state words big-endian; reuse the LE store via a byte swap.
    __m256i hs[8];
    for (int i = 0; i < 8; ++i) hs[i] = bswap32_v(h[i]);
    store_digests_le(hs, out);
}

}  // namespace puftrial::detail
