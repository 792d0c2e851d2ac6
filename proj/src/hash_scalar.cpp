// Scalar reference kernels: BLAKE2s-256 (RFC 7693) and SHA-256 (FIPS 180-4).
// These are the ground truth the wide kernels are equivalence-tested against.

#include <cstring>

#include "puftrial/common.hpp"
#include "puftrial/hash.hpp"

namespace puftrial {

namespace {

// ---- BLAKE2s ----------------------------------------------------------------

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

inline uint32_t rotr32(uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

inline uint32_t load32_le(const uint8_t* p) {
    return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}

inline void store32_le(uint8_t* p, uint32_t v) {
    p[0] = uint8_t(v);
    p[1] = uint8_t(v >> 8);
    p[2] = uint8_t(v >> 16);
    p[3] = uint8_t(v >> 24);
}

inline void blake2s_g(uint32_t v[16], int a, int b, int c, int d, uint32_t x, uint32_t y) {
    v[a] = v[a] + v[b] + x;
    v[d] = rotr32(v[d] ^ v[a], 16);
    v[c] = v[c] + v[d];
    v[b] = rotr32(v[b] ^ v[c], 12);
    v[a] = v[a] + v[b] + y;
    v[d] = rotr32(v[d] ^ v[a], 8);
    v[c] = v[c] + v[d];
    v[b] = rotr32(v[b] ^ v[c], 7);
}

void blake2s_compress(uint32_t h[8], const uint8_t block[64], uint64_t t, bool last) {
    uint32_t m[16];
    for (int i = 0; i < 16; ++i) m[i] = load32_le(block + 4 * i);
    uint32_t v[16];
    for (int i = 0; i < 8; ++i) v[i] = h[i];
    for (int i = 0; i < 8; ++i) v[8 + i] = kBlake2sIv[i];
    v[12] ^= static_cast<uint32_t>(t);
    v[13] ^= static_cast<uint32_t>(t >> 32);
    if (last) v[14] = ~v[14];
    for (int r = 0; r < 10; ++r) {
        const uint8_t* s = kSigma[r];
        blake2s_g(v, 0, 4, 8, 12, m[s[0]], m[s[1]]);
        blake2s_g(v, 1, 5, 9, 13, m[s[2]], m[s[3]]);
        blake2s_g(v, 2, 6, 10, 14, m[s[4]], m[s[5]]);
        blake2s_g(v, 3, 7, 11, 15, m[s[6]], m[s[7]]);
        blake2s_g(v, 0, 5, 10, 15, m[s[8]], m[s[9]]);
        blake2s_g(v, 1, 6, 11, 12, m[s[10]], m[s[11]]);
        blake2s_g(v, 2, 7, 8, 13, m[s[12]], m[s[13]]);
        blake2s_g(v, 3, 4, 9, 14, m[s[14]], m[s[15]]);
    }
    for (int i = 0; i < 8; ++i) h[i] ^= v[i] ^ v[8 + i];
}

// ---- SHA-256 ----------------------------------------------------------------

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

inline uint32_t load32_be(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void sha256_compress(uint32_t h[8], const uint8_t block[64]) {
    uint32_t w[64];
    for (int i = 0; i < 16; ++i) w[i] = load32_be(block + 4 * i);
    for (int i = 16; i < 64; ++i) {
        uint32_t s0 = rotr32(w[i - 15], 7) ^ rotr32(w[i - 15], 18) ^ (w[i - 15] >> 3);
        uint32_t s1 = rotr32(w[i - 2], 17) ^ rotr32(w[i - 2], 19) ^ (w[i - 2] >> 10);
        w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4], f = h[5], g = h[6], hh = h[7];
    for (int i = 0; i < 64; ++i) {
        uint32_t s1 = rotr32(e, 6) ^ rotr32(e, 11) ^ rotr32(e, 25);
        uint32_t ch = (e & f) ^ (~e & g);
        uint32_t t1 = hh + s1 + ch + kSha256K[i] + w[i];
        uint32_t s0 = rotr32(a, 2) ^ rotr32(a, 13) ^ rotr32(a, 22);
        uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
        uint32_t t2 = s0 + maj;
        hh = g;
        g = f;
        f = e;
        e = d + t1;
        d = c;
        c = b;
        b = a;
        a = t1 + t2;
    }
    h[0] += a;
    h[1] += b;
    h[2] += c;
    h[3] += d;
    h[4] += e;
    h[5] += f;
    h[6] += g;
    h[7] += hh;
}

}  // namespace

Digest blake2s256(std::span<const uint8_t> msg) {
    uint32_t h[8];
    for (int i = 0; i < 8; ++i) h[i] = kBlake2sIv[i];
    h[0] ^= 0x01010000u ^ 32u;  // depth 1, fanout 1, no key, 32-byte digest

    size_t n = msg.size();
    const uint8_t* p = msg.data();
    uint64_t t = 0;
    // All blocks but the last; the final block is always compressed with the
    // last-block flag, including the empty message (one zero block).
    while (n > 64) {
        t += 64;
        blake2s_compress(h, p, t, false);
        p += 64;
        n -= 64;
    }
    uint8_t block[64] = {0};
    std::memcpy(block, p, n);
    t += n;
    blake2s_compress(h, block, t, true);

    Digest out;
    for (int i = 0; i < 8; ++i) store32_le(out.data() + 4 * i, h[i]);
    return out;
}

Digest sha256(std::span<const uint8_t> msg) {
    uint32_t h[8] = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                     0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
    size_t n = msg.size();
    const uint8_t* p = msg.data();
    while (n >= 64) {
        sha256_compress(h, p);
        p += 64;
        n -= 64;
    }
    uint8_t block[64] = {0};
    std::memcpy(block, p, n);
    block[n] = 0x80;
    if (n >= 56) {
        sha256_compress(h, block);
        std::memset(block, 0, 64);
    }
    uint64_t bits = uint64_t(msg.size()) * 8;
    for (int i = 0; i < 8; ++i) block[56 + i] = uint8_t(bits >> (56 - 8 * i));
    sha256_compress(h, block);

    Digest out;
    for (int i = 0; i < 8; ++i) {
        out[4 * i] = uint8_t(h[i] >> 24);
        out[4 * i + 1] = uint8_t(h[i] >> 16);
        out[4 * i + 2] = uint8_t(h[i] >> 8);
        out[4 * i + 3] = uint8_t(h[i]);
    }
    return out;
}

Digest hash_bytes(HashId id, std::span<const uint8_t> msg) {
    switch (id) {
        case HashId::blake2s256: return blake2s256(msg);
        case HashId::sha256: return sha256(msg);
    }
    throw ValidationError("unknown hash id");
}

HashId hash_id_from_name(const std::string& name) {
    if (name == "blake2s" || name == "blake2s256" || name == "blake2s-256") return HashId::blake2s256;
    if (name == "sha256" || name == "sha-256") return HashId::sha256;
    throw ValidationError("unknown hash: " + name);
}

const char* hash_name(HashId id) {
    switch (id) {
        case HashId::blake2s256: return "blake2s256";
        case HashId::sha256: return "sha256";
    }
    return "?";
}

}  // namespace puftrial
