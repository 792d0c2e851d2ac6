#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "puftrial/common.hpp"
#include "puftrial/hash.hpp"
#include "puftrial/rng.hpp"

using namespace puftrial;

namespace {

Bytes bytes_of(const char* s) { return Bytes(s, s + std::strlen(s)); }

std::string hex(const Digest& d) { return to_hex(d); }

Bytes pattern_768() {
    Bytes msg;
    for (int r = 0; r < 3; ++r)
        for (int i = 0; i < 256; ++i) msg.push_back(uint8_t(i));
    return msg;
}

}  // namespace

// Reference digests frozen from an independent implementation (Python
// hashlib) on the same inputs.
TEST_CASE("blake2s256 known vectors") {
    CHECK(hex(blake2s256({})) == "69217a3079908094e11121d042354a7c1f55b6482ca1a51e1b250dfd1ed0eef9");
    Bytes abc = bytes_of("abc");
    CHECK(hex(blake2s256(abc)) == "508c5e8c327c14e2e1a72ba34eeb452f37458b209ed63a294d999b4c86675982");
    Bytes longmsg = pattern_768();
    CHECK(hex(blake2s256(longmsg)) == "b928a17862e211e99759ba8819280803a914cd3dee7c5d711a3b5185aa96a7b3");
}

TEST_CASE("sha256 known vectors") {
    CHECK(hex(sha256({})) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    Bytes abc = bytes_of("abc");
    CHECK(hex(sha256(abc)) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    Bytes longmsg = pattern_768();
    CHECK(hex(sha256(longmsg)) == "f3a25aa93aa2fbba28d79260535bbd6a5eb0fc1c24a8b0f04e12b484c1dfe363");
}

TEST_CASE("batch8 equals the scalar reference on every path and length") {
    Rng rng(0xBA7C8);
    for (SimdLevel level : {SimdLevel::scalar, SimdLevel::avx2}) {
        if (!simd_supported(level)) continue;
        set_simd_level(level);
        INFO("level ", simd_level_name(level));
        for (size_t len : {size_t(0), size_t(1), size_t(29), size_t(37), size_t(55), size_t(56),
                           size_t(63), size_t(64), size_t(65), size_t(127), size_t(128), size_t(200)}) {
            std::vector<Bytes> msgs(8, Bytes(len));
            const uint8_t* ptrs[8];
            for (int l = 0; l < 8; ++l) {
                for (auto& b : msgs[l]) b = uint8_t(rng.next_u64());
                ptrs[l] = msgs[l].data();
            }
            for (HashId id : {HashId::blake2s256, HashId::sha256}) {
                Digest out[8];
                hash_batch8(id, ptrs, len, out);
                for (int l = 0; l < 8; ++l) CHECK(out[l] == hash_bytes(id, msgs[l]));
            }
        }
    }
    set_simd_level(SimdLevel::avx2);
}

TEST_CASE("simd dispatch clamps to supported levels") {
    CHECK(set_simd_level(SimdLevel::scalar) == SimdLevel::scalar);
    SimdLevel active = set_simd_level(SimdLevel::avx2);
    CHECK(simd_supported(active));
    CHECK(std::string(simd_level_name(SimdLevel::scalar)) == "scalar");
}

TEST_CASE("hash id names") {
    CHECK(hash_id_from_name("blake2s") == HashId::blake2s256);
    CHECK(hash_id_from_name("sha256") == HashId::sha256);
    CHECK_THROWS_AS(hash_id_from_name("md5"), ValidationError);
    CHECK(std::string(hash_name(HashId::blake2s256)) == "blake2s256");
}
