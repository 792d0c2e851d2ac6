#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "puftrial/hash.hpp"
#include "puftrial/puf.hpp"

namespace puftrial {

using Nonce = std::array<uint8_t, 16>;

struct TrialConfig {
    uint32_t k = 64;
    uint32_t m = 0;      // unreliable-bit budget, 0 <= m <= k
    uint32_t M = 1;      // reference count
    uint32_t d = 1;      // authentication rounds per session
    uint32_t n_ag = 0;   // detection-update flip budget
    HashId hash = HashId::blake2s256;
    uint32_t jobs = 1;   // parallelism hint for the trial scan

    void validate() const;
};

struct AuthOutcome {
    enum class State { success, fail };
    State state = State::fail;
    uint64_t trials_used = 0;
    // Success only:
    std::optional<uint64_t> matched_pattern;          // smallest matching trial index t
    std::optional<ResponseBits> recovered_response;   // e^t with owf(e^t, n) = received digest
    std::optional<uint32_t> matched_reference;        // augmented search: reference j (0-based)
    std::optional<uint32_t> matched_round;            // augmented search: round i (0-based)
    std::vector<uint32_t> flipped_reliable;           // detection-update: repaired positions

    bool ok() const { return state == State::success; }
};

// Bit-exact OWF input encoding: 0x54, k u16 BE, response bits packed MSB-first
// (zero padding in the final byte), nonce length u16 BE, nonce bytes.
Bytes owf_encode(const ResponseBits& e, std::span<const uint8_t> nonce);
Digest owf(const ResponseBits& e, const Nonce& nonce, HashId hash = HashId::blake2s256);

// Permutation of 0..k-1 ordering |conf| ascending; ties stay in position order.
std::vector<uint32_t> sort_unreliable(std::span<const double> conf);

// Algorithm-1 exhaustive search: trial t in 0..2^m-1 flips bit j of t onto the
// j-th least reliable position; t = 0 is the enrolled response. Returns the
// smallest matching t (trials_used = t+1) or Fail with trials_used = 2^m.
// Parallel runs reduce to the same minimal t as the sequential scan.
AuthOutcome trial_search(const ResponseBits& e, std::span<const double> conf, const Digest& digest,
                         const Nonce& nonce, const TrialConfig& cfg);

// One prover round as consumed by the merged d-authentication loop.
struct ProverRound {
    std::vector<Challenge> challenges;
    Digest digest{};
    Nonce nonce{};
};

class RoundSource {
public:
    virtual ~RoundSource() = default;
    // Fresh (challenge, digest, nonce) for round i; nullopt = transport failure.
    virtual std::optional<ProverRound> next_round(uint32_t round_index) = 0;
};

// Merged d-authentication x multiple-reference search; the first Success
// short-circuits both loops. Total trials across all searches <= 2^m * M * d.
AuthOutcome augmented_authenticate(std::span<const SimPuf* const> refs, RoundSource& prover,
                                   const TrialConfig& cfg);

// Aging-tolerant variant: additionally flips up to n_ag of the k-m reliable
// positions (lexicographic subsets, outer loop over the flip count). On
// success with flips, the SimPUF's stored bits are repaired in place.
AuthOutcome detection_update_search(SimPuf& simpuf, std::span<const Challenge> challenges,
                                    const Digest& digest, const Nonce& nonce,
                                    const TrialConfig& cfg);

// 2^m * M * d; throws std::overflow_error beyond 2^63.
uint64_t worst_case_trials(const TrialConfig& cfg);

// Sum over f <= n_ag of C(k-m, f) * 2^m (detection-update trial bound).
uint64_t detection_update_trial_bound(const TrialConfig& cfg);

}  // namespace puftrial
