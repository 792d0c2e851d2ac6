#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "puftrial/auth.hpp"

namespace puftrial {

enum class MsgKind : uint8_t {
    server_nonce = 1,
    server_challenge = 2,
    prover_digest = 3,
    prover_digest_with_nonce = 4,
    server_ack = 5,
    prover_nonce2 = 6,
    server_digest2 = 7,
};

struct Message {
    MsgKind kind{};
    Bytes payload;
    friend bool operator==(const Message&, const Message&) = default;
};

// Wire encoding: 1-byte kind tag, u16 BE payload length, payload bytes.
Bytes encode_message(const Message& m);
Message decode_message(std::span<const uint8_t> wire, size_t& offset);
void validate_message(const Message& m);  // payload length per kind, 64 KiB cap

enum class Direction : uint8_t { server_to_prover = 0, prover_to_server = 1 };

struct TranscriptEntry {
    Direction dir{};
    Message msg;
    friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

struct Transcript {
    uint64_t session_id = 0;
    std::vector<TranscriptEntry> entries;
    std::string server_outcome;             // "success" | "fail" | "abort"
    std::optional<bool> prover_accept;      // mutual sessions only
    std::string abort_reason;

    // Line-oriented hex log: "session,<id>" then "s2p|p2s,<kind>,<hex payload>".
    std::string to_log() const;
    static Transcript from_log(const std::string& log);

    std::vector<Message> prover_messages() const;
};

// In-process reliable ordered channel; every send passes through the wire
// encoding and is recorded for the transcript.
class Transport {
public:
    virtual ~Transport() = default;
    virtual void send(Direction dir, const Message& m);
    virtual std::optional<Message> recv(Direction dir);
    const std::vector<TranscriptEntry>& log() const { return log_; }

protected:
    std::deque<Message> queue_[2];
    std::vector<TranscriptEntry> log_;
};

// Fault-injecting decorator: drops the n-th message (0-based, counting sends).
class LossyTransport : public Transport {
public:
    explicit LossyTransport(size_t drop_index) : drop_index_(drop_index) {}
    void send(Direction dir, const Message& m) override;

private:
    size_t drop_index_;
    size_t sent_ = 0;
};

// Deterministic nonce source standing in for the device TRNG: 16 bytes of
// blake2s(seed || counter), counter monotonic.
class NonceGen {
public:
    explicit NonceGen(uint64_t seed, uint64_t start_counter = 0)
        : seed_(seed), counter_(start_counter) {}
    Nonce next();
    void rewind(uint64_t counter) { counter_ = counter; }  // test harness only
    uint64_t counter() const { return counter_; }

private:
    uint64_t seed_;
    uint64_t counter_;
};

enum class Arch : uint8_t { a = 0, b = 1 };

// Prover simulation. Architecture A answers server nonces from a hardwired
// challenge list; architecture B expands server challenge seeds and supplies
// its own nonce.
struct ProverDevice {
    Arch arch = Arch::b;
    const PhysicalPuf* puf = nullptr;
    std::string condition;
    uint32_t k = 0;
    HashId hash = HashId::blake2s256;
    std::vector<Challenge> fixed;  // architecture A
    Rng noise_rng{0};
    NonceGen nonce_gen{0};
    ResponseBits last_response;    // retained for the mutual continuation

    static ProverDevice make_a(const PhysicalPuf& puf, const std::string& condition, uint32_t k,
                               HashId hash, uint64_t seed);
    static ProverDevice make_b(const PhysicalPuf& puf, const std::string& condition, uint32_t k,
                               HashId hash, uint64_t seed);

    Message respond_a(const Nonce& server_nonce);
    Message respond_b(ChallengeSeed seed);
};

struct Server {
    std::vector<const SimPuf*> refs;  // M references, shared k and kind
    TrialConfig cfg;
    NonceGen nonce_gen{0};
    Rng seed_rng{0};

    Server(std::vector<const SimPuf*> refs, TrialConfig cfg, uint64_t seed);
    std::vector<Challenge> fixed_challenges() const;  // architecture A list
};

struct SessionResult {
    AuthOutcome outcome;
    Transcript transcript;
};

struct MutualResult {
    AuthOutcome server_outcome;
    bool prover_accept = false;
    Transcript transcript;
};

SessionResult run_unilateral(Server& server, ProverDevice& device, Transport& transport);
MutualResult run_mutual(Server& server, ProverDevice& device, Transport& transport);

// Replays recorded prover messages against a fresh session. The fresh server
// nonce (A) or fresh challenge seed (B) makes the stale digest miss.
SessionResult adversary_replay(Server& server, Arch arch, const std::vector<Message>& recorded,
                               Transport& transport);

// Runs honest sessions with a device that was never enrolled; returns the
// number of acceptances.
uint64_t adversary_impostor(Server& server, const PhysicalPuf& foreign, const std::string& condition,
                            uint64_t sessions, uint64_t seed);

}  // namespace puftrial
