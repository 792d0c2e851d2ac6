#include "puftrial/auth.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace puftrial {

void TrialConfig::validate() const {
    if (k == 0) throw ValidationError("k must be >= 1");
    if (m > k) throw ValidationError("m must satisfy 0 <= m <= k");
    if (M < 1) throw ValidationError("M must be >= 1");
    if (d < 1) throw ValidationError("d must be >= 1");
    if (n_ag > k - m) throw ValidationError("n_ag must satisfy n_ag <= k - m");
}

Bytes owf_encode(const ResponseBits& e, std::span<const uint8_t> nonce) {
    if (e.k() == 0) throw ValidationError("k must be >= 1");
    Bytes msg;
    msg.reserve(5 + (e.k() + 7) / 8 + nonce.size());
    msg.push_back(0x54);
    put_u16_be(msg, static_cast<uint16_t>(e.k()));
    Bytes packed = e.packed();
    msg.insert(msg.end(), packed.begin(), packed.end());
    put_u16_be(msg, static_cast<uint16_t>(nonce.size()));
    msg.insert(msg.end(), nonce.begin(), nonce.end());
    return msg;
}

Digest owf(const ResponseBits& e, const Nonce& nonce, HashId hash) {
    Bytes msg = owf_encode(e, nonce);
    return hash_bytes(hash, msg);
}

std::vector<uint32_t> sort_unreliable(std::span<const double> conf) {
    std::vector<uint32_t> idx(conf.size());
    std::iota(idx.begin(), idx.end(), 0u);
    std::stable_sort(idx.begin(), idx.end(), [&](uint32_t a, uint32_t b) {
        return std::abs(conf[a]) < std::abs(conf[b]);
    });
    return idx;
}

namespace {

// Shared scan state: the encoded base message (trial t = 0) plus one
// (byte offset, bit mask) flip per pattern bit.
struct ScanPlan {
    Bytes base;                                // owf encoding of enrolled e
    std::vector<std::pair<uint32_t, uint8_t>> flips;  // per pattern bit j
    HashId hash;
    Digest target;
};

ScanPlan make_plan(const ResponseBits& e, std::span<const uint32_t> order, uint32_t m,
                   const Digest& digest, const Nonce& nonce, HashId hash) {
    ScanPlan plan;
    plan.base = owf_encode(e, nonce);
    plan.flips.reserve(m);
    for (uint32_t j = 0; j < m; ++j) {
        uint32_t pos = order[j];
        plan.flips.emplace_back(3 + pos / 8, uint8_t(0x80u >> (pos % 8)));
    }
    plan.hash = hash;
    plan.target = digest;
    return plan;
}

// Scans trials [begin, end); returns the smallest matching t or nullopt.
std::optional<uint64_t> scan_range(const ScanPlan& plan, uint64_t begin, uint64_t end) {
    const size_t len = plan.base.size();
    std::vector<uint8_t> bufs(8 * len);
    const uint8_t* ptrs[8];
    for (int l = 0; l < 8; ++l) ptrs[l] = bufs.data() + size_t(l) * len;
    Digest digests[8];

    for (uint64_t t = begin; t < end; t += 8) {
        unsigned lanes = static_cast<unsigned>(std::min<uint64_t>(8, end - t));
        for (unsigned l = 0; l < lanes; ++l) {
            uint8_t* buf = bufs.data() + size_t(l) * len;
            std::memcpy(buf, plan.base.data(), len);
            uint64_t pat = t + l;
            while (pat) {
                unsigned j = static_cast<unsigned>(std::countr_zero(pat));
                buf[plan.flips[j].first] ^= plan.flips[j].second;
                pat &= pat - 1;
            }
        }
        if (lanes == 8) {
            hash_batch8(plan.hash, ptrs, len, digests);
        } else {
            for (unsigned l = 0; l < lanes; ++l)
                digests[l] = hash_bytes(plan.hash, {ptrs[l], len});
        }
        for (unsigned l = 0; l < lanes; ++l)
            if (digests[l] == plan.target) return t + l;
    }
    return std::nullopt;
}

std::optional<uint64_t> scan_all(const ScanPlan& plan, uint64_t total, uint32_t jobs) {
    if (jobs <= 1 || total < (1u << 14)) return scan_range(plan, 0, total);

    // Chunked parallel scan with a min reduction over matches. Threads stop
    // claiming chunks past the best match found so far, so the result is the
    // smallest matching t regardless of scheduling.
    const uint64_t chunk = 1u << 13;
    std::atomic<uint64_t> next{0};
    std::atomic<uint64_t> best{~0ull};
    auto worker = [&] {
        for (;;) {
            uint64_t start = next.fetch_add(chunk);
            if (start >= total || start >= best.load()) return;
            uint64_t end = std::min(total, start + chunk);
            if (auto hit = scan_range(plan, start, end)) {
                uint64_t h = *hit, cur = best.load();
                while (h < cur && !best.compare_exchange_weak(cur, h)) {
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (uint32_t i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    uint64_t b = best.load();
    if (b == ~0ull) return std::nullopt;
    return b;
}

ResponseBits apply_pattern(const ResponseBits& e, std::span<const uint32_t> order, uint64_t pattern) {
    ResponseBits out = e;
    while (pattern) {
        unsigned j = static_cast<unsigned>(std::countr_zero(pattern));
        out.bits[order[j]] ^= 1;
        pattern &= pattern - 1;
    }
    return out;
}

}  // namespace

AuthOutcome trial_search(const ResponseBits& e, std::span<const double> conf, const Digest& digest,
                         const Nonce& nonce, const TrialConfig& cfg) {
    cfg.validate();
    if (e.k() != cfg.k || conf.size() != cfg.k)
        throw ValidationError("response/confidence length does not match cfg.k");
    if (cfg.m >= 63) throw ValidationError("m too large for exhaustive search");

    std::vector<uint32_t> order = sort_unreliable(conf);
    ScanPlan plan = make_plan(e, order, cfg.m, digest, nonce, cfg.hash);
    const uint64_t total = 1ull << cfg.m;

    AuthOutcome out;
    if (auto hit = scan_all(plan, total, cfg.jobs)) {
        out.state = AuthOutcome::State::success;
        out.trials_used = *hit + 1;
        out.matched_pattern = *hit;
        out.recovered_response = apply_pattern(e, order, *hit);
    } else {
        out.state = AuthOutcome::State::fail;
        out.trials_used = total;
    }
    return out;
}

AuthOutcome augmented_authenticate(std::span<const SimPuf* const> refs, RoundSource& prover,
                                   const TrialConfig& cfg) {
    cfg.validate();
    if (refs.size() != cfg.M) throw ValidationError("reference count does not match cfg.M");

    AuthOutcome out;
    uint64_t trials = 0;
    for (uint32_t round = 0; round < cfg.d; ++round) {
        auto r = prover.next_round(round);
        if (!r) throw ProtocolError("prover transport failure in round " + std::to_string(round));
        for (uint32_t j = 0; j < cfg.M; ++j) {
            auto [e, conf] = refs[j]->query_vector(r->challenges);
            AuthOutcome one = trial_search(e, conf, r->digest, r->nonce, cfg);
            trials += one.trials_used;
            if (one.ok()) {
                one.trials_used = trials;
                one.matched_reference = j;
                one.matched_round = round;
                return one;
            }
        }
    }
    out.state = AuthOutcome::State::fail;
    out.trials_used = trials;
    return out;
}

AuthOutcome detection_update_search(SimPuf& simpuf, std::span<const Challenge> challenges,
                                    const Digest& digest, const Nonce& nonce,
                                    const TrialConfig& cfg) {
    cfg.validate();
    auto [e, conf] = simpuf.query_vector(challenges);
    if (e.k() != cfg.k) throw ValidationError("challenge count does not match cfg.k");

    std::vector<uint32_t> order = sort_unreliable(conf);
    const uint32_t reliable = cfg.k - cfg.m;
    const uint64_t inner = 1ull << cfg.m;
    uint64_t trials = 0;

    // Flip counts in increasing order; subsets of the reliable tail of the
    // sorted index vector in lexicographic order.
    std::vector<uint32_t> combo;
    for (uint32_t n_flip = 0; n_flip <= cfg.n_ag; ++n_flip) {
        combo.resize(n_flip);
        std::iota(combo.begin(), combo.end(), 0u);
        for (;;) {
            ResponseBits trial_e = e;
            for (uint32_t c : combo) trial_e.bits[order[cfg.m + c]] ^= 1;

            ScanPlan plan = make_plan(trial_e, order, cfg.m, digest, nonce, cfg.hash);
            if (auto hit = scan_all(plan, inner, cfg.jobs)) {
                AuthOutcome out;
                out.state = AuthOutcome::State::success;
                out.trials_used = trials + *hit + 1;
                out.matched_pattern = *hit;
                out.recovered_response = apply_pattern(trial_e, order, *hit);
                for (uint32_t c : combo) {
                    uint32_t pos = order[cfg.m + c];
                    out.flipped_reliable.push_back(pos);
                    simpuf.apply_flip(challenges[pos]);
                }
                return out;
            }
            trials += inner;

            // next lexicographic combination of n_flip elements out of `reliable`
            if (n_flip == 0) break;
            int32_t i = int32_t(n_flip) - 1;
            while (i >= 0 && combo[size_t(i)] == reliable - n_flip + uint32_t(i)) --i;
            if (i < 0) break;
            ++combo[size_t(i)];
            for (uint32_t j = uint32_t(i) + 1; j < n_flip; ++j) combo[j] = combo[j - 1] + 1;
        }
    }
    AuthOutcome out;
    out.state = AuthOutcome::State::fail;
    out.trials_used = trials;
    return out;
}

uint64_t worst_case_trials(const TrialConfig& cfg) {
    cfg.validate();
    if (cfg.m >= 63) throw std::overflow_error("worst-case trial count exceeds 2^63");
    const uint64_t limit = 1ull << 63;
    uint64_t n = 1ull << cfg.m;
    if (n > limit / cfg.M) throw std::overflow_error("worst-case trial count exceeds 2^63");
    n *= cfg.M;
    if (n > limit / cfg.d) throw std::overflow_error("worst-case trial count exceeds 2^63");
    return n * cfg.d;
}

uint64_t detection_update_trial_bound(const TrialConfig& cfg) {
    cfg.validate();
    const uint64_t limit = 1ull << 63;
    if (cfg.m >= 63) throw std::overflow_error("trial bound exceeds 2^63");
    uint64_t inner = 1ull << cfg.m;
    uint64_t total = 0;
    uint64_t n = cfg.k - cfg.m;
    for (uint64_t f = 0; f <= cfg.n_ag; ++f) {
        // C(n, f) with overflow checks
        uint64_t c = 1;
        for (uint64_t i = 0; i < f; ++i) {
            if (c > limit / (n - i)) throw std::overflow_error("trial bound exceeds 2^63");
            c = c * (n - i) / (i + 1);
        }
        if (c > (limit - total) / inner) throw std::overflow_error("trial bound exceeds 2^63");
        total += c * inner;
    }
    return total;
}

}  // namespace puftrial
