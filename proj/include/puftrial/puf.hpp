#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "puftrial/dataset.hpp"

namespace puftrial {

// Challenge addressing one response bit, per SimPUF kind:
//   RoPair   - table ROPUF, compares two RO frequencies
//   KSumBits - k-sum LAPUF, one bit per stage (length = stage count)
//   BitIndex - abstract confidence population entry
struct KSumBits {
    std::vector<uint8_t> bits;  // 0/1 per stage
    friend bool operator==(const KSumBits&, const KSumBits&) = default;
};

struct BitIndex {
    uint64_t index = 0;
    friend bool operator==(const BitIndex&, const BitIndex&) = default;
};

using Challenge = std::variant<RoPair, KSumBits, BitIndex>;

using ChallengeSeed = uint64_t;

struct ResponseBits {
    std::vector<uint8_t> bits;  // one 0/1 per position

    uint32_t k() const { return static_cast<uint32_t>(bits.size()); }
    // MSB-first packing, zero padding in the final byte's low bits.
    Bytes packed() const;
    friend bool operator==(const ResponseBits&, const ResponseBits&) = default;
};

struct QueryResult {
    int bit = 0;
    double conf = 0.0;
};

// 64-bit maximal-length Fibonacci LFSR (taps 64, 63, 61, 60), one full word
// refresh per sub-challenge. Zero seeds map to 1.
class Lfsr64 {
public:
    explicit Lfsr64(uint64_t seed) : state_(seed ? seed : 1) {}
    uint64_t next() {
        for (int i = 0; i < 64; ++i) step();
        return state_;
    }

private:
    void step() {
        uint64_t bit = ((state_ >> 63) ^ (state_ >> 62) ^ (state_ >> 60) ^ (state_ >> 59)) & 1u;
        state_ = (state_ << 1) | bit;
    }
    uint64_t state_;
};

// Server-held parameterized model: returns (expected bit, reliability
// confidence) for any in-range challenge. Immutable after enrollment except
// for the detection-update overlay, which flips stored bits challenge-wise.
class SimPuf {
public:
    enum class Kind : uint8_t { ropuf_table = 1, lapuf_model = 2, conf_table = 3 };

    SimPuf() = default;
    SimPuf(Kind kind, uint32_t k, std::string condition, std::vector<double> values,
           bool fitted = false);

    // Enrollment from measured or synthesized populations (one-time privileged
    // access on the real device; here, from the dataset).
    static SimPuf enroll_ropuf(const RoDataset& ds, const std::string& condition, uint32_t k = 0);
    static SimPuf enroll_ksum(const RoDataset& ds, const std::string& condition, uint32_t k);
    static SimPuf enroll_conf(const ConfidencePopulation& pop, uint32_t k,
                              const std::string& condition = "enroll");

    Kind kind() const { return kind_; }
    uint32_t k() const { return k_; }
    const std::string& condition() const { return condition_; }
    const std::vector<double>& values() const { return values_; }
    bool fitted() const { return fitted_; }
    // Intercept of a fitted lapuf_model; exactly 0 for enrolled models.
    double bias() const { return bias_; }
    void set_bias(double b) { bias_ = b; }
    uint32_t stages() const;     // lapuf_model only
    uint64_t crp_space() const;  // number of addressable challenges

    QueryResult query(const Challenge& ch) const;
    std::pair<ResponseBits, std::vector<double>> query_vector(std::span<const Challenge> chs) const;

    // Fixed challenge list used by architecture-A provers: independent RO
    // pairs / identity bit indices. Not available for lapuf_model.
    std::vector<Challenge> fixed_challenges(uint32_t k) const;
    // Architecture-B seed expansion; indices are reduced modulo the CRP space
    // for table kinds.
    std::vector<Challenge> expand_challenges(ChallengeSeed seed, uint32_t k) const;

    // Detection-update repair: flips the stored bit and negates the stored
    // confidence sign for this challenge from now on.
    void apply_flip(const Challenge& ch);
    size_t flip_count() const { return flips_.size(); }

    // SIMPUF store file: magic SIMPUF01, kind byte, k u32 BE, label (u16 BE
    // length + UTF-8), payload doubles as IEEE-754 u64 BE in index order.
    void save(std::ostream& out) const;
    static SimPuf load(std::istream& in);

private:
    Bytes challenge_key(const Challenge& ch) const;

    Kind kind_ = Kind::conf_table;
    uint32_t k_ = 0;
    std::string condition_;
    std::vector<double> values_;
    bool fitted_ = false;
    std::map<Bytes, bool> flips_;
};

// The physical device: ground-truth parameters plus per-condition measurement
// noise. Every evaluation draws fresh noise from the caller's stream.
class PhysicalPuf {
public:
    PhysicalPuf(SimPuf truth, std::map<std::string, NoiseSpec> noise)
        : truth_(std::move(truth)), noise_(std::move(noise)) {}

    const SimPuf& truth() const { return truth_; }
    const NoiseSpec& noise_for(const std::string& condition) const;

    // Aging/fault injection: permanently flips the device's true response.
    void age_flip(const Challenge& ch) { truth_.apply_flip(ch); }

private:
    SimPuf truth_;
    std::map<std::string, NoiseSpec> noise_;
};

// Noisy regeneration: returns 1 iff true_conf + noise < 0.
int physical_evaluate(const PhysicalPuf& puf, const Challenge& ch, const std::string& condition,
                      Rng& rng);
ResponseBits physical_evaluate_vector(const PhysicalPuf& puf, std::span<const Challenge> chs,
                                      const std::string& condition, Rng& rng);

// ---- LAPUF model fitting -------------------------------------------------

struct LapufFitReport {
    SimPuf model;           // lapuf_model, fitted flag set, arbitrary scale
    uint32_t epochs = 0;
    double train_accuracy = 0.0;
    double final_loss = 0.0;
};

// Logistic-loss gradient descent over features phi_i(c) = (-1)^{c_i}.
// Labels must come from k-sum style CRPs. Throws FitError when degenerate or
// when the epoch cap passes without meeting a convergence criterion.
LapufFitReport fit_lapuf_model(std::span<const std::pair<KSumBits, int>> training,
                               uint32_t stages);

enum class CrpMode { independent, all_pairs };

uint64_t ropuf_crp_count(uint32_t n_ros, CrpMode mode);

}  // namespace puftrial
