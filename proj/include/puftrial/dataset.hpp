#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "puftrial/common.hpp"
#include "puftrial/rng.hpp"

namespace puftrial {

struct OperatingCondition {
    double voltage_v = 0.0;
    double temperature_c = 0.0;
    std::string label;
    friend bool operator==(const OperatingCondition&, const OperatingCondition&) = default;
};

// Pair of RO indices, i < j. Enrollment confidence of the pair is freq[i] - freq[j].
struct RoPair {
    uint32_t i = 0;
    uint32_t j = 0;
    friend bool operator==(const RoPair&, const RoPair&) = default;
};

// Repeated ring-oscillator frequency measurements per operating condition.
// freq is indexed (condition, ro, repeat); every cell must be present and > 0.
class RoDataset {
public:
    RoDataset() = default;
    RoDataset(std::vector<OperatingCondition> conditions, uint32_t n_ros, uint32_t repeats);

    uint32_t n_ros() const { return n_ros_; }
    uint32_t repeats() const { return repeats_; }
    const std::vector<OperatingCondition>& conditions() const { return conditions_; }
    size_t condition_index(const std::string& label) const;  // throws if absent

    double freq(size_t cond, uint32_t ro, uint32_t rep) const {
        return freq_[(cond * n_ros_ + ro) * repeats_ + rep];
    }
    void set_freq(size_t cond, uint32_t ro, uint32_t rep, double mhz) {
        freq_[(cond * n_ros_ + ro) * repeats_ + rep] = mhz;
    }
    // Mean over repeats; the enrollment read of one RO at one condition.
    double mean_freq(size_t cond, uint32_t ro) const;

    friend bool operator==(const RoDataset&, const RoDataset&) = default;

private:
    std::vector<OperatingCondition> conditions_;
    uint32_t n_ros_ = 0;
    uint32_t repeats_ = 0;
    std::vector<double> freq_;
};

struct NoiseSpec {
    double mu_intra = 0.0;
    double sigma_intra = 0.0;
};

// Abstract confidence-level PUF population: one enrollment confidence per bit
// plus a per-condition regeneration noise model.
struct ConfidencePopulation {
    std::vector<double> enroll_conf;
    std::map<std::string, NoiseSpec> conditions;

    uint64_t n_bits() const { return enroll_conf.size(); }
    const NoiseSpec& noise(const std::string& condition) const;
};

// Reliability-model parameters in confidence units; lambda1/lambda2 are kept
// consistent with the sigma/mu fields by construction.
struct ReliabilityParams {
    double mu_inter = 0.0;
    double sigma_inter = 0.0;
    double mu_intra = 0.0;
    double sigma_intra = 0.0;
    double lambda1 = 0.0;   // sigma_intra / sigma_inter
    double lambda2 = 0.0;   // mu_inter / sigma_inter
    double threshold_t = 0.0;
    double bias_tau = 0.0;  // fraction of enrolled bits equal to 1

    static ReliabilityParams from_moments(double mu_inter, double sigma_inter, double mu_intra,
                                          double sigma_intra, double bias_tau);
};

// ---- CSV ingest/emit --------------------------------------------------------
// Header row exactly: condition,voltage_v,temperature_c,ro_index,repeat_index,freq_mhz

RoDataset ingest_ro_dataset(std::istream& in);
void emit_ro_dataset(const RoDataset& ds, std::ostream& out);

// ---- synthesis ----------------------------------------------------------------

struct RoSynthCondition {
    OperatingCondition condition;
    double delta_shift_mhz = 0.0;
    double sigma_noise_mhz = 0.0;  // pairwise sigma_intra target; per-RO noise is this / sqrt(2)
};

struct RoSynthSpec {
    uint32_t n_ros = 0;
    double f0_mhz = 0.0;
    double sigma_process_mhz = 0.0;
    uint32_t repeats = 1;
    std::vector<RoSynthCondition> conditions;
};

RoDataset synthesize_ro_dataset(const RoSynthSpec& spec, uint64_t seed);

ConfidencePopulation synthesize_confidence_population(uint64_t n_bits, double mu_inter,
                                                      double sigma_inter, uint64_t seed);

// ---- characterization ---------------------------------------------------------

// Enrollment confidence per challenge is the frequency subtraction of the pair,
// each frequency averaged over repeats. sigma/mu_intra come from the change in
// per-challenge confidence between dev and ref.
ReliabilityParams extract_reliability_params(const RoDataset& ds, const std::string& ref_condition,
                                             const std::string& dev_condition,
                                             std::span<const RoPair> challenges);

// Population variant: enrollment moments from the stored confidences on the
// given challenge subset (empty span = all bits); intra moments are the
// population's stored noise spec for dev_condition.
ReliabilityParams extract_reliability_params(const ConfidencePopulation& pop,
                                             const std::string& dev_condition,
                                             std::span<const uint64_t> bit_subset = {});

// Fraction of per-repeat regenerations at dev whose bit differs from the
// enrolled bit at ref.
double bit_error_rate(const RoDataset& ds, const std::string& ref_condition,
                      const std::string& dev_condition, std::span<const RoPair> challenges);

// Monte-Carlo regeneration over the population's noise model.
double bit_error_rate(const ConfidencePopulation& pop, const std::string& dev_condition,
                      uint64_t regenerations, Rng& rng);

// All-pairs or independent-pairs challenge lists over n ROs.
std::vector<RoPair> independent_pairs(uint32_t n_ros);
std::vector<RoPair> random_pairs(uint32_t n_ros, size_t count, Rng& rng);

}  // namespace puftrial
