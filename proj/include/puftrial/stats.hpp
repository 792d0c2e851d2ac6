#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "puftrial/dataset.hpp"
#include "puftrial/normal.hpp"
#include "puftrial/rng.hpp"

namespace puftrial::stats {

// ---- closed forms -------------------------------------------------------

// Probability of guessing a k-bit response outright: (max{tau, 1-tau})^k.
double brute_force_prob(uint32_t k, double tau);

// FAR = (max{tau, 1-tau})^(k-m) and its augmentation family.
double far(uint32_t k, uint32_t m, double tau);
double far_d(double far_value, uint32_t d);
double far_mr(double far_value, uint32_t M);
double far_md(double far_value, uint32_t M, uint32_t d);

double frr_d(double frr_value, uint32_t d);
double frr_mr(std::span<const double> frr_refs);
double frr_md(std::span<const double> frr_refs, uint32_t d);

// ---- reliability distribution machinery ----------------------------------

// CDF of the one-probability: Phi(lambda1 * Phi^-1(x) + lambda2).
double cdf_pe(double x, double lambda1, double lambda2);

// CDF of the bit error probability for x in [0, 0.5]:
// cdf_pe(x) + 1 - cdf_pe(1-x). Exactly 1 at x >= 0.5.
double cdf_perr(double x, double lambda1, double lambda2);

// Inverse-transform draw of k error probabilities; bisection on [0, 0.5] to
// 1e-12 absolute tolerance.
std::vector<double> sample_perr(uint32_t k, double lambda1, double lambda2, Rng& rng);
double invert_cdf_perr(double u, double lambda1, double lambda2);

// Pr(#errors <= t) by exact dynamic-programming convolution.
double poisson_binomial_cdf(uint32_t t, std::span<const double> probs);

// Statistical FRR: mean over n_samples of 1 - F_PB(0) on the k-m smallest of
// k sampled error probabilities. The sweep variant reuses one sample set
// across all m values (common random numbers).
double frr_statistical(uint32_t k, uint32_t m, double lambda1, double lambda2,
                       uint32_t n_samples, Rng& rng);
std::vector<double> frr_statistical_sweep(uint32_t k, std::span<const uint32_t> ms, double lambda1,
                                          double lambda2, uint32_t n_samples, Rng& rng);

// ---- server latency / BCH comparison --------------------------------------

struct LatencyModel {
    double hash_speed_bytes_per_s = 648.0 * 1024 * 1024;  // blake2s on one CPU core
    double n_gpu_cores = 1920;
    double n_cpu_cores = 1;
};

double server_latency_s(double n_worst, uint32_t k, const LatencyModel& model);

struct BchCode {
    uint32_t n1 = 0;  // codeword length
    uint32_t k1 = 0;  // code size
    uint32_t t1 = 0;  // correctable errors
    uint32_t blocks = 1;
};

struct BchFailure {
    double p1 = 0.0;    // per-block failure rate
    double p_fail = 0.0;  // across all blocks
};

// Binomial tails summed from log-space terms (values reach 1e-7 and below).
BchFailure bch_failure_rate(const BchCode& code, double ber);

// ---- empirical FRR ---------------------------------------------------------

struct EmpiricalFrrSpec {
    uint32_t k = 64;
    uint32_t m = 12;
    uint32_t d = 1;
    std::string condition;     // device operating condition
    uint64_t sessions = 10000;
    uint32_t jobs = 1;
};

// Fraction of honest full-protocol sessions (architecture B, fresh challenge
// seeds per session) rejected for a device drawn from the population.
double frr_empirical(const ConfidencePopulation& pop, const EmpiricalFrrSpec& spec, uint64_t seed);

}  // namespace puftrial::stats
