#include "puftrial/stats.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "puftrial/protocol.hpp"

namespace puftrial::stats {

double brute_force_prob(uint32_t k, double tau) {
    if (tau < 0.0 || tau > 1.0) throw ValidationError("tau must be in [0, 1]");
    return std::pow(std::max(tau, 1.0 - tau), double(k));
}

double far(uint32_t k, uint32_t m, double tau) {
    if (m > k) throw ValidationError("m must satisfy m <= k");
    return brute_force_prob(k - m, tau);
}

double far_d(double far_value, uint32_t d) { return double(d) * far_value; }
double far_mr(double far_value, uint32_t M) { return double(M) * far_value; }
double far_md(double far_value, uint32_t M, uint32_t d) { return double(M) * double(d) * far_value; }

double frr_d(double frr_value, uint32_t d) { return std::pow(frr_value, double(d)); }

double frr_mr(std::span<const double> frr_refs) {
    double p = 1.0;
    for (double f : frr_refs) p *= f;
    return p;
}

double frr_md(std::span<const double> frr_refs, uint32_t d) {
    return std::pow(frr_mr(frr_refs), double(d));
}

double cdf_pe(double x, double lambda1, double lambda2) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return normal_cdf(lambda1 * normal_quantile(x) + lambda2);
}

double cdf_perr(double x, double lambda1, double lambda2) {
    if (x <= 0.0) return 0.0;
    if (x >= 0.5) return 1.0;  // error probabilities live in [0, 0.5]
    return cdf_pe(x, lambda1, lambda2) + 1.0 - cdf_pe(1.0 - x, lambda1, lambda2);
}

double invert_cdf_perr(double u, double lambda1, double lambda2) {
    double lo = 0.0, hi = 0.5;
    for (int it = 0; it < 200 && (hi - lo) > 1e-12; ++it) {
        double mid = 0.5 * (lo + hi);
        if (cdf_perr(mid, lambda1, lambda2) < u)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<double> sample_perr(uint32_t k, double lambda1, double lambda2, Rng& rng) {
    if (!(lambda1 > 0.0)) throw ValidationError("sample_perr requires lambda1 > 0");
    std::vector<double> out(k);
    for (auto& p : out) p = invert_cdf_perr(rng.uniform01(), lambda1, lambda2);
    return out;
}

double poisson_binomial_cdf(uint32_t t, std::span<const double> probs) {
    for (double p : probs)
        if (p < 0.0 || p > 1.0) throw ValidationError("probabilities must be in [0, 1]");
    if (t >= probs.size()) return 1.0;
    // dist[j] = Pr(#errors = j), truncated at t+1 entries.
    std::vector<double> dist(size_t(t) + 1, 0.0);
    dist[0] = 1.0;
    size_t top = 0;
    for (double p : probs) {
        size_t new_top = std::min(top + 1, size_t(t));
        for (size_t j = new_top; j > 0; --j) dist[j] = dist[j] * (1.0 - p) + dist[j - 1] * p;
        dist[0] *= (1.0 - p);
        top = new_top;
    }
    double cdf = 0.0;
    for (double v : dist) cdf += v;
    return std::min(cdf, 1.0);
}

std::vector<double> frr_statistical_sweep(uint32_t k, std::span<const uint32_t> ms, double lambda1,
                                          double lambda2, uint32_t n_samples, Rng& rng) {
    for (uint32_t m : ms)
        if (m > k) throw ValidationError("m must satisfy m <= k");
    if (n_samples == 0) throw ValidationError("n_samples must be >= 1");

    std::vector<double> acc(ms.size(), 0.0);
    for (uint32_t s = 0; s < n_samples; ++s) {
        std::vector<double> p = sample_perr(k, lambda1, lambda2, rng);
        std::sort(p.begin(), p.end(), std::greater<>());  // descending, drop the first m
        for (size_t mi = 0; mi < ms.size(); ++mi) {
            std::span<const double> rest(p.data() + ms[mi], k - ms[mi]);
            acc[mi] += 1.0 - poisson_binomial_cdf(0, rest);
        }
    }
    for (auto& a : acc) a /= double(n_samples);
    return acc;
}

double frr_statistical(uint32_t k, uint32_t m, double lambda1, double lambda2, uint32_t n_samples,
                       Rng& rng) {
    uint32_t ms[1] = {m};
    return frr_statistical_sweep(k, ms, lambda1, lambda2, n_samples, rng)[0];
}

double server_latency_s(double n_worst, uint32_t k, const LatencyModel& model) {
    if (!(model.hash_speed_bytes_per_s > 0) || !(model.n_gpu_cores > 0) || !(model.n_cpu_cores > 0))
        throw ValidationError("latency model parameters must be positive");
    return n_worst * double(k) * (1.0 / 8.0) / model.hash_speed_bytes_per_s / model.n_gpu_cores /
           model.n_cpu_cores;
}

BchFailure bch_failure_rate(const BchCode& code, double ber) {
    if (code.t1 >= code.n1 || code.k1 > code.n1 || code.blocks < 1)
        throw ValidationError("invalid BCH code parameters");
    if (ber < 0.0 || ber > 1.0) throw ValidationError("BER must be in [0, 1]");

    BchFailure out;
    if (ber == 0.0) return out;
    if (ber == 1.0) {
        out.p1 = 1.0;
        out.p_fail = 1.0;
        return out;
    }
    // P1 = Pr(X > t1), X ~ Binomial(n1, ber); summed as exp(log term) so the
    // 1e-7-scale appendix values keep full precision.
    const double lp = std::log(ber), lq = std::log1p(-ber);
    const double lgn = std::lgamma(double(code.n1) + 1.0);
    double tail = 0.0;
    for (uint32_t i = code.t1 + 1; i <= code.n1; ++i) {
        double lc = lgn - std::lgamma(double(i) + 1.0) - std::lgamma(double(code.n1 - i) + 1.0);
        tail += std::exp(lc + double(i) * lp + double(code.n1 - i) * lq);
    }
    out.p1 = std::min(tail, 1.0);
    out.p_fail = 1.0 - std::pow(1.0 - out.p1, double(code.blocks));
    return out;
}

double frr_empirical(const ConfidencePopulation& pop, const EmpiricalFrrSpec& spec, uint64_t seed) {
    if (spec.sessions == 0) throw ValidationError("sessions must be >= 1");
    const NoiseSpec& ns = pop.noise(spec.condition);

    SimPuf ref = SimPuf::enroll_conf(pop, spec.k);
    PhysicalPuf device_puf(ref, {{spec.condition, ns}});

    TrialConfig cfg;
    cfg.k = spec.k;
    cfg.m = spec.m;
    cfg.d = spec.d;
    cfg.M = 1;

    auto run_block = [&](uint64_t begin, uint64_t end) {
        uint64_t rejected = 0;
        for (uint64_t s = begin; s < end; ++s) {
            Server server({&ref}, cfg, Rng::mix(seed ^ (s * 0x9e3779b97f4a7c15ull + 1)));
            ProverDevice dev =
                ProverDevice::make_b(device_puf, spec.condition, spec.k, cfg.hash, Rng::mix(seed + s));
            dev.nonce_gen = NonceGen(seed, s * 64);
            Transport t;
            if (!run_unilateral(server, dev, t).outcome.ok()) ++rejected;
        }
        return rejected;
    };

    uint64_t rejected = 0;
    if (spec.jobs <= 1) {
        rejected = run_block(0, spec.sessions);
    } else {
        std::vector<std::thread> pool;
        std::vector<uint64_t> partial(spec.jobs, 0);
        uint64_t per = (spec.sessions + spec.jobs - 1) / spec.jobs;
        for (uint32_t j = 0; j < spec.jobs; ++j) {
            uint64_t b = j * per, e = std::min<uint64_t>(spec.sessions, b + per);
            if (b >= e) break;
            pool.emplace_back([&, j, b, e] { partial[j] = run_block(b, e); });
        }
        for (auto& th : pool) th.join();
        for (uint64_t p : partial) rejected += p;
    }
    return double(rejected) / double(spec.sessions);
}

}  // namespace puftrial::stats
