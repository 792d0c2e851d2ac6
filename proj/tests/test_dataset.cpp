#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "puftrial/dataset.hpp"
#include "puftrial/normal.hpp"

using namespace puftrial;

namespace {

RoSynthSpec two_condition_spec() {
    RoSynthSpec spec;
    spec.n_ros = 4;
    spec.f0_mhz = 100.0;
    spec.sigma_process_mhz = 0.5;
    spec.repeats = 3;
    spec.conditions = {
        {{1.20, 25.0, "nom"}, 0.0, 0.0},
        {{0.96, 25.0, "low"}, -0.4, 0.2},
    };
    return spec;
}

// Quadrature oracle for the population mean bit error rate:
// E[Phi(-|c|/sigma)] with c ~ N(mu, 1), Simpson rule on [-12, 12].
double epsilon_quadrature(double mu, double sigma_intra) {
    const int n = 20000;
    const double a = mu - 12.0, b = mu + 12.0, h = (b - a) / n;
    auto f = [&](double c) {
        double pdf = std::exp(-0.5 * (c - mu) * (c - mu)) / std::sqrt(2.0 * M_PI);
        return stats::normal_cdf(-std::abs(c) / sigma_intra) * pdf;
    };
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

}  // namespace

TEST_CASE("csv round trip is bit exact") {
    RoDataset ds = synthesize_ro_dataset(two_condition_spec(), 7);
    std::ostringstream out;
    emit_ro_dataset(ds, out);
    std::istringstream in(out.str());
    RoDataset back = ingest_ro_dataset(in);
    CHECK(back == ds);

    std::ostringstream out2;
    emit_ro_dataset(back, out2);
    CHECK(out2.str() == out.str());
}

TEST_CASE("hand-written file ingests with expected shape") {
    std::string csv =
        "condition,voltage_v,temperature_c,ro_index,repeat_index,freq_mhz\n";
    for (const char* cond : {"a", "b"})
        for (int ro = 0; ro < 4; ++ro)
            for (int rep = 0; rep < 3; ++rep)
                csv += std::string(cond) + (cond[0] == 'a' ? ",1.2,25," : ",0.96,25,") +
                       std::to_string(ro) + "," + std::to_string(rep) + "," +
                       std::to_string(100 + ro) + ".5\n";
    std::istringstream in(csv);
    RoDataset ds = ingest_ro_dataset(in);
    CHECK(ds.n_ros() == 4);
    CHECK(ds.repeats() == 3);
    CHECK(ds.conditions().size() == 2);
}

TEST_CASE("ingest errors carry location or key") {
    std::string header = "condition,voltage_v,temperature_c,ro_index,repeat_index,freq_mhz\n";
    SUBCASE("bad header") {
        std::istringstream in("cond,v,t,ro,rep,f\n");
        CHECK_THROWS_WITH_AS(ingest_ro_dataset(in), doctest::Contains("line 1"), ParseError);
    }
    SUBCASE("malformed row reports line number") {
        std::istringstream in(header + "a,1.2,25,0,0,100\na,1.2,25,zero,1,100\n");
        CHECK_THROWS_WITH_AS(ingest_ro_dataset(in), doctest::Contains("line 3"), ParseError);
    }
    SUBCASE("duplicate cell names the key") {
        std::istringstream in(header + "a,1.2,25,0,0,100\na,1.2,25,1,0,100\na,1.2,25,0,0,101\n");
        CHECK_THROWS_WITH_AS(ingest_ro_dataset(in), doctest::Contains("(a, ro 0, repeat 0)"),
                             ValidationError);
    }
    SUBCASE("missing cell is a completeness error") {
        std::istringstream in(header + "a,1.2,25,0,0,100\na,1.2,25,1,1,100\n");
        CHECK_THROWS_AS(ingest_ro_dataset(in), ValidationError);
    }
    SUBCASE("non-positive frequency rejected") {
        std::istringstream in(header + "a,1.2,25,0,0,-3\n");
        CHECK_THROWS_AS(ingest_ro_dataset(in), ValidationError);
    }
}

TEST_CASE("synthesis determinism and degenerate noise") {
    RoSynthSpec spec = two_condition_spec();
    RoDataset a = synthesize_ro_dataset(spec, 42);
    RoDataset b = synthesize_ro_dataset(spec, 42);
    CHECK(a == b);
    RoDataset c = synthesize_ro_dataset(spec, 43);
    CHECK(a != c);

    spec.sigma_process_mhz = 0.0;
    spec.conditions[0].sigma_noise_mhz = 0.0;
    spec.conditions[1].sigma_noise_mhz = 0.0;
    RoDataset flat = synthesize_ro_dataset(spec, 1);
    for (uint32_t ro = 0; ro < flat.n_ros(); ++ro)
        for (uint32_t rep = 0; rep < flat.repeats(); ++rep) {
            CHECK(flat.freq(0, ro, rep) == doctest::Approx(100.0));
            CHECK(flat.freq(1, ro, rep) == doctest::Approx(99.6));
        }
}

TEST_CASE("synthesis rejects non-positive frequencies") {
    RoSynthSpec spec = two_condition_spec();
    spec.f0_mhz = 0.01;
    spec.sigma_process_mhz = 10.0;
    CHECK_THROWS_AS(synthesize_ro_dataset(spec, 3), ValidationError);
}

TEST_CASE("reliability extraction recovers generator parameters") {
    // sigma_process 1.556 puts the pairwise enrollment spread at
    // sqrt(2)*1.556 = 2.2; the stress corner carries the pairwise 0.8006.
    RoSynthSpec spec;
    spec.n_ros = 512;
    spec.f0_mhz = 200.0;
    spec.sigma_process_mhz = 1.556;
    spec.repeats = 1;
    spec.conditions = {
        {{1.20, 25.0, "nom"}, 0.0, 0.0},
        {{0.96, 25.0, "stress"}, -0.5, 0.8006},
    };
    RoDataset ds = synthesize_ro_dataset(spec, 20240);

    Rng rng(99);
    std::vector<RoPair> challenges = random_pairs(spec.n_ros, 6000, rng);
    ReliabilityParams p = extract_reliability_params(ds, "nom", "stress", challenges);

    CHECK(p.sigma_inter == doctest::Approx(2.2).epsilon(0.05));
    CHECK(p.sigma_intra == doctest::Approx(0.8006).epsilon(0.05));
    CHECK(p.lambda1 == doctest::Approx(0.8006 / 2.2).epsilon(0.05));
    CHECK(p.lambda1 == doctest::Approx(p.sigma_intra / p.sigma_inter));
    CHECK(p.lambda2 == doctest::Approx(p.mu_inter / p.sigma_inter));
    CHECK(p.threshold_t == 0.0);
}

TEST_CASE("extraction at the reference condition is exactly degenerate") {
    RoDataset ds = synthesize_ro_dataset(two_condition_spec(), 5);
    std::vector<RoPair> challenges = independent_pairs(4);
    ReliabilityParams p = extract_reliability_params(ds, "nom", "nom", challenges);
    CHECK(p.sigma_intra == 0.0);
    CHECK(p.mu_intra == 0.0);
    CHECK(p.lambda1 == 0.0);
}

TEST_CASE("extraction needs at least two challenges") {
    RoDataset ds = synthesize_ro_dataset(two_condition_spec(), 5);
    std::vector<RoPair> one = {{0, 1}};
    CHECK_THROWS_AS(extract_reliability_params(ds, "nom", "low", one), ValidationError);
}

TEST_CASE("lambda extraction is scale invariant") {
    ConfidencePopulation pop = synthesize_confidence_population(20000, -0.34, 1.7, 11);
    pop.conditions["dev"] = {0.0, 0.62};
    ReliabilityParams p1 = extract_reliability_params(pop, "dev");

    ConfidencePopulation scaled = pop;
    for (auto& c : scaled.enroll_conf) c *= 37.5;
    scaled.conditions["dev"].sigma_intra *= 37.5;
    ReliabilityParams p2 = extract_reliability_params(scaled, "dev");

    CHECK(p2.lambda1 == doctest::Approx(p1.lambda1).epsilon(1e-12));
    CHECK(p2.lambda2 == doctest::Approx(p1.lambda2).epsilon(1e-12));
    CHECK(p2.bias_tau == p1.bias_tau);
}

TEST_CASE("population synthesis moments and bias") {
    const uint64_t n = 100000;
    ConfidencePopulation pop = synthesize_confidence_population(n, 0.0, 1.0, 77);
    double mean = 0, var = 0;
    for (double c : pop.enroll_conf) mean += c;
    mean /= double(n);
    for (double c : pop.enroll_conf) var += (c - mean) * (c - mean);
    double sd = std::sqrt(var / double(n - 1));
    CHECK(std::abs(mean) < 0.02);
    CHECK(sd == doctest::Approx(1.0).epsilon(0.02));

    // mu_inter = -0.3477 skews the sign split so the minority bit lands at
    // Phi(-0.3477) = 0.364, the worst-corner bias magnitude. With the fixed
    // polarity (1 iff conf < 0) the minority bit is 0; every downstream
    // formula is symmetric in the sign of lambda2.
    ConfidencePopulation biased = synthesize_confidence_population(n, -0.3477, 1.0, 78);
    size_t ones = 0;
    for (double c : biased.enroll_conf) ones += (c < 0.0);
    double tau = double(ones) / double(n);
    CHECK(std::min(tau, 1.0 - tau) == doctest::Approx(0.36403).epsilon(0.02));

    ConfidencePopulation again = synthesize_confidence_population(n, -0.3477, 1.0, 78);
    CHECK(again.enroll_conf == biased.enroll_conf);

    CHECK_THROWS_AS(synthesize_confidence_population(0, 0.0, 1.0, 1), ValidationError);
}

TEST_CASE("extracted moments converge to generator parameters") {
    const uint64_t n = 100000;
    ConfidencePopulation pop = synthesize_confidence_population(n, 1.0, 1.0, 31);
    pop.conditions["dev"] = {0.0, 0.25};
    ReliabilityParams p = extract_reliability_params(pop, "dev");
    const double bound = 3.0 / std::sqrt(double(n));
    CHECK(std::abs(p.mu_inter - 1.0) < bound);
    CHECK(std::abs(p.sigma_inter - 1.0) / 1.0 < bound);
}

TEST_CASE("bit error rate: zero noise and saturated confidences") {
    RoSynthSpec spec = two_condition_spec();
    spec.conditions[1].sigma_noise_mhz = 0.0;
    RoDataset ds = synthesize_ro_dataset(spec, 8);
    std::vector<RoPair> challenges = independent_pairs(4);
    CHECK(bit_error_rate(ds, "nom", "nom", challenges) == 0.0);

    ConfidencePopulation pop;
    pop.enroll_conf = {50.0, -50.0, 60.0, -70.0};
    pop.conditions["dev"] = {0.0, 0.5};
    Rng rng(5);
    CHECK(bit_error_rate(pop, "dev", 20000, rng) == 0.0);
}

TEST_CASE("bit error rate matches the reliability model") {
    // lambda1 = 0.3672, lambda2 = -0.3477 in sigma_inter = 1 units; the
    // quadrature oracle pins the model value and the tabulated 9.66% BER of
    // the worst voltage corner sits within a percentage point of it.
    const double l1 = 0.3672, l2 = -0.3477;
    double expected = epsilon_quadrature(l2, l1);
    ConfidencePopulation pop = synthesize_confidence_population(200000, l2, 1.0, 404);
    pop.conditions["stress"] = {0.0, l1};
    Rng rng(405);
    double eps = bit_error_rate(pop, "stress", 5000000, rng);
    CHECK(eps == doctest::Approx(expected).epsilon(0.01));
    CHECK(std::abs(eps - 0.0966) < 0.01);
}
