#include "puftrial/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace puftrial {

RoDataset::RoDataset(std::vector<OperatingCondition> conditions, uint32_t n_ros, uint32_t repeats)
    : conditions_(std::move(conditions)), n_ros_(n_ros), repeats_(repeats) {
    if (n_ros_ < 2) throw ValidationError("dataset needs n_ros >= 2");
    if (repeats_ < 1) throw ValidationError("dataset needs repeats >= 1");
    std::set<std::string> labels;
    for (const auto& c : conditions_) {
        if (!(c.voltage_v > 0.0)) throw ValidationError("condition voltage must be > 0");
        if (!std::isfinite(c.temperature_c)) throw ValidationError("condition temperature must be finite");
        if (!labels.insert(c.label).second)
            throw ValidationError("duplicate condition label: " + c.label);
    }
    freq_.assign(size_t(conditions_.size()) * n_ros_ * repeats_, 0.0);
}

size_t RoDataset::condition_index(const std::string& label) const {
    for (size_t i = 0; i < conditions_.size(); ++i)
        if (conditions_[i].label == label) return i;
    throw ValidationError("unknown condition: " + label);
}

double RoDataset::mean_freq(size_t cond, uint32_t ro) const {
    double s = 0.0;
    for (uint32_t r = 0; r < repeats_; ++r) s += freq(cond, ro, r);
    return s / repeats_;
}

const NoiseSpec& ConfidencePopulation::noise(const std::string& condition) const {
    auto it = conditions.find(condition);
    if (it == conditions.end()) throw ValidationError("unknown condition: " + condition);
    return it->second;
}

ReliabilityParams ReliabilityParams::from_moments(double mu_inter, double sigma_inter,
                                                  double mu_intra, double sigma_intra,
                                                  double bias_tau) {
    if (!(sigma_inter > 0.0)) throw ValidationError("sigma_inter must be > 0");
    if (sigma_intra < 0.0) throw ValidationError("sigma_intra must be >= 0");
    ReliabilityParams p;
    p.mu_inter = mu_inter;
    p.sigma_inter = sigma_inter;
    p.mu_intra = mu_intra;
    p.sigma_intra = sigma_intra;
    p.lambda1 = sigma_intra / sigma_inter;
    p.lambda2 = mu_inter / sigma_inter;
    p.threshold_t = 0.0;
    p.bias_tau = bias_tau;
    return p;
}

// ---- CSV --------------------------------------------------------------------

namespace {

constexpr const char* kCsvHeader = "condition,voltage_v,temperature_c,ro_index,repeat_index,freq_mhz";

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, size_t line_no, const char* what) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " value '" + s + "'");
    }
}

uint32_t parse_u32(const std::string& s, size_t line_no, const char* what) {
    try {
        size_t pos = 0;
        unsigned long v = std::stoul(s, &pos);
        if (pos != s.size() || v > 0xFFFFFFFFul) throw std::invalid_argument("range");
        return static_cast<uint32_t>(v);
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " value '" + s + "'");
    }
}

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

RoDataset ingest_ro_dataset(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw ParseError("line 1: bad header, expected '" + std::string(kCsvHeader) + "'");

    struct Cell {
        std::string cond;
        uint32_t ro, rep;
        double freq;
    };
    std::vector<Cell> cells;
    std::map<std::string, OperatingCondition> conds;
    std::vector<std::string> cond_order;
    uint32_t max_ro = 0, max_rep = 0;

    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = split_csv(line);
        if (f.size() != 6)
            throw ParseError("line " + std::to_string(line_no) + ": expected 6 fields, got " +
                             std::to_string(f.size()));
        Cell c;
        c.cond = f[0];
        double volt = parse_double(f[1], line_no, "voltage_v");
        double temp = parse_double(f[2], line_no, "temperature_c");
        c.ro = parse_u32(f[3], line_no, "ro_index");
        c.rep = parse_u32(f[4], line_no, "repeat_index");
        c.freq = parse_double(f[5], line_no, "freq_mhz");
        if (!(c.freq > 0.0))
            throw ValidationError("line " + std::to_string(line_no) + ": non-positive frequency");
        auto it = conds.find(c.cond);
        if (it == conds.end()) {
            conds[c.cond] = OperatingCondition{volt, temp, c.cond};
            cond_order.push_back(c.cond);
        } else if (it->second.voltage_v != volt || it->second.temperature_c != temp) {
            throw ValidationError("line " + std::to_string(line_no) +
                                  ": condition '" + c.cond + "' redefined with different voltage/temperature");
        }
        max_ro = std::max(max_ro, c.ro);
        max_rep = std::max(max_rep, c.rep);
        cells.push_back(std::move(c));
    }
    if (cells.empty()) throw ParseError("no data rows");

    std::vector<OperatingCondition> cond_list;
    for (const auto& label : cond_order) cond_list.push_back(conds[label]);
    RoDataset ds(cond_list, max_ro + 1, max_rep + 1);

    std::vector<uint8_t> seen(size_t(cond_list.size()) * ds.n_ros() * ds.repeats(), 0);
    for (const auto& c : cells) {
        size_t ci = ds.condition_index(c.cond);
        size_t idx = (ci * ds.n_ros() + c.ro) * ds.repeats() + c.rep;
        if (seen[idx])
            throw ValidationError("duplicate cell (" + c.cond + ", ro " + std::to_string(c.ro) +
                                  ", repeat " + std::to_string(c.rep) + ")");
        seen[idx] = 1;
        ds.set_freq(ci, c.ro, c.rep, c.freq);
    }
    for (size_t ci = 0; ci < cond_list.size(); ++ci)
        for (uint32_t ro = 0; ro < ds.n_ros(); ++ro)
            for (uint32_t rep = 0; rep < ds.repeats(); ++rep)
                if (!seen[(ci * ds.n_ros() + ro) * ds.repeats() + rep])
                    throw ValidationError("missing cell (" + cond_list[ci].label + ", ro " +
                                          std::to_string(ro) + ", repeat " + std::to_string(rep) + ")");
    return ds;
}

void emit_ro_dataset(const RoDataset& ds, std::ostream& out) {
    out << kCsvHeader << '\n';
    for (size_t ci = 0; ci < ds.conditions().size(); ++ci) {
        const auto& c = ds.conditions()[ci];
        for (uint32_t ro = 0; ro < ds.n_ros(); ++ro)
            for (uint32_t rep = 0; rep < ds.repeats(); ++rep)
                out << c.label << ',' << fmt_g17(c.voltage_v) << ',' << fmt_g17(c.temperature_c)
                    << ',' << ro << ',' << rep << ',' << fmt_g17(ds.freq(ci, ro, rep)) << '\n';
    }
}

// ---- synthesis ----------------------------------------------------------------

RoDataset synthesize_ro_dataset(const RoSynthSpec& spec, uint64_t seed) {
    if (spec.sigma_process_mhz < 0.0) throw ValidationError("sigma_process must be >= 0");
    for (const auto& c : spec.conditions)
        if (c.sigma_noise_mhz < 0.0) throw ValidationError("sigma_noise must be >= 0");
    std::vector<OperatingCondition> conds;
    for (const auto& c : spec.conditions) conds.push_back(c.condition);
    RoDataset ds(conds, spec.n_ros, spec.repeats);

    Rng rng(seed);
    std::vector<double> process(spec.n_ros);
    for (auto& f : process) f = rng.normal(spec.f0_mhz, spec.sigma_process_mhz);

    const double inv_sqrt2 = 0.70710678118654752440;
    for (size_t ci = 0; ci < spec.conditions.size(); ++ci) {
        const auto& c = spec.conditions[ci];
        double per_ro_sigma = c.sigma_noise_mhz * inv_sqrt2;
        for (uint32_t ro = 0; ro < spec.n_ros; ++ro)
            for (uint32_t rep = 0; rep < spec.repeats; ++rep) {
                double v = process[ro] + c.delta_shift_mhz + rng.normal(0.0, per_ro_sigma);
                if (!(v > 0.0))
                    throw ValidationError("sampled frequency <= 0; increase f0 relative to spreads");
                ds.set_freq(ci, ro, rep, v);
            }
    }
    return ds;
}

ConfidencePopulation synthesize_confidence_population(uint64_t n_bits, double mu_inter,
                                                      double sigma_inter, uint64_t seed) {
    if (n_bits == 0) throw ValidationError("empty population");
    if (!(sigma_inter > 0.0)) throw ValidationError("sigma_inter must be > 0");
    ConfidencePopulation pop;
    pop.enroll_conf.resize(n_bits);
    Rng rng(seed);
    for (auto& c : pop.enroll_conf) c = rng.normal(mu_inter, sigma_inter);
    return pop;
}

// ---- characterization ---------------------------------------------------------

namespace {

struct Moments {
    double mean = 0.0;
    double stdev = 0.0;  // sample standard deviation
};

Moments moments(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    double mean = s / double(xs.size());
    double v = 0.0;
    for (double x : xs) v += (x - mean) * (x - mean);
    double stdev = xs.size() > 1 ? std::sqrt(v / double(xs.size() - 1)) : 0.0;
    return {mean, stdev};
}

}  // namespace

ReliabilityParams extract_reliability_params(const RoDataset& ds, const std::string& ref_condition,
                                             const std::string& dev_condition,
                                             std::span<const RoPair> challenges) {
    if (challenges.size() < 2) throw ValidationError("need at least 2 challenges for statistics");
    size_t ref = ds.condition_index(ref_condition);
    size_t dev = ds.condition_index(dev_condition);

    std::vector<double> conf_ref(challenges.size()), diff(challenges.size());
    size_t ones = 0;
    for (size_t c = 0; c < challenges.size(); ++c) {
        const auto& ch = challenges[c];
        if (ch.i >= ds.n_ros() || ch.j >= ds.n_ros() || ch.i >= ch.j)
            throw ValidationError("challenge RO pair out of range");
        conf_ref[c] = ds.mean_freq(ref, ch.i) - ds.mean_freq(ref, ch.j);
        double conf_dev = ds.mean_freq(dev, ch.i) - ds.mean_freq(dev, ch.j);
        diff[c] = conf_dev - conf_ref[c];
        if (conf_ref[c] < 0.0) ++ones;
    }
    Moments inter = moments(conf_ref);
    Moments intra = moments(diff);
    if (!(inter.stdev > 0.0)) throw ValidationError("degenerate enrollment statistics (sigma_inter = 0)");
    return ReliabilityParams::from_moments(inter.mean, inter.stdev, intra.mean, intra.stdev,
                                           double(ones) / double(challenges.size()));
}

ReliabilityParams extract_reliability_params(const ConfidencePopulation& pop,
                                             const std::string& dev_condition,
                                             std::span<const uint64_t> bit_subset) {
    const NoiseSpec& ns = pop.noise(dev_condition);
    std::vector<double> confs;
    if (bit_subset.empty()) {
        confs.assign(pop.enroll_conf.begin(), pop.enroll_conf.end());
    } else {
        confs.reserve(bit_subset.size());
        for (uint64_t i : bit_subset) {
            if (i >= pop.n_bits()) throw ValidationError("bit index out of range");
            confs.push_back(pop.enroll_conf[i]);
        }
    }
    if (confs.size() < 2) throw ValidationError("need at least 2 challenges for statistics");
    Moments inter = moments(confs);
    if (!(inter.stdev > 0.0)) throw ValidationError("degenerate enrollment statistics (sigma_inter = 0)");
    size_t ones = 0;
    for (double c : confs)
        if (c < 0.0) ++ones;
    return ReliabilityParams::from_moments(inter.mean, inter.stdev, ns.mu_intra, ns.sigma_intra,
                                           double(ones) / double(confs.size()));
}

double bit_error_rate(const RoDataset& ds, const std::string& ref_condition,
                      const std::string& dev_condition, std::span<const RoPair> challenges) {
    if (challenges.size() < 2) throw ValidationError("need at least 2 challenges for statistics");
    size_t ref = ds.condition_index(ref_condition);
    size_t dev = ds.condition_index(dev_condition);
    uint64_t mismatches = 0, total = 0;
    for (const auto& ch : challenges) {
        double conf_ref = ds.mean_freq(ref, ch.i) - ds.mean_freq(ref, ch.j);
        int enrolled = conf_ref < 0.0 ? 1 : 0;
        for (uint32_t rep = 0; rep < ds.repeats(); ++rep) {
            double conf = ds.freq(dev, ch.i, rep) - ds.freq(dev, ch.j, rep);
            int bit = conf < 0.0 ? 1 : 0;
            mismatches += (bit != enrolled);
            ++total;
        }
    }
    return double(mismatches) / double(total);
}

double bit_error_rate(const ConfidencePopulation& pop, const std::string& dev_condition,
                      uint64_t regenerations, Rng& rng) {
    if (pop.n_bits() == 0) throw ValidationError("empty population");
    if (regenerations == 0) throw ValidationError("need at least one regeneration");
    const NoiseSpec& ns = pop.noise(dev_condition);
    uint64_t mismatches = 0;
    for (uint64_t t = 0; t < regenerations; ++t) {
        double conf = pop.enroll_conf[t % pop.n_bits()];
        int enrolled = conf < 0.0 ? 1 : 0;
        int bit = (conf + rng.normal(ns.mu_intra, ns.sigma_intra)) < 0.0 ? 1 : 0;
        mismatches += (bit != enrolled);
    }
    return double(mismatches) / double(regenerations);
}

std::vector<RoPair> independent_pairs(uint32_t n_ros) {
    std::vector<RoPair> out;
    out.reserve(n_ros / 2);
    for (uint32_t i = 0; i + 1 < n_ros; i += 2) out.push_back({i, i + 1});
    return out;
}

std::vector<RoPair> random_pairs(uint32_t n_ros, size_t count, Rng& rng) {
    if (n_ros < 2) throw ValidationError("need n_ros >= 2");
    std::vector<RoPair> out;
    out.reserve(count);
    for (size_t t = 0; t < count; ++t) {
        uint32_t a = static_cast<uint32_t>(rng.below(n_ros));
        uint32_t b = static_cast<uint32_t>(rng.below(n_ros - 1));
        if (b >= a) ++b;
        out.push_back({std::min(a, b), std::max(a, b)});
    }
    return out;
}

}  // namespace puftrial
