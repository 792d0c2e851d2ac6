#include "puftrial/puf.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

namespace puftrial {

Bytes ResponseBits::packed() const {
    Bytes out((bits.size() + 7) / 8, 0);
    for (size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) out[i / 8] |= uint8_t(0x80u >> (i % 8));
    return out;
}

SimPuf::SimPuf(Kind kind, uint32_t k, std::string condition, std::vector<double> values, bool fitted)
    : kind_(kind), k_(k), condition_(std::move(condition)), values_(std::move(values)), fitted_(fitted) {
    if (k_ == 0) throw ValidationError("response length k must be >= 1");
    if (values_.empty()) throw ValidationError("empty model payload");
    if (kind_ == Kind::lapuf_model && values_.size() > 64)
        throw ValidationError("k-sum models limited to 64 stages");
}

SimPuf SimPuf::enroll_ropuf(const RoDataset& ds, const std::string& condition, uint32_t k) {
    size_t ci = ds.condition_index(condition);
    uint32_t kmax = ds.n_ros() / 2;
    if (k == 0) k = kmax;
    if (k > kmax)
        throw ValidationError("requested k exceeds independent CRP count " + std::to_string(kmax));
    std::vector<double> means(ds.n_ros());
    for (uint32_t ro = 0; ro < ds.n_ros(); ++ro) means[ro] = ds.mean_freq(ci, ro);
    return SimPuf(Kind::ropuf_table, k, condition, std::move(means));
}

SimPuf SimPuf::enroll_ksum(const RoDataset& ds, const std::string& condition, uint32_t k) {
    if (ds.n_ros() % 2 != 0)
        throw ValidationError("k-sum enrollment needs an even RO count (2 per stage)");
    size_t ci = ds.condition_index(condition);
    uint32_t stages = ds.n_ros() / 2;
    // Stage i pairs ROs 2i (top for challenge bit 0) and 2i+1.
    std::vector<double> w(stages);
    for (uint32_t s = 0; s < stages; ++s)
        w[s] = ds.mean_freq(ci, 2 * s) - ds.mean_freq(ci, 2 * s + 1);
    return SimPuf(Kind::lapuf_model, k, condition, std::move(w));
}

SimPuf SimPuf::enroll_conf(const ConfidencePopulation& pop, uint32_t k, const std::string& condition) {
    if (k > pop.n_bits()) throw ValidationError("requested k exceeds population size");
    return SimPuf(Kind::conf_table, k, condition,
                  std::vector<double>(pop.enroll_conf.begin(), pop.enroll_conf.end()));
}

uint32_t SimPuf::stages() const {
    if (kind_ != Kind::lapuf_model) throw ValidationError("stages() only valid for k-sum models");
    return static_cast<uint32_t>(values_.size());
}

uint64_t SimPuf::crp_space() const {
    switch (kind_) {
        case Kind::ropuf_table: {
            uint64_t n = values_.size();
            return n * (n - 1) / 2;
        }
        case Kind::lapuf_model: {
            uint32_t s = static_cast<uint32_t>(values_.size());
            return s >= 64 ? ~0ull : (1ull << s);
        }
        case Kind::conf_table: return values_.size();
    }
    return 0;
}

Bytes SimPuf::challenge_key(const Challenge& ch) const {
    Bytes key;
    if (const auto* p = std::get_if<RoPair>(&ch)) {
        key.push_back(1);
        put_u32_be(key, p->i);
        put_u32_be(key, p->j);
    } else if (const auto* kb = std::get_if<KSumBits>(&ch)) {
        key.push_back(2);
        uint8_t acc = 0;
        int nb = 0;
        for (uint8_t b : kb->bits) {
            acc = uint8_t((acc << 1) | (b & 1));
            if (++nb == 8) {
                key.push_back(acc);
                acc = 0;
                nb = 0;
            }
        }
        if (nb) key.push_back(uint8_t(acc << (8 - nb)));
    } else {
        key.push_back(3);
        put_u64_be(key, std::get<BitIndex>(ch).index);
    }
    return key;
}

QueryResult SimPuf::query(const Challenge& ch) const {
    double conf = 0.0;
    switch (kind_) {
        case Kind::ropuf_table: {
            const auto* p = std::get_if<RoPair>(&ch);
            if (!p) throw ValidationError("ropuf_table expects RoPair challenges");
            if (p->i >= p->j || p->j >= values_.size())
                throw ValidationError("RO pair out of range");
            conf = values_[p->i] - values_[p->j];
            break;
        }
        case Kind::lapuf_model: {
            const auto* kb = std::get_if<KSumBits>(&ch);
            if (!kb) throw ValidationError("lapuf_model expects KSumBits challenges");
            if (kb->bits.size() != values_.size())
                throw ValidationError("challenge length does not match stage count");
            for (size_t s = 0; s < values_.size(); ++s)
                conf += kb->bits[s] ? -values_[s] : values_[s];
            break;
        }
        case Kind::conf_table: {
            const auto* bi = std::get_if<BitIndex>(&ch);
            if (!bi) throw ValidationError("conf_table expects BitIndex challenges");
            if (bi->index >= values_.size()) throw ValidationError("bit index out of range");
            conf = values_[bi->index];
            break;
        }
    }
    QueryResult r{conf < 0.0 ? 1 : 0, conf};
    if (!flips_.empty()) {
        auto it = flips_.find(challenge_key(ch));
        if (it != flips_.end() && it->second) {
            r.bit ^= 1;
            r.conf = -r.conf;
        }
    }
    return r;
}

std::pair<ResponseBits, std::vector<double>> SimPuf::query_vector(
    std::span<const Challenge> chs) const {
    ResponseBits e;
    std::vector<double> conf;
    e.bits.reserve(chs.size());
    conf.reserve(chs.size());
    for (const auto& ch : chs) {
        QueryResult q = query(ch);
        e.bits.push_back(static_cast<uint8_t>(q.bit));
        conf.push_back(q.conf);
    }
    return {std::move(e), std::move(conf)};
}

std::vector<Challenge> SimPuf::fixed_challenges(uint32_t k) const {
    std::vector<Challenge> out;
    out.reserve(k);
    switch (kind_) {
        case Kind::ropuf_table:
            if (k > values_.size() / 2)
                throw ValidationError("fixed list needs k <= n_ros/2 (each RO used once)");
            for (uint32_t i = 0; i < k; ++i) out.push_back(RoPair{2 * i, 2 * i + 1});
            break;
        case Kind::conf_table:
            if (k > values_.size()) throw ValidationError("fixed list needs k <= table size");
            for (uint32_t i = 0; i < k; ++i) out.push_back(BitIndex{i});
            break;
        case Kind::lapuf_model:
            throw ValidationError("k-sum models have no fixed challenge list; use seed expansion");
    }
    return out;
}

namespace {

// Unrank idx in [0, C(n,2)) to the idx-th pair in lexicographic order.
RoPair unrank_pair(uint64_t idx, uint64_t n) {
    for (uint64_t i = 0; i + 1 < n; ++i) {
        uint64_t row = n - 1 - i;
        if (idx < row) return {static_cast<uint32_t>(i), static_cast<uint32_t>(i + 1 + idx)};
        idx -= row;
    }
    throw ValidationError("pair index out of range");
}

}  // namespace

std::vector<Challenge> SimPuf::expand_challenges(ChallengeSeed seed, uint32_t k) const {
    if (k == 0) throw ValidationError("k must be >= 1");
    Lfsr64 lfsr(seed);
    std::vector<Challenge> out;
    out.reserve(k);
    for (uint32_t t = 0; t < k; ++t) {
        uint64_t word = lfsr.next();
        switch (kind_) {
            case Kind::ropuf_table:
                out.push_back(unrank_pair(word % crp_space(), values_.size()));
                break;
            case Kind::conf_table:
                out.push_back(BitIndex{word % values_.size()});
                break;
            case Kind::lapuf_model: {
                KSumBits kb;
                kb.bits.resize(values_.size());
                for (size_t s = 0; s < kb.bits.size(); ++s) kb.bits[s] = (word >> s) & 1u;
                out.push_back(std::move(kb));
                break;
            }
        }
    }
    return out;
}

void SimPuf::apply_flip(const Challenge& ch) {
    query(ch);  // validates range/kind
    Bytes key = challenge_key(ch);
    auto it = flips_.find(key);
    if (it == flips_.end())
        flips_[key] = true;
    else
        it->second = !it->second;
}

void SimPuf::save(std::ostream& out) const {
    Bytes buf;
    const char magic[] = "SIMPUF01";
    buf.insert(buf.end(), magic, magic + 8);
    buf.push_back(static_cast<uint8_t>(kind_));
    put_u32_be(buf, k_);
    if (condition_.size() > 0xFFFF) throw ValidationError("condition label too long");
    put_u16_be(buf, static_cast<uint16_t>(condition_.size()));
    buf.insert(buf.end(), condition_.begin(), condition_.end());
    for (double v : values_) put_f64_be(buf, v);
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
    if (!out) throw IoError("failed writing SimPUF store");
}

SimPuf SimPuf::load(std::istream& in) {
    Bytes buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 15) throw ParseError("SimPUF store truncated");
    if (std::memcmp(buf.data(), "SIMPUF01", 8) != 0) throw ParseError("bad SimPUF store magic");
    uint8_t kind_tag = buf[8];
    if (kind_tag < 1 || kind_tag > 3) throw ParseError("bad SimPUF kind tag");
    uint32_t k = get_u32_be(buf.data() + 9);
    uint16_t label_len = get_u16_be(buf.data() + 13);
    size_t off = 15;
    if (buf.size() < off + label_len) throw ParseError("SimPUF store truncated in label");
    std::string label(reinterpret_cast<const char*>(buf.data() + off), label_len);
    off += label_len;
    if ((buf.size() - off) % 8 != 0) throw ParseError("SimPUF payload not a multiple of 8 bytes");
    std::vector<double> values;
    values.reserve((buf.size() - off) / 8);
    for (; off < buf.size(); off += 8) values.push_back(get_f64_be(buf.data() + off));
    return SimPuf(static_cast<Kind>(kind_tag), k, std::move(label), std::move(values));
}

const NoiseSpec& PhysicalPuf::noise_for(const std::string& condition) const {
    auto it = noise_.find(condition);
    if (it == noise_.end()) throw ValidationError("device has no noise spec for condition: " + condition);
    return it->second;
}

int physical_evaluate(const PhysicalPuf& puf, const Challenge& ch, const std::string& condition,
                      Rng& rng) {
    const NoiseSpec& ns = puf.noise_for(condition);
    double conf = puf.truth().query(ch).conf;
    double n = rng.normal(ns.mu_intra, ns.sigma_intra);
    return (conf + n) < 0.0 ? 1 : 0;
}

ResponseBits physical_evaluate_vector(const PhysicalPuf& puf, std::span<const Challenge> chs,
                                      const std::string& condition, Rng& rng) {
    if (chs.empty()) throw ValidationError("k must be >= 1");
    ResponseBits e;
    e.bits.reserve(chs.size());
    for (const auto& ch : chs)
        e.bits.push_back(static_cast<uint8_t>(physical_evaluate(puf, ch, condition, rng)));
    return e;
}

LapufFitReport fit_lapuf_model(std::span<const std::pair<KSumBits, int>> training, uint32_t stages) {
    if (training.size() < 2) throw FitError("degenerate training set (need >= 2 CRPs)");
    if (stages == 0 || stages > 64) throw ValidationError("stages must be in [1, 64]");

    const size_t n = training.size();
    // Feature matrix, phi = +1 for challenge bit 0, -1 for bit 1.
    std::vector<double> x(n * stages);
    std::vector<double> y(n);
    for (size_t i = 0; i < n; ++i) {
        if (training[i].first.bits.size() != stages)
            throw ValidationError("training challenge length mismatch");
        for (uint32_t s = 0; s < stages; ++s)
            x[i * stages + s] = training[i].first.bits[s] ? -1.0 : 1.0;
        y[i] = training[i].second ? 1.0 : 0.0;
    }

    const double lr = 0.1;
    const uint32_t max_epochs = 5000;
    std::vector<double> w(stages, 0.0), grad(stages), score(n);
    double prev_loss = 1e300;

    auto pass = [&](bool update) {
        double loss = 0.0;
        size_t correct = 0;
        std::fill(grad.begin(), grad.end(), 0.0);
        for (size_t i = 0; i < n; ++i) {
            const double* xi = &x[i * stages];
            double s = 0.0;
            for (uint32_t d = 0; d < stages; ++d) s += w[d] * xi[d];
            score[i] = s;
            // predicted bit = 1 iff the modeled confidence is negative
            double p1 = 1.0 / (1.0 + std::exp(s));
            int pred = s < 0.0 ? 1 : 0;
            correct += (pred == (y[i] > 0.5 ? 1 : 0));
            double pc = y[i] > 0.5 ? p1 : 1.0 - p1;
            loss -= std::log(std::max(pc, 1e-300));
            if (update) {
                double g = y[i] - p1;  // dL/ds for this sample
                for (uint32_t d = 0; d < stages; ++d) grad[d] += g * xi[d];
            }
        }
        loss /= double(n);
        if (update)
            for (uint32_t d = 0; d < stages; ++d) w[d] -= lr * grad[d] / double(n);
        return std::pair<double, double>(loss, double(correct) / double(n));
    };

    uint32_t epoch = 0;
    double acc = 0.0, loss = 0.0;
    bool converged = false;
    for (; epoch < max_epochs; ++epoch) {
        auto [l, a] = pass(true);
        loss = l;
        acc = a;
        if (a == 1.0 || std::abs(prev_loss - l) < 1e-9) {
            converged = true;
            ++epoch;
            break;
        }
        prev_loss = l;
    }
    if (!converged) {
        char msg[128];
        std::snprintf(msg, sizeof msg, "fit did not converge after %u epochs (train accuracy %.4f)",
                      max_epochs, acc);
        throw FitError(msg);
    }

    LapufFitReport rep;
    rep.model = SimPuf(SimPuf::Kind::lapuf_model, 1, "fitted", std::move(w), true);
    rep.epochs = epoch;
    rep.train_accuracy = acc;
    rep.final_loss = loss;
    return rep;
}

uint64_t ropuf_crp_count(uint32_t n_ros, CrpMode mode) {
    if (n_ros < 2) throw ValidationError("need n_ros >= 2");
    if (mode == CrpMode::independent) return n_ros / 2;
    return uint64_t(n_ros) * (n_ros - 1) / 2;
}

}  // namespace puftrial
