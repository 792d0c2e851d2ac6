#include "puftrial/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>

namespace puftrial {

namespace {

constexpr size_t kPayloadCap = 64 * 1024;

size_t expected_payload(MsgKind kind) {
    switch (kind) {
        case MsgKind::server_nonce: return 16;
        case MsgKind::server_challenge: return 8;
        case MsgKind::prover_digest: return 32;
        case MsgKind::prover_digest_with_nonce: return 48;
        case MsgKind::server_ack: return 1;
        case MsgKind::prover_nonce2: return 16;
        case MsgKind::server_digest2: return 32;
    }
    throw ProtocolError("unknown message kind");
}

const char* dir_name(Direction d) {
    return d == Direction::server_to_prover ? "s2p" : "p2s";
}

}  // namespace

void validate_message(const Message& m) {
    if (m.payload.size() > kPayloadCap) throw ProtocolError("payload exceeds 64 KiB cap");
    if (m.payload.size() != expected_payload(m.kind))
        throw ProtocolError("bad payload length for message kind " +
                            std::to_string(int(m.kind)));
}

Bytes encode_message(const Message& m) {
    validate_message(m);
    Bytes out;
    out.reserve(3 + m.payload.size());
    out.push_back(static_cast<uint8_t>(m.kind));
    put_u16_be(out, static_cast<uint16_t>(m.payload.size()));
    out.insert(out.end(), m.payload.begin(), m.payload.end());
    return out;
}

Message decode_message(std::span<const uint8_t> wire, size_t& offset) {
    if (wire.size() < offset + 3) throw ProtocolError("truncated message header");
    Message m;
    uint8_t tag = wire[offset];
    if (tag < 1 || tag > 7) throw ProtocolError("unknown message kind tag");
    m.kind = static_cast<MsgKind>(tag);
    size_t len = get_u16_be(wire.data() + offset + 1);
    if (wire.size() < offset + 3 + len) throw ProtocolError("truncated message payload");
    m.payload.assign(wire.begin() + long(offset) + 3, wire.begin() + long(offset) + 3 + long(len));
    offset += 3 + len;
    validate_message(m);
    return m;
}

std::string Transcript::to_log() const {
    std::ostringstream os;
    os << "session," << session_id << '\n';
    for (const auto& e : entries)
        os << dir_name(e.dir) << ',' << int(e.msg.kind) << ',' << to_hex(e.msg.payload) << '\n';
    return os.str();
}

Transcript Transcript::from_log(const std::string& log) {
    Transcript t;
    std::istringstream is(log);
    std::string line;
    size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> f;
        size_t start = 0;
        for (size_t i = 0; i <= line.size(); ++i)
            if (i == line.size() || line[i] == ',') {
                f.push_back(line.substr(start, i - start));
                start = i + 1;
            }
        if (f[0] == "session") {
            t.session_id = std::stoull(f.at(1));
            continue;
        }
        if (f.size() != 3) throw ParseError("transcript line " + std::to_string(line_no) + ": bad field count");
        TranscriptEntry e;
        if (f[0] == "s2p")
            e.dir = Direction::server_to_prover;
        else if (f[0] == "p2s")
            e.dir = Direction::prover_to_server;
        else
            throw ParseError("transcript line " + std::to_string(line_no) + ": bad direction");
        e.msg.kind = static_cast<MsgKind>(std::stoi(f[1]));
        e.msg.payload = from_hex(f[2]);
        validate_message(e.msg);
        t.entries.push_back(std::move(e));
    }
    return t;
}

std::vector<Message> Transcript::prover_messages() const {
    std::vector<Message> out;
    for (const auto& e : entries)
        if (e.dir == Direction::prover_to_server) out.push_back(e.msg);
    return out;
}

void Transport::send(Direction dir, const Message& m) {
    Bytes wire = encode_message(m);
    size_t off = 0;
    Message decoded = decode_message(wire, off);
    log_.push_back({dir, decoded});
    queue_[size_t(dir)].push_back(std::move(decoded));
}

std::optional<Message> Transport::recv(Direction dir) {
    auto& q = queue_[size_t(dir)];
    if (q.empty()) return std::nullopt;
    Message m = std::move(q.front());
    q.pop_front();
    return m;
}

void LossyTransport::send(Direction dir, const Message& m) {
    if (sent_++ == drop_index_) {
        log_.push_back({dir, m});  // observed on the wire but never delivered
        return;
    }
    Transport::send(dir, m);
}

Nonce NonceGen::next() {
    Bytes block;
    put_u64_be(block, seed_);
    put_u64_be(block, counter_++);
    Digest d = blake2s256(block);
    Nonce n;
    std::copy_n(d.begin(), n.size(), n.begin());
    return n;
}

ProverDevice ProverDevice::make_a(const PhysicalPuf& puf, const std::string& condition, uint32_t k,
                                  HashId hash, uint64_t seed) {
    ProverDevice d;
    d.arch = Arch::a;
    d.puf = &puf;
    d.condition = condition;
    d.k = k;
    d.hash = hash;
    d.fixed = puf.truth().fixed_challenges(k);
    d.noise_rng = Rng(Rng::mix(seed));
    d.nonce_gen = NonceGen(seed ^ 0xA5A5A5A5A5A5A5A5ull);
    return d;
}

ProverDevice ProverDevice::make_b(const PhysicalPuf& puf, const std::string& condition, uint32_t k,
                                  HashId hash, uint64_t seed) {
    ProverDevice d = make_a(puf, condition, k, hash, seed);
    d.arch = Arch::b;
    d.fixed.clear();
    return d;
}

Message ProverDevice::respond_a(const Nonce& server_nonce) {
    if (arch != Arch::a) throw ProtocolError("architecture mismatch: device is not TREVERSE-A");
    last_response = physical_evaluate_vector(*puf, fixed, condition, noise_rng);
    Digest d = owf(last_response, server_nonce, hash);
    return Message{MsgKind::prover_digest, Bytes(d.begin(), d.end())};
}

Message ProverDevice::respond_b(ChallengeSeed seed) {
    if (arch != Arch::b) throw ProtocolError("architecture mismatch: device is not TREVERSE-B");
    std::vector<Challenge> chs = puf->truth().expand_challenges(seed, k);
    last_response = physical_evaluate_vector(*puf, chs, condition, noise_rng);
    Nonce n = nonce_gen.next();
    Digest d = owf(last_response, n, hash);
    Bytes payload(d.begin(), d.end());
    payload.insert(payload.end(), n.begin(), n.end());
    return Message{MsgKind::prover_digest_with_nonce, std::move(payload)};
}

Server::Server(std::vector<const SimPuf*> r, TrialConfig c, uint64_t seed)
    : refs(std::move(r)), cfg(c), nonce_gen(seed), seed_rng(Rng::mix(seed ^ 0x5c5c5c5c5c5c5c5cull)) {
    if (refs.empty()) throw ValidationError("server needs at least one SimPUF");
    cfg.M = static_cast<uint32_t>(refs.size());
    for (const SimPuf* p : refs) {
        if (!p) throw ValidationError("null SimPUF reference");
        if (p->kind() != refs[0]->kind()) throw ValidationError("references must share a kind");
    }
    cfg.validate();
}

std::vector<Challenge> Server::fixed_challenges() const {
    return refs[0]->fixed_challenges(cfg.k);
}

namespace {

// Server side of one protocol exchange, implemented over the transport. Each
// round sends the round opener and parses the prover reply; order violations
// abort the session.
class WireRoundSource : public RoundSource {
public:
    WireRoundSource(Server& server, ProverDevice* device, Arch arch, Transport& transport,
                    const std::vector<Message>* replay)
        : server_(server), device_(device), arch_(arch), transport_(transport), replay_(replay) {}

    std::optional<ProverRound> next_round(uint32_t round) override {
        ProverRound r;
        if (arch_ == Arch::a) {
            Nonce n = server_.nonce_gen.next();
            transport_.send(Direction::server_to_prover, {MsgKind::server_nonce, Bytes(n.begin(), n.end())});
            r.challenges = server_.fixed_challenges();
            r.nonce = n;
            if (!pump_prover(round)) return std::nullopt;
            Message reply = expect(MsgKind::prover_digest);
            std::copy_n(reply.payload.begin(), 32, r.digest.begin());
        } else {
            ChallengeSeed seed = server_.seed_rng.next_u64();
            Bytes sp;
            put_u64_be(sp, seed);
            transport_.send(Direction::server_to_prover, {MsgKind::server_challenge, std::move(sp)});
            r.challenges = server_.refs[0]->expand_challenges(seed, server_.cfg.k);
            if (!pump_prover(round)) return std::nullopt;
            Message reply = expect(MsgKind::prover_digest_with_nonce);
            std::copy_n(reply.payload.begin(), 32, r.digest.begin());
            std::copy_n(reply.payload.begin() + 32, 16, r.nonce.begin());
        }
        return r;
    }

private:
    // Lets the (in-process) prover consume the round opener and reply; replay
    // adversaries ignore the opener and resend recorded messages instead.
    bool pump_prover(uint32_t round) {
        if (replay_) {
            transport_.recv(Direction::server_to_prover);  // adversary observes, discards
            if (round >= replay_->size()) return false;
            transport_.send(Direction::prover_to_server, (*replay_)[round]);
            return true;
        }
        auto opener = transport_.recv(Direction::server_to_prover);
        if (!opener) return false;
        Message reply = device_->arch == Arch::a
                            ? device_->respond_a(to_nonce(expect_kind(*opener, MsgKind::server_nonce)))
                            : device_->respond_b(get_u64_be(
                                  expect_kind(*opener, MsgKind::server_challenge).payload.data()));
        transport_.send(Direction::prover_to_server, reply);
        return true;
    }

    static const Message& expect_kind(const Message& m, MsgKind want) {
        if (m.kind != want) throw ProtocolError("out-of-order message");
        return m;
    }

    static Nonce to_nonce(const Message& m) {
        Nonce n;
        std::copy_n(m.payload.begin(), n.size(), n.begin());
        return n;
    }

    Message expect(MsgKind want) {
        auto m = transport_.recv(Direction::prover_to_server);
        if (!m) throw ProtocolError("transport failure: no prover reply");
        if (m->kind != want) throw ProtocolError("out-of-order message");
        return *m;
    }

    Server& server_;
    ProverDevice* device_;
    Arch arch_;
    Transport& transport_;
    const std::vector<Message>* replay_;
};

Transcript collect_transcript(const Transport& transport, const AuthOutcome& outcome,
                              const std::string& abort_reason) {
    static std::atomic<uint64_t> session_counter{1};
    Transcript t;
    t.session_id = session_counter.fetch_add(1);
    t.entries = transport.log();
    t.server_outcome = !abort_reason.empty() ? "abort" : (outcome.ok() ? "success" : "fail");
    t.abort_reason = abort_reason;
    return t;
}

SessionResult run_session(Server& server, ProverDevice* device, Arch arch, Transport& transport,
                          const std::vector<Message>* replay) {
    WireRoundSource source(server, device, arch, transport, replay);
    AuthOutcome outcome;
    std::string abort_reason;
    try {
        outcome = augmented_authenticate(server.refs, source, server.cfg);
    } catch (const ProtocolError& e) {
        outcome.state = AuthOutcome::State::fail;
        abort_reason = e.what();
    }
    return {outcome, collect_transcript(transport, outcome, abort_reason)};
}

}  // namespace

SessionResult run_unilateral(Server& server, ProverDevice& device, Transport& transport) {
    if (device.k != server.cfg.k) throw ValidationError("server and device disagree on k");
    if (device.arch == Arch::a && device.fixed.size() != server.cfg.k)
        throw ValidationError("device fixed challenge list does not match k");
    return run_session(server, &device, device.arch, transport, nullptr);
}

MutualResult run_mutual(Server& server, ProverDevice& device, Transport& transport) {
    if (device.arch != Arch::b) throw ProtocolError("mutual authentication requires architecture B");
    SessionResult uni = run_session(server, &device, Arch::b, transport, nullptr);
    MutualResult res{uni.outcome, false, std::move(uni.transcript)};
    if (!uni.outcome.ok()) return res;

    std::string abort_reason;
    try {
        transport.send(Direction::server_to_prover, {MsgKind::server_ack, {0x06}});
        auto ack = transport.recv(Direction::server_to_prover);
        if (!ack || ack->kind != MsgKind::server_ack) throw ProtocolError("missing server ack");

        Nonce n2 = device.nonce_gen.next();
        Digest expected = owf(device.last_response, n2, device.hash);
        transport.send(Direction::prover_to_server, {MsgKind::prover_nonce2, Bytes(n2.begin(), n2.end())});

        auto n2msg = transport.recv(Direction::prover_to_server);
        if (!n2msg || n2msg->kind != MsgKind::prover_nonce2) throw ProtocolError("missing prover nonce");
        Nonce n2srv;
        std::copy_n(n2msg->payload.begin(), n2srv.size(), n2srv.begin());
        Digest r2 = owf(*res.server_outcome.recovered_response, n2srv, server.cfg.hash);
        transport.send(Direction::server_to_prover, {MsgKind::server_digest2, Bytes(r2.begin(), r2.end())});

        auto r2msg = transport.recv(Direction::server_to_prover);
        if (!r2msg || r2msg->kind != MsgKind::server_digest2) throw ProtocolError("missing server digest");
        res.prover_accept = std::equal(r2msg->payload.begin(), r2msg->payload.end(), expected.begin());
    } catch (const ProtocolError& e) {
        res.prover_accept = false;
        abort_reason = e.what();
    }
    res.transcript = collect_transcript(transport, res.server_outcome, abort_reason);
    res.transcript.prover_accept = res.prover_accept;
    return res;
}

SessionResult adversary_replay(Server& server, Arch arch, const std::vector<Message>& recorded,
                               Transport& transport) {
    return run_session(server, nullptr, arch, transport, &recorded);
}

uint64_t adversary_impostor(Server& server, const PhysicalPuf& foreign, const std::string& condition,
                            uint64_t sessions, uint64_t seed) {
    uint64_t accepted = 0;
    for (uint64_t s = 0; s < sessions; ++s) {
        ProverDevice dev = ProverDevice::make_b(foreign, condition, server.cfg.k, server.cfg.hash,
                                                Rng::mix(seed + s));
        dev.nonce_gen = NonceGen(seed, s * 64);
        Transport t;
        if (run_unilateral(server, dev, t).outcome.ok()) ++accepted;
    }
    return accepted;
}

}  // namespace puftrial
