#include "bfl/messages.hpp"

#include <algorithm>
#include <set>

namespace bfl {

bool value_less(const Value& a, const Value& b) {
    if (a.is_bottom != b.is_bottom) return a.is_bottom;
    return std::lexicographical_compare(a.payload.begin(), a.payload.end(), b.payload.begin(),
                                        b.payload.end());
}

Bytes value_sign_payload(const Value& v) {
    ByteWriter w;
    w.str("value");
    w.bytes(v.payload);
    return w.take();
}

QuorumCertificate genesis_qc(std::uint32_t n) {
    return QuorumCertificate{Phase::Prepare, 0, Value::bottom(),
                             AggregateSignature{Bitmap(n), {}}, Info::null()};
}

// ---- canonical encoding ----------------------------------------------------

void encode_value(ByteWriter& w, const Value& v) {
    w.u8(v.is_bottom ? 1 : 0);
    w.bytes(v.payload);
    w.bytes(v.client_sig.bytes);
}

Value decode_value(ByteReader& r) {
    Value v;
    v.is_bottom = r.u8() != 0;
    v.payload = r.bytes();
    v.client_sig.bytes = r.bytes();
    return v;
}

void encode_info(ByteWriter& w, const Info& i) {
    w.u8(static_cast<std::uint8_t>(i.kind));
    switch (i.kind) {
        case InfoKind::ViewNum: w.u64(i.e_qc); break;
        case InfoKind::HashOfHighQC: w.raw(i.digest.bytes); break;
        case InfoKind::Null: break;
    }
}

Info decode_info(ByteReader& r) {
    Info i;
    switch (r.u8()) {
        case 0:
            i.kind = InfoKind::ViewNum;
            i.e_qc = r.u64();
            break;
        case 1:
            i.kind = InfoKind::HashOfHighQC;
            for (auto& b : i.digest.bytes) b = r.u8();
            break;
        case 2: i.kind = InfoKind::Null; break;
        default: throw CodecError("bad info tag");
    }
    return i;
}

void encode_agg(ByteWriter& w, const AggregateSignature& a) {
    w.u32(a.bitmap.size());
    w.bytes(a.bitmap.packed());
    w.u32(static_cast<std::uint32_t>(a.signatures.size()));
    for (const auto& s : a.signatures) w.bytes(s.bytes);
}

AggregateSignature decode_agg(ByteReader& r) {
    AggregateSignature a;
    std::uint32_t n = r.u32();
    a.bitmap = Bitmap::unpack(r.bytes(), n);
    std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) a.signatures.push_back(Signature{r.bytes()});
    return a;
}

void encode_qc(ByteWriter& w, const QuorumCertificate& qc) {
    w.u8(static_cast<std::uint8_t>(qc.phase));
    w.u64(qc.e);
    encode_value(w, qc.v);
    encode_agg(w, qc.sigma);
    w.u8(qc.info.has_value() ? 1 : 0);
    if (qc.info) encode_info(w, *qc.info);
}

QuorumCertificate decode_qc(ByteReader& r) {
    QuorumCertificate qc;
    std::uint8_t phase = r.u8();
    if (phase > 2) throw CodecError("bad phase tag");
    qc.phase = static_cast<Phase>(phase);
    qc.e = r.u64();
    qc.v = decode_value(r);
    qc.sigma = decode_agg(r);
    if (r.u8() != 0) qc.info = decode_info(r);
    return qc;
}

void encode_lock(ByteWriter& w, const Lock& l) {
    w.u64(l.e);
    encode_value(w, l.v);
    w.u8(l.sigma.has_value() ? 1 : 0);
    if (l.sigma) encode_agg(w, *l.sigma);
}

Lock decode_lock(ByteReader& r) {
    Lock l;
    l.e = r.u64();
    l.v = decode_value(r);
    if (r.u8() != 0) l.sigma = decode_agg(r);
    return l;
}

namespace {

void encode_status(ByteWriter& w, const StatusCertificate& m) {
    w.u32(static_cast<std::uint32_t>(m.entries.size()));
    for (const auto& entry : m.entries) {
        w.u32(entry.sender);
        encode_lock(w, entry.lock);
        w.bytes(entry.sig.bytes);
    }
}

StatusCertificate decode_status(ByteReader& r) {
    StatusCertificate m;
    std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        StatusCertificate::Entry e;
        e.sender = r.u32();
        e.lock = decode_lock(r);
        e.sig.bytes = r.bytes();
        m.entries.push_back(std::move(e));
    }
    return m;
}

void encode_blame(ByteWriter& w, const Blame& b) {
    w.u32(b.sender);
    w.u64(b.e);
    w.bytes(b.sig.bytes);
}

Blame decode_blame(ByteReader& r) {
    Blame b;
    b.sender = r.u32();
    b.e = r.u64();
    b.sig.bytes = r.bytes();
    return b;
}

void encode_digest(ByteWriter& w, const Digest& d) { w.raw(d.bytes); }

Digest decode_digest(ByteReader& r) {
    Digest d;
    for (auto& b : d.bytes) b = r.u8();
    return d;
}

struct Encoder {
    ByteWriter& w;

    void operator()(const NewViewPbft& m) {
        w.u32(m.sender);
        w.u64(m.e);
        encode_value(w, m.v);
        encode_status(w, m.m);
        w.bytes(m.sig.bytes);
    }
    void operator()(const NewViewHs& m) {
        w.u32(m.sender);
        w.u64(m.e);
        encode_value(w, m.v);
        encode_qc(w, m.high_qc);
        w.bytes(m.sig.bytes);
    }
    void operator()(const PrepareVote& m) {
        w.u32(m.sender);
        w.u64(m.e);
        encode_value(w, m.v);
        encode_info(w, m.info);
        w.bytes(m.vote_sig.bytes);
    }
    void operator()(const PrecommitVote& m) {
        w.u32(m.sender);
        w.u64(m.e);
        encode_value(w, m.v);
        w.bytes(m.vote_sig.bytes);
    }
    void operator()(const CommitVote& m) {
        w.u32(m.sender);
        w.u64(m.e);
        encode_value(w, m.v);
        w.bytes(m.vote_sig.bytes);
    }
    void operator()(const QcBroadcast& m) {
        w.u32(m.sender);
        encode_qc(w, m.qc);
    }
    void operator()(const Reply& m) {
        w.u32(m.sender);
        w.u64(m.e);
        encode_value(w, m.v);
        encode_agg(w, m.sigma);
    }
    void operator()(const ViewChange& m) {
        w.u32(m.sender);
        w.u64(m.e);
        encode_lock(w, m.lock);
        w.u8(m.prepare_qc.has_value() ? 1 : 0);
        if (m.prepare_qc) encode_qc(w, *m.prepare_qc);
        w.bytes(m.sig.bytes);
    }
    void operator()(const Blame& m) { encode_blame(w, m); }
    void operator()(const BlameShare& m) {
        w.u32(m.sender);
        w.u64(m.e);
        w.u32(static_cast<std::uint32_t>(m.blames.size()));
        for (const auto& b : m.blames) encode_blame(w, b);
    }
    void operator()(const RequestProof& m) {
        w.u64(m.e);
        encode_value(w, m.v);
        w.u64(m.e_high);
    }
    void operator()(const ProofAcrossView& m) {
        w.u32(m.sender);
        encode_qc(w, m.qc);
    }
    void operator()(const NewViewEvidence& m) {
        w.u32(m.sender);
        w.u8(static_cast<std::uint8_t>(m.m.index()));
        std::visit(*this, std::variant<NewViewPbft, NewViewHs>(m.m));
    }
    void operator()(const MacProposal& m) {
        w.u32(m.sender);
        w.u64(m.e);
        encode_value(w, m.v);
    }
    void operator()(const MacVote& m) {
        w.u32(m.sender);
        w.u8(static_cast<std::uint8_t>(m.phase));
        w.u64(m.e);
        encode_value(w, m.v);
        encode_digest(w, m.token);
    }
    void operator()(const MacReply& m) {
        w.u32(m.sender);
        w.u64(m.e);
        encode_value(w, m.v);
        w.u32(static_cast<std::uint32_t>(m.quorum.size()));
        for (ReplicaId id : m.quorum) w.u32(id);
    }
};

NewViewPbft decode_nvp(ByteReader& r) {
    NewViewPbft m;
    m.sender = r.u32();
    m.e = r.u64();
    m.v = decode_value(r);
    m.m = decode_status(r);
    m.sig.bytes = r.bytes();
    return m;
}

NewViewHs decode_nvh(ByteReader& r) {
    NewViewHs m;
    m.sender = r.u32();
    m.e = r.u64();
    m.v = decode_value(r);
    m.high_qc = decode_qc(r);
    m.sig.bytes = r.bytes();
    return m;
}

}  // namespace

MsgType type_of(const Message& m) { return static_cast<MsgType>(m.index()); }

std::string msg_type_name(MsgType t) {
    switch (t) {
        case MsgType::NewViewPbft: return "new-view-pbft";
        case MsgType::NewViewHs: return "new-view-hs";
        case MsgType::PrepareVote: return "prepare-vote";
        case MsgType::PrecommitVote: return "precommit-vote";
        case MsgType::CommitVote: return "commit-vote";
        case MsgType::QcBroadcast: return "qc-broadcast";
        case MsgType::Reply: return "reply";
        case MsgType::ViewChange: return "view-change";
        case MsgType::Blame: return "blame";
        case MsgType::BlameShare: return "blame-share";
        case MsgType::RequestProof: return "request-proof";
        case MsgType::ProofAcrossView: return "proof-across-view";
        case MsgType::NewViewEvidence: return "new-view-evidence";
        case MsgType::MacProposal: return "mac-proposal";
        case MsgType::MacVote: return "mac-vote";
        case MsgType::MacReply: return "mac-reply";
    }
    throw CodecError("bad message type");
}

std::optional<MsgType> msg_type_from_name(const std::string& name) {
    for (std::uint8_t i = 0; i <= static_cast<std::uint8_t>(MsgType::MacReply); ++i) {
        if (msg_type_name(static_cast<MsgType>(i)) == name) return static_cast<MsgType>(i);
    }
    return std::nullopt;
}

ReplicaId sender_of(const Message& m) {
    return std::visit(
        [](const auto& msg) -> ReplicaId {
            if constexpr (std::is_same_v<std::decay_t<decltype(msg)>, RequestProof>) {
                return kClient;
            } else {
                return msg.sender;
            }
        },
        m);
}

std::optional<View> view_of(const Message& m) {
    return std::visit(
        []<typename T>(const T& msg) -> std::optional<View> {
            if constexpr (std::is_same_v<T, QcBroadcast> || std::is_same_v<T, ProofAcrossView>) {
                return msg.qc.e;
            } else if constexpr (std::is_same_v<T, NewViewEvidence>) {
                return std::visit([](const auto& nv) { return nv.e; }, msg.m);
            } else if constexpr (std::is_same_v<T, RequestProof>) {
                return std::nullopt;
            } else {
                return msg.e;
            }
        },
        m);
}

Bytes encode_message(const Message& m) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(m.index()));
    std::visit(Encoder{w}, m);
    return w.take();
}

Bytes encode_qc_bytes(const QuorumCertificate& qc) {
    ByteWriter w;
    encode_qc(w, qc);
    return w.take();
}

Message decode_message(const Bytes& bytes) {
    ByteReader r(bytes);
    std::uint8_t tag = r.u8();
    Message out;
    switch (static_cast<MsgType>(tag)) {
        case MsgType::NewViewPbft: out = decode_nvp(r); break;
        case MsgType::NewViewHs: out = decode_nvh(r); break;
        case MsgType::PrepareVote: {
            PrepareVote m;
            m.sender = r.u32();
            m.e = r.u64();
            m.v = decode_value(r);
            m.info = decode_info(r);
            m.vote_sig.bytes = r.bytes();
            out = m;
            break;
        }
        case MsgType::PrecommitVote: {
            PrecommitVote m;
            m.sender = r.u32();
            m.e = r.u64();
            m.v = decode_value(r);
            m.vote_sig.bytes = r.bytes();
            out = m;
            break;
        }
        case MsgType::CommitVote: {
            CommitVote m;
            m.sender = r.u32();
            m.e = r.u64();
            m.v = decode_value(r);
            m.vote_sig.bytes = r.bytes();
            out = m;
            break;
        }
        case MsgType::QcBroadcast: {
            QcBroadcast m;
            m.sender = r.u32();
            m.qc = decode_qc(r);
            out = m;
            break;
        }
        case MsgType::Reply: {
            Reply m;
            m.sender = r.u32();
            m.e = r.u64();
            m.v = decode_value(r);
            m.sigma = decode_agg(r);
            out = m;
            break;
        }
        case MsgType::ViewChange: {
            ViewChange m;
            m.sender = r.u32();
            m.e = r.u64();
            m.lock = decode_lock(r);
            if (r.u8() != 0) m.prepare_qc = decode_qc(r);
            m.sig.bytes = r.bytes();
            out = m;
            break;
        }
        case MsgType::Blame: out = decode_blame(r); break;
        case MsgType::BlameShare: {
            BlameShare m;
            m.sender = r.u32();
            m.e = r.u64();
            std::uint32_t count = r.u32();
            for (std::uint32_t i = 0; i < count; ++i) m.blames.push_back(decode_blame(r));
            out = m;
            break;
        }
        case MsgType::RequestProof: {
            RequestProof m;
            m.e = r.u64();
            m.v = decode_value(r);
            m.e_high = r.u64();
            out = m;
            break;
        }
        case MsgType::ProofAcrossView: {
            ProofAcrossView m;
            m.sender = r.u32();
            m.qc = decode_qc(r);
            out = m;
            break;
        }
        case MsgType::NewViewEvidence: {
            NewViewEvidence m;
            m.sender = r.u32();
            std::uint8_t inner = r.u8();
            if (inner == 0) {
                m.m = decode_nvp(r);
            } else if (inner == 1) {
                m.m = decode_nvh(r);
            } else {
                throw CodecError("bad evidence tag");
            }
            out = m;
            break;
        }
        case MsgType::MacProposal: {
            MacProposal m;
            m.sender = r.u32();
            m.e = r.u64();
            m.v = decode_value(r);
            out = m;
            break;
        }
        case MsgType::MacVote: {
            MacVote m;
            m.sender = r.u32();
            std::uint8_t phase = r.u8();
            if (phase > 2) throw CodecError("bad phase tag");
            m.phase = static_cast<Phase>(phase);
            m.e = r.u64();
            m.v = decode_value(r);
            m.token = decode_digest(r);
            out = m;
            break;
        }
        case MsgType::MacReply: {
            MacReply m;
            m.sender = r.u32();
            m.e = r.u64();
            m.v = decode_value(r);
            std::uint32_t count = r.u32();
            for (std::uint32_t i = 0; i < count; ++i) m.quorum.push_back(r.u32());
            out = m;
            break;
        }
        default: throw CodecError("bad message tag");
    }
    r.expect_done();
    return out;
}

// ---- signing payloads ------------------------------------------------------

Bytes vote_payload(Phase phase, View e, const Value& v, const Info& info) {
    ByteWriter w;
    w.str("vote");
    w.u8(static_cast<std::uint8_t>(phase));
    w.u64(e);
    encode_value(w, v);
    encode_info(w, info);
    return w.take();
}

Bytes viewchange_payload(View e, const Lock& lock, const std::optional<QuorumCertificate>& qc) {
    ByteWriter w;
    w.str("view-change");
    w.u64(e);
    encode_lock(w, lock);
    w.u8(qc.has_value() ? 1 : 0);
    if (qc) encode_qc(w, *qc);
    return w.take();
}

Bytes newview_pbft_payload(View e, const Value& v, const StatusCertificate& m) {
    ByteWriter w;
    w.str("new-view-pbft");
    w.u64(e);
    encode_value(w, v);
    encode_status(w, m);
    return w.take();
}

Bytes newview_hs_payload(View e, const Value& v, const QuorumCertificate& high_qc) {
    ByteWriter w;
    w.str("new-view-hs");
    w.u64(e);
    encode_value(w, v);
    encode_qc(w, high_qc);
    return w.take();
}

Bytes blame_payload(View e) {
    ByteWriter w;
    w.str("blame");
    w.u64(e);
    return w.take();
}

// ---- status-certificate logic ---------------------------------------------

std::pair<Value, View> highest_lock(const StatusCertificate& m) {
    if (m.entries.empty()) throw EmptyCertificate("empty status certificate");
    const Lock* best = &m.entries.front().lock;
    for (const auto& entry : m.entries) {
        const Lock& l = entry.lock;
        if (l.e > best->e || (l.e == best->e && value_less(l.v, best->v))) best = &l;
    }
    return {best->v, best->e};
}

bool valid_new_view_pbft(const NewViewPbft& m, std::uint32_t n, std::uint32_t t,
                         const std::vector<Bytes>& replica_keys, SchemeId scheme) {
    if (m.e == 0) return false;
    std::set<ReplicaId> senders;
    for (const auto& entry : m.m.entries) {
        if (entry.sender >= n) return false;
        if (!senders.insert(entry.sender).second) return false;
        Bytes payload = viewchange_payload(m.e - 1, entry.lock, std::nullopt);
        if (!verify(scheme, replica_keys[entry.sender], payload, entry.sig)) return false;
        if (entry.lock.e > 0) {
            if (!entry.lock.sigma) return false;
            if (entry.lock.sigma->count() < 2 * t + 1) return false;
            Bytes vote = vote_payload(Phase::Prepare, entry.lock.e, entry.lock.v, Info::null());
            try {
                if (!verify_aggregate(*entry.lock.sigma, vote, replica_keys, scheme)) return false;
            } catch (const CryptoError&) {
                return false;
            }
        }
    }
    if (senders.size() < 2 * t + 1) return false;
    auto [v_star, e_star] = highest_lock(m.m);
    (void)e_star;
    return v_star.is_bottom || v_star == m.v;
}

}  // namespace bfl
