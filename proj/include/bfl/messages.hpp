#pragma once

#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "bfl/crypto.hpp"

namespace bfl {

using View = std::uint64_t;

// Destination sentinel for messages addressed to the external client.
constexpr std::uint32_t kClient = 0xFFFFFFFFu;

struct EmptyCertificate : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BadRange : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A proposable value. v-bottom is a distinguished sentinel that never
// collides with a client-signed payload.
struct Value {
    Bytes payload;
    Signature client_sig;
    bool is_bottom = false;

    static Value bottom() { return Value{{}, {}, true}; }
    bool operator==(const Value&) const = default;
};

// Ordering used for tie-breaks: bottom first, then unsigned lexicographic
// byte order of the payload.
bool value_less(const Value& a, const Value& b);

Bytes value_sign_payload(const Value& v);

enum class InfoKind : std::uint8_t { ViewNum = 0, HashOfHighQC = 1, Null = 2 };

struct Info {
    InfoKind kind = InfoKind::Null;
    View e_qc = 0;   // ViewNum only
    Digest digest{}; // HashOfHighQC only

    static Info view_num(View e) { return Info{InfoKind::ViewNum, e, {}}; }
    static Info hash_of(const Digest& d) { return Info{InfoKind::HashOfHighQC, 0, d}; }
    static Info null() { return Info{}; }
    bool operator==(const Info&) const = default;
};

enum class Phase : std::uint8_t { Prepare = 0, Precommit = 1, Commit = 2 };

struct QuorumCertificate {
    Phase phase = Phase::Prepare;
    View e = 0;
    Value v;
    AggregateSignature sigma;
    std::optional<Info> info; // prepareQC in the three-phase family only

    bool is_genesis() const { return e == 0; }
    bool operator==(const QuorumCertificate&) const = default;
};

// Genesis prepareQC sentinel: (0, v-bottom, empty aggregate, Null info).
QuorumCertificate genesis_qc(std::uint32_t n);

struct Lock {
    View e = 0;
    Value v;
    std::optional<AggregateSignature> sigma; // present in the two-phase family

    static Lock genesis_pbft(std::uint32_t n) { return Lock{0, Value::bottom(), AggregateSignature{Bitmap(n), {}}}; }
    static Lock genesis_hs() { return Lock{0, Value::bottom(), std::nullopt}; }
    bool operator==(const Lock&) const = default;
};

struct StatusCertificate {
    struct Entry {
        ReplicaId sender = 0;
        Lock lock;
        Signature sig; // over the originating ViewChange message
        bool operator==(const Entry&) const = default;
    };
    std::vector<Entry> entries;
    bool operator==(const StatusCertificate&) const = default;
};

// ---- wire messages -------------------------------------------------------

struct NewViewPbft {
    ReplicaId sender = 0;
    View e = 0;
    Value v;
    StatusCertificate m;
    Signature sig;
    bool operator==(const NewViewPbft&) const = default;
};

struct NewViewHs {
    ReplicaId sender = 0;
    View e = 0;
    Value v;
    QuorumCertificate high_qc;
    Signature sig;
    bool operator==(const NewViewHs&) const = default;
};

struct PrepareVote {
    ReplicaId sender = 0;
    View e = 0;
    Value v;
    Info info;
    Signature vote_sig;
    bool operator==(const PrepareVote&) const = default;
};

struct PrecommitVote {
    ReplicaId sender = 0;
    View e = 0;
    Value v;
    Signature vote_sig;
    bool operator==(const PrecommitVote&) const = default;
};

struct CommitVote {
    ReplicaId sender = 0;
    View e = 0;
    Value v;
    Signature vote_sig;
    bool operator==(const CommitVote&) const = default;
};

// Leader broadcasting an assembled QC; qc.phase says which one.
struct QcBroadcast {
    ReplicaId sender = 0;
    QuorumCertificate qc;
    bool operator==(const QcBroadcast&) const = default;
};

struct Reply {
    ReplicaId sender = 0;
    View e = 0;
    Value v;
    AggregateSignature sigma; // commitQC-level aggregate
    bool operator==(const Reply&) const = default;
};

struct ViewChange {
    ReplicaId sender = 0;
    View e = 0;                              // the view being left
    Lock lock;                               // two-phase family payload
    std::optional<QuorumCertificate> prepare_qc; // three-phase family payload
    Signature sig;
    bool operator==(const ViewChange&) const = default;
};

struct Blame {
    ReplicaId sender = 0;
    View e = 0;
    Signature sig;
    bool operator==(const Blame&) const = default;
};

struct BlameShare {
    ReplicaId sender = 0;
    View e = 0;
    std::vector<Blame> blames;
    bool operator==(const BlameShare&) const = default;
};

// ---- forensic wire messages ----------------------------------------------

struct RequestProof {
    View e = 0;
    Value v;
    View e_high = 0;
    bool operator==(const RequestProof&) const = default;
};

struct ProofAcrossView {
    ReplicaId sender = 0;
    QuorumCertificate qc;
    bool operator==(const ProofAcrossView&) const = default;
};

struct NewViewEvidence {
    ReplicaId sender = 0;
    std::variant<NewViewPbft, NewViewHs> m;
    bool operator==(const NewViewEvidence&) const = default;
};

// ---- mac-model messages (structural tokens, no transferable signatures) ---

struct MacProposal {
    ReplicaId sender = 0;
    View e = 0;
    Value v;
    bool operator==(const MacProposal&) const = default;
};

struct MacVote {
    ReplicaId sender = 0;
    Phase phase = Phase::Prepare;
    View e = 0;
    Value v;
    Digest token{}; // verifiable by the addressed recipient only
    bool operator==(const MacVote&) const = default;
};

struct MacReply {
    ReplicaId sender = 0;
    View e = 0;
    Value v;
    std::vector<ReplicaId> quorum; // claimed, unverifiable by third parties
    bool operator==(const MacReply&) const = default;
};

using Message = std::variant<NewViewPbft, NewViewHs, PrepareVote, PrecommitVote, CommitVote,
                             QcBroadcast, Reply, ViewChange, Blame, BlameShare, RequestProof,
                             ProofAcrossView, NewViewEvidence, MacProposal, MacVote, MacReply>;

enum class MsgType : std::uint8_t {
    NewViewPbft = 0,
    NewViewHs,
    PrepareVote,
    PrecommitVote,
    CommitVote,
    QcBroadcast,
    Reply,
    ViewChange,
    Blame,
    BlameShare,
    RequestProof,
    ProofAcrossView,
    NewViewEvidence,
    MacProposal,
    MacVote,
    MacReply,
};

MsgType type_of(const Message& m);
std::string msg_type_name(MsgType t);
std::optional<MsgType> msg_type_from_name(const std::string& name);
ReplicaId sender_of(const Message& m);
// View a message is "about", used by view-scoped network rules.
std::optional<View> view_of(const Message& m);

struct TranscriptRecord {
    enum class Direction : std::uint8_t { Sent = 0, Received = 1, Output = 2 };
    std::uint64_t step = 0;
    std::uint32_t node = 0; // node-instance id
    Direction direction = Direction::Sent;
    std::uint32_t peer = 0; // other endpoint instance, or kClient
    Message msg;
    bool operator==(const TranscriptRecord&) const = default;
};

// ---- canonical encoding ----------------------------------------------------

void encode_value(ByteWriter& w, const Value& v);
Value decode_value(ByteReader& r);
void encode_info(ByteWriter& w, const Info& i);
Info decode_info(ByteReader& r);
void encode_agg(ByteWriter& w, const AggregateSignature& a);
AggregateSignature decode_agg(ByteReader& r);
void encode_qc(ByteWriter& w, const QuorumCertificate& qc);
QuorumCertificate decode_qc(ByteReader& r);
void encode_lock(ByteWriter& w, const Lock& l);
Lock decode_lock(ByteReader& r);

Bytes encode_message(const Message& m);
Message decode_message(const Bytes& bytes);
Bytes encode_qc_bytes(const QuorumCertificate& qc);

// ---- signing payloads ------------------------------------------------------

Bytes vote_payload(Phase phase, View e, const Value& v, const Info& info);
Bytes viewchange_payload(View e, const Lock& lock, const std::optional<QuorumCertificate>& qc);
Bytes newview_pbft_payload(View e, const Value& v, const StatusCertificate& m);
Bytes newview_hs_payload(View e, const Value& v, const QuorumCertificate& high_qc);
Bytes blame_payload(View e);

// ---- status-certificate logic ---------------------------------------------

// Lock with the highest view; ties broken toward the smaller value under
// value_less (bottom first).
std::pair<Value, View> highest_lock(const StatusCertificate& m);

bool valid_new_view_pbft(const NewViewPbft& m, std::uint32_t n, std::uint32_t t,
                         const std::vector<Bytes>& replica_keys, SchemeId scheme);

}  // namespace bfl
