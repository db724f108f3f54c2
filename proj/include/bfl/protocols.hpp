#pragma once

#include <map>
#include <set>
#include <tuple>

#include "bfl/messages.hpp"

namespace bfl {

enum class ProtocolVariant : std::uint8_t { PbftPk = 0, HotStuffView, HotStuffHash, HotStuffNull };

std::string variant_name(ProtocolVariant v);
ProtocolVariant variant_from_name(const std::string& name);
inline bool is_hotstuff(ProtocolVariant v) { return v != ProtocolVariant::PbftPk; }

struct GenesisView : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct VariantError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

ReplicaId leader_of(View e, std::uint32_t n);

// Voting rule for the three-phase family. A bottom lock means "never locked"
// and is always safe (otherwise no replica could ever vote in view 1, where
// the genesis highQC has view 0).
bool hs_safe_to_vote(const Lock& lock, const QuorumCertificate& high_qc, const Value& v);

Info info_of(ProtocolVariant variant, const QuorumCertificate& high_qc);

// popcount >= 2t+1 and every signature covers the (phase, e, v, info) vote
// tuple. The genesis sentinel (e = 0, bottom value, empty aggregate) passes.
bool verify_qc(const QuorumCertificate& qc, std::uint32_t n, std::uint32_t t,
               const std::vector<Bytes>& replica_keys, SchemeId scheme);

constexpr std::uint32_t kBroadcast = 0xFFFFFFFEu;

struct OutMsg {
    std::uint32_t to = 0; // replica identity, kBroadcast, or kClient
    Message msg;
};

struct StepOutput {
    std::vector<OutMsg> msgs;
    std::optional<std::tuple<Value, View, AggregateSignature>> output;
    std::optional<View> entered_view;

    void merge(StepOutput&& other);
};

struct ProtocolContext {
    std::uint32_t n = 0;
    std::uint32_t t = 0;
    ProtocolVariant variant = ProtocolVariant::PbftPk;
    SchemeId scheme = SchemeId::Ed25519;
    std::vector<Bytes> replica_keys;
    Bytes client_key;
};

// Shared replica plumbing: blame collection and per-view dedupe flags.
// Fields are public: the Byzantine wrapper in simnet reaches in to rewind
// locks and mirror honest behaviour.
class ReplicaCore {
public:
    ReplicaCore(const ProtocolContext& ctx, ReplicaId id, KeyPair key, Value initial);
    virtual ~ReplicaCore() = default;

    virtual StepOutput start() = 0;
    StepOutput on_message(const Message& m);
    StepOutput on_timeout(View e);

    const ProtocolContext& ctx;
    ReplicaId id;
    KeyPair key;
    Value v_i;
    View e_cur = 1;
    bool output_done = false;
    std::optional<std::tuple<Value, View, AggregateSignature>> output_val;

protected:
    virtual StepOutput handle(const Message& m) = 0;
    // Family-specific ViewChange payload sent while leaving view `leaving`.
    virtual ViewChange make_view_change(View leaving) = 0;
    // Hook invoked right after entering a new view.
    virtual StepOutput on_enter_view() = 0;

    StepOutput do_view_change(View leaving);
    void handle_blame(const Blame& b, StepOutput& out);
    void handle_blame_share(const BlameShare& bs, StepOutput& out);
    bool quorum(std::size_t count) const { return count >= 2 * ctx.t + 1; }
    Signature sign_payload(const Bytes& payload) const;
    bool externally_valid(const Value& v) const;

public:
    std::set<View> blamed, view_changed;
    std::map<View, std::map<ReplicaId, Blame>> blames;
};

class PbftReplica : public ReplicaCore {
public:
    PbftReplica(const ProtocolContext& ctx, ReplicaId id, KeyPair key, Value initial);

    StepOutput start() override;

    Lock lock;

    // leader bookkeeping
    std::map<View, std::map<ReplicaId, StatusCertificate::Entry>> vcs;
    std::map<std::pair<View, Bytes>, std::map<ReplicaId, Signature>> prep_votes, commit_votes;
    std::set<View> proposed, prepared, committed, prepare_qc_sent, commit_qc_sent;

protected:
    StepOutput handle(const Message& m) override;
    ViewChange make_view_change(View leaving) override;
    StepOutput on_enter_view() override;

private:
    void maybe_propose(StepOutput& out);
    void on_view_change_msg(const ViewChange& vc, StepOutput& out);
    void on_new_view(const NewViewPbft& m, StepOutput& out);
    void on_prepare_vote(const PrepareVote& m, StepOutput& out);
    void on_commit_vote(const CommitVote& m, StepOutput& out);
    void on_qc(const QcBroadcast& m, StepOutput& out);
};

class HotStuffReplica : public ReplicaCore {
public:
    HotStuffReplica(const ProtocolContext& ctx, ReplicaId id, KeyPair key, Value initial);

    StepOutput start() override;

    Lock lock;
    QuorumCertificate prepare_qc;

    std::map<View, std::map<ReplicaId, QuorumCertificate>> vcs;
    // prepare votes keyed by (view, value, info); later phases by (view, value)
    std::map<std::tuple<View, Bytes, Bytes>, std::map<ReplicaId, Signature>> prep_votes;
    std::map<std::pair<View, Bytes>, std::map<ReplicaId, Signature>> precommit_votes, commit_votes;
    std::set<View> proposed, prepared, precommitted, committed, prepare_qc_sent, precommit_qc_sent,
        commit_qc_sent;

protected:
    StepOutput handle(const Message& m) override;
    ViewChange make_view_change(View leaving) override;
    StepOutput on_enter_view() override;

private:
    void maybe_propose(StepOutput& out);
    void on_view_change_msg(const ViewChange& vc, StepOutput& out);
    void on_new_view(const NewViewHs& m, StepOutput& out);
    void on_prepare_vote(const PrepareVote& m, StepOutput& out);
    void on_precommit_vote(const PrecommitVote& m, StepOutput& out);
    void on_commit_vote(const CommitVote& m, StepOutput& out);
    void on_qc(const QcBroadcast& m, StepOutput& out);
};

Bytes value_key(const Value& v);
Bytes info_key(const Info& i);

}  // namespace bfl
