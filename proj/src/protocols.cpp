#include "bfl/protocols.hpp"

#include <algorithm>

namespace bfl {

std::string variant_name(ProtocolVariant v) {
    switch (v) {
        case ProtocolVariant::PbftPk: return "pbft-pk";
        case ProtocolVariant::HotStuffView: return "hotstuff-view";
        case ProtocolVariant::HotStuffHash: return "hotstuff-hash";
        case ProtocolVariant::HotStuffNull: return "hotstuff-null";
    }
    throw VariantError("bad variant");
}

ProtocolVariant variant_from_name(const std::string& name) {
    for (auto v : {ProtocolVariant::PbftPk, ProtocolVariant::HotStuffView,
                   ProtocolVariant::HotStuffHash, ProtocolVariant::HotStuffNull}) {
        if (variant_name(v) == name) return v;
    }
    throw VariantError("unknown variant: " + name);
}

ReplicaId leader_of(View e, std::uint32_t n) {
    if (e == 0) throw GenesisView("view 0 has no leader");
    return static_cast<ReplicaId>((e - 1) % n);
}

bool hs_safe_to_vote(const Lock& lock, const QuorumCertificate& high_qc, const Value& v) {
    if (lock.v.is_bottom) return true;
    return lock.e < high_qc.e || lock.v == v;
}

Info info_of(ProtocolVariant variant, const QuorumCertificate& high_qc) {
    switch (variant) {
        case ProtocolVariant::HotStuffView: return Info::view_num(high_qc.e);
        case ProtocolVariant::HotStuffHash: return Info::hash_of(sha256(encode_qc_bytes(high_qc)));
        case ProtocolVariant::HotStuffNull: return Info::null();
        case ProtocolVariant::PbftPk: break;
    }
    throw VariantError("info_of requires a three-phase variant");
}

bool verify_qc(const QuorumCertificate& qc, std::uint32_t n, std::uint32_t t,
               const std::vector<Bytes>& replica_keys, SchemeId scheme) {
    if (qc.sigma.bitmap.size() != n) return false;
    if (qc.e == 0) return qc.v.is_bottom && qc.sigma.count() == 0 && qc.sigma.signatures.empty();
    if (qc.sigma.count() < 2 * t + 1) return false;
    Bytes payload = vote_payload(qc.phase, qc.e, qc.v, qc.info.value_or(Info::null()));
    try {
        return verify_aggregate(qc.sigma, payload, replica_keys, scheme);
    } catch (const CryptoError&) {
        return false;
    }
}

void StepOutput::merge(StepOutput&& other) {
    for (auto& m : other.msgs) msgs.push_back(std::move(m));
    if (other.output) output = std::move(other.output);
    if (other.entered_view) entered_view = other.entered_view;
}

Bytes value_key(const Value& v) {
    ByteWriter w;
    encode_value(w, v);
    return w.take();
}

Bytes info_key(const Info& i) {
    ByteWriter w;
    encode_info(w, i);
    return w.take();
}

// ---- ReplicaCore -----------------------------------------------------------

ReplicaCore::ReplicaCore(const ProtocolContext& c, ReplicaId i, KeyPair k, Value initial)
    : ctx(c), id(i), key(std::move(k)), v_i(std::move(initial)) {}

Signature ReplicaCore::sign_payload(const Bytes& payload) const { return sign(key, payload); }

bool ReplicaCore::externally_valid(const Value& v) const {
    if (v.is_bottom) return false;
    return verify(ctx.scheme, ctx.client_key, value_sign_payload(v), v.client_sig);
}

StepOutput ReplicaCore::on_message(const Message& m) {
    StepOutput out;
    if (const auto* b = std::get_if<Blame>(&m)) {
        handle_blame(*b, out);
        return out;
    }
    if (const auto* bs = std::get_if<BlameShare>(&m)) {
        handle_blame_share(*bs, out);
        return out;
    }
    return handle(m);
}

StepOutput ReplicaCore::on_timeout(View e) {
    StepOutput out;
    if (e != e_cur || blamed.count(e)) return out;
    blamed.insert(e);
    out.msgs.push_back({kBroadcast, Blame{id, e, sign_payload(blame_payload(e))}});
    return out;
}

void ReplicaCore::handle_blame(const Blame& b, StepOutput& out) {
    if (b.sender >= ctx.n) return;
    if (!verify(ctx.scheme, ctx.replica_keys[b.sender], blame_payload(b.e), b.sig)) return;
    blames[b.e][b.sender] = b;
    if (b.e == e_cur && !view_changed.count(b.e) && blames[b.e].size() >= ctx.t + 1)
        out.merge(do_view_change(b.e));
}

void ReplicaCore::handle_blame_share(const BlameShare& bs, StepOutput& out) {
    if (bs.e != e_cur || view_changed.count(bs.e)) return;
    std::set<ReplicaId> senders;
    for (const auto& b : bs.blames) {
        if (b.e != bs.e || b.sender >= ctx.n) continue;
        if (!verify(ctx.scheme, ctx.replica_keys[b.sender], blame_payload(b.e), b.sig)) continue;
        blames[b.e][b.sender] = b;
        senders.insert(b.sender);
    }
    if (senders.size() >= ctx.t + 1) out.merge(do_view_change(bs.e));
}

StepOutput ReplicaCore::do_view_change(View leaving) {
    StepOutput out;
    view_changed.insert(leaving);

    std::vector<Blame> share;
    for (const auto& [sender, b] : blames[leaving]) {
        share.push_back(b);
        if (share.size() == ctx.t + 1) break;
    }
    out.msgs.push_back({kBroadcast, BlameShare{id, leaving, std::move(share)}});

    ViewChange vc = make_view_change(leaving);
    out.msgs.push_back({leader_of(leaving + 1, ctx.n), std::move(vc)});

    e_cur = leaving + 1;
    out.entered_view = e_cur;
    out.merge(on_enter_view());
    return out;
}

// ---- PbftReplica -----------------------------------------------------------

PbftReplica::PbftReplica(const ProtocolContext& c, ReplicaId i, KeyPair k, Value initial)
    : ReplicaCore(c, i, std::move(k), std::move(initial)), lock(Lock::genesis_pbft(c.n)) {}

StepOutput PbftReplica::start() {
    StepOutput out;
    out.entered_view = 1;
    ViewChange vc{id, 0, lock, std::nullopt, {}};
    vc.sig = sign_payload(viewchange_payload(0, vc.lock, std::nullopt));
    out.msgs.push_back({leader_of(1, ctx.n), std::move(vc)});
    return out;
}

ViewChange PbftReplica::make_view_change(View leaving) {
    ViewChange vc{id, leaving, lock, std::nullopt, {}};
    vc.sig = sign_payload(viewchange_payload(leaving, vc.lock, std::nullopt));
    return vc;
}

StepOutput PbftReplica::on_enter_view() {
    StepOutput out;
    maybe_propose(out);
    return out;
}

StepOutput PbftReplica::handle(const Message& m) {
    StepOutput out;
    if (const auto* vc = std::get_if<ViewChange>(&m)) on_view_change_msg(*vc, out);
    else if (const auto* nv = std::get_if<NewViewPbft>(&m)) on_new_view(*nv, out);
    else if (const auto* pv = std::get_if<PrepareVote>(&m)) on_prepare_vote(*pv, out);
    else if (const auto* cv = std::get_if<CommitVote>(&m)) on_commit_vote(*cv, out);
    else if (const auto* qc = std::get_if<QcBroadcast>(&m)) on_qc(*qc, out);
    return out;
}

void PbftReplica::on_view_change_msg(const ViewChange& vc, StepOutput& out) {
    if (vc.sender >= ctx.n || vc.prepare_qc.has_value()) return;
    Bytes payload = viewchange_payload(vc.e, vc.lock, std::nullopt);
    if (!verify(ctx.scheme, ctx.replica_keys[vc.sender], payload, vc.sig)) return;
    if (vc.lock.e > 0) {
        if (!vc.lock.sigma || vc.lock.sigma->count() < 2 * ctx.t + 1) return;
        QuorumCertificate as_qc{Phase::Prepare, vc.lock.e, vc.lock.v, *vc.lock.sigma, std::nullopt};
        if (!verify_qc(as_qc, ctx.n, ctx.t, ctx.replica_keys, ctx.scheme)) return;
    }
    vcs[vc.e][vc.sender] = StatusCertificate::Entry{vc.sender, vc.lock, vc.sig};
    maybe_propose(out);
}

void PbftReplica::maybe_propose(StepOutput& out) {
    View e = e_cur;
    if (leader_of(e, ctx.n) != id || proposed.count(e)) return;
    auto it = vcs.find(e - 1);
    if (it == vcs.end() || !quorum(it->second.size())) return;
    proposed.insert(e);

    StatusCertificate m;
    for (const auto& [sender, entry] : it->second) m.entries.push_back(entry);
    auto [v_star, e_star] = highest_lock(m);
    (void)e_star;
    Value v = v_star.is_bottom ? v_i : v_star;

    NewViewPbft nv{id, e, std::move(v), std::move(m), {}};
    nv.sig = sign_payload(newview_pbft_payload(nv.e, nv.v, nv.m));
    out.msgs.push_back({kBroadcast, std::move(nv)});
}

void PbftReplica::on_new_view(const NewViewPbft& m, StepOutput& out) {
    if (m.e != e_cur || prepared.count(m.e)) return;
    if (m.sender != leader_of(m.e, ctx.n)) return;
    if (!verify(ctx.scheme, ctx.replica_keys[m.sender], newview_pbft_payload(m.e, m.v, m.m), m.sig))
        return;
    if (!valid_new_view_pbft(m, ctx.n, ctx.t, ctx.replica_keys, ctx.scheme)) return;
    if (!externally_valid(m.v)) return;
    prepared.insert(m.e);

    PrepareVote pv{id, m.e, m.v, Info::null(), {}};
    pv.vote_sig = sign_payload(vote_payload(Phase::Prepare, pv.e, pv.v, pv.info));
    out.msgs.push_back({leader_of(m.e, ctx.n), std::move(pv)});
}

void PbftReplica::on_prepare_vote(const PrepareVote& m, StepOutput& out) {
    if (m.sender >= ctx.n || m.info != Info::null()) return;
    Bytes payload = vote_payload(Phase::Prepare, m.e, m.v, m.info);
    if (!verify(ctx.scheme, ctx.replica_keys[m.sender], payload, m.vote_sig)) return;
    auto& tally = prep_votes[{m.e, value_key(m.v)}];
    tally[m.sender] = m.vote_sig;
    if (leader_of(m.e, ctx.n) != id || prepare_qc_sent.count(m.e) || !quorum(tally.size())) return;
    prepare_qc_sent.insert(m.e);

    std::vector<std::pair<ReplicaId, Signature>> votes(tally.begin(), tally.end());
    QuorumCertificate qc{Phase::Prepare, m.e, m.v, aggregate(votes, ctx.n), std::nullopt};
    out.msgs.push_back({kBroadcast, QcBroadcast{id, std::move(qc)}});
}

void PbftReplica::on_commit_vote(const CommitVote& m, StepOutput& out) {
    if (m.sender >= ctx.n) return;
    Bytes payload = vote_payload(Phase::Commit, m.e, m.v, Info::null());
    if (!verify(ctx.scheme, ctx.replica_keys[m.sender], payload, m.vote_sig)) return;
    auto& tally = commit_votes[{m.e, value_key(m.v)}];
    tally[m.sender] = m.vote_sig;
    if (leader_of(m.e, ctx.n) != id || commit_qc_sent.count(m.e) || !quorum(tally.size())) return;
    commit_qc_sent.insert(m.e);

    std::vector<std::pair<ReplicaId, Signature>> votes(tally.begin(), tally.end());
    QuorumCertificate qc{Phase::Commit, m.e, m.v, aggregate(votes, ctx.n), std::nullopt};
    out.msgs.push_back({kBroadcast, QcBroadcast{id, std::move(qc)}});
}

void PbftReplica::on_qc(const QcBroadcast& m, StepOutput& out) {
    if (!verify_qc(m.qc, ctx.n, ctx.t, ctx.replica_keys, ctx.scheme) || m.qc.e == 0) return;
    if (m.qc.phase == Phase::Prepare) {
        if (m.qc.e != e_cur || committed.count(m.qc.e)) return;
        committed.insert(m.qc.e);
        lock = Lock{m.qc.e, m.qc.v, m.qc.sigma};
        CommitVote cv{id, m.qc.e, m.qc.v, {}};
        cv.vote_sig = sign_payload(vote_payload(Phase::Commit, cv.e, cv.v, Info::null()));
        out.msgs.push_back({leader_of(m.qc.e, ctx.n), std::move(cv)});
    } else if (m.qc.phase == Phase::Commit) {
        if (m.qc.e != e_cur || output_done) return;
        output_done = true;
        output_val = {m.qc.v, m.qc.e, m.qc.sigma};
        out.output = output_val;
        out.msgs.push_back({kClient, Reply{id, m.qc.e, m.qc.v, m.qc.sigma}});
    }
}

// ---- HotStuffReplica -------------------------------------------------------

HotStuffReplica::HotStuffReplica(const ProtocolContext& c, ReplicaId i, KeyPair k, Value initial)
    : ReplicaCore(c, i, std::move(k), std::move(initial)),
      lock(Lock::genesis_hs()),
      prepare_qc(genesis_qc(c.n)) {}

StepOutput HotStuffReplica::start() {
    StepOutput out;
    out.entered_view = 1;
    ViewChange vc = make_view_change(0);
    out.msgs.push_back({leader_of(1, ctx.n), std::move(vc)});
    return out;
}

ViewChange HotStuffReplica::make_view_change(View leaving) {
    ViewChange vc{id, leaving, Lock::genesis_hs(), prepare_qc, {}};
    vc.sig = sign_payload(viewchange_payload(leaving, vc.lock, vc.prepare_qc));
    return vc;
}

StepOutput HotStuffReplica::on_enter_view() {
    StepOutput out;
    maybe_propose(out);
    return out;
}

StepOutput HotStuffReplica::handle(const Message& m) {
    StepOutput out;
    if (const auto* vc = std::get_if<ViewChange>(&m)) on_view_change_msg(*vc, out);
    else if (const auto* nv = std::get_if<NewViewHs>(&m)) on_new_view(*nv, out);
    else if (const auto* pv = std::get_if<PrepareVote>(&m)) on_prepare_vote(*pv, out);
    else if (const auto* pc = std::get_if<PrecommitVote>(&m)) on_precommit_vote(*pc, out);
    else if (const auto* cv = std::get_if<CommitVote>(&m)) on_commit_vote(*cv, out);
    else if (const auto* qc = std::get_if<QcBroadcast>(&m)) on_qc(*qc, out);
    return out;
}

void HotStuffReplica::on_view_change_msg(const ViewChange& vc, StepOutput& out) {
    if (vc.sender >= ctx.n || !vc.prepare_qc.has_value()) return;
    Bytes payload = viewchange_payload(vc.e, vc.lock, vc.prepare_qc);
    if (!verify(ctx.scheme, ctx.replica_keys[vc.sender], payload, vc.sig)) return;
    if (!verify_qc(*vc.prepare_qc, ctx.n, ctx.t, ctx.replica_keys, ctx.scheme)) return;
    vcs[vc.e][vc.sender] = *vc.prepare_qc;
    maybe_propose(out);
}

void HotStuffReplica::maybe_propose(StepOutput& out) {
    View e = e_cur;
    if (leader_of(e, ctx.n) != id || proposed.count(e)) return;
    auto it = vcs.find(e - 1);
    if (it == vcs.end() || !quorum(it->second.size())) return;
    proposed.insert(e);

    const QuorumCertificate* high = nullptr;
    for (const auto& [sender, qc] : it->second) {
        if (!high || qc.e > high->e) high = &qc;
    }
    Value v = high->v.is_bottom ? v_i : high->v;

    NewViewHs nv{id, e, std::move(v), *high, {}};
    nv.sig = sign_payload(newview_hs_payload(nv.e, nv.v, nv.high_qc));
    out.msgs.push_back({kBroadcast, std::move(nv)});
}

void HotStuffReplica::on_new_view(const NewViewHs& m, StepOutput& out) {
    if (m.e != e_cur || prepared.count(m.e)) return;
    if (m.sender != leader_of(m.e, ctx.n)) return;
    if (!verify(ctx.scheme, ctx.replica_keys[m.sender], newview_hs_payload(m.e, m.v, m.high_qc),
                m.sig))
        return;
    if (!verify_qc(m.high_qc, ctx.n, ctx.t, ctx.replica_keys, ctx.scheme)) return;
    if (!(m.high_qc.v.is_bottom || m.high_qc.v == m.v)) return;
    if (!externally_valid(m.v)) return;
    if (!hs_safe_to_vote(lock, m.high_qc, m.v)) return;
    prepared.insert(m.e);

    PrepareVote pv{id, m.e, m.v, info_of(ctx.variant, m.high_qc), {}};
    pv.vote_sig = sign_payload(vote_payload(Phase::Prepare, pv.e, pv.v, pv.info));
    out.msgs.push_back({leader_of(m.e, ctx.n), std::move(pv)});
}

void HotStuffReplica::on_prepare_vote(const PrepareVote& m, StepOutput& out) {
    if (m.sender >= ctx.n) return;
    Bytes payload = vote_payload(Phase::Prepare, m.e, m.v, m.info);
    if (!verify(ctx.scheme, ctx.replica_keys[m.sender], payload, m.vote_sig)) return;
    auto& tally = prep_votes[{m.e, value_key(m.v), info_key(m.info)}];
    tally[m.sender] = m.vote_sig;
    if (leader_of(m.e, ctx.n) != id || prepare_qc_sent.count(m.e) || !quorum(tally.size())) return;
    prepare_qc_sent.insert(m.e);

    std::vector<std::pair<ReplicaId, Signature>> votes(tally.begin(), tally.end());
    QuorumCertificate qc{Phase::Prepare, m.e, m.v, aggregate(votes, ctx.n), m.info};
    out.msgs.push_back({kBroadcast, QcBroadcast{id, std::move(qc)}});
}

void HotStuffReplica::on_precommit_vote(const PrecommitVote& m, StepOutput& out) {
    if (m.sender >= ctx.n) return;
    Bytes payload = vote_payload(Phase::Precommit, m.e, m.v, Info::null());
    if (!verify(ctx.scheme, ctx.replica_keys[m.sender], payload, m.vote_sig)) return;
    auto& tally = precommit_votes[{m.e, value_key(m.v)}];
    tally[m.sender] = m.vote_sig;
    if (leader_of(m.e, ctx.n) != id || precommit_qc_sent.count(m.e) || !quorum(tally.size()))
        return;
    precommit_qc_sent.insert(m.e);

    std::vector<std::pair<ReplicaId, Signature>> votes(tally.begin(), tally.end());
    QuorumCertificate qc{Phase::Precommit, m.e, m.v, aggregate(votes, ctx.n), std::nullopt};
    out.msgs.push_back({kBroadcast, QcBroadcast{id, std::move(qc)}});
}

void HotStuffReplica::on_commit_vote(const CommitVote& m, StepOutput& out) {
    if (m.sender >= ctx.n) return;
    Bytes payload = vote_payload(Phase::Commit, m.e, m.v, Info::null());
    if (!verify(ctx.scheme, ctx.replica_keys[m.sender], payload, m.vote_sig)) return;
    auto& tally = commit_votes[{m.e, value_key(m.v)}];
    tally[m.sender] = m.vote_sig;
    if (leader_of(m.e, ctx.n) != id || commit_qc_sent.count(m.e) || !quorum(tally.size())) return;
    commit_qc_sent.insert(m.e);

    std::vector<std::pair<ReplicaId, Signature>> votes(tally.begin(), tally.end());
    QuorumCertificate qc{Phase::Commit, m.e, m.v, aggregate(votes, ctx.n), std::nullopt};
    out.msgs.push_back({kBroadcast, QcBroadcast{id, std::move(qc)}});
}

void HotStuffReplica::on_qc(const QcBroadcast& m, StepOutput& out) {
    if (!verify_qc(m.qc, ctx.n, ctx.t, ctx.replica_keys, ctx.scheme) || m.qc.e == 0) return;
    if (m.qc.e != e_cur) return;
    switch (m.qc.phase) {
        case Phase::Prepare: {
            if (precommitted.count(m.qc.e)) return;
            precommitted.insert(m.qc.e);
            prepare_qc = m.qc;
            PrecommitVote pv{id, m.qc.e, m.qc.v, {}};
            pv.vote_sig = sign_payload(vote_payload(Phase::Precommit, pv.e, pv.v, Info::null()));
            out.msgs.push_back({leader_of(m.qc.e, ctx.n), std::move(pv)});
            break;
        }
        case Phase::Precommit: {
            if (committed.count(m.qc.e)) return;
            committed.insert(m.qc.e);
            lock = Lock{m.qc.e, m.qc.v, std::nullopt};
            CommitVote cv{id, m.qc.e, m.qc.v, {}};
            cv.vote_sig = sign_payload(vote_payload(Phase::Commit, cv.e, cv.v, Info::null()));
            out.msgs.push_back({leader_of(m.qc.e, ctx.n), std::move(cv)});
            break;
        }
        case Phase::Commit: {
            if (output_done) return;
            output_done = true;
            output_val = {m.qc.v, m.qc.e, m.qc.sigma};
            out.output = output_val;
            out.msgs.push_back({kClient, Reply{id, m.qc.e, m.qc.v, m.qc.sigma}});
            break;
        }
    }
}

}  // namespace bfl
