#include "bfl/forensics.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>

namespace bfl {

using nlohmann::json;

std::string detect_status_name(DetectStatus s) {
    switch (s) {
        case DetectStatus::Proof: return "proof";
        case DetectStatus::Inconclusive: return "inconclusive";
        case DetectStatus::InsufficientWitnesses: return "insufficient-witnesses";
        case DetectStatus::NoConflict: return "no-conflict";
    }
    return "?";
}

namespace {

QuorumCertificate reply_qc(const Reply& r) {
    return QuorumCertificate{Phase::Commit, r.e, r.v, r.sigma, std::nullopt};
}

bool reply_verifies(const Reply& r, std::uint32_t n, std::uint32_t t,
                    const std::vector<Bytes>& keys, SchemeId scheme) {
    return r.e > 0 && verify_qc(reply_qc(r), n, t, keys, scheme);
}

bool in_range(View e, View low, View high) { return e > low && e <= high; }

bool nv_pbft_sig_ok(const NewViewPbft& m, const std::vector<Bytes>& keys, SchemeId scheme) {
    if (m.sender >= keys.size()) return false;
    return verify(scheme, keys[m.sender], newview_pbft_payload(m.e, m.v, m.m), m.sig);
}

bool nv_hs_sig_ok(const NewViewHs& m, const std::vector<Bytes>& keys, SchemeId scheme) {
    if (m.sender >= keys.size()) return false;
    return verify(scheme, keys[m.sender], newview_hs_payload(m.e, m.v, m.high_qc), m.sig);
}

// Status-certificate entries must all be attributable before their senders
// can be blamed.
bool status_entries_ok(const NewViewPbft& m, std::uint32_t n, std::uint32_t t,
                       const std::vector<Bytes>& keys, SchemeId scheme) {
    if (m.e == 0) return false;
    std::set<ReplicaId> senders;
    for (const auto& entry : m.m.entries) {
        if (entry.sender >= n || !senders.insert(entry.sender).second) return false;
        if (!verify(scheme, keys[entry.sender], viewchange_payload(m.e - 1, entry.lock, std::nullopt),
                    entry.sig))
            return false;
        if (entry.lock.e > 0) {
            if (!entry.lock.sigma) return false;
            QuorumCertificate as_qc{Phase::Prepare, entry.lock.e, entry.lock.v, *entry.lock.sigma,
                                    std::nullopt};
            if (!verify_qc(as_qc, n, t, keys, scheme)) return false;
        }
    }
    return senders.size() >= 2 * t + 1;
}

std::vector<ReplicaId> senders_of(const StatusCertificate& m) {
    std::vector<ReplicaId> out;
    for (const auto& e : m.entries) out.push_back(e.sender);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<ReplicaId> intersect_ids(const std::vector<ReplicaId>& a, const AggregateSignature& b) {
    std::vector<ReplicaId> out;
    for (ReplicaId id : a) {
        if (id < b.bitmap.size() && b.bitmap.test(id)) out.push_back(id);
    }
    return out;
}

void sort_canonical(std::vector<Message>& msgs) {
    std::sort(msgs.begin(), msgs.end(), [](const Message& a, const Message& b) {
        return encode_message(a) < encode_message(b);
    });
    msgs.erase(std::unique(msgs.begin(), msgs.end()), msgs.end());
}

}  // namespace

std::vector<Message> respond_request_proof(ProtocolVariant variant,
                                           const std::vector<TranscriptRecord>& transcript,
                                           const RequestProof& req, ReplicaId responder) {
    if (req.e >= req.e_high) throw BadRange("request-proof requires e < e'");

    std::vector<NewViewPbft> nvp;
    std::vector<NewViewHs> nvh;
    std::vector<QuorumCertificate> prepare_qcs;
    std::set<Bytes> seen;
    auto add_qc = [&](const QuorumCertificate& qc) {
        if (qc.phase != Phase::Prepare) return;
        if (seen.insert(encode_qc_bytes(qc)).second) prepare_qcs.push_back(qc);
    };

    for (const auto& rec : transcript) {
        if (rec.direction != TranscriptRecord::Direction::Received) continue;
        if (const auto* m = std::get_if<NewViewPbft>(&rec.msg)) {
            nvp.push_back(*m);
        } else if (const auto* m = std::get_if<NewViewHs>(&rec.msg)) {
            nvh.push_back(*m);
            add_qc(m->high_qc);
        } else if (const auto* m = std::get_if<QcBroadcast>(&rec.msg)) {
            add_qc(m->qc);
        } else if (const auto* m = std::get_if<ViewChange>(&rec.msg)) {
            if (m->prepare_qc) add_qc(*m->prepare_qc);
        }
    }

    std::vector<Message> out;
    switch (variant) {
        case ProtocolVariant::PbftPk:
            for (const auto& m : nvp) {
                if (!in_range(m.e, req.e, req.e_high) || m.m.entries.empty()) continue;
                auto [v2, e2] = highest_lock(m.m);
                if (v2 == req.v || e2 > req.e) continue;
                out.push_back(NewViewEvidence{responder, m});
            }
            break;
        case ProtocolVariant::HotStuffView:
            for (const auto& qc : prepare_qcs) {
                if (qc.v == req.v || !in_range(qc.e, req.e, req.e_high)) continue;
                if (!qc.info || qc.info->kind != InfoKind::ViewNum || qc.info->e_qc > req.e) continue;
                out.push_back(ProofAcrossView{responder, qc});
            }
            break;
        case ProtocolVariant::HotStuffHash:
            for (const auto& qc : prepare_qcs) {
                if (qc.v == req.v || !in_range(qc.e, req.e, req.e_high)) continue;
                if (!qc.info || qc.info->kind != InfoKind::HashOfHighQC) continue;
                out.push_back(ProofAcrossView{responder, qc});
            }
            for (const auto& m : nvh) {
                if (m.v == req.v || !in_range(m.e, req.e, req.e_high)) continue;
                if (m.high_qc.e > req.e) continue;
                out.push_back(NewViewEvidence{responder, m});
            }
            break;
        case ProtocolVariant::HotStuffNull:
            for (const auto& qc : prepare_qcs) {
                if (qc.v == req.v || !in_range(qc.e, req.e, req.e_high)) continue;
                out.push_back(ProofAcrossView{responder, qc});
            }
            for (const auto& m : nvh) {
                if (!in_range(m.e, req.e, req.e_high)) continue;
                out.push_back(NewViewEvidence{responder, m});
            }
            break;
    }
    sort_canonical(out);
    return out;
}

std::optional<ConflictingReplies> find_conflicting_replies(const std::vector<Message>& client_msgs,
                                                           std::uint32_t n, std::uint32_t t,
                                                           const std::vector<Bytes>& keys,
                                                           SchemeId scheme) {
    std::vector<Reply> replies;
    for (const auto& m : client_msgs) {
        if (const auto* r = std::get_if<Reply>(&m)) {
            if (reply_verifies(*r, n, t, keys, scheme)) replies.push_back(*r);
        }
    }
    std::sort(replies.begin(), replies.end(), [](const Reply& a, const Reply& b) {
        if (a.e != b.e) return a.e < b.e;
        if (a.v != b.v) return value_less(a.v, b.v);
        return a.sender < b.sender;
    });
    if (replies.empty()) return std::nullopt;
    const Reply& low = replies.front();
    for (const auto& r : replies) {
        if (!(r.v == low.v)) return ConflictingReplies{low, r};
    }
    return std::nullopt;
}

bool mac_replies_conflict(const std::vector<Message>& client_msgs) {
    std::optional<Value> first;
    for (const auto& m : client_msgs) {
        if (const auto* r = std::get_if<MacReply>(&m)) {
            if (!first) {
                first = r->v;
            } else if (!(*first == r->v)) {
                return true;
            }
        }
    }
    return false;
}

namespace {

std::optional<DetectResult> same_view_branch(const ConflictingReplies& cr, std::uint32_t n,
                                             std::uint32_t t, SchemeId scheme,
                                             ProtocolVariant variant) {
    if (cr.low.v == cr.high.v) return DetectResult{DetectStatus::NoConflict, std::nullopt, {}};
    if (cr.low.e != cr.high.e) return std::nullopt;
    CulpabilityProof proof;
    proof.variant = variant;
    proof.n = n;
    proof.t = t;
    proof.scheme = scheme;
    proof.rule = rules::kSameViewEquivocation;
    proof.replies = cr;
    proof.culprits = intersect(cr.low.sigma, cr.high.sigma);
    return DetectResult{DetectStatus::Proof, proof, {proof.culprits}};
}

CulpabilityProof base_proof(ProtocolVariant variant, std::uint32_t n, std::uint32_t t,
                            SchemeId scheme, const ConflictingReplies& cr) {
    CulpabilityProof p;
    p.variant = variant;
    p.n = n;
    p.t = t;
    p.scheme = scheme;
    p.replies = cr;
    return p;
}

std::vector<ProofAcrossView> sorted_qcs(const std::vector<Message>& responses) {
    std::vector<ProofAcrossView> qcs;
    for (const auto& m : responses) {
        if (const auto* q = std::get_if<ProofAcrossView>(&m)) qcs.push_back(*q);
    }
    std::sort(qcs.begin(), qcs.end(), [](const ProofAcrossView& a, const ProofAcrossView& b) {
        if (a.qc.e != b.qc.e) return a.qc.e < b.qc.e;
        if (!(a.qc.v == b.qc.v)) return value_less(a.qc.v, b.qc.v);
        return encode_qc_bytes(a.qc) < encode_qc_bytes(b.qc);
    });
    return qcs;
}

template <typename T>
std::vector<T> sorted_new_views(const std::vector<Message>& responses) {
    std::vector<T> nvs;
    for (const auto& m : responses) {
        if (const auto* ev = std::get_if<NewViewEvidence>(&m)) {
            if (const auto* inner = std::get_if<T>(&ev->m)) nvs.push_back(*inner);
        }
    }
    std::sort(nvs.begin(), nvs.end(), [](const T& a, const T& b) {
        if (a.e != b.e) return a.e < b.e;
        if (!(a.v == b.v)) return value_less(a.v, b.v);
        return encode_message(Message{a}) < encode_message(Message{b});
    });
    nvs.erase(std::unique(nvs.begin(), nvs.end()), nvs.end());
    return nvs;
}

}  // namespace

DetectResult detect_pbft(const ConflictingReplies& cr, const std::vector<Message>& responses,
                         std::uint32_t n, std::uint32_t t, const std::vector<Bytes>& keys,
                         SchemeId scheme) {
    if (auto r = same_view_branch(cr, n, t, scheme, ProtocolVariant::PbftPk)) return *r;

    DetectResult result{DetectStatus::InsufficientWitnesses, std::nullopt, {}};
    for (const auto& m : sorted_new_views<NewViewPbft>(responses)) {
        if (!in_range(m.e, cr.low.e, cr.high.e) || m.m.entries.empty()) continue;
        if (!nv_pbft_sig_ok(m, keys, scheme)) continue;
        if (!status_entries_ok(m, n, t, keys, scheme)) continue;
        auto [v2, e2] = highest_lock(m.m);
        if (v2 == cr.low.v || e2 > cr.low.e) continue;

        // Two conflicting locks at one view inside M convict their signers
        // directly.
        std::optional<std::pair<std::uint32_t, std::uint32_t>> pair;
        for (std::uint32_t i = 0; i < m.m.entries.size() && !pair; ++i) {
            for (std::uint32_t j = i + 1; j < m.m.entries.size() && !pair; ++j) {
                const Lock& a = m.m.entries[i].lock;
                const Lock& b = m.m.entries[j].lock;
                if (a.e > 0 && a.e == b.e && !(a.v == b.v)) pair = {i, j};
            }
        }
        CulpabilityProof proof = base_proof(ProtocolVariant::PbftPk, n, t, scheme, cr);
        proof.new_view_pbft = m;
        if (pair) {
            proof.rule = rules::kPbftWithinM;
            proof.lock_pair = pair;
            proof.culprits = intersect(*m.m.entries[pair->first].lock.sigma,
                                       *m.m.entries[pair->second].lock.sigma);
        } else {
            proof.rule = rules::kPbftCrossView;
            proof.culprits = intersect_ids(senders_of(m.m), cr.low.sigma);
        }
        if (proof.culprits.size() < t + 1) continue;
        result.candidates.push_back(proof.culprits);
        if (!result.proof) {
            result.status = DetectStatus::Proof;
            result.proof = proof;
        }
    }
    return result;
}

DetectResult detect_hs_view(const ConflictingReplies& cr, const std::vector<Message>& responses,
                            std::uint32_t n, std::uint32_t t, const std::vector<Bytes>& keys,
                            SchemeId scheme) {
    if (auto r = same_view_branch(cr, n, t, scheme, ProtocolVariant::HotStuffView)) return *r;

    DetectResult result{DetectStatus::InsufficientWitnesses, std::nullopt, {}};
    for (const auto& pav : sorted_qcs(responses)) {
        const auto& qc = pav.qc;
        if (qc.v == cr.low.v || !in_range(qc.e, cr.low.e, cr.high.e)) continue;
        if (!qc.info || qc.info->kind != InfoKind::ViewNum || qc.info->e_qc > cr.low.e) continue;
        if (!verify_qc(qc, n, t, keys, scheme)) continue;
        CulpabilityProof proof = base_proof(ProtocolVariant::HotStuffView, n, t, scheme, cr);
        proof.rule = rules::kHsViewCrossView;
        proof.prepare_qc = qc;
        proof.culprits = intersect(qc.sigma, cr.low.sigma);
        if (proof.culprits.size() < t + 1) continue;
        result.candidates.push_back(proof.culprits);
        if (!result.proof) {
            result.status = DetectStatus::Proof;
            result.proof = proof;
        }
    }
    return result;
}

DetectResult detect_hs_hash(const ConflictingReplies& cr, const std::vector<Message>& responses,
                            std::uint32_t n, std::uint32_t t, const std::vector<Bytes>& keys,
                            SchemeId scheme) {
    if (auto r = same_view_branch(cr, n, t, scheme, ProtocolVariant::HotStuffHash)) return *r;

    std::vector<NewViewHs> nv;
    for (const auto& m : sorted_new_views<NewViewHs>(responses)) {
        if (m.v == cr.low.v || !in_range(m.e, cr.low.e, cr.high.e)) continue;
        if (m.high_qc.e > cr.low.e) continue;
        if (!nv_hs_sig_ok(m, keys, scheme)) continue;
        if (!verify_qc(m.high_qc, n, t, keys, scheme)) continue;
        nv.push_back(m);
    }

    DetectResult result{DetectStatus::InsufficientWitnesses, std::nullopt, {}};
    for (const auto& pav : sorted_qcs(responses)) {
        const auto& qc = pav.qc;
        if (qc.v == cr.low.v || !in_range(qc.e, cr.low.e, cr.high.e)) continue;
        if (!qc.info || qc.info->kind != InfoKind::HashOfHighQC) continue;
        if (!verify_qc(qc, n, t, keys, scheme)) continue;
        const NewViewHs* linked = nullptr;
        for (const auto& m : nv) {
            if (sha256(encode_qc_bytes(m.high_qc)) == qc.info->digest) {
                linked = &m;
                break;
            }
        }
        if (!linked) continue;
        CulpabilityProof proof = base_proof(ProtocolVariant::HotStuffHash, n, t, scheme, cr);
        proof.rule = rules::kHsHashCrossView;
        proof.prepare_qc = qc;
        proof.new_view_hs = *linked;
        proof.culprits = intersect(qc.sigma, cr.low.sigma);
        if (proof.culprits.size() < t + 1) continue;
        result.candidates.push_back(proof.culprits);
        if (!result.proof) {
            result.status = DetectStatus::Proof;
            result.proof = proof;
        }
    }
    return result;
}

DetectResult detect_hs_null(const ConflictingReplies& cr, const std::vector<Message>& responses,
                            std::uint32_t n, std::uint32_t t, const std::vector<Bytes>& keys,
                            SchemeId scheme) {
    if (auto r = same_view_branch(cr, n, t, scheme, ProtocolVariant::HotStuffNull)) return *r;

    auto nvs = sorted_new_views<NewViewHs>(responses);
    DetectResult result{DetectStatus::Inconclusive, std::nullopt, {}};
    for (std::size_t i = 0; i < nvs.size(); ++i) {
        for (std::size_t j = i + 1; j < nvs.size(); ++j) {
            const NewViewHs& a = nvs[i];
            const NewViewHs& b = nvs[j];
            if (a.e != b.e || a.sender != b.sender || a.v == b.v) continue;
            if (a.sender != leader_of(a.e, n)) continue;
            if (!nv_hs_sig_ok(a, keys, scheme) || !nv_hs_sig_ok(b, keys, scheme)) continue;
            CulpabilityProof proof = base_proof(ProtocolVariant::HotStuffNull, n, t, scheme, cr);
            proof.rule = rules::kLeaderEquivocation;
            proof.nv_pair = {a, b};
            proof.culprits = {a.sender};
            result.candidates.push_back(proof.culprits);
            if (!result.proof) {
                result.status = DetectStatus::Proof;
                result.proof = proof;
            }
        }
    }
    return result;
}

DetectResult detect(ProtocolVariant variant, const ConflictingReplies& replies,
                    const std::vector<Message>& responses, std::uint32_t n, std::uint32_t t,
                    const std::vector<Bytes>& keys, SchemeId scheme) {
    switch (variant) {
        case ProtocolVariant::PbftPk: return detect_pbft(replies, responses, n, t, keys, scheme);
        case ProtocolVariant::HotStuffView:
            return detect_hs_view(replies, responses, n, t, keys, scheme);
        case ProtocolVariant::HotStuffHash:
            return detect_hs_hash(replies, responses, n, t, keys, scheme);
        case ProtocolVariant::HotStuffNull:
            return detect_hs_null(replies, responses, n, t, keys, scheme);
    }
    throw VariantError("bad variant");
}

// ---- verifier ---------------------------------------------------------------

namespace {

void require(bool ok, const char* predicate) {
    if (!ok) throw InvalidProof(predicate);
}

}  // namespace

std::vector<ReplicaId> verify_proof(const CulpabilityProof& proof, std::uint32_t n, std::uint32_t t,
                                    const std::vector<Bytes>& keys) {
    require(proof.n == n && proof.t == t && n == 3 * t + 1, "configuration");
    require(keys.size() == n, "key-registry");
    const SchemeId scheme = proof.scheme;
    const Reply& low = proof.replies.low;
    const Reply& high = proof.replies.high;

    require(!(low.v == high.v), "replies-conflict");
    require(low.e <= high.e, "reply-order");
    require(reply_verifies(low, n, t, keys, scheme), "reply-low-signature");
    require(reply_verifies(high, n, t, keys, scheme), "reply-high-signature");

    std::vector<ReplicaId> culprits;
    if (proof.rule == rules::kSameViewEquivocation) {
        require(low.e == high.e, "rule");
        culprits = intersect(low.sigma, high.sigma);
        require(culprits.size() >= t + 1, "culprit-bound");
    } else if (proof.rule == rules::kPbftCrossView || proof.rule == rules::kPbftWithinM) {
        require(low.e < high.e, "rule");
        require(proof.new_view_pbft.has_value(), "evidence-present");
        const NewViewPbft& m = *proof.new_view_pbft;
        require(in_range(m.e, low.e, high.e), "evidence-view-range");
        require(nv_pbft_sig_ok(m, keys, scheme), "evidence-signature");
        require(status_entries_ok(m, n, t, keys, scheme), "status-certificate");
        auto [v2, e2] = highest_lock(m.m);
        require(!(v2 == low.v), "rule");
        require(e2 <= low.e, "rule");
        if (proof.rule == rules::kPbftWithinM) {
            require(proof.lock_pair.has_value(), "evidence-present");
            auto [i, j] = *proof.lock_pair;
            require(i < m.m.entries.size() && j < m.m.entries.size() && i != j, "lock-pair");
            const Lock& a = m.m.entries[i].lock;
            const Lock& b = m.m.entries[j].lock;
            require(a.e > 0 && a.e == b.e && !(a.v == b.v), "rule");
            require(a.sigma.has_value() && b.sigma.has_value(), "lock-aggregate");
            culprits = intersect(*a.sigma, *b.sigma);
        } else {
            culprits = intersect_ids(senders_of(m.m), low.sigma);
        }
        require(culprits.size() >= t + 1, "culprit-bound");
    } else if (proof.rule == rules::kHsViewCrossView) {
        require(low.e < high.e, "rule");
        require(proof.prepare_qc.has_value(), "evidence-present");
        const QuorumCertificate& qc = *proof.prepare_qc;
        require(qc.phase == Phase::Prepare, "evidence-phase");
        require(verify_qc(qc, n, t, keys, scheme) && qc.e > 0, "evidence-signature");
        require(!(qc.v == low.v), "rule");
        require(in_range(qc.e, low.e, high.e), "evidence-view-range");
        require(qc.info && qc.info->kind == InfoKind::ViewNum, "evidence-info");
        require(qc.info->e_qc <= low.e, "rule");
        culprits = intersect(qc.sigma, low.sigma);
        require(culprits.size() >= t + 1, "culprit-bound");
    } else if (proof.rule == rules::kHsHashCrossView) {
        require(low.e < high.e, "rule");
        require(proof.prepare_qc.has_value() && proof.new_view_hs.has_value(), "evidence-present");
        const QuorumCertificate& qc = *proof.prepare_qc;
        const NewViewHs& m = *proof.new_view_hs;
        require(qc.phase == Phase::Prepare, "evidence-phase");
        require(verify_qc(qc, n, t, keys, scheme) && qc.e > 0, "evidence-signature");
        require(!(qc.v == low.v), "rule");
        require(in_range(qc.e, low.e, high.e), "evidence-view-range");
        require(qc.info && qc.info->kind == InfoKind::HashOfHighQC, "evidence-info");
        require(nv_hs_sig_ok(m, keys, scheme), "evidence-signature");
        require(verify_qc(m.high_qc, n, t, keys, scheme), "evidence-signature");
        require(in_range(m.e, low.e, high.e), "evidence-view-range");
        require(!(m.v == low.v), "rule");
        require(m.high_qc.e <= low.e, "rule");
        require(sha256(encode_qc_bytes(m.high_qc)) == qc.info->digest, "hash-linkage");
        culprits = intersect(qc.sigma, low.sigma);
        require(culprits.size() >= t + 1, "culprit-bound");
    } else if (proof.rule == rules::kLeaderEquivocation) {
        require(proof.nv_pair.has_value(), "evidence-present");
        const auto& [a, b] = *proof.nv_pair;
        require(a.e == b.e && a.e > 0, "rule");
        require(a.sender == b.sender, "rule");
        require(a.sender == leader_of(a.e, n), "leader");
        require(!(a.v == b.v), "rule");
        require(nv_hs_sig_ok(a, keys, scheme) && nv_hs_sig_ok(b, keys, scheme),
                "evidence-signature");
        culprits = {a.sender};
    } else {
        throw InvalidProof("rule-unknown");
    }

    require(culprits == proof.culprits, "culprit-set");
    return culprits;
}

// ---- proof files -------------------------------------------------------------

namespace {

std::string hex_msg(const Message& m) { return to_hex(encode_message(m)); }

Message msg_from_hex(const std::string& h) { return decode_message(from_hex(h)); }

json fingerprints(const std::vector<Bytes>& keys, const Bytes& client_key) {
    json fp = json::array();
    for (const auto& k : keys) fp.push_back(sha256(k).hex());
    return json{{"replicas", fp}, {"client", sha256(client_key).hex()}};
}

std::string body_digest(json j) {
    j.erase("digest");
    return sha256(to_bytes(j.dump())).hex();
}

}  // namespace

std::string proof_to_json(const CulpabilityProof& proof, const std::vector<Bytes>& keys,
                          const Bytes& client_key) {
    json j;
    j["format"] = "bfl-proof-1";
    j["variant"] = variant_name(proof.variant);
    j["n"] = proof.n;
    j["t"] = proof.t;
    j["scheme"] = scheme_name(proof.scheme);
    j["rule"] = proof.rule;
    j["reply_low"] = hex_msg(Message{proof.replies.low});
    j["reply_high"] = hex_msg(Message{proof.replies.high});
    j["culprits"] = proof.culprits;
    j["keys"] = fingerprints(keys, client_key);
    json ev = json::object();
    if (proof.new_view_pbft) ev["new_view_pbft"] = hex_msg(Message{*proof.new_view_pbft});
    if (proof.lock_pair) ev["lock_pair"] = {proof.lock_pair->first, proof.lock_pair->second};
    if (proof.prepare_qc) ev["prepare_qc"] = to_hex(encode_qc_bytes(*proof.prepare_qc));
    if (proof.new_view_hs) ev["new_view_hs"] = hex_msg(Message{*proof.new_view_hs});
    if (proof.nv_pair) {
        ev["nv_a"] = hex_msg(Message{proof.nv_pair->first});
        ev["nv_b"] = hex_msg(Message{proof.nv_pair->second});
    }
    j["evidence"] = ev;
    j["digest"] = body_digest(j);
    return j.dump();
}

CulpabilityProof proof_from_json(const std::string& text, const std::vector<Bytes>& keys,
                                 const Bytes& client_key) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception&) {
        throw InvalidProof("parse");
    }
    try {
        if (j.at("format").get<std::string>() != "bfl-proof-1") throw InvalidProof("format");
        if (j.at("digest").get<std::string>() != body_digest(j)) throw InvalidProof("digest");
        if (j.at("keys") != fingerprints(keys, client_key)) throw InvalidProof("key-registry");

        CulpabilityProof p;
        p.variant = variant_from_name(j.at("variant").get<std::string>());
        p.n = j.at("n").get<std::uint32_t>();
        p.t = j.at("t").get<std::uint32_t>();
        p.scheme = scheme_from_name(j.at("scheme").get<std::string>());
        p.rule = j.at("rule").get<std::string>();
        p.replies.low = std::get<Reply>(msg_from_hex(j.at("reply_low").get<std::string>()));
        p.replies.high = std::get<Reply>(msg_from_hex(j.at("reply_high").get<std::string>()));
        p.culprits = j.at("culprits").get<std::vector<ReplicaId>>();
        const json& ev = j.at("evidence");
        if (ev.contains("new_view_pbft"))
            p.new_view_pbft =
                std::get<NewViewPbft>(msg_from_hex(ev.at("new_view_pbft").get<std::string>()));
        if (ev.contains("lock_pair"))
            p.lock_pair = {ev.at("lock_pair").at(0).get<std::uint32_t>(),
                           ev.at("lock_pair").at(1).get<std::uint32_t>()};
        if (ev.contains("prepare_qc")) {
            Bytes raw = from_hex(ev.at("prepare_qc").get<std::string>());
            ByteReader r(raw);
            p.prepare_qc = decode_qc(r);
            r.expect_done();
        }
        if (ev.contains("new_view_hs"))
            p.new_view_hs =
                std::get<NewViewHs>(msg_from_hex(ev.at("new_view_hs").get<std::string>()));
        if (ev.contains("nv_a") || ev.contains("nv_b"))
            p.nv_pair = {std::get<NewViewHs>(msg_from_hex(ev.at("nv_a").get<std::string>())),
                         std::get<NewViewHs>(msg_from_hex(ev.at("nv_b").get<std::string>()))};
        return p;
    } catch (const InvalidProof&) {
        throw;
    } catch (const json::exception&) {
        throw InvalidProof("schema");
    } catch (const CodecError&) {
        throw InvalidProof("encoding");
    } catch (const std::bad_variant_access&) {
        throw InvalidProof("encoding");
    } catch (const CryptoError&) {
        throw InvalidProof("encoding");
    } catch (const VariantError&) {
        throw InvalidProof("schema");
    }
}

void save_proof(const CulpabilityProof& proof, const std::vector<Bytes>& keys,
                const Bytes& client_key, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << proof_to_json(proof, keys, client_key);
}

CulpabilityProof load_proof(const std::filesystem::path& file, const std::vector<Bytes>& keys,
                            const Bytes& client_key) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return proof_from_json(text, keys, client_key);
}

}  // namespace bfl
