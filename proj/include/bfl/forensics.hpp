#pragma once

#include <filesystem>

#include "bfl/protocols.hpp"

namespace bfl {

struct InvalidProof : std::runtime_error {
    // `predicate` names the first failing check.
    explicit InvalidProof(const std::string& predicate)
        : std::runtime_error("invalid proof: " + predicate), predicate(predicate) {}
    std::string predicate;
};

struct ConflictingReplies {
    Reply low;  // earlier view (or equal)
    Reply high; // later view, different value
    bool operator==(const ConflictingReplies&) const = default;
};

// Rule tags; these strings appear in proof files and reports.
namespace rules {
inline constexpr const char* kSameViewEquivocation = "same-view equivocation";
inline constexpr const char* kPbftCrossView = "stale lock vs signed commit";
inline constexpr const char* kPbftWithinM = "conflicting locks within status certificate";
inline constexpr const char* kHsViewCrossView = "prepare against stale highQC view";
inline constexpr const char* kHsHashCrossView = "prepare against stale highQC hash";
inline constexpr const char* kLeaderEquivocation = "leader equivocation";
}  // namespace rules

struct CulpabilityProof {
    ProtocolVariant variant = ProtocolVariant::PbftPk;
    std::uint32_t n = 0, t = 0;
    SchemeId scheme = SchemeId::Ed25519;
    std::string rule;
    ConflictingReplies replies;
    // Evidence; which fields are set depends on the rule.
    std::optional<NewViewPbft> new_view_pbft;                    // pbft cross-view / within-M
    std::optional<std::pair<std::uint32_t, std::uint32_t>> lock_pair; // entry indices into M
    std::optional<QuorumCertificate> prepare_qc;                 // hs cross-view
    std::optional<NewViewHs> new_view_hs;                        // hs-hash linkage
    std::optional<std::pair<NewViewHs, NewViewHs>> nv_pair;      // leader equivocation
    std::vector<ReplicaId> culprits;
};

enum class DetectStatus : std::uint8_t { Proof = 0, Inconclusive, InsufficientWitnesses, NoConflict };

std::string detect_status_name(DetectStatus s);

struct DetectResult {
    DetectStatus status = DetectStatus::NoConflict;
    std::optional<CulpabilityProof> proof;
    // All qualifying candidate culprit sets, for verbose inspection.
    std::vector<std::vector<ReplicaId>> candidates;
};

// Replica side of the forensic protocol: scan received messages and return
// qualifying evidence for the client's request.
std::vector<Message> respond_request_proof(ProtocolVariant variant,
                                           const std::vector<TranscriptRecord>& transcript,
                                           const RequestProof& req, ReplicaId responder);

// Client side. `responses` is the concatenation of all witness answers.
DetectResult detect_pbft(const ConflictingReplies& replies, const std::vector<Message>& responses,
                         std::uint32_t n, std::uint32_t t, const std::vector<Bytes>& keys,
                         SchemeId scheme);
DetectResult detect_hs_view(const ConflictingReplies& replies, const std::vector<Message>& responses,
                            std::uint32_t n, std::uint32_t t, const std::vector<Bytes>& keys,
                            SchemeId scheme);
DetectResult detect_hs_hash(const ConflictingReplies& replies, const std::vector<Message>& responses,
                            std::uint32_t n, std::uint32_t t, const std::vector<Bytes>& keys,
                            SchemeId scheme);
DetectResult detect_hs_null(const ConflictingReplies& replies, const std::vector<Message>& responses,
                            std::uint32_t n, std::uint32_t t, const std::vector<Bytes>& keys,
                            SchemeId scheme);

DetectResult detect(ProtocolVariant variant, const ConflictingReplies& replies,
                    const std::vector<Message>& responses, std::uint32_t n, std::uint32_t t,
                    const std::vector<Bytes>& keys, SchemeId scheme);

// Picks the canonical conflicting pair among verified client replies, or
// nullopt when all replies agree. Replies whose aggregate fails commitQC
// verification are ignored.
std::optional<ConflictingReplies> find_conflicting_replies(const std::vector<Message>& client_msgs,
                                                           std::uint32_t n, std::uint32_t t,
                                                           const std::vector<Bytes>& keys,
                                                           SchemeId scheme);

// Mac-model replies carry no transferable signatures: report a conflict when
// two claimed replies disagree, which is never attributable.
bool mac_replies_conflict(const std::vector<Message>& client_msgs);

// Independent verification from the proof alone: re-checks every signature
// and the rule's logical predicate, recomputes the culprit set from scratch.
// Throws InvalidProof naming the first failing predicate.
std::vector<ReplicaId> verify_proof(const CulpabilityProof& proof, std::uint32_t n, std::uint32_t t,
                                    const std::vector<Bytes>& keys);

// Self-contained proof document (embeds certificates, culprits, key
// fingerprints and an integrity digest).
std::string proof_to_json(const CulpabilityProof& proof, const std::vector<Bytes>& keys,
                          const Bytes& client_key);
CulpabilityProof proof_from_json(const std::string& text, const std::vector<Bytes>& keys,
                                 const Bytes& client_key);
void save_proof(const CulpabilityProof& proof, const std::vector<Bytes>& keys,
                const Bytes& client_key, const std::filesystem::path& file);
CulpabilityProof load_proof(const std::filesystem::path& file, const std::vector<Bytes>& keys,
                            const Bytes& client_key);

}  // namespace bfl
