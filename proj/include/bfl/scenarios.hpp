#pragma once

#include <filesystem>
#include <limits>

#include "bfl/protocols.hpp"

namespace bfl {

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConsistencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StepWindow {
    std::uint64_t from = 0;
    std::uint64_t to = std::numeric_limits<std::uint64_t>::max();
    bool contains(std::uint64_t step) const { return step >= from && step <= to; }
    bool operator==(const StepWindow&) const = default;
};

// ---- network rules ---------------------------------------------------------

// Instances not in the same group cannot exchange messages while active.
struct Partition {
    std::vector<std::vector<std::uint32_t>> groups; // instance ids
    StepWindow window;
    bool operator==(const Partition&) const = default;
};

// Drops messages matching every present filter. from/to are identities
// (to may be kClient).
struct DetailedDrop {
    std::optional<MsgType> type;
    std::optional<std::uint32_t> from;
    std::optional<std::uint32_t> to;
    std::optional<View> view;
    std::optional<Phase> qc_phase; // applies to QcBroadcast only
    StepWindow window;
    bool operator==(const DetailedDrop&) const = default;
};

struct Delay {
    std::optional<std::uint32_t> from;
    std::optional<std::uint32_t> to;
    std::uint64_t steps = 1;
    bool operator==(const Delay&) const = default;
};

using NetworkRule = std::variant<Partition, DetailedDrop, Delay>;

// ---- adversary script ------------------------------------------------------

// Behave honestly but start from a scripted initial value.
struct FollowProtocolWith {
    std::uint32_t value_index = 0;
    bool operator==(const FollowProtocolWith&) const = default;
};

enum class HighQcKind : std::uint8_t { Genesis = 0, Own, Stored };

// One addressed copy of the lane's proposal.
struct NvRoute {
    std::vector<std::uint32_t> to; // identities
    HighQcKind highqc = HighQcKind::Genesis;
    View stored_view = 0; // for HighQcKind::Stored
    bool operator==(const NvRoute&) const = default;
};

// One value a Byzantine leader drives through the phases, with full control
// over who sees each certificate.
struct EquivocateLane {
    std::uint32_t value_index = 0;
    std::vector<NvRoute> nv_routes;
    std::vector<std::uint32_t> prepare_qc_to, precommit_qc_to, commit_qc_to; // identities
    bool store_prepare_qc = false; // stash for later NvRoute::Stored use
    bool operator==(const EquivocateLane&) const = default;
};

struct EquivocateProposal {
    View view = 0;
    std::vector<EquivocateLane> lanes;
    bool operator==(const EquivocateProposal&) const = default;
};

// Blind signed votes sent to the view's leader on view entry.
struct DoubleVote {
    View view = 0;
    std::vector<Phase> phases;
    std::vector<std::uint32_t> value_indices;
    bool operator==(const DoubleVote&) const = default;
};

struct WithholdVotes {
    View view = 0;
    std::optional<Phase> phase; // all phases when absent
    bool operator==(const WithholdVotes&) const = default;
};

// From `from_view` on, rewind lock/prepareQC to genesis when view-changing,
// so ViewChange messages carry lower-ranked locks and later votes follow.
struct SendStaleLock {
    View from_view = 0;
    bool operator==(const SendStaleLock&) const = default;
};

// Mac-model-only misbehaviour: targeted proposals/votes with self-minted
// tokens, optionally naming another sender, plus fabricated client replies.
struct ForgeMacVote {
    View view = 1;
    std::uint32_t value_index = 0;
    std::vector<std::uint32_t> propose_to;
    std::vector<Phase> phases;
    std::vector<std::uint32_t> vote_to;
    std::optional<ReplicaId> claim_sender;
    std::vector<ReplicaId> reply_quorum; // non-empty => fabricate a client reply
    bool operator==(const ForgeMacVote&) const = default;
};

enum class ForensicPolicy : std::uint8_t { Honest = 0, Withhold };

struct AnswerForensics {
    ForensicPolicy policy = ForensicPolicy::Honest;
    bool operator==(const AnswerForensics&) const = default;
};

using ScriptActionBody = std::variant<FollowProtocolWith, EquivocateProposal, DoubleVote,
                                      WithholdVotes, SendStaleLock, ForgeMacVote, AnswerForensics>;

struct ScriptAction {
    std::uint32_t instance = 0; // node-instance id
    ScriptActionBody body;
    bool operator==(const ScriptAction&) const = default;
};

// ---- scenario --------------------------------------------------------------

enum class CulpritsKind : std::uint8_t { Exact = 0, Empty, AtMostOne };

struct ExpectedOutcome {
    bool safety_violation = false;
    std::optional<std::pair<View, View>> conflicting_views;
    CulpritsKind culprits_kind = CulpritsKind::Empty;
    std::set<ReplicaId> culprits;
    std::vector<std::uint32_t> default_respondents; // instance ids; empty = all
    bool client_conflict = false; // mac worlds: conflicting replies without an honest violation
    bool operator==(const ExpectedOutcome&) const = default;
};

struct ScenarioSpec {
    std::string name;
    std::string description;
    std::uint32_t n = 4, t = 1, f = 0;
    ProtocolVariant variant = ProtocolVariant::PbftPk;
    bool mac_mode = false;
    SchemeId scheme = SchemeId::Ed25519;
    std::set<ReplicaId> byzantine;
    std::set<ReplicaId> twins; // subset of byzantine; get a second instance
    std::vector<Bytes> client_values; // payloads, client-signed at run time
    std::map<ReplicaId, std::uint32_t> initial_values; // identity -> value index
    std::vector<ScriptAction> adversary_script;
    std::vector<NetworkRule> network_rules;
    std::uint64_t view_budget = 30;
    std::uint64_t default_max_steps = 400;
    ExpectedOutcome expected;
};

std::string scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const std::string& json_text);
ScenarioSpec load_scenario(const std::filesystem::path& file);
void validate_scenario(const ScenarioSpec& spec);

std::vector<ScenarioSpec> builtin_corpus();
const ScenarioSpec* find_scenario(const std::vector<ScenarioSpec>& corpus, const std::string& name);

std::uint32_t initial_value_index(const ScenarioSpec& spec, ReplicaId id);

}  // namespace bfl
