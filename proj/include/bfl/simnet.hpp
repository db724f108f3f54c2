#pragma once

#include "bfl/scenarios.hpp"

namespace bfl {

struct NodeInstanceInfo {
    std::uint32_t instance = 0;
    ReplicaId identity = 0;
    bool byzantine = false;
    ForensicPolicy policy = ForensicPolicy::Honest;
    bool operator==(const NodeInstanceInfo&) const = default;
};

struct DropRecord {
    std::uint64_t step = 0;
    std::uint32_t from_instance = 0;
    std::uint32_t to_instance = 0; // or kClient
    MsgType type = MsgType::Reply;
    std::string reason;
    bool operator==(const DropRecord&) const = default;
};

struct ClientDelivery {
    std::uint64_t step = 0;
    std::uint32_t from_instance = 0;
    Message msg;
    bool operator==(const ClientDelivery&) const = default;
};

// Everything that persists to a transcript directory.
struct TranscriptBundle {
    std::string scenario_name;
    std::uint32_t n = 0, t = 0;
    ProtocolVariant variant = ProtocolVariant::PbftPk;
    bool mac_mode = false;
    SchemeId scheme = SchemeId::Ed25519;
    std::uint64_t seed = 0, max_steps = 0, step_count = 0, view_budget = 0;
    bool timed_out = false;
    std::vector<Bytes> replica_keys;
    Bytes client_key;
    std::vector<NodeInstanceInfo> instances;
    std::map<std::uint32_t, std::vector<TranscriptRecord>> transcripts;
    std::vector<ClientDelivery> client_inbox;
    std::vector<DropRecord> drops;
};

using OutputTriple = std::tuple<Value, View, AggregateSignature>;

struct ExecutionResult {
    ScenarioSpec spec;
    TranscriptBundle bundle;
    std::map<std::uint32_t, std::optional<OutputTriple>> outputs;
    ProtocolContext ctx;
    std::vector<KeyPair> replica_keypairs;
    KeyPair client_keypair;
};

ExecutionResult run(const ScenarioSpec& spec, std::uint64_t seed, std::uint64_t max_steps = 0);

// Post-execution forensic query phase: each respondent answers a
// Request-Proof over its own received messages (Byzantine respondents follow
// their scripted policy).
std::vector<std::pair<std::uint32_t, std::vector<Message>>> query_witnesses(
    const TranscriptBundle& bundle, const RequestProof& req,
    const std::vector<std::uint32_t>& respondents);

void save_bundle(const TranscriptBundle& bundle, const std::filesystem::path& dir);
TranscriptBundle load_bundle(const std::filesystem::path& dir);

// Distinct honest output values among honest instances (safety check).
std::vector<Value> honest_output_values(const ExecutionResult& result);

// Canonical byte serialization of everything the forensic client sees:
// conflicting replies plus per-respondent responses, order-normalized.
Bytes client_visible_forensic_input(const TranscriptBundle& bundle, const RequestProof& req,
                                    const std::vector<std::uint32_t>& respondents);

Digest mac_pair_key(std::uint64_t seed, ReplicaId a, ReplicaId b);
Digest mac_token(const Digest& pair_key, const Bytes& payload);
Bytes mac_vote_payload(Phase phase, View e, const Value& v);

}  // namespace bfl
