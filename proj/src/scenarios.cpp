#include "bfl/scenarios.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>

namespace bfl {

using nlohmann::json;

namespace {

// ---- enum names --------------------------------------------------------------

std::string phase_name(Phase p) {
    switch (p) {
        case Phase::Prepare: return "prepare";
        case Phase::Precommit: return "precommit";
        case Phase::Commit: return "commit";
    }
    throw SchemaError("bad phase");
}

Phase phase_from_name(const std::string& s) {
    if (s == "prepare") return Phase::Prepare;
    if (s == "precommit") return Phase::Precommit;
    if (s == "commit") return Phase::Commit;
    throw SchemaError("unknown phase: " + s);
}

std::string highqc_kind_name(HighQcKind k) {
    switch (k) {
        case HighQcKind::Genesis: return "genesis";
        case HighQcKind::Own: return "own";
        case HighQcKind::Stored: return "stored";
    }
    throw SchemaError("bad highqc kind");
}

HighQcKind highqc_kind_from_name(const std::string& s) {
    if (s == "genesis") return HighQcKind::Genesis;
    if (s == "own") return HighQcKind::Own;
    if (s == "stored") return HighQcKind::Stored;
    throw SchemaError("unknown highqc kind: " + s);
}

std::string policy_name(ForensicPolicy p) {
    return p == ForensicPolicy::Honest ? "honest" : "withhold";
}

ForensicPolicy policy_from_name(const std::string& s) {
    if (s == "honest") return ForensicPolicy::Honest;
    if (s == "withhold") return ForensicPolicy::Withhold;
    throw SchemaError("unknown forensic policy: " + s);
}

std::string culprits_kind_name(CulpritsKind k) {
    switch (k) {
        case CulpritsKind::Exact: return "exact";
        case CulpritsKind::Empty: return "empty";
        case CulpritsKind::AtMostOne: return "at-most-one";
    }
    throw SchemaError("bad culprits kind");
}

CulpritsKind culprits_kind_from_name(const std::string& s) {
    if (s == "exact") return CulpritsKind::Exact;
    if (s == "empty") return CulpritsKind::Empty;
    if (s == "at-most-one") return CulpritsKind::AtMostOne;
    throw SchemaError("unknown culprits kind: " + s);
}

// ---- json helpers ------------------------------------------------------------

json window_to_json(const StepWindow& w) {
    json j = json::object();
    if (w.from != 0) j["from"] = w.from;
    if (w.to != std::numeric_limits<std::uint64_t>::max()) j["to"] = w.to;
    return j;
}

StepWindow window_from_json(const json& j) {
    StepWindow w;
    if (j.contains("from")) w.from = j.at("from").get<std::uint64_t>();
    if (j.contains("to")) w.to = j.at("to").get<std::uint64_t>();
    return w;
}

json phases_to_json(const std::vector<Phase>& phases) {
    json a = json::array();
    for (Phase p : phases) a.push_back(phase_name(p));
    return a;
}

std::vector<Phase> phases_from_json(const json& j) {
    std::vector<Phase> out;
    for (const auto& p : j) out.push_back(phase_from_name(p.get<std::string>()));
    return out;
}

json rule_to_json(const NetworkRule& rule) {
    json j;
    if (const auto* p = std::get_if<Partition>(&rule)) {
        j["rule"] = "partition";
        j["groups"] = p->groups;
        j["window"] = window_to_json(p->window);
    } else if (const auto* d = std::get_if<DetailedDrop>(&rule)) {
        j["rule"] = "drop";
        if (d->type) j["type"] = msg_type_name(*d->type);
        if (d->from) j["from"] = *d->from;
        if (d->to) j["to"] = *d->to;
        if (d->view) j["view"] = *d->view;
        if (d->qc_phase) j["qc_phase"] = phase_name(*d->qc_phase);
        j["window"] = window_to_json(d->window);
    } else {
        const auto& dl = std::get<Delay>(rule);
        j["rule"] = "delay";
        if (dl.from) j["from"] = *dl.from;
        if (dl.to) j["to"] = *dl.to;
        j["steps"] = dl.steps;
    }
    return j;
}

NetworkRule rule_from_json(const json& j) {
    const std::string kind = j.at("rule").get<std::string>();
    if (kind == "partition") {
        Partition p;
        p.groups = j.at("groups").get<std::vector<std::vector<std::uint32_t>>>();
        if (j.contains("window")) p.window = window_from_json(j.at("window"));
        return p;
    }
    if (kind == "drop") {
        DetailedDrop d;
        if (j.contains("type")) {
            auto t = msg_type_from_name(j.at("type").get<std::string>());
            if (!t) throw SchemaError("unknown message type: " + j.at("type").get<std::string>());
            d.type = *t;
        }
        if (j.contains("from")) d.from = j.at("from").get<std::uint32_t>();
        if (j.contains("to")) d.to = j.at("to").get<std::uint32_t>();
        if (j.contains("view")) d.view = j.at("view").get<View>();
        if (j.contains("qc_phase")) d.qc_phase = phase_from_name(j.at("qc_phase").get<std::string>());
        if (j.contains("window")) d.window = window_from_json(j.at("window"));
        return d;
    }
    if (kind == "delay") {
        Delay dl;
        if (j.contains("from")) dl.from = j.at("from").get<std::uint32_t>();
        if (j.contains("to")) dl.to = j.at("to").get<std::uint32_t>();
        dl.steps = j.at("steps").get<std::uint64_t>();
        return dl;
    }
    throw SchemaError("unknown network rule: " + kind);
}

json action_to_json(const ScriptAction& action) {
    json j;
    j["instance"] = action.instance;
    if (const auto* a = std::get_if<FollowProtocolWith>(&action.body)) {
        j["action"] = "follow-protocol-with";
        j["value_index"] = a->value_index;
    } else if (const auto* a = std::get_if<EquivocateProposal>(&action.body)) {
        j["action"] = "equivocate-proposal";
        j["view"] = a->view;
        json lanes = json::array();
        for (const auto& lane : a->lanes) {
            json l;
            l["value_index"] = lane.value_index;
            json routes = json::array();
            for (const auto& r : lane.nv_routes) {
                json rj;
                rj["to"] = r.to;
                rj["highqc"] = highqc_kind_name(r.highqc);
                if (r.highqc == HighQcKind::Stored) rj["stored_view"] = r.stored_view;
                routes.push_back(rj);
            }
            l["nv_routes"] = routes;
            l["prepare_qc_to"] = lane.prepare_qc_to;
            l["precommit_qc_to"] = lane.precommit_qc_to;
            l["commit_qc_to"] = lane.commit_qc_to;
            if (lane.store_prepare_qc) l["store_prepare_qc"] = true;
            lanes.push_back(l);
        }
        j["lanes"] = lanes;
    } else if (const auto* a = std::get_if<DoubleVote>(&action.body)) {
        j["action"] = "double-vote";
        j["view"] = a->view;
        j["phases"] = phases_to_json(a->phases);
        j["value_indices"] = a->value_indices;
    } else if (const auto* a = std::get_if<WithholdVotes>(&action.body)) {
        j["action"] = "withhold-votes";
        j["view"] = a->view;
        if (a->phase) j["phase"] = phase_name(*a->phase);
    } else if (const auto* a = std::get_if<SendStaleLock>(&action.body)) {
        j["action"] = "send-stale-lock";
        j["from_view"] = a->from_view;
    } else if (const auto* a = std::get_if<ForgeMacVote>(&action.body)) {
        j["action"] = "forge-mac-vote";
        j["view"] = a->view;
        j["value_index"] = a->value_index;
        j["propose_to"] = a->propose_to;
        j["phases"] = phases_to_json(a->phases);
        j["vote_to"] = a->vote_to;
        if (a->claim_sender) j["claim_sender"] = *a->claim_sender;
        j["reply_quorum"] = a->reply_quorum;
    } else {
        const auto& af = std::get<AnswerForensics>(action.body);
        j["action"] = "answer-forensics";
        j["policy"] = policy_name(af.policy);
    }
    return j;
}

ScriptAction action_from_json(const json& j) {
    ScriptAction action;
    action.instance = j.at("instance").get<std::uint32_t>();
    const std::string kind = j.at("action").get<std::string>();
    if (kind == "follow-protocol-with") {
        action.body = FollowProtocolWith{j.at("value_index").get<std::uint32_t>()};
    } else if (kind == "equivocate-proposal") {
        EquivocateProposal a;
        a.view = j.at("view").get<View>();
        for (const auto& l : j.at("lanes")) {
            EquivocateLane lane;
            lane.value_index = l.at("value_index").get<std::uint32_t>();
            for (const auto& rj : l.at("nv_routes")) {
                NvRoute r;
                r.to = rj.at("to").get<std::vector<std::uint32_t>>();
                r.highqc = highqc_kind_from_name(rj.at("highqc").get<std::string>());
                if (rj.contains("stored_view")) r.stored_view = rj.at("stored_view").get<View>();
                lane.nv_routes.push_back(r);
            }
            lane.prepare_qc_to = l.at("prepare_qc_to").get<std::vector<std::uint32_t>>();
            lane.precommit_qc_to = l.at("precommit_qc_to").get<std::vector<std::uint32_t>>();
            lane.commit_qc_to = l.at("commit_qc_to").get<std::vector<std::uint32_t>>();
            if (l.contains("store_prepare_qc"))
                lane.store_prepare_qc = l.at("store_prepare_qc").get<bool>();
            a.lanes.push_back(lane);
        }
        action.body = a;
    } else if (kind == "double-vote") {
        action.body = DoubleVote{j.at("view").get<View>(), phases_from_json(j.at("phases")),
                                 j.at("value_indices").get<std::vector<std::uint32_t>>()};
    } else if (kind == "withhold-votes") {
        WithholdVotes a;
        a.view = j.at("view").get<View>();
        if (j.contains("phase")) a.phase = phase_from_name(j.at("phase").get<std::string>());
        action.body = a;
    } else if (kind == "send-stale-lock") {
        action.body = SendStaleLock{j.at("from_view").get<View>()};
    } else if (kind == "forge-mac-vote") {
        ForgeMacVote a;
        a.view = j.at("view").get<View>();
        a.value_index = j.at("value_index").get<std::uint32_t>();
        a.propose_to = j.at("propose_to").get<std::vector<std::uint32_t>>();
        a.phases = phases_from_json(j.at("phases"));
        a.vote_to = j.at("vote_to").get<std::vector<std::uint32_t>>();
        if (j.contains("claim_sender")) a.claim_sender = j.at("claim_sender").get<ReplicaId>();
        a.reply_quorum = j.at("reply_quorum").get<std::vector<ReplicaId>>();
        action.body = a;
    } else if (kind == "answer-forensics") {
        action.body = AnswerForensics{policy_from_name(j.at("policy").get<std::string>())};
    } else {
        throw SchemaError("unknown script action: " + kind);
    }
    return action;
}

json expected_to_json(const ExpectedOutcome& e) {
    json j;
    j["safety_violation"] = e.safety_violation;
    if (e.conflicting_views)
        j["conflicting_views"] = {e.conflicting_views->first, e.conflicting_views->second};
    j["culprits_kind"] = culprits_kind_name(e.culprits_kind);
    j["culprits"] = e.culprits;
    j["default_respondents"] = e.default_respondents;
    j["client_conflict"] = e.client_conflict;
    return j;
}

ExpectedOutcome expected_from_json(const json& j) {
    ExpectedOutcome e;
    e.safety_violation = j.at("safety_violation").get<bool>();
    if (j.contains("conflicting_views"))
        e.conflicting_views = {j.at("conflicting_views").at(0).get<View>(),
                               j.at("conflicting_views").at(1).get<View>()};
    e.culprits_kind = culprits_kind_from_name(j.at("culprits_kind").get<std::string>());
    e.culprits = j.at("culprits").get<std::set<ReplicaId>>();
    e.default_respondents = j.at("default_respondents").get<std::vector<std::uint32_t>>();
    if (j.contains("client_conflict")) e.client_conflict = j.at("client_conflict").get<bool>();
    return e;
}

}  // namespace

std::string scenario_to_json(const ScenarioSpec& spec) {
    json j;
    j["format"] = "bfl-scenario-1";
    j["name"] = spec.name;
    j["description"] = spec.description;
    j["n"] = spec.n;
    j["t"] = spec.t;
    j["f"] = spec.f;
    j["variant"] = variant_name(spec.variant);
    j["mac_mode"] = spec.mac_mode;
    j["scheme"] = scheme_name(spec.scheme);
    j["byzantine"] = spec.byzantine;
    j["twins"] = spec.twins;
    json values = json::array();
    for (const auto& v : spec.client_values) values.push_back(to_hex(v));
    j["client_values"] = values;
    json iv = json::object();
    for (const auto& [id, idx] : spec.initial_values) iv[std::to_string(id)] = idx;
    j["initial_values"] = iv;
    json script = json::array();
    for (const auto& a : spec.adversary_script) script.push_back(action_to_json(a));
    j["adversary_script"] = script;
    json rules = json::array();
    for (const auto& r : spec.network_rules) rules.push_back(rule_to_json(r));
    j["network_rules"] = rules;
    j["view_budget"] = spec.view_budget;
    j["default_max_steps"] = spec.default_max_steps;
    j["expected"] = expected_to_json(spec.expected);
    return j.dump(2);
}

ScenarioSpec scenario_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("scenario parse: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "bfl-scenario-1")
            throw SchemaError("unsupported scenario format");
        ScenarioSpec spec;
        spec.name = j.at("name").get<std::string>();
        spec.description = j.value("description", std::string{});
        spec.n = j.at("n").get<std::uint32_t>();
        spec.t = j.at("t").get<std::uint32_t>();
        spec.f = j.at("f").get<std::uint32_t>();
        spec.variant = variant_from_name(j.at("variant").get<std::string>());
        spec.mac_mode = j.value("mac_mode", false);
        spec.scheme = scheme_from_name(j.value("scheme", std::string("ed25519")));
        spec.byzantine = j.at("byzantine").get<std::set<ReplicaId>>();
        spec.twins = j.value("twins", std::set<ReplicaId>{});
        for (const auto& v : j.at("client_values")) spec.client_values.push_back(from_hex(v.get<std::string>()));
        for (const auto& [key, idx] : j.at("initial_values").items())
            spec.initial_values[static_cast<ReplicaId>(std::stoul(key))] = idx.get<std::uint32_t>();
        for (const auto& a : j.at("adversary_script")) spec.adversary_script.push_back(action_from_json(a));
        for (const auto& r : j.at("network_rules")) spec.network_rules.push_back(rule_from_json(r));
        spec.view_budget = j.at("view_budget").get<std::uint64_t>();
        spec.default_max_steps = j.at("default_max_steps").get<std::uint64_t>();
        spec.expected = expected_from_json(j.at("expected"));
        return spec;
    } catch (const SchemaError&) {
        throw;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("scenario schema: ") + e.what());
    } catch (const VariantError& e) {
        throw SchemaError(e.what());
    } catch (const CryptoError& e) {
        throw SchemaError(e.what());
    } catch (const CodecError& e) {
        throw SchemaError(e.what());
    } catch (const std::invalid_argument& e) {
        throw SchemaError(std::string("scenario schema: ") + e.what());
    }
}

ScenarioSpec load_scenario(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw SchemaError("cannot read scenario file: " + file.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ScenarioSpec spec = scenario_from_json(text);
    validate_scenario(spec);
    return spec;
}

std::uint32_t initial_value_index(const ScenarioSpec& spec, ReplicaId id) {
    if (auto it = spec.initial_values.find(id); it != spec.initial_values.end()) return it->second;
    return id % static_cast<std::uint32_t>(spec.client_values.size());
}

namespace {

// Instance ids: 0..n-1 are the identities themselves; twins get instances
// n, n+1, ... in ascending identity order.
ReplicaId instance_identity(const ScenarioSpec& spec, std::uint32_t instance) {
    if (instance < spec.n) return instance;
    std::uint32_t i = instance - spec.n;
    for (ReplicaId id : spec.twins) {
        if (i == 0) return id;
        --i;
    }
    throw ConsistencyError("instance out of range: " + std::to_string(instance));
}

}  // namespace

void validate_scenario(const ScenarioSpec& spec) {
    if (spec.name.empty()) throw ConsistencyError("scenario needs a name");
    if (spec.n != 3 * spec.t + 1) throw ConsistencyError("n must equal 3t+1");
    if (spec.f != spec.byzantine.size())
        throw ConsistencyError("f must match the byzantine set size");
    if (spec.f > 2 * spec.t) throw ConsistencyError("more than 2t byzantine identities");
    for (ReplicaId id : spec.byzantine)
        if (id >= spec.n) throw ConsistencyError("byzantine identity out of range");
    for (ReplicaId id : spec.twins)
        if (!spec.byzantine.count(id)) throw ConsistencyError("twins must be byzantine");
    if (spec.client_values.empty()) throw ConsistencyError("need at least one client value");
    for (const auto& [id, idx] : spec.initial_values) {
        if (id >= spec.n) throw ConsistencyError("initial value for unknown identity");
        if (idx >= spec.client_values.size()) throw ConsistencyError("initial value index out of range");
    }
    const std::uint32_t num_instances = spec.n + static_cast<std::uint32_t>(spec.twins.size());
    for (const auto& action : spec.adversary_script) {
        if (action.instance >= num_instances)
            throw ConsistencyError("script instance out of range");
        ReplicaId identity = instance_identity(spec, action.instance);
        if (!spec.byzantine.count(identity))
            throw ConsistencyError("script action on an honest identity");
        const bool is_mac_action = std::holds_alternative<ForgeMacVote>(action.body);
        const bool mode_free = std::holds_alternative<AnswerForensics>(action.body) ||
                               std::holds_alternative<FollowProtocolWith>(action.body);
        if (spec.mac_mode && !is_mac_action && !mode_free)
            throw ConsistencyError("only mac actions are meaningful in mac mode");
        if (!spec.mac_mode && is_mac_action)
            throw ConsistencyError("forge-mac-vote requires mac mode");
        std::visit(
            [&](const auto& body) {
                using T = std::decay_t<decltype(body)>;
                if constexpr (std::is_same_v<T, FollowProtocolWith>) {
                    if (body.value_index >= spec.client_values.size())
                        throw ConsistencyError("value index out of range");
                } else if constexpr (std::is_same_v<T, EquivocateProposal>) {
                    if (leader_of(body.view, spec.n) != identity)
                        throw ConsistencyError("equivocating instance is not the view leader");
                    for (const auto& lane : body.lanes)
                        if (lane.value_index >= spec.client_values.size())
                            throw ConsistencyError("value index out of range");
                } else if constexpr (std::is_same_v<T, DoubleVote>) {
                    for (auto idx : body.value_indices)
                        if (idx >= spec.client_values.size())
                            throw ConsistencyError("value index out of range");
                } else if constexpr (std::is_same_v<T, ForgeMacVote>) {
                    if (body.value_index >= spec.client_values.size())
                        throw ConsistencyError("value index out of range");
                }
            },
            action.body);
    }
    for (const auto& rule : spec.network_rules) {
        if (const auto* p = std::get_if<Partition>(&rule)) {
            std::set<std::uint32_t> seen;
            for (const auto& group : p->groups)
                for (std::uint32_t inst : group) {
                    if (inst >= num_instances) throw ConsistencyError("partition instance out of range");
                    if (!seen.insert(inst).second) throw ConsistencyError("partition groups overlap");
                }
        }
    }
    if (spec.expected.safety_violation != spec.expected.conflicting_views.has_value())
        throw ConsistencyError("conflicting_views must accompany a safety violation");
    if (spec.view_budget == 0 || spec.default_max_steps == 0)
        throw ConsistencyError("view budget and step budget must be positive");
}

// ---- builtin corpus ----------------------------------------------------------

namespace {

const Bytes kValA = to_bytes("alpha");
const Bytes kValB = to_bytes("bravo");

ScenarioSpec base(std::string name, std::uint32_t n, ProtocolVariant variant, std::string desc) {
    ScenarioSpec s;
    s.name = std::move(name);
    s.description = std::move(desc);
    s.n = n;
    s.t = (n - 1) / 3;
    s.variant = variant;
    s.client_values = {kValA, kValB};
    return s;
}

DetailedDrop drop_type_to(MsgType type, std::uint32_t to, View view) {
    DetailedDrop d;
    d.type = type;
    d.to = to;
    d.view = view;
    return d;
}

DetailedDrop drop_type_from(MsgType type, std::uint32_t from) {
    DetailedDrop d;
    d.type = type;
    d.from = from;
    return d;
}

DetailedDrop drop_type_view(MsgType type, View view) {
    DetailedDrop d;
    d.type = type;
    d.view = view;
    return d;
}

void set_byz(ScenarioSpec& s, std::set<ReplicaId> byz) {
    s.byzantine = std::move(byz);
    s.f = static_cast<std::uint32_t>(s.byzantine.size());
}

// Block NewView + QC delivery to `id` during `view`, keeping blames flowing.
void isolate_in_view(ScenarioSpec& s, std::uint32_t id, View view) {
    MsgType nv = is_hotstuff(s.variant) ? MsgType::NewViewHs : MsgType::NewViewPbft;
    s.network_rules.push_back(drop_type_to(nv, id, view));
    s.network_rules.push_back(drop_type_to(MsgType::QcBroadcast, id, view));
}

EquivocateLane lane(std::uint32_t value_index, std::vector<std::uint32_t> nv_to,
                    std::vector<std::uint32_t> prep_to, std::vector<std::uint32_t> pc_to,
                    std::vector<std::uint32_t> commit_to) {
    EquivocateLane l;
    l.value_index = value_index;
    l.nv_routes = {NvRoute{std::move(nv_to), HighQcKind::Genesis, 0}};
    l.prepare_qc_to = std::move(prep_to);
    l.precommit_qc_to = std::move(pc_to);
    l.commit_qc_to = std::move(commit_to);
    return l;
}

std::vector<Phase> all_phases() { return {Phase::Prepare, Phase::Precommit, Phase::Commit}; }

// -- honest baseline ------------------------------------------------------

ScenarioSpec honest_run(std::uint32_t n, ProtocolVariant variant) {
    std::string suffix = n == 4 ? "" : "-n7";
    ScenarioSpec s = base("honest-" + variant_name(variant) + suffix, n, variant,
                          "all replicas honest; a single view commits one value");
    s.client_values = {kValA};
    s.default_max_steps = 80;
    s.expected.culprits_kind = CulpritsKind::Empty;
    return s;
}

// -- same-view equivocation -----------------------------------------------

// A Byzantine leader drives two values through disjoint honest halves in the
// same view; helper replicas double-vote so both tallies reach 2t+1.
ScenarioSpec pbft_same_view(std::uint32_t n) {
    std::string suffix = n == 4 ? "" : "-n7";
    ScenarioSpec s = base("pbft-same-view" + suffix, n, ProtocolVariant::PbftPk,
                          "equivocating leader commits two values in one view");
    if (n == 4) {
        set_byz(s, {0, 1});
        EquivocateProposal eq{1, {lane(0, {2}, {2}, {}, {2}), lane(1, {3}, {3}, {}, {3})}};
        s.adversary_script = {{0, eq}, {1, DoubleVote{1, {Phase::Prepare, Phase::Commit}, {0, 1}}}};
        s.expected.culprits = {0, 1};
    } else {
        set_byz(s, {0, 1, 2});
        EquivocateProposal eq{1, {lane(0, {3, 4}, {3, 4}, {}, {3, 4}),
                                  lane(1, {5, 6}, {5, 6}, {}, {5, 6})}};
        s.adversary_script = {{0, eq},
                              {1, DoubleVote{1, {Phase::Prepare, Phase::Commit}, {0, 1}}},
                              {2, DoubleVote{1, {Phase::Prepare, Phase::Commit}, {0, 1}}}};
        s.expected.culprits = {0, 1, 2};
    }
    s.default_max_steps = 120;
    s.expected.safety_violation = true;
    s.expected.conflicting_views = {{1, 1}};
    s.expected.culprits_kind = CulpritsKind::Exact;
    return s;
}

// Twins realization of the same attack: byzantine identities run two honest
// instances each, one per partition, and the detector cannot tell the
// difference from scripted equivocation.
ScenarioSpec same_view_twins(std::uint32_t n, ProtocolVariant variant) {
    std::string tag = variant == ProtocolVariant::PbftPk ? "pbft" : "hotstuff-view";
    std::string suffix = n == 4 ? "" : "-n7";
    ScenarioSpec s = base(tag + "-same-view-twins" + suffix, n, variant,
                          "twin instances of byzantine identities commit both values");
    if (n == 4) {
        set_byz(s, {0, 1});
        s.twins = {0, 1};
        s.adversary_script = {{4, FollowProtocolWith{1}}, {5, FollowProtocolWith{1}}};
        s.network_rules = {Partition{{{0, 1, 2}, {4, 5, 3}}, {}}};
        s.expected.culprits = {0, 1};
    } else {
        set_byz(s, {0, 1, 2});
        s.twins = {0, 1, 2};
        s.adversary_script = {{7, FollowProtocolWith{1}},
                              {8, FollowProtocolWith{1}},
                              {9, FollowProtocolWith{1}}};
        s.network_rules = {Partition{{{0, 1, 2, 3, 4}, {7, 8, 9, 5, 6}}, {}}};
        s.expected.culprits = {0, 1, 2};
    }
    s.default_max_steps = 120;
    s.expected.safety_violation = true;
    s.expected.conflicting_views = {{1, 1}};
    s.expected.culprits_kind = CulpritsKind::Exact;
    return s;
}

// -- pbft cross-view ------------------------------------------------------

// View 1 commits alpha without one honest replica seeing it; the byzantine
// replicas then send stale (genesis) locks so a later honest leader proposes
// bravo, which commits. The status certificate of the later NewView plus the
// commit aggregate convicts the stale-lock senders.
ScenarioSpec pbft_cross_view(std::uint32_t n, bool stretch) {
    std::string name = n == 4 ? "pbft-cross-view" : "pbft-cross-view-n7";
    if (stretch) name += "-stretch";
    ScenarioSpec s = base(name, n, ProtocolVariant::PbftPk,
                          "stale view-change locks let a later view commit a second value");
    if (n == 4) {
        set_byz(s, {2, 3});
        s.initial_values = {{0, 0}, {1, 1}, {2, 0}, {3, 1}};
        s.adversary_script = {{2, SendStaleLock{2}}, {3, SendStaleLock{2}}};
        isolate_in_view(s, 1, 1);
        s.network_rules.push_back(drop_type_from(MsgType::ViewChange, 0));
        s.expected.culprits = {2, 3};
        s.expected.default_respondents = {0};
    } else {
        set_byz(s, {2, 3, 4});
        s.initial_values = {{0, 0}, {1, 1}};
        s.adversary_script = {{2, SendStaleLock{2}}, {3, SendStaleLock{2}}, {4, SendStaleLock{2}}};
        isolate_in_view(s, 1, 1);
        isolate_in_view(s, 5, 1);
        s.network_rules.push_back(drop_type_from(MsgType::ViewChange, 0));
        s.network_rules.push_back(drop_type_from(MsgType::ViewChange, 6));
        s.expected.culprits = {2, 3, 4};
        s.expected.default_respondents = {0};
    }
    View commit_view = 2;
    if (stretch) {
        // Stall views 2 and 3 so the second commit lands three views later.
        s.network_rules.push_back(drop_type_view(MsgType::NewViewPbft, 2));
        s.network_rules.push_back(drop_type_view(MsgType::NewViewPbft, 3));
        commit_view = 4;
    }
    s.view_budget = 30;
    s.default_max_steps = 40 + 40 * commit_view;
    s.expected.safety_violation = true;
    s.expected.conflicting_views = {{1, commit_view}};
    s.expected.culprits_kind = CulpritsKind::Exact;
    return s;
}

// -- hotstuff cross-view --------------------------------------------------

// Same shape for the three hotstuff variants: the byzantine replicas rewind
// their locks so the view-2 leader proposes bravo over a genesis highQC and
// the prepare aggregate for bravo intersects the alpha commit aggregate.
ScenarioSpec hs_cross_view(std::uint32_t n, ProtocolVariant variant) {
    std::string suffix = n == 4 ? "" : "-n7";
    ScenarioSpec s = base(variant_name(variant) + ("-cross-view" + suffix), n, variant,
                          "prepare votes over a stale genesis highQC commit a second value");
    if (n == 4) {
        set_byz(s, {2, 3});
        s.initial_values = {{0, 0}, {1, 1}, {2, 0}, {3, 1}};
        s.adversary_script = {{2, SendStaleLock{2}}, {3, SendStaleLock{2}}};
        isolate_in_view(s, 1, 1);
        s.network_rules.push_back(drop_type_from(MsgType::ViewChange, 0));
        s.network_rules.push_back(drop_type_to(MsgType::QcBroadcast, 0, 2));
        s.expected.default_respondents = {1};
        if (variant != ProtocolVariant::HotStuffNull) s.expected.culprits = {2, 3};
    } else {
        set_byz(s, {2, 3, 4});
        s.initial_values = {{0, 0}, {1, 1}};
        s.adversary_script = {{2, SendStaleLock{2}}, {3, SendStaleLock{2}}, {4, SendStaleLock{2}}};
        isolate_in_view(s, 1, 1);
        isolate_in_view(s, 5, 1);
        s.network_rules.push_back(drop_type_from(MsgType::ViewChange, 0));
        s.network_rules.push_back(drop_type_from(MsgType::ViewChange, 6));
        s.network_rules.push_back(drop_type_to(MsgType::QcBroadcast, 0, 2));
        s.network_rules.push_back(drop_type_to(MsgType::QcBroadcast, 6, 2));
        s.expected.default_respondents = {1};
        if (variant != ProtocolVariant::HotStuffNull) s.expected.culprits = {2, 3, 4};
    }
    // Ends after the view-2 replies but before view 2 times out; otherwise the
    // view-3 leader re-broadcasts the stale prepareQC inside its NewView and
    // every honest replica becomes a qualifying witness.
    s.default_max_steps = 55;
    s.expected.safety_violation = true;
    s.expected.conflicting_views = {{1, 2}};
    s.expected.culprits_kind =
        variant == ProtocolVariant::HotStuffNull ? CulpritsKind::Empty : CulpritsKind::Exact;
    return s;
}

// -- hotstuff-hash witness minimality --------------------------------------

// The hash-variant detector needs both halves of the evidence: a NewView
// carrying the stale highQC and the prepare aggregate that references it by
// hash. The byzantine leader gives each half to a different honest replica.
ScenarioSpec hs_hash_witness_min(std::uint32_t n) {
    std::string suffix = n == 4 ? "" : "-n7";
    ScenarioSpec s = base("hotstuff-hash-witness-min" + suffix, n, ProtocolVariant::HotStuffHash,
                          "NewView and prepare-aggregate evidence split across witnesses");
    if (n == 4) {
        set_byz(s, {1, 3});
        isolate_in_view(s, 2, 1);
        EquivocateProposal eq{2, {lane(1, {2}, {0}, {0}, {0, 2})}};
        s.adversary_script = {{1, eq}, {3, DoubleVote{2, all_phases(), {1}}}};
        s.expected.culprits = {1, 3};
        s.expected.default_respondents = {0, 2};
    } else {
        set_byz(s, {1, 2, 4});
        isolate_in_view(s, 3, 1);
        isolate_in_view(s, 5, 1);
        DetailedDrop commit_drop = drop_type_to(MsgType::QcBroadcast, 6, 1);
        commit_drop.qc_phase = Phase::Commit;
        s.network_rules.push_back(commit_drop);
        EquivocateProposal eq{2, {lane(1, {3, 5}, {0, 6}, {0, 6}, {0, 6})}};
        s.adversary_script = {{1, eq},
                              {2, DoubleVote{2, all_phases(), {1}}},
                              {4, DoubleVote{2, all_phases(), {1}}}};
        s.expected.culprits = {1, 2, 4};
        s.expected.default_respondents = {0, 3, 5, 6};
    }
    s.default_max_steps = 140;
    s.expected.safety_violation = true;
    s.expected.conflicting_views = {{1, 2}};
    s.expected.culprits_kind = CulpritsKind::Exact;
    return s;
}

// -- hotstuff-null leader equivocation --------------------------------------

// With null Info the only attributable cross-view evidence is a leader
// signing two NewViews for the same view; give one honest replica each copy.
ScenarioSpec hs_null_leader_equiv(std::uint32_t n) {
    std::string suffix = n == 4 ? "" : "-n7";
    ScenarioSpec s = base("hotstuff-null-leader-equiv" + suffix, n, ProtocolVariant::HotStuffNull,
                          "equivocating NewViews pin the leader after a cross-view violation");
    if (n == 4) {
        set_byz(s, {1, 3});
        isolate_in_view(s, 2, 1);
        EquivocateProposal eq{2, {lane(1, {2}, {2}, {2}, {2}), lane(0, {0}, {}, {}, {})}};
        s.adversary_script = {{1, eq}, {3, DoubleVote{2, all_phases(), {1}}}};
        s.expected.default_respondents = {0, 2};
    } else {
        set_byz(s, {1, 3, 4});
        isolate_in_view(s, 2, 1);
        isolate_in_view(s, 5, 1);
        EquivocateProposal eq{2, {lane(1, {2, 5}, {2, 5}, {2, 5}, {2, 5}), lane(0, {0}, {}, {}, {})}};
        s.adversary_script = {{1, eq},
                              {3, DoubleVote{2, all_phases(), {1}}},
                              {4, DoubleVote{2, all_phases(), {1}}}};
        s.expected.default_respondents = {0, 2};
    }
    s.default_max_steps = 140;
    s.expected.safety_violation = true;
    s.expected.conflicting_views = {{1, 2}};
    s.expected.culprits_kind = CulpritsKind::Exact;
    s.expected.culprits = {1};
    return s;
}

// -- hotstuff-null indistinguishable worlds ----------------------------------

// Two executions with different byzantine sets that present byte-identical
// evidence to the forensic client: null Info severs the link between the
// second commit and the stale state it was built on.
ScenarioSpec hs_null_world(std::uint32_t n, int world) {
    std::string suffix = n == 4 ? "" : "-n7";
    ScenarioSpec s = base("hotstuff-null-world" + std::to_string(world) + suffix, n,
                          ProtocolVariant::HotStuffNull,
                          "ambiguous cross-view violation; detector stays inconclusive");
    const View mid = n == 4 ? 6 : 9;
    const View last = n == 4 ? 10 : 16;
    // x (identity 1) leads the three active views; every other proposal is
    // suppressed so views pass by timeout.
    for (View v = 1; v <= last; ++v)
        if (v != 2 && v != mid && v != last)
            s.network_rules.push_back(drop_type_view(MsgType::NewViewHs, v));
    // No view-change evidence after the second commit reaches a respondent.
    for (View v = last; v <= last + 4; ++v)
        s.network_rules.push_back(drop_type_view(MsgType::ViewChange, v));

    std::vector<std::uint32_t> p_ids = n == 4 ? std::vector<std::uint32_t>{0}
                                              : std::vector<std::uint32_t>{0, 2};
    std::vector<std::uint32_t> r_ids = n == 4 ? std::vector<std::uint32_t>{2}
                                              : std::vector<std::uint32_t>{3, 4};
    std::vector<std::uint32_t> q_ids = n == 4 ? std::vector<std::uint32_t>{3}
                                              : std::vector<std::uint32_t>{5, 6};
    std::vector<std::uint32_t> pr_ids = p_ids;
    pr_ids.insert(pr_ids.end(), r_ids.begin(), r_ids.end());

    EquivocateProposal view2{2, {lane(0, pr_ids, pr_ids, pr_ids, pr_ids)}};
    if (world == 1) {
        std::set<ReplicaId> byz{1};
        for (auto id : r_ids) byz.insert(id);
        set_byz(s, std::move(byz));
        EquivocateProposal view_mid{mid, {lane(1, q_ids, {}, {}, {})}};
        EquivocateProposal view_last{last, {lane(1, q_ids, q_ids, q_ids, q_ids)}};
        s.adversary_script = {{1, view2}, {1, view_mid}, {1, view_last}};
        for (auto id : r_ids) s.adversary_script.push_back({id, DoubleVote{last, all_phases(), {1}}});
    } else {
        std::set<ReplicaId> byz{1};
        for (auto id : p_ids) byz.insert(id);
        set_byz(s, std::move(byz));
        std::vector<std::uint32_t> pq_ids = p_ids;
        pq_ids.insert(pq_ids.end(), q_ids.begin(), q_ids.end());
        EquivocateProposal view_mid{mid, {lane(1, pq_ids, {}, {}, {})}};
        view_mid.lanes[0].store_prepare_qc = true;
        EquivocateLane last_lane = lane(1, q_ids, {}, {}, {});
        last_lane.nv_routes.push_back(NvRoute{r_ids, HighQcKind::Stored, mid});
        std::vector<std::uint32_t> qc_to = r_ids;
        qc_to.insert(qc_to.end(), q_ids.begin(), q_ids.end());
        last_lane.prepare_qc_to = qc_to;
        last_lane.precommit_qc_to = qc_to;
        last_lane.commit_qc_to = q_ids;
        EquivocateProposal view_last{last, {last_lane}};
        s.adversary_script = {{1, view2}, {1, view_mid}, {1, view_last}};
        for (auto id : p_ids) {
            s.adversary_script.push_back({id, DoubleVote{mid, {Phase::Prepare}, {1}}});
            s.adversary_script.push_back({id, AnswerForensics{ForensicPolicy::Withhold}});
        }
    }
    s.view_budget = 30;
    s.default_max_steps = 40 * last;
    s.expected.safety_violation = true;
    s.expected.conflicting_views = {{2, last}};
    s.expected.culprits_kind = CulpritsKind::Empty;
    s.expected.default_respondents = p_ids;
    s.expected.default_respondents.insert(s.expected.default_respondents.end(), q_ids.begin(),
                                          q_ids.end());
    return s;
}

// -- mac (non-transferable authentication) worlds -----------------------------

// With pairwise macs the client cannot tell forged reply quorums from real
// ones: two executions with disjoint byzantine sets produce the same replies.
ScenarioSpec mac_world(std::uint32_t n, int world) {
    std::string suffix = n == 4 ? "" : "-n7";
    ScenarioSpec s = base("pbft-mac-world" + std::to_string(world) + suffix, n,
                          ProtocolVariant::PbftPk,
                          "forged mac votes and replies; conflict is unattributable");
    s.mac_mode = true;
    std::vector<Phase> pc = {Phase::Prepare, Phase::Commit};
    if (n == 4) {
        if (world == 1) {
            set_byz(s, {1, 3});
            ForgeMacVote helper{1, 0, {}, pc, {0, 2}, std::nullopt, {}};
            ForgeMacVote fake1{1, 1, {}, {}, {}, std::nullopt, {0, 1, 3}};
            s.adversary_script = {{3, helper}, {1, fake1}, {3, fake1}};
        } else {
            set_byz(s, {0, 2});
            ForgeMacVote drive{1, 1, {1, 3}, pc, {1, 3}, std::nullopt, {}};
            ForgeMacVote fake2{1, 0, {}, {}, {}, std::nullopt, {0, 2, 3}};
            s.adversary_script = {{0, drive}, {0, fake2}, {2, fake2}};
        }
    } else {
        if (world == 1) {
            set_byz(s, {1, 2, 3});
            s.network_rules.push_back(drop_type_to(MsgType::MacProposal, 4, 1));
            ForgeMacVote helper{1, 0, {}, pc, {0, 5, 6}, std::nullopt, {}};
            ForgeMacVote fake1{1, 1, {}, {}, {}, std::nullopt, {0, 1, 2, 3, 5}};
            s.adversary_script = {{2, helper}, {3, helper}, {1, fake1}, {2, fake1}, {3, fake1}};
        } else {
            set_byz(s, {0, 5, 6});
            ForgeMacVote drive{1, 1, {1, 2, 3}, pc, {1, 2, 3}, std::nullopt, {}};
            ForgeMacVote vote_only{1, 1, {}, pc, {1, 2, 3}, std::nullopt, {}};
            ForgeMacVote fake2{1, 0, {}, {}, {}, std::nullopt, {0, 2, 3, 5, 6}};
            s.adversary_script = {{0, drive}, {5, vote_only}, {0, fake2}, {5, fake2}, {6, fake2}};
        }
    }
    s.default_max_steps = 60;
    s.expected.safety_violation = false;
    s.expected.culprits_kind = CulpritsKind::Empty;
    s.expected.client_conflict = true;
    return s;
}

}  // namespace

std::vector<ScenarioSpec> builtin_corpus() {
    std::vector<ScenarioSpec> corpus;
    for (std::uint32_t n : {4u, 7u}) {
        for (auto variant : {ProtocolVariant::PbftPk, ProtocolVariant::HotStuffView,
                             ProtocolVariant::HotStuffHash, ProtocolVariant::HotStuffNull})
            corpus.push_back(honest_run(n, variant));
        corpus.push_back(pbft_same_view(n));
        corpus.push_back(same_view_twins(n, ProtocolVariant::PbftPk));
        corpus.push_back(same_view_twins(n, ProtocolVariant::HotStuffView));
        corpus.push_back(pbft_cross_view(n, false));
        corpus.push_back(pbft_cross_view(n, true));
        for (auto variant : {ProtocolVariant::HotStuffView, ProtocolVariant::HotStuffHash,
                             ProtocolVariant::HotStuffNull})
            corpus.push_back(hs_cross_view(n, variant));
        corpus.push_back(hs_hash_witness_min(n));
        corpus.push_back(hs_null_leader_equiv(n));
        corpus.push_back(hs_null_world(n, 1));
        corpus.push_back(hs_null_world(n, 2));
        corpus.push_back(mac_world(n, 1));
        corpus.push_back(mac_world(n, 2));
    }
    for (const auto& s : corpus) validate_scenario(s);
    return corpus;
}

const ScenarioSpec* find_scenario(const std::vector<ScenarioSpec>& corpus, const std::string& name) {
    for (const auto& s : corpus)
        if (s.name == name) return &s;
    return nullptr;
}

}  // namespace bfl
