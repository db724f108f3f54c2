#include "bfl/simnet.hpp"

#include <algorithm>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>
#include <queue>

#include "bfl/forensics.hpp"

namespace bfl {

using nlohmann::json;

// ---- mac primitives ----------------------------------------------------------

Digest mac_pair_key(std::uint64_t seed, ReplicaId a, ReplicaId b) {
    ByteWriter w;
    w.str("mac-pair");
    w.u64(seed);
    w.u32(std::min(a, b));
    w.u32(std::max(a, b));
    return sha256(w.data());
}

Digest mac_token(const Digest& pair_key, const Bytes& payload) {
    ByteWriter w;
    w.str("mac-token");
    w.raw(pair_key.bytes);
    w.bytes(payload);
    return sha256(w.data());
}

Bytes mac_vote_payload(Phase phase, View e, const Value& v) {
    ByteWriter w;
    w.str("mac-vote");
    w.u8(static_cast<std::uint8_t>(phase));
    w.u64(e);
    encode_value(w, v);
    return w.take();
}

namespace {

std::unique_ptr<ReplicaCore> make_core(const ProtocolContext& ctx, ReplicaId id, KeyPair key,
                                       Value initial) {
    if (is_hotstuff(ctx.variant))
        return std::make_unique<HotStuffReplica>(ctx, id, std::move(key), std::move(initial));
    return std::make_unique<PbftReplica>(ctx, id, std::move(key), std::move(initial));
}

struct MachineBase {
    virtual ~MachineBase() = default;
    virtual StepOutput start() = 0;
    virtual StepOutput on_message(const Message& m) = 0;
    virtual StepOutput on_timeout(View e) = 0;
    virtual View current_view() const = 0;
    virtual bool wants_timers() const { return true; }
};

struct HonestMachine : MachineBase {
    std::unique_ptr<ReplicaCore> core;

    HonestMachine(const ProtocolContext& ctx, ReplicaId id, KeyPair key, Value initial)
        : core(make_core(ctx, id, std::move(key), std::move(initial))) {}

    StepOutput start() override { return core->start(); }
    StepOutput on_message(const Message& m) override { return core->on_message(m); }
    StepOutput on_timeout(View e) override { return core->on_timeout(e); }
    View current_view() const override { return core->e_cur; }
};

// ---- scripted byzantine wrapper -----------------------------------------------

// Runs an honest core underneath and edits its traffic: equivocation lanes
// replace the core's own leader duties for scripted views, stale-lock rewinds
// rewrite outgoing ViewChanges, double-votes add blind signatures. Lane
// certificates never feed back into the core, so the core's visible state
// stays identical across executions that differ only in lane routing.
struct ByzMachine : MachineBase {
    const ProtocolContext& ctx;
    ReplicaId id;
    KeyPair key;
    const std::vector<Value>& values;

    std::unique_ptr<ReplicaCore> core;
    std::map<View, EquivocateProposal> equiv;
    std::map<View, std::vector<DoubleVote>> doubles;
    std::vector<WithholdVotes> withholds;
    std::optional<View> stale_from;

    struct LaneState {
        Value value;
        Info info;
        bool store = false;
        std::vector<std::uint32_t> qc_to[3];
        std::map<ReplicaId, Signature> tally[3];
        bool emitted[3] = {false, false, false};
        bool stored = false;
    };
    std::map<View, std::vector<LaneState>> lanes;
    std::map<View, std::vector<Message>> pending_votes;
    std::map<View, QuorumCertificate> stored_qcs;
    std::set<View> lane_proposed;
    std::set<View> armed;

    ByzMachine(const ProtocolContext& c, ReplicaId rid, KeyPair k, Value initial,
               const std::vector<Value>& vals, const std::vector<ScriptAction>& actions,
               std::uint32_t instance)
        : ctx(c), id(rid), key(k), values(vals),
          core(make_core(c, rid, std::move(k), std::move(initial))) {
        for (const auto& action : actions) {
            if (action.instance != instance) continue;
            if (const auto* a = std::get_if<EquivocateProposal>(&action.body)) equiv[a->view] = *a;
            else if (const auto* a = std::get_if<DoubleVote>(&action.body)) doubles[a->view].push_back(*a);
            else if (const auto* a = std::get_if<WithholdVotes>(&action.body)) withholds.push_back(*a);
            else if (const auto* a = std::get_if<SendStaleLock>(&action.body)) stale_from = a->from_view;
        }
    }

    StepOutput start() override { return post(core->start()); }
    StepOutput on_timeout(View e) override { return post(core->on_timeout(e)); }
    View current_view() const override { return core->e_cur; }

    StepOutput on_message(const Message& m) override {
        StepOutput out;
        if (intercept_vote(m, out)) {
            // Material (view-changes) may complete a pending lane proposal.
            try_propose(out);
            return out;
        }
        return post(core->on_message(m));
    }

private:
    static std::optional<std::tuple<Phase, View, Value, Info, Signature, ReplicaId>> as_vote(
        const Message& m) {
        if (const auto* v = std::get_if<PrepareVote>(&m))
            return {{Phase::Prepare, v->e, v->v, v->info, v->vote_sig, v->sender}};
        if (const auto* v = std::get_if<PrecommitVote>(&m))
            return {{Phase::Precommit, v->e, v->v, Info::null(), v->vote_sig, v->sender}};
        if (const auto* v = std::get_if<CommitVote>(&m))
            return {{Phase::Commit, v->e, v->v, Info::null(), v->vote_sig, v->sender}};
        return std::nullopt;
    }

    bool intercept_vote(const Message& m, StepOutput& out) {
        auto vote = as_vote(m);
        if (!vote) return false;
        View e = std::get<1>(*vote);
        if (!equiv.count(e)) return false;
        if (!lanes.count(e)) {
            pending_votes[e].push_back(m);
            return true;
        }
        absorb_vote(e, *vote, out);
        return true;
    }

    void absorb_vote(View e, const std::tuple<Phase, View, Value, Info, Signature, ReplicaId>& vote,
                     StepOutput& out) {
        const auto& [phase, ve, v, info, sig, sender] = vote;
        if (sender >= ctx.n) return;
        for (auto& lane : lanes[e]) {
            if (!(lane.value == v)) continue;
            if (phase == Phase::Prepare && !(info == lane.info)) continue;
            Info payload_info = phase == Phase::Prepare ? lane.info : Info::null();
            if (!verify(ctx.scheme, ctx.replica_keys[sender],
                        vote_payload(phase, ve, v, payload_info), sig))
                continue;
            lane.tally[static_cast<int>(phase)][sender] = sig;
            emit_if_ready(e, lane, phase, out);
        }
    }

    QuorumCertificate lane_qc(View e, LaneState& lane, Phase phase) const {
        std::vector<std::pair<ReplicaId, Signature>> votes;
        for (const auto& [sender, sig] : lane.tally[static_cast<int>(phase)]) {
            votes.push_back({sender, sig});
            if (votes.size() == 2 * ctx.t + 1) break;
        }
        std::optional<Info> info;
        if (phase == Phase::Prepare && is_hotstuff(ctx.variant)) info = lane.info;
        return QuorumCertificate{phase, e, lane.value, aggregate(votes, ctx.n), info};
    }

    void emit_if_ready(View e, LaneState& lane, Phase phase, StepOutput& out) {
        int p = static_cast<int>(phase);
        if (lane.tally[p].size() < 2 * ctx.t + 1) return;
        if (phase == Phase::Prepare && lane.store && !lane.stored) {
            stored_qcs[e] = lane_qc(e, lane, phase);
            lane.stored = true;
        }
        if (lane.emitted[p] || lane.qc_to[p].empty()) return;
        lane.emitted[p] = true;
        QuorumCertificate qc = lane_qc(e, lane, phase);
        for (std::uint32_t to : lane.qc_to[p]) out.msgs.push_back({to, QcBroadcast{id, qc}});
    }

    QuorumCertificate resolve_highqc(const NvRoute& route) const {
        switch (route.highqc) {
            case HighQcKind::Genesis: return genesis_qc(ctx.n);
            case HighQcKind::Own: {
                auto* hs = dynamic_cast<HotStuffReplica*>(core.get());
                return hs ? hs->prepare_qc : genesis_qc(ctx.n);
            }
            case HighQcKind::Stored: {
                auto it = stored_qcs.find(route.stored_view);
                return it != stored_qcs.end() ? it->second : genesis_qc(ctx.n);
            }
        }
        return genesis_qc(ctx.n);
    }

    void try_propose(StepOutput& out) {
        for (View e : armed) {
            if (lane_proposed.count(e) || e != core->e_cur) continue;
            const EquivocateProposal& cfg = equiv.at(e);
            StatusCertificate status;
            if (!is_hotstuff(ctx.variant)) {
                auto* pbft = dynamic_cast<PbftReplica*>(core.get());
                auto it = pbft->vcs.find(e - 1);
                if (it == pbft->vcs.end() || it->second.size() < 2 * ctx.t + 1) continue;
                for (const auto& [sender, entry] : it->second) status.entries.push_back(entry);
            }
            lane_proposed.insert(e);

            auto& lane_states = lanes[e];
            for (const auto& lane_cfg : cfg.lanes) {
                LaneState lane;
                lane.value = values[lane_cfg.value_index];
                lane.store = lane_cfg.store_prepare_qc;
                lane.qc_to[0] = lane_cfg.prepare_qc_to;
                lane.qc_to[1] = lane_cfg.precommit_qc_to;
                lane.qc_to[2] = lane_cfg.commit_qc_to;

                if (is_hotstuff(ctx.variant)) {
                    lane.info = lane_cfg.nv_routes.empty()
                                    ? info_of(ctx.variant, genesis_qc(ctx.n))
                                    : info_of(ctx.variant, resolve_highqc(lane_cfg.nv_routes[0]));
                    for (const auto& route : lane_cfg.nv_routes) {
                        NewViewHs nv{id, e, lane.value, resolve_highqc(route), {}};
                        nv.sig = sign(key, newview_hs_payload(nv.e, nv.v, nv.high_qc));
                        for (std::uint32_t to : route.to) out.msgs.push_back({to, nv});
                    }
                } else {
                    lane.info = Info::null();
                    NewViewPbft nv{id, e, lane.value, status, {}};
                    nv.sig = sign(key, newview_pbft_payload(nv.e, nv.v, nv.m));
                    for (const auto& route : lane_cfg.nv_routes)
                        for (std::uint32_t to : route.to) out.msgs.push_back({to, nv});
                }

                // The leader contributes its own phase signatures up front.
                for (Phase phase : {Phase::Prepare, Phase::Precommit, Phase::Commit}) {
                    if (!is_hotstuff(ctx.variant) && phase == Phase::Precommit) continue;
                    Info pi = phase == Phase::Prepare ? lane.info : Info::null();
                    lane.tally[static_cast<int>(phase)][id] =
                        sign(key, vote_payload(phase, e, lane.value, pi));
                }
                lane_states.push_back(std::move(lane));
            }
            for (auto& lane : lane_states)
                for (Phase phase : {Phase::Prepare, Phase::Precommit, Phase::Commit})
                    emit_if_ready(e, lane, phase, out);

            auto pending = std::move(pending_votes[e]);
            pending_votes.erase(e);
            for (const auto& m : pending)
                if (auto vote = as_vote(m)) absorb_vote(e, *vote, out);
        }
    }

    bool withheld(const Message& m) const {
        auto vote = as_vote(m);
        if (!vote) return false;
        for (const auto& w : withholds) {
            if (w.view != std::get<1>(*vote)) continue;
            if (!w.phase || *w.phase == std::get<0>(*vote)) return true;
        }
        return false;
    }

    Message rewrite_stale(const ViewChange& vc) {
        if (is_hotstuff(ctx.variant)) {
            auto* hs = dynamic_cast<HotStuffReplica*>(core.get());
            hs->lock = Lock::genesis_hs();
            hs->prepare_qc = genesis_qc(ctx.n);
            ViewChange nvc{id, vc.e, Lock::genesis_hs(), genesis_qc(ctx.n), {}};
            nvc.sig = sign(key, viewchange_payload(nvc.e, nvc.lock, nvc.prepare_qc));
            return nvc;
        }
        auto* pbft = dynamic_cast<PbftReplica*>(core.get());
        pbft->lock = Lock::genesis_pbft(ctx.n);
        ViewChange nvc{id, vc.e, Lock::genesis_pbft(ctx.n), std::nullopt, {}};
        nvc.sig = sign(key, viewchange_payload(nvc.e, nvc.lock, std::nullopt));
        return nvc;
    }

    StepOutput post(StepOutput&& raw) {
        StepOutput out;
        out.output = raw.output;
        out.entered_view = raw.entered_view;
        for (auto& om : raw.msgs) {
            MsgType type = type_of(om.msg);
            std::optional<View> view = view_of(om.msg);
            const bool suppressible =
                type == MsgType::NewViewPbft || type == MsgType::NewViewHs ||
                type == MsgType::QcBroadcast || type == MsgType::PrepareVote ||
                type == MsgType::PrecommitVote || type == MsgType::CommitVote;
            if (suppressible && view && equiv.count(*view)) continue;
            if (withheld(om.msg)) continue;
            if (const auto* vc = std::get_if<ViewChange>(&om.msg)) {
                if (stale_from && vc->e + 1 >= *stale_from) {
                    out.msgs.push_back({om.to, rewrite_stale(*vc)});
                    continue;
                }
            }
            out.msgs.push_back(std::move(om));
        }
        if (out.entered_view) {
            View e = *out.entered_view;
            if (equiv.count(e)) armed.insert(e);
            auto it = doubles.find(e);
            if (it != doubles.end()) {
                ReplicaId leader = leader_of(e, ctx.n);
                for (const auto& dv : it->second) {
                    for (std::uint32_t idx : dv.value_indices) {
                        const Value& v = values[idx];
                        for (Phase phase : dv.phases) {
                            Info info = Info::null();
                            if (phase == Phase::Prepare && is_hotstuff(ctx.variant))
                                info = info_of(ctx.variant, genesis_qc(ctx.n));
                            Signature sig = sign(key, vote_payload(phase, e, v, info));
                            if (phase == Phase::Prepare)
                                out.msgs.push_back({leader, PrepareVote{id, e, v, info, sig}});
                            else if (phase == Phase::Precommit)
                                out.msgs.push_back({leader, PrecommitVote{id, e, v, sig}});
                            else
                                out.msgs.push_back({leader, CommitVote{id, e, v, sig}});
                        }
                    }
                }
            }
        }
        try_propose(out);
        return out;
    }
};

// ---- mac machines --------------------------------------------------------------

struct MacHonest : MachineBase {
    ReplicaId id;
    std::uint32_t n, t;
    std::uint64_t seed;
    Value v_i;

    std::optional<Value> prop;
    std::map<Bytes, std::map<ReplicaId, bool>> prepares, commits;
    bool voted_commit = false, done = false;

    MacHonest(ReplicaId id, std::uint32_t n, std::uint32_t t, std::uint64_t seed, Value initial)
        : id(id), n(n), t(t), seed(seed), v_i(std::move(initial)) {}

    bool wants_timers() const override { return false; }
    View current_view() const override { return 1; }
    StepOutput on_timeout(View) override { return {}; }

    StepOutput start() override {
        StepOutput out;
        if (leader_of(1, n) == id) {
            out.msgs.push_back({kBroadcast, MacProposal{id, 1, v_i}});
            adopt(v_i, out);
        }
        return out;
    }

    StepOutput on_message(const Message& m) override {
        StepOutput out;
        if (const auto* p = std::get_if<MacProposal>(&m)) {
            if (p->e == 1 && p->sender == leader_of(1, n) && !prop) adopt(p->v, out);
        } else if (const auto* v = std::get_if<MacVote>(&m)) {
            if (v->e != 1 || v->sender >= n) return out;
            Digest expect =
                mac_token(mac_pair_key(seed, v->sender, id), mac_vote_payload(v->phase, v->e, v->v));
            if (!(expect == v->token)) return out;
            if (v->phase == Phase::Prepare) prepares[value_key(v->v)][v->sender] = true;
            else if (v->phase == Phase::Commit) commits[value_key(v->v)][v->sender] = true;
            recheck(out);
        }
        return out;
    }

private:
    void adopt(const Value& v, StepOutput& out) {
        prop = v;
        send_votes(Phase::Prepare, out);
        recheck(out);
    }

    void send_votes(Phase phase, StepOutput& out) {
        for (ReplicaId j = 0; j < n; ++j) {
            Digest token = mac_token(mac_pair_key(seed, id, j), mac_vote_payload(phase, 1, *prop));
            out.msgs.push_back({j, MacVote{id, phase, 1, *prop, token}});
        }
    }

    void recheck(StepOutput& out) {
        if (!prop) return;
        const Bytes key = value_key(*prop);
        if (!voted_commit && prepares[key].size() >= 2 * t + 1) {
            voted_commit = true;
            send_votes(Phase::Commit, out);
        }
        if (!done && commits[key].size() >= 2 * t + 1) {
            done = true;
            std::vector<ReplicaId> quorum;
            for (const auto& [sender, _] : commits[key]) {
                quorum.push_back(sender);
                if (quorum.size() == 2 * t + 1) break;
            }
            out.output = {{*prop, 1, AggregateSignature{Bitmap(n), {}}}};
            out.msgs.push_back({kClient, MacReply{id, 1, *prop, quorum}});
        }
    }
};

struct MacByz : MachineBase {
    ReplicaId id;
    std::uint32_t n;
    std::uint64_t seed;
    const std::vector<Value>& values;
    std::vector<ForgeMacVote> forges;

    MacByz(ReplicaId rid, std::uint32_t n, std::uint64_t seed, const std::vector<Value>& vals,
           const std::vector<ScriptAction>& actions, std::uint32_t instance)
        : id(rid), n(n), seed(seed), values(vals) {
        for (const auto& action : actions)
            if (action.instance == instance)
                if (const auto* f = std::get_if<ForgeMacVote>(&action.body)) forges.push_back(*f);
    }

    bool wants_timers() const override { return false; }
    View current_view() const override { return 1; }
    StepOutput on_timeout(View) override { return {}; }
    StepOutput on_message(const Message&) override { return {}; }

    StepOutput start() override {
        StepOutput out;
        for (const auto& f : forges) {
            const Value& v = values[f.value_index];
            ReplicaId claimed = f.claim_sender.value_or(id);
            for (std::uint32_t to : f.propose_to)
                out.msgs.push_back({to, MacProposal{id, f.view, v}});
            for (Phase phase : f.phases)
                for (std::uint32_t to : f.vote_to) {
                    // Tokens can only be minted under this replica's own pair
                    // keys; a false sender claim fails verification downstream.
                    Digest token =
                        mac_token(mac_pair_key(seed, id, to), mac_vote_payload(phase, f.view, v));
                    out.msgs.push_back({to, MacVote{claimed, phase, f.view, v, token}});
                }
            if (!f.reply_quorum.empty())
                out.msgs.push_back({kClient, MacReply{id, f.view, v, f.reply_quorum}});
        }
        return out;
    }
};

// ---- the event loop -------------------------------------------------------------

struct Event {
    std::uint64_t step = 0;
    std::uint64_t seq = 0;
    bool is_timeout = false;
    std::uint32_t from = 0, to = 0;
    Message msg;
    std::uint32_t instance = 0;
    View view = 0;
};

struct EventLater {
    bool operator()(const Event& a, const Event& b) const {
        if (a.step != b.step) return a.step > b.step;
        return a.seq > b.seq;
    }
};

struct Engine {
    const ScenarioSpec& spec;
    std::uint64_t seed, max_steps;

    ProtocolContext ctx;
    std::vector<KeyPair> replica_keypairs;
    KeyPair client_keypair;
    std::vector<Value> values;
    std::vector<NodeInstanceInfo> instances;
    std::vector<std::vector<std::uint32_t>> by_identity;
    std::vector<std::unique_ptr<MachineBase>> machines;

    TranscriptBundle bundle;
    std::map<std::uint32_t, std::optional<OutputTriple>> outputs;

    std::priority_queue<Event, std::vector<Event>, EventLater> queue;
    std::uint64_t seq = 0, now = 0;

    Engine(const ScenarioSpec& s, std::uint64_t seed, std::uint64_t max_steps)
        : spec(s), seed(seed), max_steps(max_steps) {
        ctx.n = spec.n;
        ctx.t = spec.t;
        ctx.variant = spec.variant;
        ctx.scheme = spec.scheme;
        for (ReplicaId i = 0; i < spec.n; ++i) {
            replica_keypairs.push_back(keygen(spec.scheme, seed, "replica", i));
            ctx.replica_keys.push_back(replica_keypairs.back().pub);
        }
        client_keypair = keygen(spec.scheme, seed, "client", 0);
        ctx.client_key = client_keypair.pub;

        for (const auto& payload : spec.client_values) {
            Value v{payload, {}, false};
            v.client_sig = sign(client_keypair, value_sign_payload(v));
            values.push_back(std::move(v));
        }

        by_identity.resize(spec.n);
        std::uint32_t inst = 0;
        auto add_instance = [&](ReplicaId identity) {
            NodeInstanceInfo info{inst, identity, spec.byzantine.count(identity) > 0,
                                  ForensicPolicy::Honest};
            for (const auto& action : spec.adversary_script)
                if (action.instance == inst)
                    if (const auto* a = std::get_if<AnswerForensics>(&action.body))
                        info.policy = a->policy;
            instances.push_back(info);
            by_identity[identity].push_back(inst);
            machines.push_back(build_machine(info));
            ++inst;
        };
        for (ReplicaId i = 0; i < spec.n; ++i) add_instance(i);
        for (ReplicaId twin : spec.twins) add_instance(twin);

        bundle.scenario_name = spec.name;
        bundle.n = spec.n;
        bundle.t = spec.t;
        bundle.variant = spec.variant;
        bundle.mac_mode = spec.mac_mode;
        bundle.scheme = spec.scheme;
        bundle.seed = seed;
        bundle.max_steps = max_steps;
        bundle.view_budget = spec.view_budget;
        bundle.replica_keys = ctx.replica_keys;
        bundle.client_key = ctx.client_key;
        bundle.instances = instances;
        for (const auto& info : instances) bundle.transcripts[info.instance] = {};
    }

    std::unique_ptr<MachineBase> build_machine(const NodeInstanceInfo& info) {
        Value initial = values[initial_value_index(spec, info.identity)];
        for (const auto& action : spec.adversary_script)
            if (action.instance == info.instance)
                if (const auto* a = std::get_if<FollowProtocolWith>(&action.body))
                    initial = values[a->value_index];
        const KeyPair& kp = replica_keypairs[info.identity];
        if (spec.mac_mode) {
            if (info.byzantine)
                return std::make_unique<MacByz>(info.identity, spec.n, seed, values,
                                                spec.adversary_script, info.instance);
            return std::make_unique<MacHonest>(info.identity, spec.n, spec.t, seed, initial);
        }
        if (info.byzantine)
            return std::make_unique<ByzMachine>(ctx, info.identity, kp, initial, values,
                                                spec.adversary_script, info.instance);
        return std::make_unique<HonestMachine>(ctx, info.identity, kp, initial);
    }

    // -- network rules --

    std::optional<std::string> drop_reason(std::uint32_t from_inst, std::uint32_t to_inst,
                                           const Message& msg) const {
        ReplicaId from_id = instances[from_inst].identity;
        std::optional<ReplicaId> to_id;
        if (to_inst != kClient) to_id = instances[to_inst].identity;
        for (const auto& rule : spec.network_rules) {
            if (const auto* p = std::get_if<Partition>(&rule)) {
                if (to_inst == kClient || !p->window.contains(now)) continue;
                auto group_of = [&](std::uint32_t inst) -> int {
                    for (std::size_t g = 0; g < p->groups.size(); ++g)
                        for (std::uint32_t member : p->groups[g])
                            if (member == inst) return static_cast<int>(g);
                    return -1;
                };
                if (group_of(from_inst) != group_of(to_inst)) return "partition";
            } else if (const auto* d = std::get_if<DetailedDrop>(&rule)) {
                if (!d->window.contains(now)) continue;
                if (d->type && *d->type != type_of(msg)) continue;
                if (d->from && *d->from != from_id) continue;
                if (d->to) {
                    std::uint32_t dest = to_inst == kClient ? kClient : *to_id;
                    if (*d->to != dest) continue;
                }
                if (d->view) {
                    auto v = view_of(msg);
                    if (!v || *v != *d->view) continue;
                }
                if (d->qc_phase) {
                    const auto* qc = std::get_if<QcBroadcast>(&msg);
                    if (!qc || qc->qc.phase != *d->qc_phase) continue;
                }
                return "drop-rule";
            }
        }
        return std::nullopt;
    }

    std::uint64_t latency(std::uint32_t from_inst, std::uint32_t to_inst) const {
        std::uint64_t extra = 0;
        ReplicaId from_id = instances[from_inst].identity;
        std::optional<ReplicaId> to_id;
        if (to_inst != kClient) to_id = instances[to_inst].identity;
        for (const auto& rule : spec.network_rules) {
            const auto* dl = std::get_if<Delay>(&rule);
            if (!dl) continue;
            if (dl->from && *dl->from != from_id) continue;
            if (dl->to && (!to_id || *dl->to != *to_id)) continue;
            extra += dl->steps;
        }
        return 1 + extra;
    }

    void record(std::uint32_t inst, TranscriptRecord::Direction dir, std::uint32_t peer,
                const Message& msg) {
        bundle.transcripts[inst].push_back({now, inst, dir, peer, msg});
    }

    void send_one(std::uint32_t from_inst, std::uint32_t to_inst, const Message& msg) {
        record(from_inst, TranscriptRecord::Direction::Sent, to_inst, msg);
        if (auto reason = drop_reason(from_inst, to_inst, msg)) {
            bundle.drops.push_back({now, from_inst, to_inst, type_of(msg), *reason});
            return;
        }
        queue.push(Event{now + latency(from_inst, to_inst), seq++, false, from_inst, to_inst, msg,
                         0, 0});
    }

    void dispatch(std::uint32_t inst, StepOutput&& out) {
        for (const auto& om : out.msgs) {
            if (om.to == kClient) {
                send_one(inst, kClient, om.msg);
            } else if (om.to == kBroadcast) {
                for (const auto& info : instances) send_one(inst, info.instance, om.msg);
            } else {
                for (std::uint32_t target : by_identity.at(om.to)) send_one(inst, target, om.msg);
            }
        }
        if (out.output && !outputs[inst]) {
            outputs[inst] = out.output;
            const auto& [v, e, sigma] = *out.output;
            record(inst, TranscriptRecord::Direction::Output, kClient,
                   Reply{instances[inst].identity, e, v, sigma});
        }
        if (out.entered_view && machines[inst]->wants_timers()) {
            queue.push(Event{now + spec.view_budget, seq++, true, 0, 0, {}, inst, *out.entered_view});
        }
    }

    void run_loop() {
        for (const auto& info : instances) dispatch(info.instance, machines[info.instance]->start());
        while (!queue.empty()) {
            Event ev = queue.top();
            if (ev.step > max_steps) break;
            queue.pop();
            now = ev.step;
            if (ev.is_timeout) {
                if (machines[ev.instance]->current_view() == ev.view)
                    dispatch(ev.instance, machines[ev.instance]->on_timeout(ev.view));
                continue;
            }
            if (ev.to == kClient) {
                bundle.client_inbox.push_back({now, ev.from, ev.msg});
                continue;
            }
            record(ev.to, TranscriptRecord::Direction::Received, ev.from, ev.msg);
            dispatch(ev.to, machines[ev.to]->on_message(ev.msg));
        }
        bundle.step_count = now;
        bundle.timed_out = false;
        for (const auto& info : instances)
            if (!info.byzantine && !outputs[info.instance]) bundle.timed_out = true;
    }
};

}  // namespace

ExecutionResult run(const ScenarioSpec& spec, std::uint64_t seed, std::uint64_t max_steps) {
    validate_scenario(spec);
    if (max_steps == 0) max_steps = spec.default_max_steps;
    Engine engine(spec, seed, max_steps);
    engine.run_loop();
    ExecutionResult result;
    result.spec = spec;
    result.bundle = std::move(engine.bundle);
    result.outputs = std::move(engine.outputs);
    result.ctx = std::move(engine.ctx);
    result.replica_keypairs = std::move(engine.replica_keypairs);
    result.client_keypair = std::move(engine.client_keypair);
    return result;
}

std::vector<std::pair<std::uint32_t, std::vector<Message>>> query_witnesses(
    const TranscriptBundle& bundle, const RequestProof& req,
    const std::vector<std::uint32_t>& respondents) {
    std::vector<std::pair<std::uint32_t, std::vector<Message>>> out;
    for (std::uint32_t inst : respondents) {
        const NodeInstanceInfo* info = nullptr;
        for (const auto& i : bundle.instances)
            if (i.instance == inst) info = &i;
        if (!info) continue;
        std::vector<Message> responses;
        if (!bundle.mac_mode && info->policy == ForensicPolicy::Honest) {
            auto it = bundle.transcripts.find(inst);
            if (it != bundle.transcripts.end())
                responses = respond_request_proof(bundle.variant, it->second, req, info->identity);
        }
        out.push_back({inst, std::move(responses)});
    }
    return out;
}

std::vector<Value> honest_output_values(const ExecutionResult& result) {
    std::vector<Value> values;
    for (const auto& info : result.bundle.instances) {
        if (info.byzantine) continue;
        auto it = result.outputs.find(info.instance);
        if (it == result.outputs.end() || !it->second) continue;
        const Value& v = std::get<0>(*it->second);
        if (std::find(values.begin(), values.end(), v) == values.end()) values.push_back(v);
    }
    return values;
}

Bytes client_visible_forensic_input(const TranscriptBundle& bundle, const RequestProof& req,
                                    const std::vector<std::uint32_t>& respondents) {
    ByteWriter w;
    w.str("client-view");
    std::vector<Bytes> replies;
    for (const auto& d : bundle.client_inbox) replies.push_back(encode_message(d.msg));
    std::sort(replies.begin(), replies.end());
    w.u32(static_cast<std::uint32_t>(replies.size()));
    for (const auto& r : replies) w.bytes(r);

    auto answers = query_witnesses(bundle, req, respondents);
    std::sort(answers.begin(), answers.end(), [&](const auto& a, const auto& b) {
        ReplicaId ia = 0, ib = 0;
        for (const auto& i : bundle.instances) {
            if (i.instance == a.first) ia = i.identity;
            if (i.instance == b.first) ib = i.identity;
        }
        return std::tie(ia, a.first) < std::tie(ib, b.first);
    });
    w.u32(static_cast<std::uint32_t>(answers.size()));
    for (const auto& [inst, msgs] : answers) {
        ReplicaId identity = 0;
        for (const auto& i : bundle.instances)
            if (i.instance == inst) identity = i.identity;
        w.u32(identity);
        std::vector<Bytes> enc;
        for (const auto& m : msgs) enc.push_back(encode_message(m));
        std::sort(enc.begin(), enc.end());
        w.u32(static_cast<std::uint32_t>(enc.size()));
        for (const auto& e : enc) w.bytes(e);
    }
    return w.take();
}

// ---- persistence ----------------------------------------------------------------

namespace {

std::string dir_name(TranscriptRecord::Direction d) {
    switch (d) {
        case TranscriptRecord::Direction::Sent: return "sent";
        case TranscriptRecord::Direction::Received: return "recv";
        case TranscriptRecord::Direction::Output: return "output";
    }
    return "?";
}

TranscriptRecord::Direction dir_from_name(const std::string& s) {
    if (s == "sent") return TranscriptRecord::Direction::Sent;
    if (s == "recv") return TranscriptRecord::Direction::Received;
    if (s == "output") return TranscriptRecord::Direction::Output;
    throw CodecError("bad transcript direction: " + s);
}

void write_file(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << text;
}

std::string read_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string policy_tag(ForensicPolicy p) { return p == ForensicPolicy::Honest ? "honest" : "withhold"; }

ForensicPolicy policy_from_tag(const std::string& s) {
    if (s == "honest") return ForensicPolicy::Honest;
    if (s == "withhold") return ForensicPolicy::Withhold;
    throw CodecError("bad forensic policy: " + s);
}

}  // namespace

void save_bundle(const TranscriptBundle& bundle, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json header;
    header["format"] = "bfl-transcript-1";
    header["scenario"] = bundle.scenario_name;
    header["n"] = bundle.n;
    header["t"] = bundle.t;
    header["variant"] = variant_name(bundle.variant);
    header["mac_mode"] = bundle.mac_mode;
    header["scheme"] = scheme_name(bundle.scheme);
    header["seed"] = bundle.seed;
    header["max_steps"] = bundle.max_steps;
    header["step_count"] = bundle.step_count;
    header["view_budget"] = bundle.view_budget;
    header["timed_out"] = bundle.timed_out;
    json keys = json::array();
    for (const auto& k : bundle.replica_keys) keys.push_back(to_hex(k));
    header["replica_keys"] = keys;
    header["client_key"] = to_hex(bundle.client_key);
    json insts = json::array();
    for (const auto& i : bundle.instances)
        insts.push_back({{"instance", i.instance},
                         {"identity", i.identity},
                         {"byzantine", i.byzantine},
                         {"policy", policy_tag(i.policy)}});
    header["instances"] = insts;
    write_file(dir / "header.json", header.dump(2));

    for (const auto& [inst, records] : bundle.transcripts) {
        std::string lines;
        for (const auto& rec : records) {
            json j{{"step", rec.step},
                   {"dir", dir_name(rec.direction)},
                   {"peer", rec.peer},
                   {"msg", to_hex(encode_message(rec.msg))}};
            lines += j.dump() + "\n";
        }
        write_file(dir / ("node_" + std::to_string(inst) + ".log"), lines);
    }
    std::string client;
    for (const auto& d : bundle.client_inbox) {
        json j{{"step", d.step}, {"from", d.from_instance}, {"msg", to_hex(encode_message(d.msg))}};
        client += j.dump() + "\n";
    }
    write_file(dir / "client.log", client);
    std::string drops;
    for (const auto& d : bundle.drops) {
        json j{{"step", d.step},
               {"from", d.from_instance},
               {"to", d.to_instance},
               {"type", msg_type_name(d.type)},
               {"reason", d.reason}};
        drops += j.dump() + "\n";
    }
    write_file(dir / "drops.log", drops);
}

TranscriptBundle load_bundle(const std::filesystem::path& dir) {
    json header = json::parse(read_file(dir / "header.json"));
    if (header.at("format").get<std::string>() != "bfl-transcript-1")
        throw CodecError("unsupported transcript format");
    TranscriptBundle b;
    b.scenario_name = header.at("scenario").get<std::string>();
    b.n = header.at("n").get<std::uint32_t>();
    b.t = header.at("t").get<std::uint32_t>();
    b.variant = variant_from_name(header.at("variant").get<std::string>());
    b.mac_mode = header.at("mac_mode").get<bool>();
    b.scheme = scheme_from_name(header.at("scheme").get<std::string>());
    b.seed = header.at("seed").get<std::uint64_t>();
    b.max_steps = header.at("max_steps").get<std::uint64_t>();
    b.step_count = header.at("step_count").get<std::uint64_t>();
    b.view_budget = header.at("view_budget").get<std::uint64_t>();
    b.timed_out = header.at("timed_out").get<bool>();
    for (const auto& k : header.at("replica_keys")) b.replica_keys.push_back(from_hex(k.get<std::string>()));
    b.client_key = from_hex(header.at("client_key").get<std::string>());
    for (const auto& i : header.at("instances")) {
        NodeInstanceInfo info;
        info.instance = i.at("instance").get<std::uint32_t>();
        info.identity = i.at("identity").get<ReplicaId>();
        info.byzantine = i.at("byzantine").get<bool>();
        info.policy = policy_from_tag(i.at("policy").get<std::string>());
        b.instances.push_back(info);
    }

    auto parse_lines = [](const std::string& text, auto&& fn) {
        std::size_t pos = 0;
        while (pos < text.size()) {
            std::size_t end = text.find('\n', pos);
            if (end == std::string::npos) end = text.size();
            std::string line = text.substr(pos, end - pos);
            if (!line.empty()) fn(json::parse(line));
            pos = end + 1;
        }
    };

    for (const auto& info : b.instances) {
        auto& records = b.transcripts[info.instance];
        parse_lines(read_file(dir / ("node_" + std::to_string(info.instance) + ".log")),
                    [&](const json& j) {
                        TranscriptRecord rec;
                        rec.step = j.at("step").get<std::uint64_t>();
                        rec.node = info.instance;
                        rec.direction = dir_from_name(j.at("dir").get<std::string>());
                        rec.peer = j.at("peer").get<std::uint32_t>();
                        rec.msg = decode_message(from_hex(j.at("msg").get<std::string>()));
                        records.push_back(rec);
                    });
    }
    parse_lines(read_file(dir / "client.log"), [&](const json& j) {
        b.client_inbox.push_back({j.at("step").get<std::uint64_t>(),
                                  j.at("from").get<std::uint32_t>(),
                                  decode_message(from_hex(j.at("msg").get<std::string>()))});
    });
    parse_lines(read_file(dir / "drops.log"), [&](const json& j) {
        DropRecord d;
        d.step = j.at("step").get<std::uint64_t>();
        d.from_instance = j.at("from").get<std::uint32_t>();
        d.to_instance = j.at("to").get<std::uint32_t>();
        auto t = msg_type_from_name(j.at("type").get<std::string>());
        if (!t) throw CodecError("bad drop record type");
        d.type = *t;
        d.reason = j.at("reason").get<std::string>();
        b.drops.push_back(d);
    });
    return b;
}

}  // namespace bfl
