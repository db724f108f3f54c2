// End-to-end acceptance checks. Each test prints a single "criterion N:
// PASS/FAIL" line so CI logs read as a checklist.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "bfl/forensics.hpp"
#include "bfl/simnet.hpp"

using namespace bfl;

namespace {

void criterion(int num, const std::string& desc, bool ok) {
    std::printf("criterion %2d: %s - %s\n", num, ok ? "PASS" : "FAIL", desc.c_str());
    std::fflush(stdout);
    CHECK_MESSAGE(ok, "criterion ", num, ": ", desc);
}

const std::vector<ScenarioSpec>& corpus() {
    static auto c = builtin_corpus();
    return c;
}

const ScenarioSpec& corpus_spec(const std::string& name) {
    const ScenarioSpec* found = find_scenario(corpus(), name);
    REQUIRE(found != nullptr);
    return *found;
}

std::vector<std::uint32_t> respondents_of(const ScenarioSpec& spec, const TranscriptBundle& bundle) {
    if (!spec.expected.default_respondents.empty()) return spec.expected.default_respondents;
    std::vector<std::uint32_t> all;
    for (const auto& i : bundle.instances) all.push_back(i.instance);
    return all;
}

std::optional<ConflictingReplies> conflict_of(const TranscriptBundle& bundle) {
    std::vector<Message> msgs;
    for (const auto& d : bundle.client_inbox) msgs.push_back(d.msg);
    return find_conflicting_replies(msgs, bundle.n, bundle.t, bundle.replica_keys, bundle.scheme);
}

DetectResult detect_with(const TranscriptBundle& bundle, const ConflictingReplies& conflict,
                         const std::vector<std::uint32_t>& respondents) {
    std::vector<Message> responses;
    if (conflict.low.e != conflict.high.e) {
        RequestProof req{conflict.low.e, conflict.low.v, conflict.high.e};
        for (auto& [inst, answer] : query_witnesses(bundle, req, respondents))
            responses.insert(responses.end(), answer.begin(), answer.end());
    }
    return detect(bundle.variant, conflict, responses, bundle.n, bundle.t, bundle.replica_keys,
                  bundle.scheme);
}

bool subset_of(const std::vector<ReplicaId>& culprits, const std::set<ReplicaId>& allowed) {
    for (ReplicaId c : culprits)
        if (!allowed.count(c)) return false;
    return true;
}

Digest dir_fingerprint(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    ByteWriter w;
    for (const auto& f : files) {
        w.str(f.filename().string());
        std::ifstream in(f, std::ios::binary);
        Bytes content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        w.bytes(content);
    }
    return sha256(w.data());
}

std::filesystem::path scratch(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("bfl-accept-" + tag);
    std::filesystem::remove_all(dir);
    return dir;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Random f<=t fault scripts; by the protocols' fault bound none of these may
// break safety.
ScenarioSpec fuzz_spec(ProtocolVariant variant, std::mt19937_64& rng) {
    ScenarioSpec s;
    s.name = "fuzz";
    s.description = "randomized sub-threshold faults";
    s.n = 4;
    s.t = 1;
    s.variant = variant;
    s.scheme = SchemeId::TestMac;
    s.client_values = {to_bytes("alpha"), to_bytes("bravo")};
    s.view_budget = 20;
    s.default_max_steps = 220;

    auto pick_phase = [&]() -> Phase {
        return static_cast<Phase>(rng() % 3 == 2 ? 2 : rng() % 2);
    };
    if (rng() % 4 != 0) {
        ReplicaId byz = static_cast<ReplicaId>(rng() % 4);
        s.f = 1;
        s.byzantine = {byz};
        std::uint32_t actions = rng() % 3;
        for (std::uint32_t i = 0; i < actions; ++i) {
            switch (rng() % 4) {
                case 0:
                    s.adversary_script.push_back(
                        {byz, DoubleVote{1 + rng() % 3, {pick_phase()}, {0, 1}}});
                    break;
                case 1: {
                    std::optional<Phase> phase;
                    if (rng() % 2) phase = pick_phase();
                    s.adversary_script.push_back({byz, WithholdVotes{1 + rng() % 3, phase}});
                    break;
                }
                case 2:
                    s.adversary_script.push_back({byz, SendStaleLock{1 + rng() % 3}});
                    break;
                case 3: {
                    // Equivocate in a view this replica leads; with a single
                    // fault no lane can reach quorum on a second value.
                    View view = byz + 1;
                    EquivocateLane lane_a{0, {NvRoute{{(byz + 1) % 4}, HighQcKind::Genesis, 0}},
                                          {}, {}, {}, false};
                    EquivocateLane lane_b{1, {NvRoute{{(byz + 2) % 4}, HighQcKind::Genesis, 0}},
                                          {}, {}, {}, false};
                    s.adversary_script.push_back(
                        {byz, EquivocateProposal{view, {lane_a, lane_b}}});
                    break;
                }
            }
        }
    }
    std::uint32_t rules = rng() % 3;
    for (std::uint32_t i = 0; i < rules; ++i) {
        if (rng() % 2) {
            s.network_rules.push_back(
                Delay{static_cast<std::uint32_t>(rng() % 4), std::nullopt, 1 + rng() % 3});
        } else {
            DetailedDrop drop;
            drop.from = static_cast<std::uint32_t>(rng() % 4);
            if (rng() % 2) drop.to = static_cast<std::uint32_t>(rng() % 4);
            drop.window = {0, 40 + rng() % 120};
            s.network_rules.push_back(drop);
        }
    }
    validate_scenario(s);
    return s;
}

std::vector<const ScenarioSpec*> attack_scenarios() {
    std::vector<const ScenarioSpec*> attacks;
    for (const auto& spec : corpus())
        if (spec.expected.safety_violation && !spec.mac_mode) attacks.push_back(&spec);
    return attacks;
}

}  // namespace

TEST_CASE("criterion 1: quorum intersection bounds") {
    bool ok = true;
    // n = 4: every pair of 3-subsets overlaps in >= 2 replicas.
    std::vector<std::vector<int>> subsets4;
    for (int skip = 0; skip < 4; ++skip) {
        std::vector<int> s;
        for (int i = 0; i < 4; ++i)
            if (i != skip) s.push_back(i);
        subsets4.push_back(s);
    }
    for (const auto& a : subsets4)
        for (const auto& b : subsets4) {
            int overlap = 0;
            for (int x : a)
                for (int y : b) overlap += x == y;
            ok = ok && overlap >= 2;
        }
    // n = 7: randomized pairs of 5-subsets overlap in >= 3 replicas.
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 10000; ++trial) {
        auto sample = [&] {
            std::array<int, 7> ids{0, 1, 2, 3, 4, 5, 6};
            for (int i = 6; i > 0; --i) std::swap(ids[i], ids[rng() % (i + 1)]);
            return std::set<int>(ids.begin(), ids.begin() + 5);
        };
        auto a = sample(), b = sample();
        int overlap = 0;
        for (int x : a) overlap += b.count(x);
        ok = ok && overlap >= 3;
    }
    criterion(1, "any two quorums intersect in at least t+1 replicas (n=4 exhaustive, n=7 random)",
              ok);
}

TEST_CASE("criterion 2: same-view proofs need zero witnesses") {
    bool ok = true;
    for (const char* name : {"pbft-same-view", "pbft-same-view-n7"}) {
        const auto& spec = corpus_spec(name);
        auto result = run(spec, 1);
        auto conflict = conflict_of(result.bundle);
        ok = ok && conflict.has_value();
        if (!conflict) continue;
        // k = 0: detection runs on the two replies alone.
        auto detected = detect(spec.variant, *conflict, {}, spec.n, spec.t,
                               result.bundle.replica_keys, spec.scheme);
        ok = ok && detected.status == DetectStatus::Proof;
        if (detected.status != DetectStatus::Proof) continue;
        auto verified = verify_proof(*detected.proof, spec.n, spec.t, result.bundle.replica_keys);
        ok = ok && verified.size() == spec.t + 1 && subset_of(verified, spec.byzantine);
    }
    criterion(2, "pbft same-view equivocation convicts exactly t+1 byzantine replicas with k=0",
              ok);
}

TEST_CASE("criterion 3: pbft cross-view proofs need one witness") {
    bool ok = true;
    for (const char* name : {"pbft-cross-view", "pbft-cross-view-stretch", "pbft-cross-view-n7",
                             "pbft-cross-view-n7-stretch"}) {
        const auto& spec = corpus_spec(name);
        auto result = run(spec, 1);
        auto conflict = conflict_of(result.bundle);
        ok = ok && conflict.has_value();
        if (!conflict) continue;
        auto respondents = spec.expected.default_respondents;
        ok = ok && respondents.size() == 1; // exactly one witness
        auto detected = detect_with(result.bundle, *conflict, respondents);
        ok = ok && detected.status == DetectStatus::Proof;
        if (detected.status != DetectStatus::Proof) continue;
        auto verified = verify_proof(*detected.proof, spec.n, spec.t, result.bundle.replica_keys);
        ok = ok && verified.size() >= spec.t + 1 && subset_of(verified, spec.byzantine);
        ok = ok && spec.expected.conflicting_views.has_value() &&
             conflict->low.e == spec.expected.conflicting_views->first &&
             conflict->high.e == spec.expected.conflicting_views->second;
    }
    criterion(3, "pbft cross-view (e'=e+1 and e'=e+3) convicts >= t+1 culprits from one witness",
              ok);
}

TEST_CASE("criterion 4: hotstuff-view needs a witness holding the stale-view prepareQC") {
    const auto& spec = corpus_spec("hotstuff-view-cross-view");
    auto result = run(spec, 1);
    auto conflict = conflict_of(result.bundle);
    bool ok = conflict.has_value();
    if (conflict) {
        // Enumerate every subset of honest replicas. Replica 1 holds the
        // qualifying prepareQC; replica 0 had it dropped.
        std::vector<std::uint32_t> honest;
        for (const auto& i : result.bundle.instances)
            if (!i.byzantine) honest.push_back(i.instance);
        for (std::uint32_t mask = 0; mask < (1u << honest.size()); ++mask) {
            std::vector<std::uint32_t> respondents;
            bool has_holder = false;
            for (std::size_t i = 0; i < honest.size(); ++i)
                if (mask & (1u << i)) {
                    respondents.push_back(honest[i]);
                    has_holder = has_holder || honest[i] == 1;
                }
            auto detected = detect_with(result.bundle, *conflict, respondents);
            if (has_holder) {
                ok = ok && detected.status == DetectStatus::Proof;
                if (detected.status == DetectStatus::Proof) {
                    auto verified =
                        verify_proof(*detected.proof, spec.n, spec.t, result.bundle.replica_keys);
                    ok = ok && verified.size() >= spec.t + 1 &&
                         subset_of(verified, spec.byzantine);
                }
            } else {
                ok = ok && detected.status == DetectStatus::InsufficientWitnesses;
            }
        }
    }
    criterion(4, "hotstuff-view: one qualifying witness suffices; witnesses without the prepareQC "
                 "are insufficient",
              ok);
}

TEST_CASE("criterion 5: hotstuff-hash witness bound k = t+1") {
    bool ok = true;
    {
        const auto& spec = corpus_spec("hotstuff-hash-witness-min");
        auto result = run(spec, 1);
        auto conflict = conflict_of(result.bundle);
        ok = ok && conflict.has_value();
        if (conflict) {
            auto detected =
                detect_with(result.bundle, *conflict, spec.expected.default_respondents);
            ok = ok && detected.status == DetectStatus::Proof;
            if (detected.status == DetectStatus::Proof)
                ok = ok && subset_of(verify_proof(*detected.proof, spec.n, spec.t,
                                                  result.bundle.replica_keys),
                                     spec.byzantine);
        }
    }
    {
        const auto& spec = corpus_spec("hotstuff-hash-witness-min-n7");
        auto result = run(spec, 1);
        auto conflict = conflict_of(result.bundle);
        ok = ok && conflict.has_value();
        std::vector<std::uint32_t> honest;
        for (const auto& i : result.bundle.instances)
            if (!i.byzantine) honest.push_back(i.instance);
        ok = ok && honest.size() == 4;
        bool some_pair_fails = false;
        if (conflict) {
            for (std::uint32_t mask = 0; mask < (1u << honest.size()); ++mask) {
                std::vector<std::uint32_t> respondents;
                for (std::size_t i = 0; i < honest.size(); ++i)
                    if (mask & (1u << i)) respondents.push_back(honest[i]);
                if (respondents.size() == spec.t + 1) {
                    auto detected = detect_with(result.bundle, *conflict, respondents);
                    ok = ok && detected.status == DetectStatus::Proof;
                    if (detected.status == DetectStatus::Proof)
                        ok = ok && subset_of(verify_proof(*detected.proof, spec.n, spec.t,
                                                          result.bundle.replica_keys),
                                             spec.byzantine);
                } else if (respondents.size() == spec.t) {
                    auto detected = detect_with(result.bundle, *conflict, respondents);
                    some_pair_fails =
                        some_pair_fails || detected.status != DetectStatus::Proof;
                }
            }
        }
        ok = ok && some_pair_fails;
    }
    criterion(5, "hotstuff-hash: every (t+1)-subset of honest witnesses proves; some t-subset "
                 "does not",
              ok);
}

TEST_CASE("criterion 6: hotstuff-null indistinguishable worlds") {
    bool ok = true;
    for (const auto& [w1, w2] : std::vector<std::pair<std::string, std::string>>{
             {"hotstuff-null-world1", "hotstuff-null-world2"},
             {"hotstuff-null-world1-n7", "hotstuff-null-world2-n7"}}) {
        const auto& spec1 = corpus_spec(w1);
        const auto& spec2 = corpus_spec(w2);
        auto r1 = run(spec1, 1);
        auto r2 = run(spec2, 1);
        auto c1 = conflict_of(r1.bundle);
        auto c2 = conflict_of(r2.bundle);
        ok = ok && c1.has_value() && c2.has_value();
        if (!c1 || !c2) continue;
        ok = ok && *c1 == *c2;
        RequestProof req{c1->low.e, c1->low.v, c1->high.e};
        auto in1 = client_visible_forensic_input(r1.bundle, req,
                                                 spec1.expected.default_respondents);
        auto in2 = client_visible_forensic_input(r2.bundle, req,
                                                 spec2.expected.default_respondents);
        ok = ok && in1 == in2; // byte-identical client view
        auto d1 = detect_with(r1.bundle, *c1, spec1.expected.default_respondents);
        auto d2 = detect_with(r2.bundle, *c2, spec2.expected.default_respondents);
        ok = ok && d1.status == d2.status;
        auto culprits1 = d1.proof ? d1.proof->culprits : std::vector<ReplicaId>{};
        auto culprits2 = d2.proof ? d2.proof->culprits : std::vector<ReplicaId>{};
        ok = ok && culprits1 == culprits2 && culprits1.size() <= 1;
        // Whoever is blamed must be byzantine in both worlds.
        std::set<ReplicaId> both;
        for (ReplicaId id : spec1.byzantine)
            if (spec2.byzantine.count(id)) both.insert(id);
        ok = ok && subset_of(culprits1, both);
    }
    criterion(6, "hotstuff-null: two-world client inputs byte-identical; verdicts equal and never "
                 "blame an either-world-honest replica",
              ok);
}

TEST_CASE("criterion 7: pbft-mac indistinguishable worlds") {
    bool ok = true;
    for (const auto& [w1, w2] : std::vector<std::pair<std::string, std::string>>{
             {"pbft-mac-world1", "pbft-mac-world2"},
             {"pbft-mac-world1-n7", "pbft-mac-world2-n7"}}) {
        const auto& spec1 = corpus_spec(w1);
        const auto& spec2 = corpus_spec(w2);
        auto r1 = run(spec1, 1);
        auto r2 = run(spec2, 1);
        RequestProof req{1, Value{spec1.client_values[0], {}, false}, 2};
        auto respondents1 = respondents_of(spec1, r1.bundle);
        auto respondents2 = respondents_of(spec2, r2.bundle);
        auto in1 = client_visible_forensic_input(r1.bundle, req, respondents1);
        auto in2 = client_visible_forensic_input(r2.bundle, req, respondents2);
        ok = ok && in1 == in2;
        std::vector<Message> msgs1, msgs2;
        for (const auto& d : r1.bundle.client_inbox) msgs1.push_back(d.msg);
        for (const auto& d : r2.bundle.client_inbox) msgs2.push_back(d.msg);
        ok = ok && mac_replies_conflict(msgs1) && mac_replies_conflict(msgs2);
        // No transferable signatures anywhere: detection cannot go past
        // "conflict exists".
        ok = ok && !conflict_of(r1.bundle).has_value() && !conflict_of(r2.bundle).has_value();
    }
    criterion(7, "pbft-mac: two-world client inputs byte-identical; conflict detectable but "
                 "inconclusive in both",
              ok);
}

TEST_CASE("criterion 8: soundness fuzz never convicts the innocent") {
    bool ok = true;
    std::mt19937_64 rng(2026);
    for (ProtocolVariant variant :
         {ProtocolVariant::PbftPk, ProtocolVariant::HotStuffView, ProtocolVariant::HotStuffHash,
          ProtocolVariant::HotStuffNull}) {
        for (int trial = 0; trial < 1000 && ok; ++trial) {
            ScenarioSpec spec = fuzz_spec(variant, rng);
            auto result = run(spec, rng());
            ok = ok && honest_output_values(result).size() <= 1;
            ok = ok && !conflict_of(result.bundle).has_value();
        }
    }
    // Attack corpus under fresh randomness: proofs may or may not appear,
    // but an honest replica is never named.
    auto attacks = attack_scenarios();
    for (int trial = 0; trial < 200 && ok; ++trial) {
        const ScenarioSpec& spec = *attacks[rng() % attacks.size()];
        auto result = run(spec, rng());
        auto conflict = conflict_of(result.bundle);
        if (!conflict) continue;
        auto detected = detect_with(result.bundle, *conflict,
                                    respondents_of(spec, result.bundle));
        if (detected.status != DetectStatus::Proof) continue;
        auto verified = verify_proof(*detected.proof, spec.n, spec.t, result.bundle.replica_keys);
        ok = ok && subset_of(verified, spec.byzantine);
        for (const auto& candidate : detected.candidates)
            ok = ok && subset_of(candidate, spec.byzantine);
    }
    criterion(8, "fuzzed sub-threshold runs stay safe and proofless; attack runs never blame "
                 "honest replicas",
              ok);
}

TEST_CASE("criterion 9: byte-identical reruns") {
    bool ok = true;
    for (const auto& spec : corpus()) {
        auto dir_a = scratch("det-a"), dir_b = scratch("det-b");
        auto a = run(spec, 5);
        auto b = run(spec, 5);
        save_bundle(a.bundle, dir_a);
        save_bundle(b.bundle, dir_b);
        ok = ok && dir_fingerprint(dir_a) == dir_fingerprint(dir_b);
        auto conflict = conflict_of(a.bundle);
        if (conflict && !spec.mac_mode) {
            auto da = detect_with(a.bundle, *conflict, respondents_of(spec, a.bundle));
            auto db = detect_with(b.bundle, *conflict, respondents_of(spec, b.bundle));
            ok = ok && da.status == db.status;
            if (da.proof && db.proof) {
                save_proof(*da.proof, a.bundle.replica_keys, a.bundle.client_key,
                           dir_a / "proof.json");
                save_proof(*db.proof, b.bundle.replica_keys, b.bundle.client_key,
                           dir_b / "proof.json");
                ok = ok && read_file(dir_a / "proof.json") == read_file(dir_b / "proof.json");
            }
        }
        std::filesystem::remove_all(dir_a);
        std::filesystem::remove_all(dir_b);
    }
    criterion(9, "rerunning any corpus scenario reproduces transcripts and proofs byte-for-byte",
              ok);
}

TEST_CASE("criterion 10: proofs verify standalone and resist tampering") {
    bool ok = true;
    std::mt19937_64 rng(7);
    int proofs_checked = 0;
    for (const ScenarioSpec* spec : attack_scenarios()) {
        auto result = run(*spec, 1);
        auto conflict = conflict_of(result.bundle);
        if (!conflict) {
            ok = false;
            continue;
        }
        auto detected = detect_with(result.bundle, *conflict, respondents_of(*spec, result.bundle));
        if (detected.status != DetectStatus::Proof) continue; // null-variant worlds
        auto dir = scratch("standalone");
        std::filesystem::create_directories(dir);
        save_proof(*detected.proof, result.bundle.replica_keys, result.bundle.client_key,
                   dir / "proof.json");
        std::string text = read_file(dir / "proof.json");
        std::filesystem::remove_all(dir); // transcripts were never persisted; proof text + keys only
        auto keys = result.bundle.replica_keys;
        auto client = result.bundle.client_key;
        try {
            CulpabilityProof loaded = proof_from_json(text, keys, client);
            auto verified = verify_proof(loaded, spec->n, spec->t, keys);
            ok = ok && verified == detected.proof->culprits;
            ++proofs_checked;
        } catch (const InvalidProof&) {
            ok = false;
        }
        for (int tamper = 0; tamper < 100; ++tamper) {
            std::string flipped = text;
            std::size_t pos = rng() % flipped.size();
            flipped[pos] = static_cast<char>(flipped[pos] ^ (1 << (rng() % 8)));
            if (flipped == text) continue;
            bool rejected = false;
            try {
                CulpabilityProof loaded = proof_from_json(flipped, keys, client);
                verify_proof(loaded, spec->n, spec->t, keys);
            } catch (const std::exception&) {
                rejected = true;
            }
            ok = ok && rejected;
        }
    }
    ok = ok && proofs_checked >= 10;
    criterion(10, "every corpus proof verifies from proof + keys alone; 100 bit-flips per proof "
                  "all rejected",
              ok);
}
