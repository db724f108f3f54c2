#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "bfl/simnet.hpp"

using namespace bfl;

namespace {

const ScenarioSpec& corpus_spec(const std::string& name) {
    static auto corpus = builtin_corpus();
    const ScenarioSpec* found = find_scenario(corpus, name);
    REQUIRE(found != nullptr);
    return *found;
}

// Deterministic fingerprint of everything a bundle records.
Digest bundle_digest(const TranscriptBundle& b) {
    ByteWriter w;
    w.str(b.scenario_name);
    w.u64(b.seed);
    w.u64(b.step_count);
    w.u8(b.timed_out ? 1 : 0);
    for (const auto& k : b.replica_keys) w.bytes(k);
    w.bytes(b.client_key);
    for (const auto& [inst, records] : b.transcripts) {
        w.u32(inst);
        w.u32(static_cast<std::uint32_t>(records.size()));
        for (const auto& r : records) {
            w.u64(r.step);
            w.u8(static_cast<std::uint8_t>(r.direction));
            w.u32(r.peer);
            w.bytes(encode_message(r.msg));
        }
    }
    for (const auto& d : b.client_inbox) {
        w.u64(d.step);
        w.u32(d.from_instance);
        w.bytes(encode_message(d.msg));
    }
    for (const auto& d : b.drops) {
        w.u64(d.step);
        w.u32(d.from_instance);
        w.u32(d.to_instance);
        w.str(d.reason);
    }
    return sha256(w.data());
}

std::filesystem::path temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("bfl-simnet-" + tag);
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("honest runs commit one value in every variant") {
    for (const char* name : {"honest-pbft-pk", "honest-hotstuff-view", "honest-hotstuff-hash",
                             "honest-hotstuff-null", "honest-pbft-pk-n7", "honest-hotstuff-view-n7",
                             "honest-hotstuff-hash-n7", "honest-hotstuff-null-n7"}) {
        CAPTURE(name);
        auto result = run(corpus_spec(name), 1);
        CHECK(!result.bundle.timed_out);
        auto values = honest_output_values(result);
        REQUIRE(values.size() == 1);
        for (const auto& info : result.bundle.instances) {
            auto it = result.outputs.find(info.instance);
            REQUIRE(it != result.outputs.end());
            REQUIRE(it->second.has_value());
            CHECK(std::get<0>(*it->second) == values[0]);
            CHECK(std::get<1>(*it->second) == 1); // single-shot, first view
        }
        // Every replica Replied to the client.
        std::size_t replies = 0;
        for (const auto& d : result.bundle.client_inbox)
            if (type_of(d.msg) == MsgType::Reply) ++replies;
        CHECK(replies == result.bundle.instances.size());
    }
}

TEST_CASE("same seed reproduces identical bundles; different seed differs") {
    const auto& spec = corpus_spec("pbft-cross-view");
    auto a = run(spec, 7);
    auto b = run(spec, 7);
    CHECK(bundle_digest(a.bundle) == bundle_digest(b.bundle));
    auto c = run(spec, 8);
    CHECK(!(bundle_digest(a.bundle) == bundle_digest(c.bundle)));
}

TEST_CASE("save and load round-trips a bundle exactly") {
    auto result = run(corpus_spec("hotstuff-hash-witness-min"), 3);
    auto dir = temp_dir("roundtrip");
    save_bundle(result.bundle, dir);
    TranscriptBundle loaded = load_bundle(dir);
    CHECK(bundle_digest(loaded) == bundle_digest(result.bundle));
    CHECK(loaded.instances == result.bundle.instances);
    CHECK(loaded.drops == result.bundle.drops);
    std::filesystem::remove_all(dir);
}

TEST_CASE("a quorumless partition stalls every honest replica") {
    ScenarioSpec spec = corpus_spec("honest-pbft-pk");
    spec.network_rules.push_back(Partition{{{0, 1}, {2, 3}}, {}});
    spec.default_max_steps = 200;
    auto result = run(spec, 1);
    CHECK(result.bundle.timed_out);
    CHECK(honest_output_values(result).empty());
    bool partition_drop = false;
    for (const auto& d : result.bundle.drops) partition_drop = partition_drop || d.reason == "partition";
    CHECK(partition_drop);
    // Blame-driven view changes keep advancing views even without progress.
    std::size_t view_changes = 0;
    for (const auto& [inst, records] : result.bundle.transcripts)
        for (const auto& r : records)
            if (r.direction == TranscriptRecord::Direction::Sent &&
                type_of(r.msg) == MsgType::ViewChange)
                ++view_changes;
    CHECK(view_changes > 0);
}

TEST_CASE("scripted drops are recorded in the drop ledger") {
    auto result = run(corpus_spec("pbft-cross-view"), 1);
    bool scripted = false;
    for (const auto& d : result.bundle.drops) scripted = scripted || d.reason == "drop-rule";
    CHECK(scripted);
}

TEST_CASE("delays stretch the schedule without changing outcomes") {
    ScenarioSpec spec = corpus_spec("honest-hotstuff-view");
    auto baseline = run(spec, 1);
    spec.network_rules.push_back(Delay{0, std::nullopt, 5});
    auto delayed = run(spec, 1);
    CHECK(delayed.bundle.step_count > baseline.bundle.step_count);
    CHECK(honest_output_values(delayed).size() == 1);
    CHECK(honest_output_values(delayed) == honest_output_values(baseline));
}

TEST_CASE("twins share an identity and key but run separately") {
    auto result = run(corpus_spec("pbft-same-view-twins"), 1);
    CHECK(result.bundle.instances.size() == 6); // n=4 plus two twins
    std::map<ReplicaId, int> copies;
    for (const auto& info : result.bundle.instances) ++copies[info.identity];
    CHECK(copies[0] == 2);
    CHECK(copies[1] == 2);
    CHECK(copies[2] == 1);
    // Both values commit at honest replicas.
    CHECK(honest_output_values(result).size() == 2);
}

TEST_CASE("witness queries honor the forensic policy") {
    auto result = run(corpus_spec("hotstuff-null-world2"), 1);
    // In this schedule the withholding instances are replicas scripted with
    // an answer-forensics policy; their responses must be empty.
    RequestProof req{1, Value{to_bytes("alpha"), {}, false}, 2};
    bool saw_withholder = false;
    for (const auto& info : result.bundle.instances) {
        if (info.policy != ForensicPolicy::Withhold) continue;
        saw_withholder = true;
        auto answers = query_witnesses(result.bundle, req, {info.instance});
        REQUIRE(answers.size() == 1);
        CHECK(answers[0].second.empty());
    }
    CHECK(saw_withholder);
}

TEST_CASE("mac pair keys are symmetric and tokens bind the pair") {
    Digest k01 = mac_pair_key(9, 0, 1);
    CHECK(k01 == mac_pair_key(9, 1, 0));
    CHECK(!(k01 == mac_pair_key(9, 0, 2)));
    CHECK(!(k01 == mac_pair_key(10, 0, 1)));
    Value v{to_bytes("x"), {}, false};
    Bytes payload = mac_vote_payload(Phase::Prepare, 1, v);
    CHECK(mac_token(k01, payload) == mac_token(k01, payload));
    CHECK(!(mac_token(k01, payload) == mac_token(mac_pair_key(9, 0, 2), payload)));
}

TEST_CASE("mac runs deliver unverifiable conflicting replies to the client") {
    auto result = run(corpus_spec("pbft-mac-world1"), 1);
    CHECK(honest_output_values(result).size() == 1); // no honest-side violation
    std::set<Bytes> reply_values;
    for (const auto& d : result.bundle.client_inbox)
        if (const auto* r = std::get_if<MacReply>(&d.msg)) reply_values.insert(r->v.payload);
    CHECK(reply_values.size() == 2); // the forged reply disagrees
}
