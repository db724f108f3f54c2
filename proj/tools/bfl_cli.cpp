// Command-line front end: run scenarios, detect equivocation from the
// client's viewpoint, verify culpability proofs, and print reports.
//
// Exit codes: 0 success/proof, 2 bad input or missing file, 3 detector
// inconclusive or short on witnesses, 4 no conflicting replies, 5 invalid
// proof, 6 report inputs inconsistent with each other.

#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <thread>

#include "bfl/forensics.hpp"
#include "bfl/simnet.hpp"

using namespace bfl;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadInput = 2;
constexpr int kExitInconclusive = 3;
constexpr int kExitNoConflict = 4;
constexpr int kExitInvalidProof = 5;
constexpr int kExitInconsistent = 6;

std::vector<ScenarioSpec> load_corpus() {
    const char* dir = std::getenv("BFL_CORPUS_DIR");
    if (!dir) return builtin_corpus();
    std::vector<ScenarioSpec> corpus;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        corpus.push_back(load_scenario(entry.path()));
    }
    std::sort(corpus.begin(), corpus.end(),
              [](const auto& a, const auto& b) { return a.name < b.name; });
    return corpus;
}

std::optional<ScenarioSpec> resolve_scenario(const std::string& ref) {
    if (ref.find('/') != std::string::npos || ref.ends_with(".json")) {
        if (!std::filesystem::exists(ref)) return std::nullopt;
        return load_scenario(ref);
    }
    auto corpus = load_corpus();
    const ScenarioSpec* found = find_scenario(corpus, ref);
    if (!found) return std::nullopt;
    return *found;
}

std::string value_text(const Value& v) {
    if (v.is_bottom) return "<bottom>";
    bool printable = !v.payload.empty();
    for (std::uint8_t b : v.payload) printable = printable && b >= 0x20 && b < 0x7f;
    if (printable) return std::string(v.payload.begin(), v.payload.end());
    return "0x" + to_hex(v.payload);
}

void write_keys_file(const ExecutionResult& result, const std::filesystem::path& file) {
    json j;
    j["format"] = "bfl-keys-1";
    j["n"] = result.ctx.n;
    j["t"] = result.ctx.t;
    j["scheme"] = scheme_name(result.ctx.scheme);
    json replicas = json::array();
    for (const auto& k : result.ctx.replica_keys) replicas.push_back(to_hex(k));
    j["replicas"] = replicas;
    j["client"] = to_hex(result.ctx.client_key);
    std::ofstream out(file, std::ios::trunc);
    out << j.dump(2) << "\n";
}

struct KeyRegistry {
    std::uint32_t n = 0, t = 0;
    SchemeId scheme = SchemeId::Ed25519;
    std::vector<Bytes> replicas;
    Bytes client;
};

KeyRegistry load_keys_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    json j = json::parse(in);
    if (j.at("format").get<std::string>() != "bfl-keys-1")
        throw std::runtime_error("unsupported key registry format");
    KeyRegistry reg;
    reg.n = j.at("n").get<std::uint32_t>();
    reg.t = j.at("t").get<std::uint32_t>();
    reg.scheme = scheme_from_name(j.at("scheme").get<std::string>());
    for (const auto& k : j.at("replicas")) reg.replicas.push_back(from_hex(k.get<std::string>()));
    reg.client = from_hex(j.at("client").get<std::string>());
    return reg;
}

std::vector<Message> client_messages(const TranscriptBundle& bundle) {
    std::vector<Message> msgs;
    for (const auto& d : bundle.client_inbox) msgs.push_back(d.msg);
    return msgs;
}

std::vector<std::uint32_t> all_instances(const TranscriptBundle& bundle) {
    std::vector<std::uint32_t> ids;
    for (const auto& i : bundle.instances) ids.push_back(i.instance);
    return ids;
}

std::string culprit_text(const std::vector<ReplicaId>& culprits) {
    std::string s = "{";
    for (std::size_t i = 0; i < culprits.size(); ++i)
        s += (i ? "," : "") + std::to_string(culprits[i]);
    return s + "}";
}

struct DetectOutcome {
    bool conflict = false;
    std::optional<ConflictingReplies> replies;
    DetectResult result;
};

DetectOutcome run_detection(const TranscriptBundle& bundle, ProtocolVariant variant,
                            const std::vector<std::uint32_t>& respondents) {
    DetectOutcome out;
    auto msgs = client_messages(bundle);
    if (bundle.mac_mode) {
        out.conflict = mac_replies_conflict(msgs);
        out.result.status = out.conflict ? DetectStatus::Inconclusive : DetectStatus::NoConflict;
        return out;
    }
    out.replies = find_conflicting_replies(msgs, bundle.n, bundle.t, bundle.replica_keys,
                                           bundle.scheme);
    if (!out.replies) {
        out.result.status = DetectStatus::NoConflict;
        return out;
    }
    out.conflict = true;
    std::vector<Message> responses;
    if (out.replies->low.e != out.replies->high.e) {
        // Cross-view conflicts need witness evidence; a same-view pair is
        // already a proof by itself.
        RequestProof req{out.replies->low.e, out.replies->low.v, out.replies->high.e};
        for (auto& [inst, answer] : query_witnesses(bundle, req, respondents))
            responses.insert(responses.end(), answer.begin(), answer.end());
    }
    out.result = detect(variant, *out.replies, responses, bundle.n, bundle.t, bundle.replica_keys,
                        bundle.scheme);
    return out;
}

int run_one(const ScenarioSpec& spec, std::uint64_t seed, std::uint64_t max_steps,
            std::filesystem::path out_dir, bool verbose) {
    auto started = std::chrono::steady_clock::now();
    ExecutionResult result = run(spec, seed, max_steps);
    save_bundle(result.bundle, out_dir);
    write_keys_file(result, out_dir / "keys.json");
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - started)
                       .count();

    std::cout << "scenario: " << spec.name << "\n"
              << "variant: " << variant_name(spec.variant) << (spec.mac_mode ? " (mac)" : "")
              << "  n=" << spec.n << " t=" << spec.t << " f=" << spec.f << "\n"
              << "seed: " << seed << "  steps: " << result.bundle.step_count
              << (result.bundle.timed_out ? "  (some honest instances never output)" : "") << "\n"
              << "transcripts: " << out_dir.string() << "\n";
    std::size_t output_count = 0;
    for (const auto& info : result.bundle.instances) {
        auto it = result.outputs.find(info.instance);
        if (it == result.outputs.end() || !it->second) continue;
        ++output_count;
        if (verbose || !info.byzantine) {
            const auto& [v, e, sigma] = *it->second;
            std::cout << "  instance " << info.instance << " (replica " << info.identity
                      << (info.byzantine ? ", byzantine" : "") << ") output e=" << e << " v="
                      << value_text(v) << "\n";
        }
    }
    auto honest = honest_output_values(result);
    std::cout << "outputs: " << output_count << " total, " << honest.size()
              << " distinct honest value(s)";
    if (honest.size() > 1) std::cout << "  ** safety violation **";
    std::cout << "\nelapsed: " << elapsed << " ms\n";
    return kExitOk;
}

int cmd_run(const std::string& scenario_ref, std::uint64_t seed, std::uint64_t max_steps,
            std::string out_arg, unsigned jobs, bool verbose) {
    if (scenario_ref == "all") {
        auto corpus = load_corpus();
        std::atomic<std::size_t> next{0};
        std::atomic<int> worst{kExitOk};
        std::mutex print;
        auto worker = [&] {
            for (std::size_t i = next++; i < corpus.size(); i = next++) {
                const auto& spec = corpus[i];
                std::filesystem::path dir =
                    out_arg.empty() ? std::filesystem::path("out") / spec.name
                                    : std::filesystem::path(out_arg) / spec.name;
                std::ostringstream buf;
                auto* old = std::cout.rdbuf(jobs > 1 ? buf.rdbuf() : std::cout.rdbuf());
                int rc = run_one(spec, seed, max_steps, dir, verbose);
                std::cout.rdbuf(old);
                if (jobs > 1) {
                    std::lock_guard<std::mutex> lock(print);
                    std::cout << buf.str() << "\n";
                }
                int expected = worst.load();
                while (rc > expected && !worst.compare_exchange_weak(expected, rc)) {}
            }
        };
        std::vector<std::thread> pool;
        for (unsigned i = 1; i < std::max(1u, jobs); ++i) pool.emplace_back(worker);
        worker();
        for (auto& th : pool) th.join();
        return worst.load();
    }
    auto spec = resolve_scenario(scenario_ref);
    if (!spec) {
        std::cerr << "unknown scenario: " << scenario_ref << "\n";
        return kExitBadInput;
    }
    std::filesystem::path dir =
        out_arg.empty() ? std::filesystem::path("out") / spec->name : std::filesystem::path(out_arg);
    return run_one(*spec, seed, max_steps, dir, verbose);
}

int cmd_detect(const std::string& transcripts, std::vector<std::uint32_t> respondents,
               std::string variant_override, std::string proof_out, bool verbose) {
    TranscriptBundle bundle = load_bundle(transcripts);
    ProtocolVariant variant =
        variant_override.empty() ? bundle.variant : variant_from_name(variant_override);
    if (respondents.empty()) respondents = all_instances(bundle);
    DetectOutcome outcome = run_detection(bundle, variant, respondents);

    if (!outcome.conflict) {
        std::cout << "no conflicting replies\n";
        return kExitNoConflict;
    }
    if (bundle.mac_mode) {
        std::cout << "conflicting replies present, but reply quorums carry no transferable "
                     "signatures: inconclusive\n";
        return kExitInconclusive;
    }
    const auto& replies = *outcome.replies;
    std::cout << "conflict: e=" << replies.low.e << " v=" << value_text(replies.low.v) << "  vs  e="
              << replies.high.e << " v=" << value_text(replies.high.v) << "\n";
    if (verbose)
        for (const auto& c : outcome.result.candidates)
            std::cout << "candidate culprit set: " << culprit_text(c) << "\n";
    switch (outcome.result.status) {
        case DetectStatus::Proof: {
            const auto& proof = *outcome.result.proof;
            std::filesystem::path file = proof_out.empty()
                                             ? std::filesystem::path(transcripts) / "proof.json"
                                             : std::filesystem::path(proof_out);
            save_proof(proof, bundle.replica_keys, bundle.client_key, file);
            std::cout << "rule: " << proof.rule << "\nculprits: " << culprit_text(proof.culprits)
                      << "\nproof: " << file.string() << "\n";
            return kExitOk;
        }
        case DetectStatus::Inconclusive:
            std::cout << "inconclusive\n";
            return kExitInconclusive;
        case DetectStatus::InsufficientWitnesses:
            std::cout << "insufficient witnesses; retry with more respondents\n";
            return kExitInconclusive;
        case DetectStatus::NoConflict:
            std::cout << "no conflicting replies\n";
            return kExitNoConflict;
    }
    return kExitInconclusive;
}

int cmd_verify(const std::string& proof_path, const std::string& keys_path) {
    if (!std::filesystem::exists(keys_path)) {
        std::cerr << "missing key registry: " << keys_path << "\n";
        return kExitBadInput;
    }
    if (!std::filesystem::exists(proof_path)) {
        std::cerr << "missing proof file: " << proof_path << "\n";
        return kExitBadInput;
    }
    KeyRegistry keys;
    try {
        keys = load_keys_file(keys_path);
    } catch (const std::exception& e) {
        std::cerr << "bad key registry: " << e.what() << "\n";
        return kExitBadInput;
    }
    try {
        CulpabilityProof proof = load_proof(proof_path, keys.replicas, keys.client);
        auto culprits = verify_proof(proof, keys.n, keys.t, keys.replicas);
        std::cout << "valid  rule: " << proof.rule << "  culprits: " << culprit_text(culprits)
                  << "\n";
        return kExitOk;
    } catch (const InvalidProof& e) {
        std::cerr << "invalid proof: " << e.predicate << "\n";
        return kExitInvalidProof;
    } catch (const std::exception& e) {
        std::cerr << "cannot parse proof: " << e.what() << "\n";
        return kExitBadInput;
    }
}

// A reply embedded in the proof must be one the transcript's client actually
// received, and the proof's parameters must match the bundle.
bool proof_matches_bundle(const CulpabilityProof& proof, const TranscriptBundle& bundle) {
    if (proof.variant != bundle.variant || proof.n != bundle.n || proof.t != bundle.t) return false;
    auto seen = [&](const Reply& r) {
        Bytes enc = encode_message(Message{r});
        for (const auto& d : bundle.client_inbox)
            if (encode_message(d.msg) == enc) return true;
        return false;
    };
    return seen(proof.replies.low) && seen(proof.replies.high);
}

int cmd_report(const std::string& transcripts, const std::string& proof_path,
               std::vector<std::uint32_t> respondents, bool as_json) {
    auto started = std::chrono::steady_clock::now();
    TranscriptBundle bundle = load_bundle(transcripts);
    if (respondents.empty()) respondents = all_instances(bundle);

    std::optional<CulpabilityProof> proof;
    std::string verification = "not applicable";
    DetectOutcome outcome;
    if (!proof_path.empty()) {
        try {
            proof = load_proof(proof_path, bundle.replica_keys, bundle.client_key);
        } catch (const std::exception& e) {
            std::cerr << "proof does not belong to this transcript: " << e.what() << "\n";
            return kExitInconsistent;
        }
        if (!proof_matches_bundle(*proof, bundle)) {
            std::cerr << "proof does not belong to this transcript\n";
            return kExitInconsistent;
        }
        outcome.conflict = true;
        outcome.replies = proof->replies;
        outcome.result.status = DetectStatus::Proof;
        outcome.result.proof = proof;
        try {
            verify_proof(*proof, bundle.n, bundle.t, bundle.replica_keys);
            verification = "valid";
        } catch (const InvalidProof& e) {
            verification = "invalid: " + e.predicate;
        }
    } else {
        outcome = run_detection(bundle, bundle.variant, respondents);
        if (outcome.result.status == DetectStatus::Proof) {
            proof = outcome.result.proof;
            verify_proof(*proof, bundle.n, bundle.t, bundle.replica_keys);
            verification = "valid";
        }
    }
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - started)
                       .count();

    json j;
    j["scenario"] = bundle.scenario_name;
    j["variant"] = variant_name(bundle.variant);
    j["mac_mode"] = bundle.mac_mode;
    j["n"] = bundle.n;
    j["t"] = bundle.t;
    j["seed"] = bundle.seed;
    j["steps"] = bundle.step_count;
    j["safety"] = outcome.conflict ? "violated" : "ok";
    if (outcome.replies) {
        j["conflict"] = {{"e_low", outcome.replies->low.e},
                         {"v_low", value_text(outcome.replies->low.v)},
                         {"e_high", outcome.replies->high.e},
                         {"v_high", value_text(outcome.replies->high.v)}};
    }
    j["verdict"] = detect_status_name(outcome.result.status);
    if (proof) {
        j["rule"] = proof->rule;
        j["culprits"] = proof->culprits;
    }
    j["verification"] = verification;
    j["elapsed_ms"] = elapsed;

    if (as_json) {
        std::cout << j.dump(2) << "\n";
        return kExitOk;
    }
    std::cout << "scenario: " << bundle.scenario_name << "  variant: "
              << variant_name(bundle.variant) << (bundle.mac_mode ? " (mac)" : "") << "  n="
              << bundle.n << " t=" << bundle.t << " seed=" << bundle.seed << "\n";
    if (!outcome.conflict) {
        std::cout << "no safety violation\n";
        return kExitOk;
    }
    if (outcome.replies)
        std::cout << "conflicting outputs: (e=" << outcome.replies->low.e << ", "
                  << value_text(outcome.replies->low.v) << ") vs (e=" << outcome.replies->high.e
                  << ", " << value_text(outcome.replies->high.v) << ")\n";
    else
        std::cout << "conflicting client replies (unattributable quorum claims)\n";
    std::cout << "verdict: " << detect_status_name(outcome.result.status) << "\n";
    if (proof)
        std::cout << "rule: " << proof->rule << "\nculprits: " << culprit_text(proof->culprits)
                  << "\nverification: " << verification << "\n";
    std::cout << "elapsed: " << elapsed << " ms\n";
    return kExitOk;
}

int cmd_list() {
    for (const auto& spec : load_corpus()) {
        std::cout << spec.name << "  [" << variant_name(spec.variant)
                  << (spec.mac_mode ? ", mac" : "") << ", n=" << spec.n << "]\n    "
                  << spec.description << "\n";
    }
    return kExitOk;
}

int cmd_dump(const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    for (const auto& spec : builtin_corpus()) {
        std::ofstream out(std::filesystem::path(out_dir) / (spec.name + ".json"), std::ios::trunc);
        out << scenario_to_json(spec) << "\n";
    }
    std::cout << "wrote corpus to " << out_dir << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic BFT consensus forensics lab"};
    app.require_subcommand(1);

    std::string scenario, out, transcripts, variant, proof, keys;
    std::uint64_t seed = 1, max_steps = 0;
    std::vector<std::uint32_t> respondents;
    unsigned jobs = 1;
    bool verbose = false, as_json = false;

    auto* run_cmd = app.add_subcommand("run", "execute a scenario and persist transcripts");
    run_cmd->add_option("--scenario", scenario, "corpus name, json path, or 'all'")->required();
    run_cmd->add_option("--seed", seed, "deterministic seed (default 1)");
    run_cmd->add_option("--max-steps", max_steps, "step budget override");
    run_cmd->add_option("--out", out, "transcript output directory");
    run_cmd->add_option("--jobs", jobs, "parallel scenarios for 'all'");
    run_cmd->add_flag("--verbose", verbose, "print byzantine outputs too");

    auto* detect_cmd = app.add_subcommand("detect", "run client-side detection over transcripts");
    detect_cmd->add_option("--transcripts", transcripts, "transcript directory")->required();
    detect_cmd->add_option("--respondents", respondents, "witness instance ids (default all)");
    detect_cmd->add_option("--variant", variant, "detector override");
    detect_cmd->add_option("--out", out, "proof output path");
    detect_cmd->add_flag("--verbose", verbose, "print all candidate culprit sets");

    auto* verify_cmd = app.add_subcommand("verify", "independently verify a culpability proof");
    verify_cmd->add_option("--proof", proof, "proof file")->required();
    verify_cmd->add_option("--keys", keys, "key registry file")->required();

    auto* report_cmd = app.add_subcommand("report", "summarize a run and its forensics");
    report_cmd->add_option("--transcripts", transcripts, "transcript directory")->required();
    report_cmd->add_option("--proof", proof, "existing proof file to report on");
    report_cmd->add_option("--respondents", respondents, "witness instance ids (default all)");
    report_cmd->add_flag("--json", as_json, "machine-readable output");

    app.add_subcommand("list-scenarios", "print the scenario corpus");
    auto* dump_cmd = app.add_subcommand("dump-corpus", "write builtin scenarios as json files");
    dump_cmd->add_option("--out", out, "target directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return cmd_run(scenario, seed, max_steps, out, jobs, verbose);
        if (detect_cmd->parsed()) return cmd_detect(transcripts, respondents, variant, out, verbose);
        if (verify_cmd->parsed()) return cmd_verify(proof, keys);
        if (report_cmd->parsed()) return cmd_report(transcripts, proof, respondents, as_json);
        if (app.get_subcommand("list-scenarios")->parsed()) return cmd_list();
        if (dump_cmd->parsed()) return cmd_dump(out);
    } catch (const SchemaError& e) {
        std::cerr << "bad scenario: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    }
    return kExitBadInput;
}
