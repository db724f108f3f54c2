#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "bfl/crypto.hpp"

using namespace bfl;

namespace {

std::vector<KeyPair> make_keys(SchemeId scheme, std::uint32_t n, std::uint64_t seed = 7) {
    std::vector<KeyPair> keys;
    for (std::uint32_t i = 0; i < n; ++i) keys.push_back(keygen(scheme, seed, "replica", i));
    return keys;
}

std::vector<Bytes> pubs(const std::vector<KeyPair>& keys) {
    std::vector<Bytes> out;
    for (const auto& k : keys) out.push_back(k.pub);
    return out;
}

AggregateSignature agg_over(const std::vector<KeyPair>& keys, const std::vector<ReplicaId>& ids,
                            const Bytes& payload) {
    std::vector<std::pair<ReplicaId, Signature>> votes;
    for (ReplicaId id : ids) votes.emplace_back(id, sign(keys[id], payload));
    return aggregate(votes, static_cast<std::uint32_t>(keys.size()));
}

}  // namespace

TEST_CASE("hex round trip") {
    Bytes b = {0x00, 0x0d, 0xff, 0x42};
    CHECK(to_hex(b) == "000dff42");
    CHECK(from_hex("000dff42") == b);
    CHECK_THROWS_AS(from_hex("0g"), CodecError);
    CHECK_THROWS_AS(from_hex("abc"), CodecError);
}

TEST_CASE("byte codec round trip and truncation") {
    ByteWriter w;
    w.u8(7);
    w.u32(0xdeadbeef);
    w.u64(1ull << 40);
    w.str("hello");
    w.bytes(Bytes{1, 2, 3});
    Bytes enc = w.take();

    ByteReader r(enc);
    CHECK(r.u8() == 7);
    CHECK(r.u32() == 0xdeadbeef);
    CHECK(r.u64() == (1ull << 40));
    CHECK(r.str() == "hello");
    CHECK(r.bytes() == Bytes{1, 2, 3});
    CHECK(r.done());

    Bytes cut(enc.begin(), enc.begin() + 3);
    ByteReader r2(cut);
    r2.u8();
    CHECK_THROWS_AS(r2.u32(), CodecError);
}

TEST_CASE("sha256 known vector") {
    // FIPS 180-2 test vector for "abc".
    CHECK(sha256(to_bytes("abc")).hex() ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256(to_bytes("")).hex() ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("keygen is deterministic and distinct per index") {
    for (SchemeId scheme : {SchemeId::Ed25519, SchemeId::TestMac}) {
        CAPTURE(scheme_name(scheme));
        KeyPair a = keygen(scheme, 7, "replica", 0);
        KeyPair a2 = keygen(scheme, 7, "replica", 0);
        KeyPair b = keygen(scheme, 7, "replica", 1);
        KeyPair c = keygen(scheme, 8, "replica", 0);
        KeyPair d = keygen(scheme, 7, "client", 0);
        CHECK(a.pub == a2.pub);
        CHECK(a.sec == a2.sec);
        CHECK(a.pub != b.pub);
        CHECK(a.pub != c.pub);
        CHECK(a.pub != d.pub);
    }
}

TEST_CASE("sign/verify basics for both schemes") {
    for (SchemeId scheme : {SchemeId::Ed25519, SchemeId::TestMac}) {
        CAPTURE(scheme_name(scheme));
        KeyPair k = keygen(scheme, 1, "replica", 0);
        KeyPair k2 = keygen(scheme, 1, "replica", 1);
        Bytes b = to_bytes("payload");
        Bytes b2 = to_bytes("payloaD");
        Signature sig = sign(k, b);
        CHECK(verify(scheme, k.pub, b, sig));
        CHECK_FALSE(verify(scheme, k2.pub, b, sig));
        CHECK_FALSE(verify(scheme, k.pub, b2, sig));
        CHECK(sign(k, b) == sig);  // deterministic signing
    }
}

TEST_CASE("testmac signatures are recomputable from the public key") {
    KeyPair k = keygen(SchemeId::TestMac, 3, "replica", 2);
    CHECK(k.pub == k.sec);
    Bytes payload = to_bytes("m");
    KeyPair forged{SchemeId::TestMac, k.pub, k.pub};
    CHECK(verify(SchemeId::TestMac, k.pub, payload, sign(forged, payload)));
}

TEST_CASE("bitmap pack/unpack little-endian") {
    Bitmap bm(4);
    bm.set(0);
    bm.set(2);
    bm.set(3);
    CHECK(bm.packed() == Bytes{0x0d});
    CHECK(Bitmap::unpack(Bytes{0x0d}, 4) == bm);
    CHECK(Bitmap(4).packed() == Bytes{0x00});

    Bitmap wide(9);
    wide.set(8);
    CHECK(wide.packed() == Bytes{0x00, 0x01});
    CHECK(Bitmap::unpack(Bytes{0x00, 0x01}, 9) == wide);

    CHECK_THROWS_AS(Bitmap::unpack(Bytes{0x00, 0x00}, 4), ShapeError);
    CHECK_THROWS_AS(Bitmap::unpack(Bytes{0x10}, 4), ShapeError);  // bit beyond n
}

TEST_CASE("aggregate: bitmap 1011 for ids {0,2,3} of n=4") {
    auto keys = make_keys(SchemeId::TestMac, 4);
    Bytes payload = to_bytes("vote");
    AggregateSignature agg = agg_over(keys, {3, 0, 2}, payload);  // unsorted input
    CHECK(agg.signers() == std::vector<ReplicaId>{0, 2, 3});
    CHECK(agg.signatures.size() == 3);
    CHECK(agg.bitmap.packed() == Bytes{0x0d});
    // Signatures stored in ascending id order regardless of input order.
    CHECK(agg.signatures[0] == sign(keys[0], payload));
    CHECK(agg.signatures[2] == sign(keys[3], payload));

    AggregateSignature empty = aggregate({}, 4);
    CHECK(empty.count() == 0);
    CHECK(empty.bitmap.packed() == Bytes{0x00});
    CHECK(empty.signatures.empty());

    auto s = sign(keys[1], payload);
    CHECK_THROWS_AS(aggregate({{1, s}, {1, s}}, 4), DuplicateSigner);
    CHECK_THROWS_AS(aggregate({{4, s}}, 4), IdOutOfRange);
}

TEST_CASE("verify_aggregate") {
    for (SchemeId scheme : {SchemeId::Ed25519, SchemeId::TestMac}) {
        CAPTURE(scheme_name(scheme));
        auto keys = make_keys(scheme, 4);
        Bytes payload = to_bytes("vote");
        AggregateSignature agg = agg_over(keys, {0, 1, 3}, payload);
        CHECK(verify_aggregate(agg, payload, pubs(keys), scheme));

        AggregateSignature bad = agg;
        bad.signatures[1].bytes[0] ^= 1;
        CHECK_FALSE(verify_aggregate(bad, payload, pubs(keys), scheme));

        CHECK_FALSE(verify_aggregate(agg, to_bytes("other"), pubs(keys), scheme));

        AggregateSignature wrong_shape = agg;
        wrong_shape.bitmap = Bitmap(5);
        CHECK_THROWS_AS(verify_aggregate(wrong_shape, payload, pubs(keys), scheme), ShapeError);

        AggregateSignature mismatched = agg;
        mismatched.signatures.pop_back();
        CHECK_FALSE(verify_aggregate(mismatched, payload, pubs(keys), scheme));
    }
}

TEST_CASE("intersect examples") {
    auto keys = make_keys(SchemeId::TestMac, 4);
    Bytes payload = to_bytes("x");
    auto a = agg_over(keys, {0, 1, 2}, payload);
    auto b = agg_over(keys, {1, 2, 3}, payload);
    CHECK(intersect(a, b) == std::vector<ReplicaId>{1, 2});
    CHECK(intersect(a, a) == std::vector<ReplicaId>{0, 1, 2});

    auto keys5 = make_keys(SchemeId::TestMac, 5);
    auto c = agg_over(keys5, {0, 1}, payload);
    CHECK_THROWS_AS(intersect(a, c), ShapeError);
}

TEST_CASE("quorum intersection: any two 2t+1 quorums share >= t+1 replicas") {
    for (std::uint32_t t : {1u, 2u}) {
        std::uint32_t n = 3 * t + 1;
        std::uint32_t q = 2 * t + 1;
        // Enumerate all q-subsets of [0,n) as masks, exhaustively.
        std::vector<std::uint32_t> quorums;
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            if (static_cast<std::uint32_t>(__builtin_popcount(mask)) == q) quorums.push_back(mask);
        }
        for (std::uint32_t m1 : quorums) {
            for (std::uint32_t m2 : quorums) {
                CHECK(static_cast<std::uint32_t>(__builtin_popcount(m1 & m2)) >= t + 1);
            }
        }
    }
}
