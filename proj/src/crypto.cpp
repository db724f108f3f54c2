#include "bfl/crypto.hpp"

#include <sodium.h>

#include <algorithm>
#include <mutex>

namespace bfl {

namespace {

void ensure_sodium() {
    static std::once_flag once;
    std::call_once(once, [] {
        if (sodium_init() < 0) throw CryptoError("sodium_init failed");
    });
}

Digest derive_seed(SchemeId scheme, std::uint64_t seed, const std::string& domain, std::uint32_t index) {
    ByteWriter w;
    w.str("bfl-keyseed");
    w.u8(static_cast<std::uint8_t>(scheme));
    w.u64(seed);
    w.str(domain);
    w.u32(index);
    return sha256(w.data());
}

}  // namespace

Digest sha256(std::span<const std::uint8_t> data) {
    ensure_sodium();
    Digest d;
    crypto_hash_sha256(d.bytes.data(), data.data(), data.size());
    return d;
}

Digest sha256(const Bytes& data) {
    return sha256(std::span<const std::uint8_t>(data));
}

std::string scheme_name(SchemeId id) {
    switch (id) {
        case SchemeId::Ed25519: return "ed25519";
        case SchemeId::TestMac: return "testmac";
    }
    throw KeyError("unknown scheme id");
}

SchemeId scheme_from_name(const std::string& name) {
    if (name == "ed25519") return SchemeId::Ed25519;
    if (name == "testmac") return SchemeId::TestMac;
    throw KeyError("unknown scheme name: " + name);
}

KeyPair keygen(SchemeId scheme, std::uint64_t seed, const std::string& domain, std::uint32_t index) {
    ensure_sodium();
    Digest material = derive_seed(scheme, seed, domain, index);
    KeyPair kp;
    kp.scheme = scheme;
    if (scheme == SchemeId::Ed25519) {
        kp.pub.resize(crypto_sign_PUBLICKEYBYTES);
        kp.sec.resize(crypto_sign_SECRETKEYBYTES);
        crypto_sign_seed_keypair(kp.pub.data(), kp.sec.data(), material.bytes.data());
    } else {
        // Test scheme: the verification key doubles as the MAC key, so
        // fixtures can recompute signatures.
        kp.pub.assign(material.bytes.begin(), material.bytes.end());
        kp.sec = kp.pub;
    }
    return kp;
}

Signature sign(const KeyPair& key, std::span<const std::uint8_t> payload) {
    ensure_sodium();
    Signature sig;
    if (key.scheme == SchemeId::Ed25519) {
        if (key.sec.size() != crypto_sign_SECRETKEYBYTES) throw KeyError("malformed ed25519 secret key");
        sig.bytes.resize(crypto_sign_BYTES);
        crypto_sign_detached(sig.bytes.data(), nullptr, payload.data(), payload.size(), key.sec.data());
    } else {
        if (key.sec.size() != 32) throw KeyError("malformed testmac key");
        ByteWriter w;
        w.bytes(key.sec);
        w.bytes(payload);
        Digest d = sha256(w.data());
        sig.bytes.assign(d.bytes.begin(), d.bytes.end());
    }
    return sig;
}

bool verify(SchemeId scheme, const Bytes& pub, std::span<const std::uint8_t> payload, const Signature& sig) {
    ensure_sodium();
    if (scheme == SchemeId::Ed25519) {
        if (pub.size() != crypto_sign_PUBLICKEYBYTES || sig.bytes.size() != crypto_sign_BYTES) return false;
        return crypto_sign_verify_detached(sig.bytes.data(), payload.data(), payload.size(), pub.data()) == 0;
    }
    if (pub.size() != 32 || sig.bytes.size() != 32) return false;
    ByteWriter w;
    w.bytes(pub);
    w.bytes(payload);
    Digest d = sha256(w.data());
    return std::equal(d.bytes.begin(), d.bytes.end(), sig.bytes.begin());
}

std::uint32_t Bitmap::count() const {
    return static_cast<std::uint32_t>(std::count(bits_.begin(), bits_.end(), true));
}

Bytes Bitmap::packed() const {
    Bytes out((bits_.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i]) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
    return out;
}

Bitmap Bitmap::unpack(const Bytes& packed, std::uint32_t n) {
    if (packed.size() != (n + 7u) / 8u) throw ShapeError("bitmap byte length does not match n");
    Bitmap bm(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (packed[i / 8] & (1u << (i % 8))) bm.set(i);
    }
    // Reject set bits beyond n.
    for (std::size_t i = n; i < packed.size() * 8; ++i) {
        if (packed[i / 8] & (1u << (i % 8))) throw ShapeError("bitmap has bits set beyond n");
    }
    return bm;
}

std::vector<ReplicaId> AggregateSignature::signers() const {
    std::vector<ReplicaId> out;
    for (std::uint32_t i = 0; i < bitmap.size(); ++i) {
        if (bitmap.test(i)) out.push_back(i);
    }
    return out;
}

AggregateSignature aggregate(const std::vector<std::pair<ReplicaId, Signature>>& votes, std::uint32_t n) {
    AggregateSignature agg;
    agg.bitmap = Bitmap(n);
    std::vector<std::pair<ReplicaId, Signature>> sorted = votes;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [id, sig] : sorted) {
        if (id >= n) throw IdOutOfRange("signer id out of range");
        if (agg.bitmap.test(id)) throw DuplicateSigner("duplicate signer id");
        agg.bitmap.set(id);
        agg.signatures.push_back(sig);
    }
    return agg;
}

bool verify_aggregate(const AggregateSignature& agg, std::span<const std::uint8_t> payload,
                      const std::vector<Bytes>& public_keys, SchemeId scheme) {
    if (agg.bitmap.size() != public_keys.size())
        throw ShapeError("bitmap length does not match key registry");
    if (agg.bitmap.count() != agg.signatures.size()) return false;
    std::size_t sig_index = 0;
    for (std::uint32_t i = 0; i < agg.bitmap.size(); ++i) {
        if (!agg.bitmap.test(i)) continue;
        if (!verify(scheme, public_keys[i], payload, agg.signatures[sig_index++])) return false;
    }
    return true;
}

std::vector<ReplicaId> intersect(const AggregateSignature& a, const AggregateSignature& b) {
    if (a.bitmap.size() != b.bitmap.size()) throw ShapeError("bitmap length mismatch");
    std::vector<ReplicaId> out;
    for (std::uint32_t i = 0; i < a.bitmap.size(); ++i) {
        if (a.bitmap.test(i) && b.bitmap.test(i)) out.push_back(i);
    }
    return out;
}

}  // namespace bfl
