#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfl/bytes.hpp"

namespace bfl {

using ReplicaId = std::uint32_t;

struct CryptoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct KeyError : CryptoError {
    using CryptoError::CryptoError;
};
struct DuplicateSigner : CryptoError {
    using CryptoError::CryptoError;
};
struct IdOutOfRange : CryptoError {
    using CryptoError::CryptoError;
};
struct ShapeError : CryptoError {
    using CryptoError::CryptoError;
};

struct Digest {
    std::array<std::uint8_t, 32> bytes{};

    bool operator==(const Digest&) const = default;
    auto operator<=>(const Digest&) const = default;
    std::string hex() const { return to_hex(bytes); }
};

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(const Bytes& data);

// Backing signature scheme. Ed25519 is the default; the test scheme is a
// keyed hash whose "secret" equals the public key, so any test can recompute
// signatures byte-for-byte.
enum class SchemeId : std::uint8_t { Ed25519 = 0, TestMac = 1 };

std::string scheme_name(SchemeId id);
SchemeId scheme_from_name(const std::string& name);

struct Signature {
    Bytes bytes;

    bool operator==(const Signature&) const = default;
};

struct KeyPair {
    SchemeId scheme = SchemeId::Ed25519;
    Bytes pub;
    Bytes sec;
};

// Deterministic keypair derivation; (seed, domain, index) fully determine
// the key material.
KeyPair keygen(SchemeId scheme, std::uint64_t seed, const std::string& domain, std::uint32_t index);

Signature sign(const KeyPair& key, std::span<const std::uint8_t> payload);
bool verify(SchemeId scheme, const Bytes& pub, std::span<const std::uint8_t> payload, const Signature& sig);

// n-bit signer bitmap; bit i refers to replica i. Serialized little-endian,
// bit 0 of byte 0 = replica 0.
class Bitmap {
public:
    Bitmap() = default;
    explicit Bitmap(std::uint32_t n) : bits_(n, false) {}

    std::uint32_t size() const { return static_cast<std::uint32_t>(bits_.size()); }
    bool test(std::uint32_t i) const { return bits_.at(i); }
    void set(std::uint32_t i) { bits_.at(i) = true; }
    std::uint32_t count() const;

    Bytes packed() const;
    static Bitmap unpack(const Bytes& packed, std::uint32_t n);

    bool operator==(const Bitmap&) const = default;

private:
    std::vector<bool> bits_;
};

struct AggregateSignature {
    Bitmap bitmap;
    // One signature per set bit, in ascending replica order.
    std::vector<Signature> signatures;

    bool operator==(const AggregateSignature&) const = default;
    std::vector<ReplicaId> signers() const;
    std::uint32_t count() const { return bitmap.count(); }
};

AggregateSignature aggregate(const std::vector<std::pair<ReplicaId, Signature>>& votes, std::uint32_t n);

bool verify_aggregate(const AggregateSignature& agg, std::span<const std::uint8_t> payload,
                      const std::vector<Bytes>& public_keys, SchemeId scheme);

std::vector<ReplicaId> intersect(const AggregateSignature& a, const AggregateSignature& b);

}  // namespace bfl
