#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bfl {

using Bytes = std::vector<std::uint8_t>;

struct CodecError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string to_hex(std::span<const std::uint8_t> data);
Bytes from_hex(const std::string& hex);

inline Bytes to_bytes(const std::string& s) {
    return Bytes(s.begin(), s.end());
}

// Big-endian, length-prefixed binary writer used for all canonical encodings.
class ByteWriter {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    // Length-prefixed byte string.
    void bytes(std::span<const std::uint8_t> data);
    void raw(std::span<const std::uint8_t> data);
    void str(const std::string& s) { bytes({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}); }

    const Bytes& data() const { return out_; }
    Bytes take() { return std::move(out_); }

private:
    Bytes out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    Bytes bytes();
    std::string str();
    bool done() const { return pos_ == data_.size(); }
    void expect_done() const;

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;

    void need(std::size_t n) const;
};

}  // namespace bfl
