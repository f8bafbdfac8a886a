#pragma once

#include <cstdint>
#include <cstring>
#include <string>

#include "dspas/error.hpp"
#include "dspas/hash.hpp"

namespace dspas {

/// Appends little-endian integers to a byte buffer.
class ByteWriter {
public:
    explicit ByteWriter(Bytes& out) : out_(out) {}

    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void bytes(ByteView b) { out_.insert(out_.end(), b.begin(), b.end()); }
    void zeros(std::size_t n) { out_.insert(out_.end(), n, 0); }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) {
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    Bytes& out_;
};

/// Reads little-endian integers, throwing IntegrityError(truncated) past the end.
class ByteReader {
public:
    ByteReader(ByteView data, std::string context) : data_(data), context_(std::move(context)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }

    ByteView bytes(std::size_t n) {
        require(n);
        auto view = data_.subspan(pos_, n);
        pos_ += n;
        return view;
    }

    void skip(std::size_t n) { bytes(n); }

    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

private:
    void require(std::size_t n) const {
        if (n > remaining()) {
            throw IntegrityError(IntegrityError::Kind::truncated, context_ + ": unexpected end of data");
        }
    }

    std::uint64_t get(int n) {
        require(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        }
        pos_ += n;
        return v;
    }

    ByteView data_;
    std::size_t pos_ = 0;
    std::string context_;
};

} // namespace dspas
