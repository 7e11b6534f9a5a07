#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mvq/error.hpp"

namespace mvq {

// Bit packing is little-endian within bytes and stream-sequential: bit i of
// the stream lands in byte i/8 at position i%8, values are written
// low-bit-first.
class BitWriter {
public:
    void write(uint64_t value, uint32_t width) {
        for (uint32_t b = 0; b < width; ++b) {
            const std::size_t pos = bit_len_ + b;
            if (pos / 8 >= bytes_.size()) bytes_.push_back(0);
            if ((value >> b) & 1u) bytes_[pos / 8] |= uint8_t(1u << (pos % 8));
        }
        bit_len_ += width;
    }

    std::size_t bit_length() const { return bit_len_; }
    const std::vector<uint8_t>& bytes() const { return bytes_; }

private:
    std::vector<uint8_t> bytes_;
    std::size_t bit_len_ = 0;
};

class BitReader {
public:
    BitReader(std::span<const uint8_t> bytes, std::size_t bit_len)
        : bytes_(bytes), bit_len_(bit_len) {}

    uint64_t read(uint32_t width) {
        if (pos_ + width > bit_len_) fail(Errc::TruncatedStream, "bit stream exhausted");
        uint64_t value = 0;
        for (uint32_t b = 0; b < width; ++b, ++pos_) {
            if ((bytes_[pos_ / 8] >> (pos_ % 8)) & 1u) value |= uint64_t(1) << b;
        }
        return value;
    }

private:
    std::span<const uint8_t> bytes_;
    std::size_t bit_len_;
    std::size_t pos_ = 0;
};

} // namespace mvq
