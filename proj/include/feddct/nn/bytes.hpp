#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace feddct::nn {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

template <typename U>
U to_little(U v)
{
    if constexpr (std::endian::native == std::endian::little)
        return v;
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
        out = static_cast<U>((out << 8) | ((v >> (8 * i)) & 0xFF));
    return out;
}

} // namespace detail

// Little-endian append-only encoder.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { put(v); }
    void u32(std::uint32_t v) { put(v); }
    void u64(std::uint64_t v) { put(v); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
    void f64s(std::span<const double> vs)
    {
        for (double v : vs)
            f64(v);
    }
    void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    void str(const std::string &s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

    std::size_t size() const noexcept { return buf_.size(); }
    std::vector<std::uint8_t> &buffer() noexcept { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    template <typename U>
    void put(U v)
    {
        const U le = detail::to_little(v);
        std::uint8_t raw[sizeof(U)];
        std::memcpy(raw, &le, sizeof(U));
        buf_.insert(buf_.end(), raw, raw + sizeof(U));
    }

    std::vector<std::uint8_t> buf_;
};

// Bounds-checked little-endian decoder; throws FormatError on truncation.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t u8() { return get<std::uint8_t>(); }
    std::uint16_t u16() { return get<std::uint16_t>(); }
    std::uint32_t u32() { return get<std::uint32_t>(); }
    std::uint64_t u64() { return get<std::uint64_t>(); }
    double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
    std::string str(std::size_t n)
    {
        need(n);
        std::string s(reinterpret_cast<const char *>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

private:
    void need(std::size_t n) const
    {
        if (remaining() < n)
            throw FormatError("truncated input: need " + std::to_string(n) + " bytes at offset " +
                              std::to_string(pos_) + ", have " + std::to_string(remaining()));
    }

    template <typename U>
    U get()
    {
        need(sizeof(U));
        U v;
        std::memcpy(&v, data_.data() + pos_, sizeof(U));
        pos_ += sizeof(U);
        return detail::to_little(v);
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

} // namespace feddct::nn
