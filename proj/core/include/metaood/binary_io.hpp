#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "metaood/error.hpp"

namespace metaood::binary_io {

// Little-endian scalar I/O independent of host byte order.

template <typename U>
void write_le(std::ostream& out, U v) {
    static_assert(std::is_unsigned_v<U>);
    std::array<char, sizeof(U)> bytes{};
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
    out.write(bytes.data(), bytes.size());
}

template <typename U>
U read_le(std::istream& in, const char* what) {
    static_assert(std::is_unsigned_v<U>);
    std::array<unsigned char, sizeof(U)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw FormatError(std::string("truncated file while reading ") + what);
    }
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
    return v;
}

inline void write_u32(std::ostream& out, std::uint32_t v) { write_le(out, v); }
inline void write_u64(std::ostream& out, std::uint64_t v) { write_le(out, v); }
inline void write_f32(std::ostream& out, float v) { write_le(out, std::bit_cast<std::uint32_t>(v)); }
inline void write_f64(std::ostream& out, double v) { write_le(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint32_t read_u32(std::istream& in, const char* what) { return read_le<std::uint32_t>(in, what); }
inline std::uint64_t read_u64(std::istream& in, const char* what) { return read_le<std::uint64_t>(in, what); }
inline float read_f32(std::istream& in, const char* what) {
    return std::bit_cast<float>(read_le<std::uint32_t>(in, what));
}
inline double read_f64(std::istream& in, const char* what) {
    return std::bit_cast<double>(read_le<std::uint64_t>(in, what));
}

}  // namespace metaood::binary_io
