#pragma once

// Little-endian primitives shared by the trial and UAP file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "uapforge/errors.hpp"

namespace uapforge::binio {

template <typename U>
void put_uint(std::ostream& out, U value) {
    char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
    out.write(bytes, sizeof(U));
}

inline void put_f32(std::ostream& out, float v) { put_uint(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::ostream& out, double v) { put_uint(out, std::bit_cast<std::uint64_t>(v)); }

// Reads from a stream and reports truncation with the file's name.
class Reader {
public:
    Reader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

    void bytes(char* dst, std::size_t n) {
        in_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError(what_ + ": file is truncated");
    }

    template <typename U>
    U uint() {
        unsigned char b[sizeof(U)];
        bytes(reinterpret_cast<char*>(b), sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
        return v;
    }

    float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
    double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }

    void expect_magic(const char (&magic)[5]) {
        char got[4];
        bytes(got, 4);
        if (std::memcmp(got, magic, 4) != 0) throw FormatError(what_ + ": bad magic, expected '" + magic + "'");
    }

    void expect_end() {
        if (in_.peek() != std::char_traits<char>::eof()) throw FormatError(what_ + ": trailing bytes after payload");
    }

private:
    std::istream& in_;
    std::string what_;
};

}  // namespace uapforge::binio
