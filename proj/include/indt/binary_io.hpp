#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "indt/core.hpp"

namespace indt::binio {

// Little-endian encoders; independent of host byte order.

inline void put_u8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }

inline void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
    os.write(b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
    os.write(b, 8);
}

inline void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline void put_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

class Reader {
public:
    Reader(std::istream& is, std::string what) : is_(is), what_(std::move(what)) {}

    void expect_magic(const char (&magic)[5]) {
        char b[4];
        read_raw(b, 4);
        if (std::memcmp(b, magic, 4) != 0) throw ValidationError(what_ + ": bad magic, expected " + magic);
    }
    std::uint8_t u8() {
        char b;
        read_raw(&b, 1);
        return static_cast<std::uint8_t>(b);
    }
    std::uint32_t u32() {
        unsigned char b[4];
        read_raw(reinterpret_cast<char*>(b), 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        unsigned char b[8];
        read_raw(reinterpret_cast<char*>(b), 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string bytes(std::size_t n) {
        std::string s(n, '\0');
        read_raw(s.data(), n);
        return s;
    }
    void expect_end() {
        if (is_.peek() != std::char_traits<char>::eof()) throw ValidationError(what_ + ": trailing bytes");
    }

private:
    void read_raw(char* dst, std::size_t n) {
        is_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(is_.gcount()) != n) throw ValidationError(what_ + ": truncated file");
    }

    std::istream& is_;
    std::string what_;
};

}  // namespace indt::binio
