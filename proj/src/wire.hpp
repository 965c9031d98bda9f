// Little-endian primitives shared by the binary container formats (LKR1
// rasters, LKC1 chip sets, LKM1 models). Byte order is pinned so files move
// between machines; message strings name the container being decoded.
#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "landkit/errors.hpp"

namespace landkit::wire {

inline void put_u8(std::ostream& os, uint8_t v) {
    os.write(reinterpret_cast<const char*>(&v), 1);
}

inline void put_u16(std::ostream& os, uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

inline void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& os, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
}

inline void put_string(std::ostream& os, const std::string& s) {
    if (s.size() > std::numeric_limits<uint16_t>::max())
        throw FormatError("string too long for container field");
    put_u16(os, static_cast<uint16_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline uint8_t get_u8(std::istream& is, const char* what) {
    uint8_t v;
    if (!is.read(reinterpret_cast<char*>(&v), 1))
        throw IoError(std::string(what) + " truncated");
    return v;
}

inline uint16_t get_u16(std::istream& is, const char* what) {
    unsigned char b[2];
    if (!is.read(reinterpret_cast<char*>(b), 2))
        throw IoError(std::string(what) + " truncated");
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

inline uint32_t get_u32(std::istream& is, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw IoError(std::string(what) + " truncated");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

inline uint64_t get_u64(std::istream& is, const char* what) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8))
        throw IoError(std::string(what) + " truncated");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

inline double get_f64(std::istream& is, const char* what) {
    uint64_t bits = get_u64(is, what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

inline std::string get_string(std::istream& is, const char* what) {
    uint16_t len = get_u16(is, what);
    std::string s(len, '\0');
    if (len > 0 && !is.read(s.data(), len))
        throw IoError(std::string(what) + " truncated");
    return s;
}

}  // namespace landkit::wire
