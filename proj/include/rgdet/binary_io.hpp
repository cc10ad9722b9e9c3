#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "rgdet/error.hpp"

// Little-endian scalar I/O shared by the RGPC, RGWT and RGFM formats.
namespace rgdet::binio {

template <typename T>
void put(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
    }
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    unsigned char buf[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) {
        throw data_error("FormatError", "unexpected end of binary stream");
    }
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
    }
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

inline void put_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

inline bool has_magic(std::istream& is, const char (&magic)[5]) {
    char buf[4];
    if (!is.read(buf, 4)) return false;
    return std::memcmp(buf, magic, 4) == 0;
}

} // namespace rgdet::binio
