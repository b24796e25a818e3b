#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "mmdk/error.hpp"

namespace mmdk::detail {

template <typename T>
T to_little(T value) {
    if constexpr (std::endian::native == std::endian::big) {
        std::array<unsigned char, sizeof(T)> bytes;
        std::memcpy(bytes.data(), &value, sizeof(T));
        std::reverse(bytes.begin(), bytes.end());
        std::memcpy(&value, bytes.data(), sizeof(T));
    }
    return value;
}

template <typename T>
void put(std::ostream& out, T value) {
    value = to_little(value);
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& what) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(T)))
        throw FormatError(what + ": truncated file");
    return to_little(value);
}

inline void expect_magic(std::istream& in, const char (&magic)[5], const std::string& what) {
    char buf[4] = {};
    in.read(buf, 4);
    if (in.gcount() != 4 || std::memcmp(buf, magic, 4) != 0)
        throw FormatError(what + ": bad magic, expected " + std::string(magic, 4));
}

}  // namespace mmdk::detail
