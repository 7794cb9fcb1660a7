#pragma once

// Little-endian readers/writers for the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string_view>
#include <type_traits>

#include "mtlpose/error.hpp"

namespace mtlpose::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <typename T>
void write_le(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    static_assert(std::is_trivially_copyable_v<T>);
    T value{};
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (is.gcount() != static_cast<std::streamsize>(sizeof(T)))
        throw FormatError("unexpected end of file");
    return value;
}

inline void read_bytes(std::istream& is, char* dst, std::size_t count) {
    is.read(dst, static_cast<std::streamsize>(count));
    if (is.gcount() != static_cast<std::streamsize>(count))
        throw FormatError("unexpected end of file");
}

inline void write_magic(std::ostream& os, std::string_view magic) {
    os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& is, std::string_view magic) {
    char buf[8] = {};
    is.read(buf, static_cast<std::streamsize>(magic.size()));
    if (is.gcount() != static_cast<std::streamsize>(magic.size()) ||
        std::string_view(buf, magic.size()) != magic)
        throw FormatError("bad magic, expected \"" + std::string(magic) + "\"");
}

// Throws unless the stream has been consumed completely.
inline void expect_eof(std::istream& is) {
    if (is.peek() != std::char_traits<char>::eof())
        throw FormatError("trailing bytes after payload");
}

}  // namespace mtlpose::io
