#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "a2r/error.hpp"

namespace a2r::binio {

static_assert(std::endian::native == std::endian::little, "on-disk formats assume a little-endian host");

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

// Append-only little-endian byte buffer.
class Writer {
public:
    void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }

    template <class T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }

    template <class T>
    void put_array(std::span<const T> v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
        bytes_.insert(bytes_.end(), p, p + v.size_bytes());
    }

    // Appends the CRC32 of everything written so far.
    void seal() { put<std::uint32_t>(crc32(bytes_)); }

    const std::vector<std::uint8_t>& bytes() const { return bytes_; }
    void write_file(const std::filesystem::path& path) const;

private:
    std::vector<std::uint8_t> bytes_;
};

// Bounds-checked reader over a sealed buffer. Construction checks the magic
// and then the trailing CRC32; reads start right after the magic.
class Reader {
public:
    Reader(std::vector<std::uint8_t> bytes, std::string_view magic, std::string what);
    static Reader from_file(const std::filesystem::path& path, std::string_view magic, std::string what);

    template <class T>
    T get() {
        T v;
        std::memcpy(&v, take(sizeof(T)), sizeof(T));
        return v;
    }

    template <class T>
    std::vector<T> get_array(std::size_t n) {
        if (n > remaining() / sizeof(T)) throw FormatError(what_ + ": truncated payload");
        std::vector<T> v(n);
        std::memcpy(v.data(), take(n * sizeof(T)), n * sizeof(T));
        return v;
    }

    std::size_t remaining() const { return end_ - pos_; }
    // Throws unless the whole body was consumed.
    void finish() const;

private:
    const std::uint8_t* take(std::size_t n);

    std::vector<std::uint8_t> bytes_;
    std::size_t pos_ = 0;
    std::size_t end_ = 0;  // excludes the CRC
    std::string what_;
};

}  // namespace a2r::binio
