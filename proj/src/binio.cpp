#include "a2r/binio.hpp"

#include <zlib.h>

#include <fstream>
#include <iterator>

namespace a2r::binio {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    std::size_t off = 0;
    while (off < bytes.size()) {
        const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
        crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(n));
        off += n;
    }
    return static_cast<std::uint32_t>(crc);
}

void Writer::write_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw Error("write failed: " + path.string());
}

Reader::Reader(std::vector<std::uint8_t> bytes, std::string_view magic, std::string what)
    : bytes_(std::move(bytes)), what_(std::move(what)) {
    if (bytes_.size() < magic.size() ||
        std::string_view(reinterpret_cast<const char*>(bytes_.data()), magic.size()) != magic)
        throw FormatError(what_ + ": bad magic");
    if (bytes_.size() < magic.size() + 4) throw FormatError(what_ + ": truncated payload");
    pos_ = magic.size();
    end_ = bytes_.size() - 4;
    std::uint32_t stored;
    std::memcpy(&stored, bytes_.data() + end_, 4);
    if (stored != crc32(std::span(bytes_.data(), end_))) throw FormatError(what_ + ": checksum mismatch");
}

Reader Reader::from_file(const std::filesystem::path& path, std::string_view magic, std::string what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return Reader(std::move(bytes), magic, std::move(what) + " " + path.string());
}

const std::uint8_t* Reader::take(std::size_t n) {
    if (n > remaining()) throw FormatError(what_ + ": truncated payload");
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
}

void Reader::finish() const {
    if (pos_ != end_) throw FormatError(what_ + ": trailing bytes after payload");
}

}  // namespace a2r::binio
