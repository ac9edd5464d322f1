#include "duo/util/binary.h"

#include <fstream>
#include <iterator>

#include "duo/error.h"

namespace duo::util {

namespace {

template <typename T>
T from_le(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        T out{};
        auto* s = reinterpret_cast<unsigned char*>(&v);
        auto* d = reinterpret_cast<unsigned char*>(&out);
        for (std::size_t i = 0; i < sizeof(T); ++i) d[i] = s[sizeof(T) - 1 - i];
        return out;
    }
    return v;
}

}  // namespace

void BinaryWriter::write_file(const std::filesystem::path& path) const {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
        if (!out) throw IoError("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

void BinaryReader::need(std::uint64_t n) const {
    if (n > remaining()) throw IoError("'" + source_ + "' is truncated");
}

void BinaryReader::bytes(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
}

std::uint32_t BinaryReader::u32() {
    std::uint32_t v;
    bytes(&v, sizeof(v));
    return from_le(v);
}

std::uint64_t BinaryReader::u64() {
    std::uint64_t v;
    bytes(&v, sizeof(v));
    return from_le(v);
}

std::string BinaryReader::string(std::uint64_t n) {
    need(n);
    std::string s(data_.data() + pos_, static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return s;
}

void BinaryReader::floats(float* out, std::size_t n) {
    need(static_cast<std::uint64_t>(n) * sizeof(float));
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t v;
        std::memcpy(&v, data_.data() + pos_, sizeof(v));
        pos_ += sizeof(v);
        out[i] = std::bit_cast<float>(from_le(v));
    }
}

std::vector<char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace duo::util
