#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

namespace duo::util {

/// Little-endian byte buffer builder.
class BinaryWriter {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const char*>(p);
        buf_.insert(buf_.end(), c, c + n);
    }
    void u32(std::uint32_t v) { scalar(v); }
    void u64(std::uint64_t v) { scalar(v); }
    void floats(const float* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) scalar(std::bit_cast<std::uint32_t>(p[i]));
    }
    const std::vector<char>& buffer() const { return buf_; }

    /// Writes through a temporary sibling and renames it into place.
    /// Throws IoError.
    void write_file(const std::filesystem::path& path) const;

private:
    template <typename T>
    void scalar(T v) {
        if constexpr (std::endian::native == std::endian::big) v = swap(v);
        bytes(&v, sizeof(v));
    }
    template <typename T>
    static T swap(T v) {
        T out{};
        auto* s = reinterpret_cast<unsigned char*>(&v);
        auto* d = reinterpret_cast<unsigned char*>(&out);
        for (std::size_t i = 0; i < sizeof(T); ++i) d[i] = s[sizeof(T) - 1 - i];
        return out;
    }

    std::vector<char> buf_;
};

/// Bounds-checked reader; every underrun throws IoError naming the source.
class BinaryReader {
public:
    BinaryReader(std::vector<char> data, std::string source) : data_(std::move(data)), source_(std::move(source)) {}

    void bytes(void* out, std::size_t n);
    std::uint32_t u32();
    std::uint64_t u64();
    std::string string(std::uint64_t n);
    void floats(float* out, std::size_t n);
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::uint64_t n) const;

    std::vector<char> data_;
    std::string source_;
    std::size_t pos_ = 0;
};

/// Throws IoError.
std::vector<char> read_file(const std::filesystem::path& path);

}  // namespace duo::util
