#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "duo/motion/sequence.h"
#include "duo/motion/skeleton.h"

namespace duo::motion {

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

struct DatasetFile {
    MotionLayout layout;
    std::optional<SkeletonSpec> skeleton;
    Dataset pairs;
};

/// Container: "DUODATA\0", u32 version, u64 header length, JSON header, then
/// every pair's person_a and person_b frames as little-endian float32.
/// Throws IoError when the file cannot be written, ShapeMismatch when a pair
/// does not match the layout.
void save_dataset(const std::filesystem::path& path, const DatasetFile& file);

/// Throws IoError (unreadable, truncated or trailing bytes) or
/// FormatVersionMismatch (bad magic or version). Never returns partial data.
DatasetFile load_dataset(const std::filesystem::path& path);

}  // namespace duo::motion
