#include "duo/motion/dataset_io.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "duo/error.h"
#include "duo/util/binary.h"

namespace duo::motion {

namespace {

constexpr char kMagic[8] = {'D', 'U', 'O', 'D', 'A', 'T', 'A', '\0'};

}  // namespace

void save_dataset(const std::filesystem::path& path, const DatasetFile& file) {
    nlohmann::json header;
    header["version"] = kDatasetFormatVersion;
    header["layout"] = file.layout.to_json();
    if (file.skeleton) {
        header["skeleton_hash"] = file.skeleton->hash();
        header["skeleton"] = file.skeleton->to_json();
    }
    auto pairs = nlohmann::json::array();
    std::uint64_t floats = 0;
    for (const auto& p : file.pairs) {
        p.validate();
        if (!(p.person_a.layout == file.layout)) throw ShapeMismatch("pair layout differs from dataset layout");
        pairs.push_back({{"frames", p.frames()}, {"text", p.text}, {"contact", p.contact_annotated}});
        floats += 2ull * static_cast<std::uint64_t>(p.person_a.data.size());
    }
    header["pairs"] = std::move(pairs);
    header["payload_floats"] = floats;

    util::BinaryWriter out;
    out.bytes(kMagic, sizeof(kMagic));
    out.u32(kDatasetFormatVersion);
    const std::string text = header.dump();
    out.u64(text.size());
    out.bytes(text.data(), text.size());
    for (const auto& p : file.pairs) {
        out.floats(p.person_a.data.data(), static_cast<std::size_t>(p.person_a.data.size()));
        out.floats(p.person_b.data.data(), static_cast<std::size_t>(p.person_b.data.size()));
    }
    out.write_file(path);
}

DatasetFile load_dataset(const std::filesystem::path& path) {
    util::BinaryReader in(util::read_file(path), path.string());
    char magic[8];
    in.bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw FormatVersionMismatch("'" + path.string() + "' is not a dataset file");
    }
    const auto version = in.u32();
    if (version != kDatasetFormatVersion) {
        throw FormatVersionMismatch("dataset version " + std::to_string(version) + ", expected " +
                                    std::to_string(kDatasetFormatVersion));
    }
    const auto header_len = in.u64();
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(in.string(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt dataset header: " + std::string(e.what()));
    }

    DatasetFile out;
    try {
        out.layout = MotionLayout::from_json(header.at("layout"));
        if (header.contains("skeleton")) {
            out.skeleton = SkeletonSpec::from_json(header.at("skeleton"));
            if (out.skeleton->hash() != header.at("skeleton_hash").get<std::string>()) {
                throw IoError("skeleton hash mismatch in dataset header");
            }
        }
        const auto expected = header.at("payload_floats").get<std::uint64_t>();
        if (in.remaining() != expected * sizeof(float)) {
            throw IoError("dataset payload is " + std::to_string(in.remaining()) + " bytes, expected " +
                          std::to_string(expected * sizeof(float)));
        }
        const int dim = out.layout.dim();
        for (const auto& rec : header.at("pairs")) {
            const int frames = rec.at("frames").get<int>();
            if (frames < 1) throw IoError("pair with no frames");
            InteractionPair p;
            p.text = rec.at("text").get<std::string>();
            p.contact_annotated = rec.at("contact").get<bool>();
            for (auto* seq : {&p.person_a, &p.person_b}) {
                FrameMatrix m(frames, dim);
                in.floats(m.data(), static_cast<std::size_t>(m.size()));
                *seq = MotionSequence(out.layout, std::move(m));
            }
            out.pairs.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt dataset header: " + std::string(e.what()));
    }
    if (in.remaining() != 0) throw IoError("trailing bytes after dataset payload");
    return out;
}

}  // namespace duo::motion
