#include "duo/nn/checkpoint.h"

#include <cstring>
#include <vector>

#include "duo/error.h"
#include "duo/util/binary.h"

namespace duo::nn {

namespace {

constexpr char kMagic[8] = {'D', 'U', 'O', 'C', 'K', 'P', 'T', '\0'};

std::map<std::string, torch::Tensor> named_state(const torch::nn::Module& module) {
    std::map<std::string, torch::Tensor> out;
    for (const auto& p : module.named_parameters(true)) out.emplace(p.key(), p.value());
    for (const auto& b : module.named_buffers(true)) out.emplace(b.key(), b.value());
    return out;
}

std::string shape_str(at::IntArrayRef s) {
    std::string r = "[";
    for (std::size_t i = 0; i < s.size(); ++i) r += (i ? "," : "") + std::to_string(s[i]);
    return r + "]";
}

}  // namespace

Checkpoint capture(const torch::nn::Module& module, std::string kind, nlohmann::json config, nlohmann::json extras) {
    Checkpoint c{std::move(kind), std::move(config), std::move(extras), {}};
    for (auto& [name, t] : named_state(module)) c.tensors.emplace(name, t.detach().to(torch::kFloat).contiguous().clone());
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    nlohmann::json header;
    header["version"] = kCheckpointFormatVersion;
    header["kind"] = ckpt.kind;
    header["config"] = ckpt.config;
    header["extras"] = ckpt.extras;
    auto entries = nlohmann::json::array();
    for (const auto& [name, t] : ckpt.tensors) entries.push_back({{"name", name}, {"shape", t.sizes().vec()}});
    header["tensors"] = std::move(entries);

    util::BinaryWriter out;
    out.bytes(kMagic, sizeof(kMagic));
    out.u32(kCheckpointFormatVersion);
    const auto text = header.dump();
    out.u64(text.size());
    out.bytes(text.data(), text.size());
    for (const auto& [name, t] : ckpt.tensors) {
        auto f = t.detach().to(torch::kFloat).contiguous();
        out.floats(f.data_ptr<float>(), static_cast<std::size_t>(f.numel()));
    }
    out.write_file(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    util::BinaryReader in(util::read_file(path), path.string());
    char magic[8];
    in.bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw FormatVersionMismatch("'" + path.string() + "' is not a checkpoint");
    }
    const auto version = in.u32();
    if (version != kCheckpointFormatVersion) {
        throw FormatVersionMismatch("checkpoint version " + std::to_string(version) + " is not supported");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(in.string(in.u64()));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("checkpoint header of '" + path.string() + "' is corrupt: " + e.what());
    }
    Checkpoint c;
    try {
        c.kind = header.at("kind").get<std::string>();
        c.config = header.at("config");
        c.extras = header.at("extras");
        for (const auto& e : header.at("tensors")) {
            const auto shape = e.at("shape").get<std::vector<int64_t>>();
            auto t = torch::empty(shape, torch::kFloat);
            in.floats(t.data_ptr<float>(), static_cast<std::size_t>(t.numel()));
            c.tensors.emplace(e.at("name").get<std::string>(), t);
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("checkpoint header of '" + path.string() + "' is malformed: " + e.what());
    }
    if (in.remaining() != 0) throw IoError("trailing bytes after checkpoint payload in '" + path.string() + "'");
    return c;
}

void restore(torch::nn::Module& module, const Checkpoint& ckpt) {
    auto state = named_state(module);
    for (const auto& [name, t] : ckpt.tensors) {
        if (!state.count(name)) throw CheckpointMismatch("checkpoint tensor '" + name + "' has no counterpart in the model");
    }
    torch::NoGradGuard guard;
    for (auto& [name, dst] : state) {
        auto it = ckpt.tensors.find(name);
        if (it == ckpt.tensors.end()) throw CheckpointMismatch("checkpoint lacks tensor '" + name + "'");
        if (it->second.sizes() != dst.sizes()) {
            throw CheckpointMismatch("tensor '" + name + "' is " + shape_str(it->second.sizes()) + " in the checkpoint, " +
                                     shape_str(dst.sizes()) + " in the model");
        }
        dst.copy_(it->second.to(dst.scalar_type()));
    }
}

void expect_kind(const Checkpoint& ckpt, const std::string& kind) {
    if (ckpt.kind != kind) throw CheckpointMismatch("expected a " + kind + " checkpoint, found " + ckpt.kind);
}

}  // namespace duo::nn
