#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "torch_doctest.h"
#include "nn_support.h"

#include "duo/error.h"
#include "duo/nn/checkpoint.h"

using namespace duo;
using namespace duo::nn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("duo_ckpt_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir / name;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("denoiser checkpoint round trip gives bit-identical inference") {
    torch::manual_seed(1);
    auto cfg = testing::tiny_denoiser();
    Denoiser a(cfg);
    testing::perturb(*a, 0.1, 2);
    a->eval();
    const auto path = scratch("den.ckpt");
    save_checkpoint(path, capture(*a, "denoiser", cfg.to_json(), {{"note", "x"}}));
    const auto c = load_checkpoint(path);
    CHECK(c.kind == "denoiser");
    CHECK(c.extras.at("note") == "x");
    torch::manual_seed(7);
    Denoiser b(DenoiserConfig::from_json(c.config));
    restore(*b, c);
    b->eval();
    auto gen = at::make_generator<at::CPUGeneratorImpl>(3);
    auto z = torch::randn({2, 3, 4}, gen);
    auto text = torch::randn({2, 4}, gen);
    auto t = torch::tensor({1, 9}, torch::kLong);
    torch::NoGradGuard g;
    CHECK(torch::equal(a->forward(z, t, Condition::with_text(text)), b->forward(z, t, Condition::with_text(text))));

    // Saving the same module twice gives the same bytes.
    const auto again = scratch("den2.ckpt");
    save_checkpoint(again, capture(*a, "denoiser", cfg.to_json(), {{"note", "x"}}));
    CHECK(read_bytes(path) == read_bytes(again));
}

TEST_CASE("restore refuses a differently shaped model") {
    auto cfg = testing::tiny_denoiser();
    Denoiser a(cfg);
    const auto c = capture(*a, "denoiser", cfg.to_json(), nlohmann::json::object());
    auto other = cfg;
    other.hidden_dim = 12;
    other.heads = 2;
    Denoiser b(other);
    CHECK_THROWS_AS(restore(*b, c), CheckpointMismatch);
    auto deeper = cfg;
    deeper.layers = 4;
    Denoiser d(deeper);
    CHECK_THROWS_AS(restore(*d, c), CheckpointMismatch);
    CHECK_THROWS_AS(expect_kind(c, "dhvae"), CheckpointMismatch);

    auto missing = c;
    missing.tensors.erase(missing.tensors.begin());
    Denoiser e(cfg);
    CHECK_THROWS_AS(restore(*e, missing), CheckpointMismatch);
}

TEST_CASE("damaged checkpoint files") {
    auto cfg = testing::tiny_denoiser();
    Denoiser a(cfg);
    const auto path = scratch("full.ckpt");
    save_checkpoint(path, capture(*a, "denoiser", cfg.to_json(), nlohmann::json::object()));
    const auto bytes = read_bytes(path);

    const auto cut = scratch("cut.ckpt");
    std::ofstream(cut, std::ios::binary) << bytes.substr(0, bytes.size() - 5);
    CHECK_THROWS_AS(load_checkpoint(cut), IoError);

    const auto extra = scratch("extra.ckpt");
    std::ofstream(extra, std::ios::binary) << bytes << "junk";
    CHECK_THROWS_AS(load_checkpoint(extra), IoError);

    auto foreign = bytes;
    foreign[0] = 'X';
    const auto bad_magic = scratch("magic.ckpt");
    std::ofstream(bad_magic, std::ios::binary) << foreign;
    CHECK_THROWS_AS(load_checkpoint(bad_magic), FormatVersionMismatch);

    auto newer = bytes;
    newer[8] = static_cast<char>(kCheckpointFormatVersion + 1);
    const auto bad_version = scratch("version.ckpt");
    std::ofstream(bad_version, std::ios::binary) << newer;
    CHECK_THROWS_AS(load_checkpoint(bad_version), FormatVersionMismatch);

    CHECK_THROWS_AS(load_checkpoint(scratch("absent.ckpt")), IoError);
}
