#include "duo/nn/denoiser.h"

#include <cmath>

#include "duo/error.h"

namespace duo::nn {

void DenoiserConfig::validate() const {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw InvalidArgument(std::string("DenoiserConfig: ") + what);
    };
    need(latent_dim >= 1 && latent_tokens >= 1 && hidden_dim >= 1 && ff_dim >= 1 && text_dim >= 1,
         "sizes must be positive");
    need(heads >= 1 && hidden_dim % heads == 0, "hidden_dim must be divisible by heads");
    need(layers >= 1, "layers must be >= 1");
    need(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
    need(T >= 1, "T must be >= 1");
    need(token_scale > 0.0 && std::isfinite(token_scale), "token_scale must be positive");
}

nlohmann::json DenoiserConfig::to_json() const {
    return {{"latent_dim", latent_dim}, {"latent_tokens", latent_tokens}, {"hidden_dim", hidden_dim},
            {"heads", heads},           {"ff_dim", ff_dim},               {"layers", layers},
            {"dropout", dropout},       {"text_dim", text_dim},           {"T", T},
            {"token_scale", token_scale}};
}

DenoiserConfig DenoiserConfig::from_json(const nlohmann::json& j, DenoiserConfig c) {
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("latent_dim", c.latent_dim);
    get("latent_tokens", c.latent_tokens);
    get("hidden_dim", c.hidden_dim);
    get("heads", c.heads);
    get("ff_dim", c.ff_dim);
    get("layers", c.layers);
    get("dropout", c.dropout);
    get("text_dim", c.text_dim);
    get("T", c.T);
    get("token_scale", c.token_scale);
    return c;
}

std::vector<std::pair<int, int>> skip_pairs(int layers) {
    std::vector<std::pair<int, int>> p;
    for (int k = 0; k < layers / 2; ++k) p.emplace_back(k, layers - 1 - k);
    return p;
}

torch::Tensor canonical_segments(int latent_tokens) {
    return torch::arange(3, torch::kLong).repeat_interleave(latent_tokens);
}

namespace {

torch::Tensor segment_multiplier(const torch::Tensor& tokens, int latent_tokens, double factor) {
    if (tokens.dim() != 3 || tokens.size(1) != 3 * latent_tokens) throw ShapeMismatch("expected [B, 3l, d] tokens");
    auto m = torch::ones({1, 3 * latent_tokens, 1}, tokens.options());
    m.narrow(1, latent_tokens, 2 * latent_tokens).fill_(factor);
    return m;
}

torch::Tensor modulate(const torch::Tensor& x, const torch::Tensor& shift, const torch::Tensor& scale) {
    return x * (1.0 + scale.unsqueeze(1)) + shift.unsqueeze(1);
}

}  // namespace

torch::Tensor token_scale(const torch::Tensor& tokens, int latent_tokens, double s) {
    auto m = segment_multiplier(tokens, latent_tokens, s);
    return tokens / m;
}

torch::Tensor token_unscale(const torch::Tensor& tokens, int latent_tokens, double s) {
    return tokens * segment_multiplier(tokens, latent_tokens, s);
}

torch::Tensor pack_tokens(const torch::Tensor& z_o, const torch::Tensor& z_a, const torch::Tensor& z_b) {
    if (z_o.sizes() != z_a.sizes() || z_o.sizes() != z_b.sizes()) throw ShapeMismatch("latent segments differ in shape");
    return torch::cat({z_o, z_a, z_b}, 1);
}

std::array<torch::Tensor, 3> unpack_tokens(const torch::Tensor& tokens, int latent_tokens) {
    if (tokens.dim() != 3 || tokens.size(1) != 3 * latent_tokens) throw ShapeMismatch("expected [B, 3l, d] tokens");
    return {tokens.narrow(1, 0, latent_tokens), tokens.narrow(1, latent_tokens, latent_tokens),
            tokens.narrow(1, 2 * latent_tokens, latent_tokens)};
}

AdaLNBlockImpl::AdaLNBlockImpl(int64_t hidden, int64_t heads, int64_t inner, double dropout) {
    auto ln = [&] { return torch::nn::LayerNorm(torch::nn::LayerNormOptions({hidden}).elementwise_affine(false).eps(1e-6)); };
    norm1 = register_module("norm1", ln());
    norm2 = register_module("norm2", ln());
    attn = register_module("attn", MultiheadAttention(hidden, heads, dropout));
    ff = register_module("ff", FeedForward(hidden, inner, dropout));
    modulation = register_module("modulation", torch::nn::Linear(hidden, 6 * hidden));
}

torch::Tensor AdaLNBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& c) {
    if (c.dim() != 2 || c.size(0) != x.size(0) || c.size(1) != x.size(2)) throw ShapeMismatch("condition must be [B, hidden]");
    auto mod = modulation(torch::silu(c)).chunk(6, 1);
    const auto &shift1 = mod[0], &scale1 = mod[1], &gate1 = mod[2];
    const auto &shift2 = mod[3], &scale2 = mod[4], &gate2 = mod[5];
    auto n = modulate(norm1(x), shift1, scale1);
    auto y = x + gate1.unsqueeze(1) * attn(n, n);
    return y + gate2.unsqueeze(1) * ff(modulate(norm2(y), shift2, scale2));
}

DenoiserImpl::DenoiserImpl(DenoiserConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const auto H = cfg_.hidden_dim;
    input = register_module("input", torch::nn::Linear(cfg_.latent_dim, H));
    segment_table = register_parameter("segment_table", torch::empty({3, H}));
    position_table = register_parameter("position_table", torch::empty({cfg_.latent_tokens, H}));
    time_table = register_module("time_table", torch::nn::Embedding(cfg_.T + 1, H));
    time_fc1 = register_module("time_fc1", torch::nn::Linear(H, H));
    time_fc2 = register_module("time_fc2", torch::nn::Linear(H, H));
    text_proj = register_module("text_proj", torch::nn::Linear(cfg_.text_dim, H));
    null_text = register_parameter("null_text", torch::empty({H}));
    blocks = register_module("blocks", torch::nn::ModuleList());
    for (int i = 0; i < cfg_.layers; ++i) blocks->push_back(AdaLNBlock(H, cfg_.heads, cfg_.ff_dim, cfg_.dropout));
    skip_proj = register_module("skip_proj", torch::nn::ModuleList());
    for (std::size_t k = 0; k < skip_pairs(cfg_.layers).size(); ++k) skip_proj->push_back(torch::nn::Linear(2 * H, H));
    final_norm = register_module("final_norm",
                                 torch::nn::LayerNorm(torch::nn::LayerNormOptions({H}).elementwise_affine(false).eps(1e-6)));
    output = register_module("output", torch::nn::Linear(H, cfg_.latent_dim));

    init_transformer_weights(*this);
    torch::NoGradGuard guard;
    trunc_normal_(segment_table, 0.02);
    trunc_normal_(position_table, 0.02);
    trunc_normal_(null_text, 0.02);
    time_table->weight.normal_(0.0, 1.0);
    for (auto& b : *blocks) zero_linear(b->as<AdaLNBlock>()->modulation);
    // Skip fusion starts as the average of the two streams.
    for (auto& m : *skip_proj) {
        auto* lin = m->as<torch::nn::Linear>();
        auto eye = torch::eye(H) * 0.5;
        lin->weight.copy_(torch::cat({eye, eye}, 1));
        lin->bias.zero_();
    }
    zero_linear(output);
}

torch::Tensor DenoiserImpl::timestep_embed(const torch::Tensor& t) {
    if (t.numel() > 0 && (t.min().item<int64_t>() < 1 || t.max().item<int64_t>() > cfg_.T)) {
        throw TimestepOutOfRange("timestep outside [1, " + std::to_string(cfg_.T) + "]");
    }
    return time_fc2(torch::silu(time_fc1(time_table(t.to(torch::kLong)))));
}

torch::Tensor DenoiserImpl::segment_positional_encode(const torch::Tensor& tokens, const torch::Tensor& segment_ids) {
    if (segment_ids.dim() != 1 || segment_ids.size(0) != tokens.size(1)) {
        throw ShapeMismatch("one segment id per token required");
    }
    auto ids = segment_ids.to(torch::kLong);
    if (ids.min().item<int64_t>() < 0 || ids.max().item<int64_t>() > 2) throw ShapeMismatch("segment id outside {0, 1, 2}");
    std::vector<int64_t> pos(static_cast<std::size_t>(ids.size(0)));
    std::array<int64_t, 3> seen{0, 0, 0};
    auto acc = ids.accessor<int64_t, 1>();
    for (int64_t i = 0; i < ids.size(0); ++i) {
        auto& n = seen[static_cast<std::size_t>(acc[i])];
        if (n >= cfg_.latent_tokens) throw ShapeMismatch("more than latent_tokens tokens in one segment");
        pos[static_cast<std::size_t>(i)] = n++;
    }
    auto pos_ids = torch::tensor(pos, torch::kLong);
    return tokens + segment_table.index_select(0, ids).unsqueeze(0) + position_table.index_select(0, pos_ids).unsqueeze(0);
}

torch::Tensor DenoiserImpl::text_embed(const Condition& c) {
    if (c.text.dim() != 2 || c.text.size(1) != cfg_.text_dim) throw ShapeMismatch("text embedding must be [B, text_dim]");
    auto projected = text_proj(c.text);
    auto mask = c.drop.to(torch::kBool).view({-1, 1});
    return torch::where(mask, null_text.unsqueeze(0).expand_as(projected), projected);
}

torch::Tensor DenoiserImpl::forward(const torch::Tensor& z_t, const torch::Tensor& t, const Condition& c,
                                    const torch::Tensor& segment_ids) {
    const int l = cfg_.latent_tokens;
    if (z_t.dim() != 3 || z_t.size(2) != cfg_.latent_dim) throw ShapeMismatch("denoiser input must be [B, S, latent_dim]");
    if (t.dim() != 1 || t.size(0) != z_t.size(0)) throw ShapeMismatch("t must be [B]");
    auto ids = segment_ids.defined() ? segment_ids : canonical_segments(l);
    auto h = segment_positional_encode(input(z_t), ids);
    auto cond = text_embed(c) + timestep_embed(t);

    const auto pairs = skip_pairs(cfg_.layers);
    std::vector<torch::Tensor> stored(pairs.size());
    for (int i = 0; i < cfg_.layers; ++i) {
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            if (pairs[k].second == i) h = skip_proj[k]->as<torch::nn::Linear>()->forward(torch::cat({h, stored[k]}, -1));
        }
        h = blocks[i]->as<AdaLNBlock>()->forward(h, cond);
        if (static_cast<std::size_t>(i) < pairs.size()) stored[static_cast<std::size_t>(i)] = h;
    }
    return output(final_norm(h));
}

}  // namespace duo::nn
