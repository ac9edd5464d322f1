#include "duo/nn/dhvae.h"

#include <cmath>

#include "duo/error.h"

namespace duo::nn {

void DHVAEConfig::validate() const {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw InvalidArgument(std::string("DHVAEConfig: ") + what);
    };
    need(feature_dim >= 1 && latent_dim >= 1 && hidden_dim >= 1 && ff_dim >= 1, "sizes must be positive");
    need(latent_tokens >= 1, "latent_tokens must be >= 1");
    need(heads >= 1 && hidden_dim % heads == 0, "hidden_dim must be divisible by heads");
    need(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
    need(enc_layers_individual >= 1 && cotransformer_layers >= 1, "encoder depths must be >= 1");
    need(interaction_decoder_layers >= 1 && person_decoder_layers >= 1, "decoder depths must be >= 1");
    need(max_frames >= 1, "max_frames must be >= 1");
    need(kl_weight >= 0.0 && joint_weight >= 0.0 && triplet_weight >= 0.0, "loss weights must be >= 0");
}

nlohmann::json DHVAEConfig::to_json() const {
    return {{"feature_dim", feature_dim},
            {"latent_dim", latent_dim},
            {"latent_tokens", latent_tokens},
            {"hidden_dim", hidden_dim},
            {"heads", heads},
            {"ff_dim", ff_dim},
            {"dropout", dropout},
            {"enc_layers_individual", enc_layers_individual},
            {"cotransformer_layers", cotransformer_layers},
            {"interaction_decoder_layers", interaction_decoder_layers},
            {"person_decoder_layers", person_decoder_layers},
            {"max_frames", max_frames},
            {"shared_branches", shared_branches},
            {"kl_weight", kl_weight},
            {"joint_weight", joint_weight},
            {"triplet_weight", triplet_weight}};
}

DHVAEConfig DHVAEConfig::from_json(const nlohmann::json& j, DHVAEConfig c) {
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("feature_dim", c.feature_dim);
    get("latent_dim", c.latent_dim);
    get("latent_tokens", c.latent_tokens);
    get("hidden_dim", c.hidden_dim);
    get("heads", c.heads);
    get("ff_dim", c.ff_dim);
    get("dropout", c.dropout);
    get("enc_layers_individual", c.enc_layers_individual);
    get("cotransformer_layers", c.cotransformer_layers);
    get("interaction_decoder_layers", c.interaction_decoder_layers);
    get("person_decoder_layers", c.person_decoder_layers);
    get("max_frames", c.max_frames);
    get("shared_branches", c.shared_branches);
    get("kl_weight", c.kl_weight);
    get("joint_weight", c.joint_weight);
    get("triplet_weight", c.triplet_weight);
    return c;
}

DHVAEConfig DHVAEConfig::ih262() { return DHVAEConfig{}; }

DHVAEConfig DHVAEConfig::ix56x6() {
    DHVAEConfig c;
    c.feature_dim = 336;
    c.latent_dim = 336;
    c.hidden_dim = 1344;
    c.ff_dim = 2688;
    return c;
}

DHVAEConfig DHVAEConfig::toy(int feature_dim) {
    DHVAEConfig c;
    c.feature_dim = feature_dim;
    c.latent_dim = 64;
    c.hidden_dim = 256;
    c.ff_dim = 512;
    c.enc_layers_individual = 2;
    c.cotransformer_layers = 1;
    c.interaction_decoder_layers = 1;
    c.person_decoder_layers = 2;
    c.max_frames = 64;
    return c;
}

namespace {

torch::Tensor clamp_logvar(const torch::Tensor& t) { return t.clamp(kLogVarMin, kLogVarMax); }

torch::Tensor learned_table(int64_t rows, int64_t cols) {
    auto t = torch::empty({rows, cols});
    trunc_normal_(t, 0.02);
    return t;
}

void check_input(const torch::Tensor& x, const DHVAEConfig& cfg) {
    if (x.dim() != 3 || x.size(2) != cfg.feature_dim) {
        throw ShapeMismatch("DHVAE input must be [B, N, " + std::to_string(cfg.feature_dim) + "]");
    }
    if (x.size(1) < 1 || x.size(1) > cfg.max_frames) {
        throw ShapeMismatch("DHVAE input has " + std::to_string(x.size(1)) + " frames, max_frames is " +
                            std::to_string(cfg.max_frames));
    }
}

}  // namespace

PersonEncoderImpl::PersonEncoderImpl(const DHVAEConfig& cfg) : l_(cfg.latent_tokens) {
    input = register_module("input", torch::nn::Linear(cfg.feature_dim, cfg.hidden_dim));
    layers = register_module("layers", torch::nn::ModuleList());
    for (int i = 0; i < cfg.enc_layers_individual; ++i)
        layers->push_back(EncoderLayer(cfg.hidden_dim, cfg.heads, cfg.ff_dim, cfg.dropout));
    head_mean = register_module("head_mean", torch::nn::Linear(cfg.hidden_dim, cfg.latent_dim));
    head_logvar = register_module("head_logvar", torch::nn::Linear(cfg.hidden_dim, cfg.latent_dim));
    pe_ = register_buffer("pe", sinusoidal_table(cfg.max_frames, cfg.hidden_dim));
}

IndividualEncoding PersonEncoderImpl::forward(const torch::Tensor& x, const torch::Tensor& tokens) {
    const auto B = x.size(0);
    const auto N = x.size(1);
    auto frames = input(x) + pe_.narrow(0, 0, N).unsqueeze(0);
    auto h = torch::cat({tokens.unsqueeze(0).expand({B, tokens.size(0), tokens.size(1)}), frames}, 1);
    for (auto& layer : *layers) h = layer->as<EncoderLayer>()->forward(h);
    IndividualEncoding enc;
    enc.posterior.mean = head_mean(h.narrow(1, 0, l_));
    enc.posterior.log_variance = clamp_logvar(head_logvar(h.narrow(1, l_, l_)));
    enc.temporal = h.narrow(1, 2 * l_, N);
    return enc;
}

CoLayerImpl::CoLayerImpl(const DHVAEConfig& cfg) {
    auto ln = [&] { return torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg.hidden_dim})); };
    attn_a = register_module("attn_a", MultiheadAttention(cfg.hidden_dim, cfg.heads, cfg.dropout));
    nq_a = register_module("nq_a", ln());
    nkv_a = register_module("nkv_a", ln());
    nf_a = register_module("nf_a", ln());
    ff_a = register_module("ff_a", FeedForward(cfg.hidden_dim, cfg.ff_dim, cfg.dropout));
    if (cfg.shared_branches) {
        attn_b = attn_a;
        nq_b = nq_a;
        nkv_b = nkv_a;
        nf_b = nf_a;
        ff_b = ff_a;
    } else {
        attn_b = register_module("attn_b", MultiheadAttention(cfg.hidden_dim, cfg.heads, cfg.dropout));
        nq_b = register_module("nq_b", ln());
        nkv_b = register_module("nkv_b", ln());
        nf_b = register_module("nf_b", ln());
        ff_b = register_module("ff_b", FeedForward(cfg.hidden_dim, cfg.ff_dim, cfg.dropout));
    }
}

torch::Tensor CoLayerImpl::branch(const torch::Tensor& self, const torch::Tensor& other, bool is_a) {
    auto& attn = is_a ? attn_a : attn_b;
    auto& nq = is_a ? nq_a : nq_b;
    auto& nkv = is_a ? nkv_a : nkv_b;
    auto& nf = is_a ? nf_a : nf_b;
    auto& ff = is_a ? ff_a : ff_b;
    auto y = self + attn(nq(self), nkv(other));
    return y + ff(nf(y));
}

std::pair<torch::Tensor, torch::Tensor> CoLayerImpl::forward(const torch::Tensor& a, const torch::Tensor& b) {
    return {branch(a, b, true), branch(b, a, false)};
}

CoTransformerImpl::CoTransformerImpl(const DHVAEConfig& cfg) : latent_dim_(cfg.latent_dim) {
    layers = register_module("layers", torch::nn::ModuleList());
    for (int i = 0; i < cfg.cotransformer_layers; ++i) layers->push_back(CoLayer(cfg));
    pool_a = register_module("pool_a", torch::nn::Linear(cfg.hidden_dim, cfg.hidden_dim));
    pool_b = cfg.shared_branches ? pool_a : register_module("pool_b", torch::nn::Linear(cfg.hidden_dim, cfg.hidden_dim));
    token = register_module("token",
                            torch::nn::Linear(torch::nn::LinearOptions(cfg.hidden_dim, cfg.hidden_dim).bias(false)));
    out = register_module("out", torch::nn::Linear(cfg.hidden_dim, 2 * cfg.latent_dim));
}

std::pair<torch::Tensor, torch::Tensor> CoTransformerImpl::branches(const torch::Tensor& emb_a,
                                                                    const torch::Tensor& emb_b) {
    if (emb_a.sizes() != emb_b.sizes()) throw ShapeMismatch("cotransformer branches differ in shape");
    auto a = emb_a;
    auto b = emb_b;
    for (auto& layer : *layers) std::tie(a, b) = layer->as<CoLayer>()->forward(a, b);
    return {a, b};
}

GaussianPosterior CoTransformerImpl::forward(const torch::Tensor& emb_a, const torch::Tensor& emb_b,
                                             const torch::Tensor& u_o) {
    auto [a, b] = branches(emb_a, emb_b);
    auto pooled = pool_a(a.mean(1)) + pool_b(b.mean(1));  // [B, H]
    auto h = torch::gelu(pooled.unsqueeze(1) + token(u_o).unsqueeze(0));  // [B, l, H]
    auto o = out(h);
    return {o.narrow(-1, 0, latent_dim_), clamp_logvar(o.narrow(-1, latent_dim_, latent_dim_))};
}

PersonDecoderImpl::PersonDecoderImpl(const DHVAEConfig& cfg) : l_(cfg.latent_tokens) {
    latent_in = register_module("latent_in", torch::nn::Linear(cfg.latent_dim, cfg.hidden_dim));
    layers = register_module("layers", torch::nn::ModuleList());
    for (int i = 0; i < cfg.person_decoder_layers; ++i)
        layers->push_back(DecoderLayer(cfg.hidden_dim, cfg.heads, cfg.ff_dim, cfg.dropout));
    final_norm = register_module("final_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg.hidden_dim})));
    output = register_module("output", torch::nn::Linear(cfg.hidden_dim, cfg.feature_dim));
    queries = register_parameter("queries", learned_table(cfg.max_frames, cfg.hidden_dim));
}

torch::Tensor PersonDecoderImpl::forward(const torch::Tensor& z, const torch::Tensor& memory, int64_t frames) {
    const auto B = z.size(0);
    auto q = queries.narrow(0, 0, frames).unsqueeze(0).expand({B, frames, queries.size(1)});
    auto h = torch::cat({latent_in(z), q}, 1);
    for (auto& layer : *layers) h = layer->as<DecoderLayer>()->forward(h, memory);
    return output(final_norm(h.narrow(1, l_, frames)));
}

DHVAEImpl::DHVAEImpl(DHVAEConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const auto l = cfg_.latent_tokens;
    const auto H = cfg_.hidden_dim;
    u_a = register_parameter("u_a", learned_table(2 * l, H));
    u_b = register_parameter("u_b", learned_table(2 * l, H));
    u_o = register_parameter("u_o", learned_table(l, H));

    encoder_a = register_module("encoder_a", PersonEncoder(cfg_));
    encoder_b = cfg_.shared_branches ? encoder_a : register_module("encoder_b", PersonEncoder(cfg_));
    cotransformer = register_module("cotransformer", CoTransformer(cfg_));

    memory_in = register_module("memory_in", torch::nn::Linear(cfg_.latent_dim, H));
    interaction_layers = register_module("interaction_layers", torch::nn::ModuleList());
    for (int i = 0; i < cfg_.interaction_decoder_layers; ++i)
        interaction_layers->push_back(DecoderLayer(H, cfg_.heads, cfg_.ff_dim, cfg_.dropout));
    interaction_queries = register_parameter("interaction_queries", learned_table(cfg_.max_frames, H));

    decoder_a = register_module("decoder_a", PersonDecoder(cfg_));
    decoder_b = cfg_.shared_branches ? decoder_a : register_module("decoder_b", PersonDecoder(cfg_));

    init_transformer_weights(*this);
    zero_linear(cotransformer->out);
}

IndividualEncoding DHVAEImpl::encode_individual(const torch::Tensor& x, Person who) {
    check_input(x, cfg_);
    return who == Person::kA ? encoder_a(x, u_a) : encoder_b(x, u_b);
}

GaussianPosterior DHVAEImpl::fuse(const torch::Tensor& emb_a, const torch::Tensor& emb_b) {
    return cotransformer(emb_a, emb_b, u_o);
}

LatentTriple DHVAEImpl::encode(const torch::Tensor& x_a, const torch::Tensor& x_b) {
    if (x_a.sizes() != x_b.sizes()) throw ShapeMismatch("persons differ in shape");
    auto ea = encode_individual(x_a, Person::kA);
    auto eb = encode_individual(x_b, Person::kB);
    LatentTriple t;
    t.q_a = ea.posterior;
    t.q_b = eb.posterior;
    t.q_o = fuse(ea.temporal, eb.temporal);
    t.emb_a = ea.temporal;
    t.emb_b = eb.temporal;
    t.z_o = t.q_o.mean;
    t.z_a = t.q_a.mean;
    t.z_b = t.q_b.mean;
    return t;
}

torch::Tensor DHVAEImpl::interaction_memory(const torch::Tensor& z_o, int64_t frames) {
    if (frames < 1 || frames > cfg_.max_frames) throw ShapeMismatch("decode frame count out of range");
    const auto B = z_o.size(0);
    auto ctx = memory_in(z_o);
    auto h = interaction_queries.narrow(0, 0, frames).unsqueeze(0).expand({B, frames, interaction_queries.size(1)});
    for (auto& layer : *interaction_layers) h = layer->as<DecoderLayer>()->forward(h, ctx);
    return h;
}

std::pair<torch::Tensor, torch::Tensor> DHVAEImpl::decode(const torch::Tensor& z_o, const torch::Tensor& z_a,
                                                          const torch::Tensor& z_b, int64_t frames) {
    const auto expect = std::vector<int64_t>{z_o.size(0), cfg_.latent_tokens, cfg_.latent_dim};
    for (const auto* z : {&z_o, &z_a, &z_b}) {
        if (z->sizes() != c10::IntArrayRef(expect)) throw ShapeMismatch("latent must be [B, l, latent_dim]");
    }
    auto memory = interaction_memory(z_o, frames);
    return {decoder_a(z_a, memory, frames), decoder_b(z_b, memory, frames)};
}

DHVAEOutput DHVAEImpl::forward(const torch::Tensor& x_a, const torch::Tensor& x_b, bool sample) {
    DHVAEOutput out;
    out.latents = encode(x_a, x_b);
    auto& t = out.latents;
    if (sample) {
        t.z_o = reparameterize(t.q_o);
        t.z_a = reparameterize(t.q_a);
        t.z_b = reparameterize(t.q_b);
    }
    std::tie(out.recon_a, out.recon_b) = decode(t.z_o, t.z_a, t.z_b, x_a.size(1));
    return out;
}

torch::Tensor reparameterize(const GaussianPosterior& p, std::optional<at::Generator> generator) {
    auto eps = torch::randn(p.mean.sizes(), generator, p.mean.options());
    return p.mean + torch::exp(0.5 * p.log_variance) * eps;
}

torch::Tensor reparameterize(const GaussianPosterior& p, std::uint64_t seed) {
    return reparameterize(p, at::make_generator<at::CPUGeneratorImpl>(seed));
}

torch::Tensor kl_diag_gaussian(const GaussianPosterior& p) {
    auto per = 0.5 * (p.mean.square() + p.log_variance.exp() - 1.0 - p.log_variance);
    return per.flatten(1).sum(1).mean();
}

ElboTerms elbo_loss(const torch::Tensor& x_a, const torch::Tensor& x_b, const DHVAEOutput& out, double kl_weight) {
    ElboTerms e;
    e.recon_a = torch::mse_loss(out.recon_a, x_a);
    e.recon_b = torch::mse_loss(out.recon_b, x_b);
    e.kl_a = kl_diag_gaussian(out.latents.q_a);
    e.kl_b = kl_diag_gaussian(out.latents.q_b);
    e.kl_o = kl_diag_gaussian(out.latents.q_o);
    e.total = e.recon_a + e.recon_b + kl_weight * (e.kl_a + e.kl_b + e.kl_o);
    return e;
}

DHVAELoss dhvae_total_loss(const ElboTerms& elbo, const torch::Tensor& joint_term, const torch::Tensor& triplet_term,
                           const DHVAEConfig& cfg) {
    DHVAELoss l;
    l.elbo = elbo;
    l.joint = joint_term;
    l.triplet = triplet_term;
    l.total = elbo.total + cfg.joint_weight * joint_term + cfg.triplet_weight * triplet_term;
    return l;
}

torch::Tensor joint_l1(const torch::Tensor& joints_a, const torch::Tensor& recon_joints_a,
                       const torch::Tensor& joints_b, const torch::Tensor& recon_joints_b) {
    return torch::l1_loss(recon_joints_a, joints_a) + torch::l1_loss(recon_joints_b, joints_b);
}

}  // namespace duo::nn
