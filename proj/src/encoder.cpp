#include "fluxlab/encoder.hpp"

#include <cmath>
#include <random>

#include "fluxlab/error.hpp"
#include "fluxlab/ops.hpp"

namespace fluxlab {

void EncoderConfig::validate() const {
    if (patch_size == 0 || e == 0 || heads == 0 || w_t == 0) throw ConfigError("encoder: sizes must be positive");
    if (e % heads != 0) {
        throw ConfigError("encoder: token dim " + std::to_string(e) + " not divisible by " + std::to_string(heads) +
                          " heads");
    }
}

namespace {

constexpr double kGateExponent = 8.0; // c_r

Tensor ones(std::size_t n) { return Tensor::full({n}, 1.0, true); }
Tensor zeros(std::size_t n) { return Tensor::zeros({n}, true); }

/// x [.., in] @ w [in, out] + b [out]
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) { return add(matmul(x, w), b); }

} // namespace

ContextEncoder::ContextEncoder(const EncoderConfig& config, std::size_t n_x, std::size_t d, std::uint64_t seed)
    : config_(config), n_x_(n_x), d_(d) {
    config_.validate();
    if (d == 0) throw ConfigError("encoder: channel count must be positive");
    if (n_x % config_.patch_size != 0) {
        throw ConfigError("encoder: N_x = " + std::to_string(n_x) + " not divisible by patch size " +
                          std::to_string(config_.patch_size));
    }
    std::mt19937_64 rng(seed);
    const std::size_t e = config_.e;
    const std::size_t in = config_.patch_size * d + (config_.coord_channel ? 1 : 0);
    const double se = 1.0 / std::sqrt(static_cast<double>(e));

    w_patch_ = params_.add("patch.w", normal_param({in, e}, 1.0 / std::sqrt(static_cast<double>(in)), rng));
    b_patch_ = params_.add("patch.b", zeros(e));
    pos_ = params_.add("pos", normal_param({tokens(), e}, 0.02, rng));

    std::uniform_real_distribution<double> decay(0.9, 0.999);
    for (std::size_t l = 0; l < config_.layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        Layer L;
        L.ln_t_gain = params_.add(p + "temporal.norm.gain", ones(e));
        L.ln_t_bias = params_.add(p + "temporal.norm.bias", zeros(e));
        L.conv = params_.add(p + "temporal.conv", normal_param({e, config_.w_t}, 1.0 / std::sqrt(double(config_.w_t)), rng));
        L.w_a = params_.add(p + "temporal.w_a", normal_param({e, e}, se, rng));
        L.b_a = params_.add(p + "temporal.b_a", zeros(e));
        L.w_x = params_.add(p + "temporal.w_x", normal_param({e, e}, se, rng));
        L.b_x = params_.add(p + "temporal.b_x", zeros(e));
        std::vector<double> lam(e);
        for (double& v : lam) {
            const double s = decay(rng);
            v = std::log(s / (1.0 - s));
        }
        L.lambda = params_.add(p + "temporal.lambda", Tensor::from_data({e}, std::move(lam)));
        L.w_o = params_.add(p + "temporal.w_o", normal_param({e, e}, se, rng));
        L.b_o = params_.add(p + "temporal.b_o", zeros(e));

        L.ln_a_gain = params_.add(p + "spatial.attn_norm.gain", ones(e));
        L.ln_a_bias = params_.add(p + "spatial.attn_norm.bias", zeros(e));
        L.wq = params_.add(p + "spatial.wq", normal_param({e, e}, se, rng));
        L.wk = params_.add(p + "spatial.wk", normal_param({e, e}, se, rng));
        L.wv = params_.add(p + "spatial.wv", normal_param({e, e}, se, rng));
        L.wo = params_.add(p + "spatial.wo", normal_param({e, e}, se, rng));
        L.bo = params_.add(p + "spatial.bo", zeros(e));
        L.ln_m_gain = params_.add(p + "spatial.mlp_norm.gain", ones(e));
        L.ln_m_bias = params_.add(p + "spatial.mlp_norm.bias", zeros(e));
        L.w1 = params_.add(p + "spatial.w1", normal_param({e, 4 * e}, se, rng));
        L.b1 = params_.add(p + "spatial.b1", zeros(4 * e));
        L.w2 = params_.add(p + "spatial.w2", normal_param({4 * e, e}, 0.5 * se, rng));
        L.b2 = params_.add(p + "spatial.b2", zeros(e));
        layers_.push_back(std::move(L));
    }
    ln_f_gain_ = params_.add("final_norm.gain", ones(e));
    ln_f_bias_ = params_.add("final_norm.bias", zeros(e));
}

Tensor ContextEncoder::patch_embed(const Tensor& context) const {
    const Shape& s = context.shape();
    if (s.size() != 4 || s[2] != n_x_ || s[3] != d_) {
        throw ShapeError("encoder: expected context [B, k, " + std::to_string(n_x_) + ", " + std::to_string(d_) +
                         "], got " + to_string(s));
    }
    const std::size_t b = s[0], k = s[1], p = tokens(), ps = config_.patch_size;
    Tensor patches = reshape(context, {b, k, p, ps * d_});
    if (config_.coord_channel) {
        // patch-centre coordinate on the unit interval
        std::vector<double> coord(b * k * p);
        for (std::size_t j = 0; j < coord.size(); ++j) {
            coord[j] = (static_cast<double>(j % p) + 0.5) / static_cast<double>(p);
        }
        patches = concat({patches, Tensor::from_data({b, k, p, 1}, std::move(coord))}, -1);
    }
    return add(affine(patches, w_patch_, b_patch_), pos_);
}

Tensor ContextEncoder::temporal_block(std::size_t layer, const Tensor& v) const {
    const Layer& L = layers_.at(layer);
    Tensor x = layer_norm(v, L.ln_t_gain, L.ln_t_bias);
    x = causal_depthwise_conv1d(x, L.conv, 1);
    const Tensor r = sigmoid(affine(x, L.w_a, L.b_a));
    const Tensor in = sigmoid(affine(x, L.w_x, L.b_x));
    // a = sigmoid(lambda)^(c_r r), computed in log space
    const Tensor a = exp(mul(scale(r, kGateExponent), log(sigmoid(L.lambda))));
    const Tensor drive = mul(sqrt(add_scalar(neg(square(a)), 1.0)), mul(in, x));
    const Tensor h = linear_recurrence(a, drive, 1);
    return add(v, affine(h, L.w_o, L.b_o));
}

Tensor ContextEncoder::spatial_block(std::size_t layer, const Tensor& v) const {
    const Layer& L = layers_.at(layer);
    const Shape& s = v.shape();
    const std::size_t rank = s.size();
    const std::size_t p = s[rank - 2], e = config_.e, h = config_.heads, eh = e / h;

    Shape split(s.begin(), s.end() - 1);
    split.push_back(h);
    split.push_back(eh);
    // [.., P, h, eh] <-> [.., h, P, eh]
    std::vector<std::size_t> axes(rank + 1);
    for (std::size_t i = 0; i < rank + 1; ++i) axes[i] = i;
    std::swap(axes[rank - 2], axes[rank - 1]);
    auto heads = [&](const Tensor& t) { return permute(reshape(t, split), axes); };

    const Tensor x = layer_norm(v, L.ln_a_gain, L.ln_a_bias);
    Tensor att = softmax_attention(heads(matmul(x, L.wq)), heads(matmul(x, L.wk)), heads(matmul(x, L.wv)));
    att = reshape(permute(att, axes), s);
    (void)p;
    const Tensor v1 = add(v, affine(att, L.wo, L.bo));
    const Tensor y = layer_norm(v1, L.ln_m_gain, L.ln_m_bias);
    return add(v1, affine(gelu(affine(y, L.w1, L.b1)), L.w2, L.b2));
}

Tensor ContextEncoder::run(const Tensor& context, std::vector<Tensor>* states) const {
    Tensor v = patch_embed(context);
    const std::size_t k = context.size(1);
    if (states) states->push_back(v);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const bool last = l + 1 == layers_.size();
        if (last && !states) {
            // only the final time step of the last layer reaches the output
            const Layer& Lr = layers_[l];
            Tensor x = layer_norm(v, Lr.ln_t_gain, Lr.ln_t_bias);
            x = causal_depthwise_conv1d(x, Lr.conv, 1);
            const Tensor r = sigmoid(affine(x, Lr.w_a, Lr.b_a));
            const Tensor in = sigmoid(affine(x, Lr.w_x, Lr.b_x));
            const Tensor a = exp(mul(scale(r, kGateExponent), log(sigmoid(Lr.lambda))));
            const Tensor drive = mul(sqrt(add_scalar(neg(square(a)), 1.0)), mul(in, x));
            const Tensor h_last = select(linear_recurrence(a, drive, 1), 1, k - 1);
            const Tensor v_last = add(select(v, 1, k - 1), affine(h_last, Lr.w_o, Lr.b_o));
            return spatial_block(l, v_last);
        }
        v = spatial_block(l, temporal_block(l, v));
        if (states) states->push_back(v);
    }
    return select(v, 1, k - 1);
}

Tensor ContextEncoder::encode(const Tensor& context) const {
    if (context.dim() == 3) {
        const Shape& s = context.shape();
        return reshape(encode(reshape(context, {1, s[0], s[1], s[2]})), {config_.e});
    }
    if (context.dim() != 4 || context.size(1) == 0) throw ShapeError("encoder: need k >= 1 context snapshots");
    const Tensor final_tokens = run(context, nullptr); // [B, P, e]
    return mean(layer_norm(final_tokens, ln_f_gain_, ln_f_bias_), -2);
}

std::vector<Tensor> ContextEncoder::trace(const Tensor& context) const {
    std::vector<Tensor> states;
    run(context, &states);
    return states;
}

} // namespace fluxlab
