#include "tta/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tta/errors.hpp"
#include "tta/ops.hpp"

namespace tta {

LevelSpec ModelConfig::level(int l) const {
    if (attention.empty()) return LevelSpec{};
    return attention.at(static_cast<std::size_t>(l - 1));
}

void validate(const ModelConfig& cfg) {
    std::vector<std::string> bad;
    if (cfg.levels < 1) bad.push_back("levels must be >= 1");
    if (cfg.base_channels < 1) bad.push_back("base_channels must be >= 1");
    if (cfg.input_size < 1) bad.push_back("input_size must be >= 1");
    const bool dims_ok = cfg.levels >= 1 && cfg.input_size >= 1;
    if (dims_ok && cfg.input_size % (1 << cfg.levels) != 0)
        bad.push_back("input_size " + std::to_string(cfg.input_size) +
                      " not divisible by 2^levels = " + std::to_string(1 << cfg.levels));
    if (cfg.dilations.empty()) bad.push_back("dilations must not be empty");
    for (int d : cfg.dilations)
        if (d < 1) bad.push_back("dilation rates must be >= 1");
    if (dims_ok && !cfg.dilations.empty()) {
        const int bottleneck = cfg.input_size >> cfg.levels;
        const int dmin = *std::min_element(cfg.dilations.begin(), cfg.dilations.end());
        const int span = 2 * dmin + 1;  // smallest dilated 3x3 kernel span
        if (dmin >= 1 && bottleneck < span)
            bad.push_back("bottleneck size " + std::to_string(bottleneck) +
                          " smaller than the smallest dilated kernel span " +
                          std::to_string(span));
    }
    if (!cfg.attention.empty() &&
        static_cast<int>(cfg.attention.size()) != cfg.levels)
        bad.push_back("attention specs must cover every level (got " +
                      std::to_string(cfg.attention.size()) + " for " +
                      std::to_string(cfg.levels) + " levels)");
    if (cfg.attention_kind == AttentionKind::WeightedSum && cfg.weighted_temperature <= 0.0f)
        bad.push_back("weighted_temperature must be > 0");
    if (dims_ok) {
        const int specs = cfg.attention.empty() ? 0 : static_cast<int>(cfg.attention.size());
        for (int l = 1; l <= cfg.levels; ++l) {
            const LevelSpec spec = l <= specs ? cfg.attention[l - 1] : LevelSpec{};
            if (!spec.attention) continue;
            try {
                validate(spec.config);
            } catch (const ConfigError& e) {
                bad.push_back("level " + std::to_string(l) + ": " + e.what());
                continue;
            }
            const int size = cfg.input_size >> l;
            if (size < 1 || size % spec.config.downsample != 0)
                bad.push_back("level " + std::to_string(l) + ": feature size " +
                              std::to_string(size) +
                              " not divisible by attention downsample " +
                              std::to_string(spec.config.downsample));
        }
    }
    if (!bad.empty()) {
        std::string msg = "model config invalid: " + bad.front();
        for (std::size_t i = 1; i < bad.size(); ++i) msg += "; " + bad[i];
        throw ConfigError(msg);
    }
}

// Fan-in scaled normal for the two plain convs (gain 1: both feed a residual
// add or a tanh, where inflating variance only hurts).
static Tensor plain_conv_init(Shape shape, Rng& rng) {
    const float fan_in = static_cast<float>(shape[1] * shape[2] * shape[3]);
    return randn(std::move(shape), rng, 1.0f / std::sqrt(fan_in));
}

Model build(const ModelConfig& cfg) {
    validate(cfg);
    Model m;
    Generator& g = m.generator;
    g.cfg = cfg;
    Rng rng(cfg.seed);
    const int base = cfg.base_channels;

    g.stem = make_gated_conv(4, base, 5, 1, 2, 1, Activation::ELU, rng);
    for (int l = 1; l <= cfg.levels; ++l)
        g.encoder.push_back(
            make_gated_conv(base << (l - 1), base << l, 3, 2, 1, 1, Activation::ELU, rng));
    g.bottleneck = make_dilated_block(base << cfg.levels, cfg.dilations, rng);
    for (int l = 1; l <= cfg.levels; ++l) {
        const int c = base << l;
        g.synth_weight.push_back(plain_conv_init({c, 2 * c, 3, 3}, rng));
        g.synth_bias.push_back(Tensor({c}));
    }
    for (int l = 1; l <= cfg.levels; ++l)
        g.decoder.push_back(
            make_gated_conv(base << l, base << (l - 1), 3, 1, 1, 1, Activation::ELU, rng));
    g.out_weight = plain_conv_init({3, base, 3, 3}, rng);
    g.out_bias = Tensor({3});

    Rng drng(mix_seed(cfg.seed, 0xD15Cu));
    m.discriminator = make_patch_discriminator(4, drng);
    return m;
}

static void push_gated(std::vector<ParamRef>& out, const std::string& prefix,
                       GatedConvLayer& l) {
    out.push_back({prefix + "/feature/weight", &l.feature_weight});
    out.push_back({prefix + "/feature/bias", &l.feature_bias});
    out.push_back({prefix + "/gate/weight", &l.gate_weight});
    out.push_back({prefix + "/gate/bias", &l.gate_bias});
}

std::vector<ParamRef> generator_params(Generator& g) {
    std::vector<ParamRef> out;
    push_gated(out, "generator/stem", g.stem);
    for (std::size_t i = 0; i < g.encoder.size(); ++i)
        push_gated(out, "generator/enc" + std::to_string(i + 1), g.encoder[i]);
    for (std::size_t i = 0; i < g.bottleneck.size(); ++i)
        push_gated(out, "generator/dilated" + std::to_string(i + 1), g.bottleneck[i]);
    for (std::size_t i = 0; i < g.synth_weight.size(); ++i) {
        out.push_back({"generator/synth" + std::to_string(i + 1) + "/fusion/weight",
                       &g.synth_weight[i]});
        out.push_back(
            {"generator/synth" + std::to_string(i + 1) + "/fusion/bias", &g.synth_bias[i]});
    }
    for (std::size_t i = 0; i < g.decoder.size(); ++i)
        push_gated(out, "generator/dec" + std::to_string(i + 1), g.decoder[i]);
    out.push_back({"generator/out/conv/weight", &g.out_weight});
    out.push_back({"generator/out/conv/bias", &g.out_bias});
    return out;
}

std::vector<ParamRef> discriminator_params(Discriminator& d) {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < d.size(); ++i) {
        out.push_back({"discriminator/conv" + std::to_string(i + 1) + "/weight", &d[i].weight});
        out.push_back({"discriminator/conv" + std::to_string(i + 1) + "/bias", &d[i].bias});
    }
    return out;
}

std::int64_t param_count(const std::vector<ParamRef>& refs) {
    std::int64_t n = 0;
    for (const ParamRef& r : refs) n += r.tensor->numel();
    return n;
}

Tensor downsample_valid(const Tensor& m, int factor) {
    if (m.ndim() != 4 || m.dim(1) != 1)
        throw DimError("downsample_valid: mask must be [N,1,H,W]");
    if (factor < 1 || m.dim(2) % factor != 0 || m.dim(3) % factor != 0)
        throw DimError("downsample_valid: mask size must be divisible by the factor");
    const int n = m.dim(0), h = m.dim(2) / factor, w = m.dim(3) / factor;
    Tensor out({n, 1, h, w});
    const float* src = m.data();
    float* dst = out.mutable_data();
    for (int b = 0; b < n; ++b)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                bool known = true;
                for (int dy = 0; dy < factor && known; ++dy)
                    for (int dx = 0; dx < factor && known; ++dx)
                        known = src[(b * m.dim(2) + y * factor + dy) * m.dim(3) + x * factor +
                                    dx] == 0.0f;
                dst[(b * h + y) * w + x] = known ? 1.0f : 0.0f;
            }
    return out;
}

ForwardResult forward(const Generator& g, const Tensor& z, const Tensor& m) {
    const ModelConfig& cfg = g.cfg;
    const int s = cfg.input_size;
    if (z.ndim() != 4 || z.dim(1) != 3 || z.dim(2) != s || z.dim(3) != s)
        throw DimError("forward: z must be [N,3," + std::to_string(s) + "," +
                       std::to_string(s) + "]");
    if (m.ndim() != 4 || m.dim(0) != z.dim(0) || m.dim(1) != 1 || m.dim(2) != s ||
        m.dim(3) != s)
        throw DimError("forward: mask must be [N,1,H,W] matching z");
    const float* md = m.data();
    const float* zd = z.data();
    const int batch = z.dim(0);
    for (std::int64_t i = 0; i < m.numel(); ++i)
        if (md[i] != 0.0f && md[i] != 1.0f)
            throw ContractError("forward: mask must be binary");
    for (int b = 0; b < batch; ++b)
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) {
                if (md[(b * s + y) * s + x] == 0.0f) continue;
                for (int c = 0; c < 3; ++c)
                    if (zd[((b * 3 + c) * s + y) * s + x] != 0.0f)
                        throw ContractError("forward: z must be zero inside the hole");
            }

    ForwardResult res;
    res.used_fallback.assign(static_cast<std::size_t>(cfg.levels), false);

    Tensor x = gated_conv(g.stem, concat_channels(z, m));
    std::vector<Tensor> skip;
    for (int l = 1; l <= cfg.levels; ++l) {
        x = gated_conv(g.encoder[static_cast<std::size_t>(l - 1)], x);
        skip.push_back(x);
    }
    x = dilated_block(x, g.bottleneck);
    for (int l = cfg.levels; l >= 1; --l) {
        const LevelSpec spec = cfg.level(l);
        if (spec.attention) {
            const Tensor valid = downsample_valid(m, 1 << l);
            const Tensor& p = skip[static_cast<std::size_t>(l - 1)];
            AttentionResult att = texture_attention(x, p, valid, spec.config);
            res.used_fallback[static_cast<std::size_t>(l - 1)] = att.used_fallback;
            Tensor t = cfg.attention_kind == AttentionKind::ArgmaxSwap
                           ? att.texture_map
                           : weighted_sum_attention(x, p, valid, spec.config,
                                                    cfg.weighted_temperature);
            x = synthesize(x, t, att.ratio_map, g.synth_weight[static_cast<std::size_t>(l - 1)],
                           g.synth_bias[static_cast<std::size_t>(l - 1)], cfg.synthesis);
        }
        x = nearest_upsample(x, 2);
        x = gated_conv(g.decoder[static_cast<std::size_t>(l - 1)], x);
    }
    res.pred = tanh_act(conv2d(x, g.out_weight, g.out_bias, Conv2dSpec{1, 1, 1}));
    res.comp = add(mul_cbroadcast(res.pred, m), z);
    return res;
}

}  // namespace tta
